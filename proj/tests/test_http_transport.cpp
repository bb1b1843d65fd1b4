#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "selfreg/http_transport.hpp"

using namespace selfreg;

namespace {

class LocalServer {
public:
    LocalServer() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            last_body = req.body;
            last_auth = req.get_header_value("Authorization");
            res.status = status.load();
            res.set_content(reply, "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

    std::atomic<int> status{200};
    std::string reply = R"({"choices":[{"message":{"role":"assistant","content":"Yes"}}]})";
    std::string last_body;
    std::string last_auth;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

ChatRequest request() { return {"m", {{"system", "sys"}, {"user", "hi"}}, 0.0, 16}; }

bool retryable_failure(HttpChatTransport& t) {
    try {
        t.send(request());
    } catch (const TransportError& e) {
        return e.retryable();
    }
    ADD_FAILURE() << "expected a TransportError";
    return false;
}

} // namespace

TEST(ParseUrl, SplitsOriginAndPath) {
    auto u = parse_url("https://api.example.com:8443/v1/chat/completions");
    EXPECT_EQ(u.origin, "https://api.example.com:8443");
    EXPECT_EQ(u.path, "/v1/chat/completions");
    EXPECT_EQ(parse_url("http://localhost").path, "/");
    EXPECT_THROW(parse_url("localhost/v1"), InvalidArgument);
    EXPECT_THROW(parse_url("ftp://x/y"), InvalidArgument);
}

TEST(HttpTransport, PostsChatRequestAndReadsContent) {
    LocalServer srv;
    HttpChatTransport t(srv.url(), "secret-key", std::chrono::seconds(5));
    auto r = t.send(request());
    EXPECT_EQ(r.content, "Yes");
    EXPECT_EQ(r.raw, srv.reply);
    auto body = nlohmann::json::parse(srv.last_body);
    EXPECT_EQ(body["model"], "m");
    EXPECT_EQ(body["messages"][1]["content"], "hi");
    EXPECT_EQ(body["max_tokens"], 16);
    EXPECT_EQ(srv.last_auth, "Bearer secret-key");
}

TEST(HttpTransport, ClassifiesFailures) {
    LocalServer srv;
    HttpChatTransport t(srv.url(), "", std::chrono::seconds(5));
    srv.status = 429;
    EXPECT_TRUE(retryable_failure(t));
    srv.status = 503;
    EXPECT_TRUE(retryable_failure(t));
    srv.status = 400;
    EXPECT_FALSE(retryable_failure(t));
    srv.status = 200;
    srv.reply = R"({"unexpected": true})";
    try {
        t.send(request());
        FAIL();
    } catch (const JudgeError& e) {
        EXPECT_EQ(e.kind(), JudgeError::Kind::malformed);
    }
}

TEST(HttpTransport, ConnectionFailureIsRetryable) {
    int port;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    HttpChatTransport t("http://127.0.0.1:" + std::to_string(port) + "/v1", "", std::chrono::seconds(2));
    EXPECT_TRUE(retryable_failure(t));
}

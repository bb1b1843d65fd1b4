#pragma once

#include <chrono>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "selfreg/judge.hpp"

namespace selfreg {

/// Name of the environment variable holding the judge API credential.
inline constexpr const char* kJudgeApiKeyEnv = "SELFREG_JUDGE_API_KEY";

struct ParsedUrl {
    std::string origin; // scheme://host[:port]
    std::string path;   // starts with '/'
};

inline ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw InvalidArgument("endpoint URL needs a scheme: " + url);
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw InvalidArgument("unsupported URL scheme: " + scheme);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

/// POSTs chat-completion requests as JSON:
///   {"model", "messages": [{"role", "content"}], "temperature", "max_tokens"}
/// and reads choices[0].message.content from the response.
class HttpChatTransport final : public ChatTransport {
public:
    HttpChatTransport(const std::string& endpoint_url, std::string api_key,
                      std::chrono::seconds timeout = std::chrono::seconds(120))
        : url_(parse_url(endpoint_url)), api_key_(std::move(api_key)), timeout_(timeout) {}

    ChatResponse send(const ChatRequest& request) override {
        httplib::Client client(url_.origin);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        const auto body = to_json(request).dump();
        auto res = client.Post(url_.path, headers, body, "application/json");
        if (!res) throw TransportError("HTTP request failed: " + httplib::to_string(res.error()), true);
        if (res->status == 429 || res->status >= 500)
            throw TransportError("HTTP status " + std::to_string(res->status), true);
        if (res->status < 200 || res->status >= 300)
            throw TransportError("HTTP status " + std::to_string(res->status) + ": " + res->body, false);
        try {
            auto j = nlohmann::json::parse(res->body);
            return {j.at("choices").at(0).at("message").at("content").get<std::string>(), res->body};
        } catch (const nlohmann::json::exception& e) {
            throw JudgeError(JudgeError::Kind::malformed, std::string("not a chat-completion response: ") + e.what());
        }
    }

private:
    ParsedUrl url_;
    std::string api_key_;
    std::chrono::seconds timeout_;
};

} // namespace selfreg

#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfreg/binary_io.hpp"
#include "selfreg/digest.hpp"
#include "selfreg/error.hpp"
#include "selfreg/interpret.hpp"
#include "selfreg/judge_prompts.hpp"

namespace selfreg {

// ---------------------------------------------------------------------------
// Relevance levels

/// Ordered so that `<` means "less relevant".
enum class RelevanceLevel : int { No = 0, Maybe = 1, Probably = 2, Yes = 3 };

inline std::string_view to_string(RelevanceLevel r) noexcept {
    switch (r) {
    case RelevanceLevel::No: return "no";
    case RelevanceLevel::Maybe: return "maybe";
    case RelevanceLevel::Probably: return "probably";
    case RelevanceLevel::Yes: return "yes";
    }
    return "no";
}

namespace detail {
inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

inline std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

/// Trims whitespace, surrounding quotes/asterisks and a trailing period.
inline std::string_view strip_decoration(std::string_view s) {
    s = trim(s);
    const auto deco = [](char c) { return c == '"' || c == '\'' || c == '*' || c == '`'; };
    while (!s.empty() && deco(s.front())) s.remove_prefix(1);
    while (!s.empty() && (deco(s.back()) || s.back() == '.' || s.back() == '!')) s.remove_suffix(1);
    return trim(s);
}
} // namespace detail

inline std::optional<RelevanceLevel> parse_relevance(std::string_view text) {
    auto s = detail::lower(detail::strip_decoration(text));
    if (s.rfind("relevance:", 0) == 0) s = detail::lower(detail::strip_decoration(std::string_view(s).substr(10)));
    if (s == "yes") return RelevanceLevel::Yes;
    if (s == "probably") return RelevanceLevel::Probably;
    if (s == "maybe") return RelevanceLevel::Maybe;
    if (s == "no") return RelevanceLevel::No;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Verdicts and the unintended set

inline constexpr std::string_view kCannotTell = "CANNOT_TELL";

struct JudgeVerdict {
    std::uint32_t feature_id = 0;
    std::optional<std::string> summary;    // nullopt: the annotator could not tell
    bool verified = false;
    std::optional<RelevanceLevel> relevance; // only for verified summaries
    std::vector<std::string> transcript_ids;

    void validate() const {
        if (relevance && (!summary || !verified))
            throw InvalidArgument("verdict " + std::to_string(feature_id) +
                                  ": relevance requires a verified summary");
    }

    friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

struct UnintendedSet {
    std::vector<std::uint32_t> feature_ids; // sorted, unique
    RelevanceLevel threshold = RelevanceLevel::Yes;
    std::string rubric_digest;              // hex SHA-256 of the rubric text

    bool contains(std::uint32_t id) const {
        return std::binary_search(feature_ids.begin(), feature_ids.end(), id);
    }

    friend bool operator==(const UnintendedSet&, const UnintendedSet&) = default;
};

/// A feature is unintended when it has a verified, meaningful summary whose
/// relevance falls below `threshold`. "Cannot tell" and unverified features
/// are never unintended.
inline UnintendedSet identify_unintended(const std::vector<JudgeVerdict>& verdicts,
                                         RelevanceLevel threshold = RelevanceLevel::Yes,
                                         std::string rubric_digest = {}) {
    std::set<std::uint32_t> seen;
    UnintendedSet out{{}, threshold, std::move(rubric_digest)};
    for (const auto& v : verdicts) {
        if (!seen.insert(v.feature_id).second)
            throw InvalidArgument("duplicate verdict for feature " + std::to_string(v.feature_id));
        if (v.summary && v.verified && v.relevance && *v.relevance < threshold) out.feature_ids.push_back(v.feature_id);
    }
    std::sort(out.feature_ids.begin(), out.feature_ids.end());
    return out;
}

// ---------------------------------------------------------------------------
// Client interface

/// A judge answer plus the transcripts of the calls that produced it.
template <typename T>
struct Judged {
    T value;
    std::vector<std::string> transcript_ids;
};

class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    /// nullopt means the annotator found no meaningful pattern.
    virtual Judged<std::optional<std::string>> summarize(const FeatureExplanation& e) = 0;
    /// Independent check of `summary` against the spans, without prior context.
    virtual Judged<bool> verify(const FeatureExplanation& e, const std::string& summary) = 0;
    virtual Judged<RelevanceLevel> rate_relevance(std::uint32_t feature_id, const std::string& summary,
                                                  const std::string& rubric) = 0;
};

// ---------------------------------------------------------------------------
// Offline stub

struct StubRule {
    std::string keyword;
    std::string summary;
    RelevanceLevel relevance = RelevanceLevel::Maybe;
};

/// Deterministic offline judge driven by a keyword table.
///  - summarize: the rule whose keyword occurs (case-insensitively) in the most
///    spans wins, ties going to the earlier rule; it must cover at least
///    `min_share` of the spans, otherwise the answer is "cannot tell".
///  - verify: true iff summarize() on the same spans reproduces the summary.
///  - rate_relevance: the first rule whose summary or keyword occurs in the
///    summary decides; no match rates Maybe.
class StubJudgeClient final : public JudgeClient {
public:
    explicit StubJudgeClient(std::vector<StubRule> rules, double min_share = 0.7)
        : rules_(std::move(rules)), min_share_(min_share) {
        if (rules_.empty()) throw InvalidArgument("stub judge needs at least one rule");
        for (const auto& r : rules_) {
            if (r.keyword.empty() || r.summary.empty())
                throw InvalidArgument("stub rule needs a keyword and a summary");
        }
    }

    const std::vector<StubRule>& rules() const noexcept { return rules_; }

    Judged<std::optional<std::string>> summarize(const FeatureExplanation& e) override {
        if (e.spans.empty()) throw InvalidArgument("summarize: explanation has no spans");
        std::size_t best_hits = 0;
        const StubRule* best = nullptr;
        for (const auto& rule : rules_) {
            const auto kw = detail::lower(rule.keyword);
            std::size_t hits = 0;
            for (const auto& s : e.spans) hits += detail::lower(s.text).find(kw) != std::string::npos ? 1 : 0;
            if (hits > best_hits) {
                best_hits = hits;
                best = &rule;
            }
        }
        if (!best || static_cast<double>(best_hits) < min_share_ * static_cast<double>(e.spans.size()))
            return {std::nullopt, {}};
        return {best->summary, {}};
    }

    Judged<bool> verify(const FeatureExplanation& e, const std::string& summary) override {
        auto s = summarize(e).value;
        return {s.has_value() && *s == summary, {}};
    }

    Judged<RelevanceLevel> rate_relevance(std::uint32_t, const std::string& summary,
                                          const std::string& rubric) override {
        if (rubric.empty()) throw InvalidArgument("rate_relevance: empty rubric");
        const auto text = detail::lower(summary);
        for (const auto& rule : rules_) {
            if (text.find(detail::lower(rule.summary)) != std::string::npos ||
                text.find(detail::lower(rule.keyword)) != std::string::npos)
                return {rule.relevance, {}};
        }
        return {RelevanceLevel::Maybe, {}};
    }

private:
    std::vector<StubRule> rules_;
    double min_share_;
};

/// Rules file: {"min_share": 0.7, "rules": [{"keyword": .., "summary": .., "relevance": "no"}]}.
inline StubJudgeClient load_stub_rules(const std::string& path) {
    try {
        auto j = nlohmann::json::parse(binary::read_text(path));
        std::vector<StubRule> rules;
        for (const auto& r : j.at("rules")) {
            auto level = parse_relevance(r.at("relevance").get<std::string>());
            if (!level) throw InvalidArgument("bad relevance in stub rule");
            rules.push_back({r.at("keyword").get<std::string>(), r.at("summary").get<std::string>(), *level});
        }
        return StubJudgeClient(std::move(rules), j.value("min_share", 0.7));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatErrc::meta_invalid, path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Chat-completion backed client

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    std::size_t max_tokens = 1024;
};

inline nlohmann::ordered_json to_json(const ChatRequest& r) {
    nlohmann::ordered_json j;
    j["model"] = r.model;
    auto msgs = nlohmann::ordered_json::array();
    for (const auto& m : r.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    j["messages"] = std::move(msgs);
    j["temperature"] = r.temperature;
    j["max_tokens"] = r.max_tokens;
    return j;
}

struct ChatResponse {
    std::string content; // assistant message text
    std::string raw;     // full response body as received
};

class JudgeError : public Error {
public:
    enum class Kind { transport, malformed, unparseable };

    JudgeError(Kind kind, const std::string& what, std::string transcript_id = {})
        : Error(what), kind_(kind), transcript_id_(std::move(transcript_id)) {}

    Kind kind() const noexcept { return kind_; }
    const std::string& transcript_id() const noexcept { return transcript_id_; }

private:
    Kind kind_;
    std::string transcript_id_;
};

/// Transport failure. Retryable ones (connection errors, 429, 5xx) are retried
/// with exponential backoff.
class TransportError : public Error {
public:
    TransportError(const std::string& what, bool retryable) : Error(what), retryable_(retryable) {}
    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    /// Throws TransportError, or JudgeError(malformed) when the body is not a
    /// chat-completion response.
    virtual ChatResponse send(const ChatRequest& request) = 0;
};

struct JudgeClientConfig {
    std::string endpoint_url;
    std::string model_name;
    double temperature = 0.0;
    std::size_t max_response_tokens = 1024;
    std::size_t max_retries = 3;
    std::size_t max_concurrent_requests = 4;
    std::chrono::milliseconds initial_backoff{1000};
    double backoff_multiplier = 2.0;

    void validate() const {
        if (!(temperature >= 0.0)) throw InvalidArgument("temperature must be >= 0");
        if (max_concurrent_requests < 1) throw InvalidArgument("max_concurrent_requests must be >= 1");
        if (max_response_tokens < 1) throw InvalidArgument("max_response_tokens must be >= 1");
    }
};

/// One JSON file per request under `dir`, written before the answer is used.
class TranscriptStore {
public:
    explicit TranscriptStore(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const noexcept { return dir_; }

    void record(const std::string& id, const ChatRequest& request, const std::optional<ChatResponse>& response,
                const std::string& error) const {
        nlohmann::ordered_json j;
        j["id"] = id;
        j["prompt_version"] = prompts::kPromptVersion;
        j["request"] = to_json(request);
        if (response) {
            j["response_content"] = response->content;
            j["response_raw"] = response->raw;
        } else {
            j["response_content"] = nullptr;
            j["response_raw"] = nullptr;
        }
        j["error"] = error.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(error);
        binary::write_text((dir_ / (id + ".json")).string(), j.dump(2) + "\n");
    }

private:
    std::filesystem::path dir_;
};

namespace detail {
inline std::string format_spans(const FeatureExplanation& e) {
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < e.spans.size(); ++i) {
        std::snprintf(buf, sizeof buf, "Span %zu (activation %.4g): ", i + 1, e.spans[i].activation);
        out += buf;
        out += e.spans[i].text;
        out += '\n';
    }
    return out;
}
} // namespace detail

class ChatJudgeClient final : public JudgeClient {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    ChatJudgeClient(ChatTransport& transport, JudgeClientConfig cfg, TranscriptStore store,
                    Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
        : transport_(transport), cfg_(std::move(cfg)), store_(std::move(store)), sleep_(std::move(sleeper)) {
        cfg_.validate();
    }

    Judged<std::optional<std::string>> summarize(const FeatureExplanation& e) override {
        if (e.spans.empty()) throw InvalidArgument("summarize: explanation has no spans");
        auto req = make_request({{"system", std::string(prompts::kSummarizeSystem)},
                                 {"user", std::string(prompts::kSummarizeExampleUser1)},
                                 {"assistant", std::string(prompts::kSummarizeExampleAssistant1)},
                                 {"user", std::string(prompts::kSummarizeExampleUser2)},
                                 {"assistant", std::string(prompts::kSummarizeExampleAssistant2)},
                                 {"user", detail::format_spans(e)}});
        return call<std::optional<std::string>>(tag(e.feature_id, "summarize"), req, false,
                                                [](std::string_view text) -> std::optional<std::optional<std::string>> {
                                                    return parse_summary(text);
                                                });
    }

    Judged<bool> verify(const FeatureExplanation& e, const std::string& summary) override {
        auto req = make_request({{"system", std::string(prompts::kVerifySystem)},
                                 {"user", "Spans:\n" + detail::format_spans(e) + "\nSummary: " + summary}});
        return call<bool>(tag(e.feature_id, "verify"), req, false,
                          [](std::string_view text) -> std::optional<bool> {
                              auto s = detail::lower(detail::strip_decoration(text));
                              if (s == "yes") return true;
                              if (s == "no") return false;
                              return std::nullopt;
                          });
    }

    Judged<RelevanceLevel> rate_relevance(std::uint32_t feature_id, const std::string& summary,
                                          const std::string& rubric) override {
        if (rubric.empty()) throw InvalidArgument("rate_relevance: empty rubric");
        auto req = make_request({{"system", std::string(prompts::kRateSystem)},
                                 {"user", "Task rubric:\n" + rubric + "\n\nFeature description: " + summary}});
        return call<RelevanceLevel>(tag(feature_id, "rate"), req, true, parse_relevance);
    }

    /// "Summary: ..." -> text, "Cannot Tell" -> nullopt; anything else is malformed.
    static std::optional<std::optional<std::string>> parse_summary(std::string_view text) {
        auto body = detail::trim(text);
        auto low = detail::lower(detail::strip_decoration(body));
        if (low == "cannot tell") return std::optional<std::string>{};
        if (detail::lower(body.substr(0, 8)) == "summary:") {
            auto rest = detail::trim(body.substr(8));
            if (!rest.empty()) return std::optional<std::string>{std::string(rest)};
        }
        return std::nullopt;
    }

private:
    static std::string tag(std::uint32_t feature_id, std::string_view stage) {
        return "f" + std::to_string(feature_id) + "-" + std::string(stage);
    }

    ChatRequest make_request(std::vector<ChatMessage> messages) const {
        return {cfg_.model_name, std::move(messages), cfg_.temperature, cfg_.max_response_tokens};
    }

    /// Sends `req`, retrying retryable transport failures (and, when
    /// `retry_unparseable`, answers `parse` rejects) up to max_retries times.
    template <typename T, typename Parse>
    Judged<T> call(const std::string& stem, const ChatRequest& req, bool retry_unparseable, Parse&& parse) {
        Judged<T> out{T{}, {}};
        auto delay = cfg_.initial_backoff;
        for (std::size_t attempt = 0;; ++attempt) {
            const std::string id = stem + "-a" + std::to_string(attempt);
            const bool last = attempt >= cfg_.max_retries;
            std::optional<ChatResponse> resp;
            try {
                resp = transport_.send(req);
            } catch (const TransportError& e) {
                store_.record(id, req, std::nullopt, e.what());
                out.transcript_ids.push_back(id);
                if (!e.retryable() || last)
                    throw JudgeError(JudgeError::Kind::transport,
                                     id + ": " + e.what() + " after " + std::to_string(attempt + 1) + " attempt(s)", id);
                backoff(delay);
                continue;
            } catch (const JudgeError& e) {
                store_.record(id, req, std::nullopt, e.what());
                out.transcript_ids.push_back(id);
                throw JudgeError(e.kind(), id + ": " + e.what(), id);
            }
            auto parsed = parse(resp->content);
            store_.record(id, req, resp, parsed ? std::string{} : std::string("unparseable answer"));
            out.transcript_ids.push_back(id);
            if (parsed) {
                out.value = std::move(*parsed);
                return out;
            }
            if (!retry_unparseable)
                throw JudgeError(JudgeError::Kind::malformed, id + ": malformed answer: " + resp->content, id);
            if (last)
                throw JudgeError(JudgeError::Kind::unparseable,
                                 id + ": no parseable answer after " + std::to_string(attempt + 1) + " attempt(s)", id);
            backoff(delay);
        }
    }

    void backoff(std::chrono::milliseconds& delay) {
        sleep_(delay);
        delay = std::chrono::milliseconds(
            static_cast<std::int64_t>(std::llround(static_cast<double>(delay.count()) * cfg_.backoff_multiplier)));
    }

    ChatTransport& transport_;
    JudgeClientConfig cfg_;
    TranscriptStore store_;
    Sleeper sleep_;
};

// ---------------------------------------------------------------------------
// Pipeline

inline JudgeVerdict judge_feature(JudgeClient& client, const FeatureExplanation& e, const std::string& rubric) {
    JudgeVerdict v;
    v.feature_id = e.feature_id;
    auto add = [&v](const std::vector<std::string>& ids) {
        v.transcript_ids.insert(v.transcript_ids.end(), ids.begin(), ids.end());
    };
    auto s = client.summarize(e);
    add(s.transcript_ids);
    v.summary = s.value;
    if (!v.summary) return v;
    auto ok = client.verify(e, *v.summary);
    add(ok.transcript_ids);
    v.verified = ok.value;
    if (!v.verified) return v;
    auto r = client.rate_relevance(e.feature_id, *v.summary, rubric);
    add(r.transcript_ids);
    v.relevance = r.value;
    return v;
}

/// Judges every explanation with at most `max_concurrent` features in flight.
/// Verdicts come back sorted by feature_id whatever the completion order. The
/// first failure stops the remaining work and is rethrown.
inline std::vector<JudgeVerdict> judge_all(JudgeClient& client, const std::vector<FeatureExplanation>& explanations,
                                           const std::string& rubric, std::size_t max_concurrent = 1) {
    if (rubric.empty()) throw InvalidArgument("judge_all: empty rubric");
    if (max_concurrent < 1) throw InvalidArgument("max_concurrent must be >= 1");
    std::vector<std::optional<JudgeVerdict>> slots(explanations.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mu;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= explanations.size() || failed.load()) return;
            try {
                slots[i] = judge_feature(client, explanations[i], rubric);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    const std::size_t n_workers = std::min(max_concurrent, std::max<std::size_t>(explanations.size(), 1));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);

    std::vector<JudgeVerdict> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.feature_id < b.feature_id; });
    return out;
}

// ---------------------------------------------------------------------------
// verdicts.jsonl and the unintended-set file

inline nlohmann::ordered_json to_json(const JudgeVerdict& v) {
    nlohmann::ordered_json j;
    j["feature_id"] = v.feature_id;
    j["summary"] = v.summary ? *v.summary : std::string(kCannotTell);
    j["verified"] = v.verified;
    j["relevance"] = v.relevance ? nlohmann::ordered_json(std::string(to_string(*v.relevance)))
                                 : nlohmann::ordered_json(nullptr);
    j["transcript_ids"] = v.transcript_ids;
    return j;
}

inline std::string encode_verdicts(const std::vector<JudgeVerdict>& verdicts) {
    std::string out;
    for (const auto& v : verdicts) {
        out += to_json(v).dump();
        out += '\n';
    }
    return out;
}

inline void write_verdicts(const std::vector<JudgeVerdict>& verdicts, const std::string& path) {
    binary::write_text(path, encode_verdicts(verdicts));
}

/// Parses verdicts.jsonl, e.g. after a human edited some verdicts by hand.
inline std::vector<JudgeVerdict> decode_verdicts(std::string_view text) {
    std::vector<JudgeVerdict> out;
    std::size_t start = 0, line_no = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        auto line = text.substr(start, end - start);
        start = end + 1;
        if (detail::trim(line).empty()) continue;
        JudgeVerdict v;
        try {
            auto j = nlohmann::json::parse(line);
            v.feature_id = j.at("feature_id").get<std::uint32_t>();
            auto summary = j.at("summary").get<std::string>();
            if (summary != kCannotTell) v.summary = std::move(summary);
            v.verified = j.at("verified").get<bool>();
            const auto& r = j.at("relevance");
            if (!r.is_null()) {
                v.relevance = parse_relevance(r.get<std::string>());
                if (!v.relevance) throw FormatError(FormatErrc::meta_invalid, "bad relevance level");
            }
            if (j.contains("transcript_ids")) v.transcript_ids = j.at("transcript_ids").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(FormatErrc::meta_invalid, "verdicts line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            v.validate();
        } catch (const InvalidArgument& e) {
            throw FormatError(FormatErrc::meta_invalid, "verdicts line " + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(std::move(v));
    }
    return out;
}

inline std::vector<JudgeVerdict> read_verdicts(const std::string& path) {
    return decode_verdicts(binary::read_text(path));
}

inline std::string encode_unintended(const UnintendedSet& s) {
    nlohmann::ordered_json j;
    j["feature_ids"] = s.feature_ids;
    j["threshold"] = to_string(s.threshold);
    j["rubric_digest"] = s.rubric_digest;
    return j.dump() + "\n";
}

inline UnintendedSet decode_unintended(std::string_view text) {
    try {
        auto j = nlohmann::json::parse(text);
        UnintendedSet s;
        s.feature_ids = j.at("feature_ids").get<std::vector<std::uint32_t>>();
        auto t = parse_relevance(j.at("threshold").get<std::string>());
        if (!t) throw FormatError(FormatErrc::meta_invalid, "bad threshold");
        s.threshold = *t;
        s.rubric_digest = j.at("rubric_digest").get<std::string>();
        if (!std::is_sorted(s.feature_ids.begin(), s.feature_ids.end()) ||
            std::adjacent_find(s.feature_ids.begin(), s.feature_ids.end()) != s.feature_ids.end())
            throw FormatError(FormatErrc::meta_invalid, "feature_ids must be sorted and unique");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatErrc::meta_invalid, std::string("unintended set: ") + e.what());
    }
}

inline void write_unintended(const UnintendedSet& s, const std::string& path) {
    binary::write_text(path, encode_unintended(s));
}

inline UnintendedSet read_unintended(const std::string& path) { return decode_unintended(binary::read_text(path)); }

} // namespace selfreg

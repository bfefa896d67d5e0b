#pragma once

#include <algorithm>
#include <chrono>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tadre/config.hpp"
#include "tadre/retrieval.hpp"
#include "tadre/strings.hpp"
#include "tadre/tokenizer.hpp"

namespace tadre {

enum class PipelineErrorKind { provider_unavailable, empty_response, bad_request };

class PipelineError : public Error {
  public:
    PipelineError(PipelineErrorKind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    PipelineErrorKind kind() const { return kind_; }

  private:
    PipelineErrorKind kind_;
};

/// One LLM round trip with its token accounting.
struct LlmExchange {
    std::string template_id;
    std::string rendered_prompt;
    std::string response;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long latency_ms = 0;
    int attempt = 1;
};

struct TransportReply {
    int status = 0;           // HTTP-style status; 0 = transport failure
    std::string body;
    std::string error;        // transport failure description
};

/// Wire-level abstraction under the chat client: real HTTP or a script.
class LlmTransport {
  public:
    virtual ~LlmTransport() = default;
    virtual TransportReply send(const std::string& request_json) = 0;
};

/// Deterministic scripted provider for tests and offline runs. Rules are
/// {match, response} pairs applied in order: the first rule whose match is a
/// substring of the prompt answers. Optional fields: status (default 200),
/// raw_body (verbatim reply body), once (consume after one use).
class ScriptedTransport : public LlmTransport {
  public:
    struct Rule {
        std::string match;
        std::string response;
        std::string raw_body;
        int status = 200;
        bool once = false;
        bool used = false;
    };

    ScriptedTransport() = default;
    explicit ScriptedTransport(std::vector<Rule> rules) : rules_(std::move(rules)) {}

    static std::shared_ptr<ScriptedTransport> from_jsonl(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot read mock script: " + path);
        std::vector<Rule> rules;
        std::string line;
        while (std::getline(in, line)) {
            if (str::trim(line).empty()) continue;
            auto j = nlohmann::json::parse(line);
            Rule r;
            r.match = j.value("match", "");
            r.response = j.value("response", "");
            r.raw_body = j.value("raw_body", "");
            r.status = j.value("status", 200);
            r.once = j.value("once", false);
            rules.push_back(std::move(r));
        }
        return std::make_shared<ScriptedTransport>(std::move(rules));
    }

    void add(Rule r) { rules_.push_back(std::move(r)); }

    TransportReply send(const std::string& request_json) override {
        std::string prompt;
        try {
            auto j = nlohmann::json::parse(request_json);
            prompt = j.at("messages").at(0).at("content").get<std::string>();
        } catch (const std::exception& e) {
            return {0, "", std::string("bad request json: ") + e.what()};
        }
        std::lock_guard<std::mutex> lock(mu_);
        for (auto& rule : rules_) {
            if (rule.used) continue;
            if (!rule.match.empty() && prompt.find(rule.match) == std::string::npos) continue;
            if (rule.once) rule.used = true;
            if (rule.status != 200) return {rule.status, rule.raw_body, ""};
            if (!rule.raw_body.empty()) return {200, rule.raw_body, ""};
            nlohmann::json body = {
                {"choices", {{{"message", {{"role", "assistant"}, {"content", rule.response}}}}}}};
            return {200, body.dump(), ""};
        }
        return {0, "", "no scripted rule matched the prompt"};
    }

  private:
    std::mutex mu_;
    std::vector<Rule> rules_;
};

/// Splits "https://host:port/path" into client target + path.
struct EndpointParts {
    std::string base;  // scheme://host[:port]
    std::string path;
};

inline EndpointParts split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    std::size_t path_start =
        endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

class HttpTransport : public LlmTransport {
  public:
    HttpTransport(std::string endpoint, std::string api_key)
        : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)) {}

    TransportReply send(const std::string& request_json) override {
        auto parts = split_endpoint(endpoint_);
        httplib::Client client(parts.base);
        client.set_connection_timeout(30);
        client.set_read_timeout(120);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = client.Post(parts.path, headers, request_json, "application/json");
        if (!res) return {0, "", httplib::to_string(res.error())};
        return {res->status, res->body, ""};
    }

  private:
    std::string endpoint_;
    std::string api_key_;
};

/// Simple token bucket: at most rps requests per second, shared by threads.
class RateLimiter {
  public:
    explicit RateLimiter(double rps) : interval_ms_(rps > 0 ? 1000.0 / rps : 0.0) {}

    void acquire() {
        if (interval_ms_ <= 0) return;
        std::chrono::steady_clock::time_point wait_until;
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto now = std::chrono::steady_clock::now();
            auto interval = std::chrono::milliseconds(static_cast<long>(interval_ms_));
            if (next_ < now) next_ = now;
            wait_until = next_;
            next_ += interval;
        }
        std::this_thread::sleep_until(wait_until);
    }

  private:
    double interval_ms_;
    std::mutex mu_;
    std::chrono::steady_clock::time_point next_{};
};

/// Chat-completion client: request building, retries with exponential
/// backoff on transport errors / 429 / 5xx / malformed bodies, rate
/// limiting, and token accounting (provider usage when present, counted
/// locally otherwise).
class LlmClient {
  public:
    LlmClient(std::shared_ptr<LlmTransport> transport, const Config& cfg)
        : transport_(std::move(transport)),
          model_(cfg.llm_model),
          temperature_(cfg.llm_temperature),
          max_tokens_(cfg.llm_max_tokens),
          max_retries_(cfg.llm_max_retries),
          backoff_ms_(cfg.llm_retry_backoff_ms),
          limiter_(std::make_shared<RateLimiter>(cfg.llm_rps)) {
        fallback_budget_ = TokenBudget(CounterKind::whitespace, 1);
        if (cfg.tokenizer_kind == CounterKind::bpe_cl100k && !cfg.tokenizer_vocab_path.empty())
            fallback_budget_ = cfg.token_budget();
    }

    LlmExchange complete(const std::string& prompt, std::string template_id = "adhoc") {
        nlohmann::json req = {
            {"model", model_},
            {"messages", {{{"role", "user"}, {"content", prompt}}}},
            {"temperature", temperature_},
            {"max_tokens", max_tokens_},
        };
        const std::string req_body = req.dump();
        const int max_attempts = 1 + std::max(0, max_retries_);
        std::string last_error;
        auto start = std::chrono::steady_clock::now();
        for (int attempt = 1; attempt <= max_attempts; ++attempt) {
            if (attempt > 1) {
                int doublings = std::min(attempt - 2, 16);
                auto delay = backoff_ms_ > 0 ? backoff_ms_ * (1L << doublings) : 0;
                if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            }
            limiter_->acquire();
            auto reply = transport_->send(req_body);
            if (reply.status == 0) {
                last_error = "transport: " + reply.error;
                continue;
            }
            if (reply.status == 429 || reply.status >= 500) {
                last_error = "status " + std::to_string(reply.status);
                continue;
            }
            if (reply.status != 200)
                throw PipelineError(PipelineErrorKind::provider_unavailable,
                                    "provider rejected the request with status " +
                                        std::to_string(reply.status));
            LlmExchange ex;
            ex.template_id = std::move(template_id);
            ex.rendered_prompt = prompt;
            ex.attempt = attempt;
            try {
                auto j = nlohmann::json::parse(reply.body);
                ex.response = str::trim(
                    j.at("choices").at(0).at("message").at("content").get<std::string>());
                if (j.contains("usage")) {
                    ex.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
                    ex.completion_tokens = j["usage"].value("completion_tokens", 0L);
                }
            } catch (const std::exception& e) {
                last_error = std::string("malformed provider response: ") + e.what();
                continue;
            }
            if (ex.response.empty())
                throw PipelineError(PipelineErrorKind::empty_response,
                                    "provider returned an empty response");
            if (ex.prompt_tokens == 0) ex.prompt_tokens = count_tokens(prompt, fallback_budget_);
            if (ex.completion_tokens == 0)
                ex.completion_tokens = count_tokens(ex.response, fallback_budget_);
            ex.latency_ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                  std::chrono::steady_clock::now() - start)
                                                  .count());
            return ex;
        }
        throw PipelineError(PipelineErrorKind::provider_unavailable,
                            "provider unavailable after " + std::to_string(max_attempts) +
                                " attempts: " + last_error);
    }

  private:
    std::shared_ptr<LlmTransport> transport_;
    std::string model_;
    double temperature_;
    int max_tokens_;
    int max_retries_;
    long backoff_ms_;
    std::shared_ptr<RateLimiter> limiter_;
    TokenBudget fallback_budget_;
};

/// OpenAI-compatible embedding endpoint client:
/// POST {input: [text], model} -> {data: [{embedding: [...]}]}.
class HttpEmbeddingProvider : public EmbeddingProvider {
  public:
    HttpEmbeddingProvider(std::string endpoint, std::string model, std::string api_key,
                          int max_retries = 3, long backoff_ms = 250)
        : endpoint_(std::move(endpoint)),
          model_(std::move(model)),
          api_key_(std::move(api_key)),
          max_retries_(max_retries),
          backoff_ms_(backoff_ms) {}

    EmbeddingVector embed(const std::string& text) override {
        auto parts = split_endpoint(endpoint_);
        nlohmann::json req = {{"input", {text}}, {"model", model_}};
        const std::string body = req.dump();
        const int max_attempts = 1 + std::max(0, max_retries_);
        std::string last_error;
        for (int attempt = 1; attempt <= max_attempts; ++attempt) {
            if (attempt > 1 && backoff_ms_ > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(
                    backoff_ms_ * (1L << std::min(attempt - 2, 16))));
            httplib::Client client(parts.base);
            client.set_connection_timeout(30);
            client.set_read_timeout(120);
            httplib::Headers headers;
            if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
            auto res = client.Post(parts.path, headers, body, "application/json");
            if (!res) {
                last_error = "transport: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "status " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw PipelineError(PipelineErrorKind::provider_unavailable,
                                    "embedding endpoint rejected the request with status " +
                                        std::to_string(res->status));
            try {
                auto j = nlohmann::json::parse(res->body);
                EmbeddingVector v{j.at("data").at(0).at("embedding").get<std::vector<double>>()};
                if (v.values.empty() || v.norm() == 0.0)
                    throw PipelineError(PipelineErrorKind::provider_unavailable,
                                        "embedding endpoint returned a zero vector");
                return v;
            } catch (const PipelineError&) {
                throw;
            } catch (const std::exception& e) {
                last_error = std::string("malformed embedding response: ") + e.what();
            }
        }
        throw PipelineError(PipelineErrorKind::provider_unavailable,
                            "embedding endpoint unavailable after " +
                                std::to_string(max_attempts) + " attempts: " + last_error);
    }

    std::string id() const override { return model_; }

  private:
    std::string endpoint_;
    std::string model_;
    std::string api_key_;
    int max_retries_;
    long backoff_ms_;
};

/// Strips markdown code fences and a leading "sql" tag from a generated
/// query.
inline std::string strip_sql_formatting(std::string_view response) {
    std::string s = str::trim(response);
    if (str::starts_with(s, "```")) {
        s.erase(0, 3);
        if (str::istarts_with(s, "sql")) s.erase(0, 3);
        auto close = s.rfind("```");
        if (close != std::string::npos) s.erase(close);
        s = str::trim(s);
    }
    if (str::istarts_with(s, "sql") && s.size() > 3 &&
        (s[3] == '\n' || s[3] == ':' || s[3] == ' '))
        s = str::trim(s.substr(4));
    return s;
}

/// Text after the last "Final Answer:" marker; the whole trimmed response
/// when the marker is missing (flagged nonconforming).
struct FinalAnswer {
    std::string text;
    bool conforming = true;
};

inline FinalAnswer extract_final_answer(std::string_view response) {
    std::string lower = str::to_lower(response);
    const std::string marker = "final answer:";
    auto pos = lower.rfind(marker);
    if (pos == std::string::npos) return {str::trim(response), false};
    return {str::trim(response.substr(pos + marker.size())), true};
}

}  // namespace tadre

#pragma once

#include "cafforge/error.hpp"
#include "cafforge/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cafforge {

struct ChatRequest {
    std::string prompt;
    double temperature = 0.6;
    double top_p = 0.9;
    int max_tokens = 1024;
    std::string model_name;
};

/// Sampling settings for the three kinds of calls the pipeline makes.
inline ChatRequest context_generation_request(std::string prompt, std::string model = {}) {
    return ChatRequest{std::move(prompt), 0.6, 0.9, 1024, std::move(model)};
}
inline ChatRequest judge_request(std::string prompt, std::string model = {}) {
    return ChatRequest{std::move(prompt), 0.0, 1.0, 16, std::move(model)};
}
inline ChatRequest direct_prompt_request(std::string prompt, std::string model = {}) {
    return ChatRequest{std::move(prompt), 1.0, 1.0, 4096, std::move(model)};
}

inline void validate_request(const ChatRequest& r) {
    require(r.temperature >= 0.0 && r.temperature <= 2.0, "chat request: temperature outside [0, 2]");
    require(r.top_p > 0.0 && r.top_p <= 1.0, "chat request: top_p outside (0, 1]");
    require(r.max_tokens > 0, "chat request: max_tokens must be positive");
}

struct GatewayConfig {
    std::string endpoint;
    std::string api_key_env = "CAFFORGE_API_KEY";
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{500};
    int max_parallel = 4;
    std::chrono::seconds timeout{120};
};

/// Worth retrying: timeouts, connection resets, 429 and 5xx.
class TransientError : public Error {
public:
    explicit TransientError(const std::string& what) : Error(ErrorKind::gateway, what) {}
};

/// Not worth retrying: authentication, malformed envelopes, unscripted mock prompts.
class PermanentError : public Error {
public:
    explicit PermanentError(const std::string& what) : Error(ErrorKind::gateway, what) {}
};

/// A chat-completion transport. Implementations must tolerate concurrent
/// calls up to the configured parallelism.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string send(const ChatRequest& request) = 0;
};

/// Stable 16-hex-digit hash of the full prompt text.
inline std::string prompt_hash(std::string_view prompt) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(prompt)));
    return buf;
}

/// Scripted replies keyed on prompt_hash. In strict mode an unknown prompt
/// is a permanent error; otherwise the fallback reply is returned.
class MockBackend : public ChatBackend {
public:
    using Responder = std::function<std::optional<std::string>(const ChatRequest&)>;

    explicit MockBackend(bool strict = true) : strict_(strict) {}

    void script(std::string_view prompt, std::string reply) { script_hash(prompt_hash(prompt), std::move(reply)); }

    void script_hash(std::string hash, std::string reply) {
        std::unique_lock lock(mutex_);
        replies_[std::move(hash)] = std::move(reply);
    }

    /// Consulted for prompts with no scripted reply, before strict/fallback handling.
    void set_responder(Responder responder) {
        std::unique_lock lock(mutex_);
        responder_ = std::move(responder);
    }

    void set_fallback(std::string reply) {
        std::unique_lock lock(mutex_);
        fallback_ = std::move(reply);
    }

    /// Loads a fixture file: one JSON object per line with "prompt_hash" and "reply_text".
    void load_fixture(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail(ErrorKind::io, "cannot open mock fixture " + path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                const auto j = nlohmann::json::parse(line);
                script_hash(j.at("prompt_hash").get<std::string>(), j.at("reply_text").get<std::string>());
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorKind::data, path + ":" + std::to_string(line_no) + ": bad mock fixture record: " + e.what());
            }
        }
    }

    std::string send(const ChatRequest& request) override {
        calls_.fetch_add(1);
        const auto hash = prompt_hash(request.prompt);
        Responder responder;
        {
            std::shared_lock lock(mutex_);
            if (auto it = replies_.find(hash); it != replies_.end()) {
                return it->second;
            }
            responder = responder_;
        }
        if (responder) {
            if (auto reply = responder(request)) return *reply;
        }
        std::shared_lock lock(mutex_);
        if (!strict_ && fallback_) return *fallback_;
        throw PermanentError("mock backend has no reply for prompt " + hash);
    }

    [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }
    [[nodiscard]] bool strict() const noexcept { return strict_; }

private:
    bool strict_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, std::string> replies_;
    Responder responder_;
    std::optional<std::string> fallback_;
    std::atomic<std::size_t> calls_{0};
};

/// Result of one batch item: a reply or the error that ended it.
struct BatchResult {
    std::optional<std::string> reply;
    std::string error;
    ErrorKind error_kind = ErrorKind::gateway;

    [[nodiscard]] bool ok() const noexcept { return reply.has_value(); }
};

/// Runs `task(i)` for i in [0, count) on up to `max_parallel` threads.
inline void parallel_for(std::size_t count, int max_parallel, const std::function<void(std::size_t)>& task) {
    const auto workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, max_parallel)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                task(i);
            }
        });
    }
    for (auto& t : threads) t.join();
}

/// Retrying front end over a ChatBackend.
class Gateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    Gateway(GatewayConfig config, std::shared_ptr<ChatBackend> backend)
        : config_(std::move(config)), backend_(std::move(backend)) {
        require(backend_ != nullptr, "gateway: backend not configured");
        require(config_.max_parallel >= 1, "gateway: max_parallel must be at least 1");
        require(config_.max_retries >= 0, "gateway: max_retries must be nonnegative");
    }

    /// Tests swap this for a no-op.
    void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

    [[nodiscard]] const GatewayConfig& config() const noexcept { return config_; }

    std::string complete(const ChatRequest& request) const {
        validate_request(request);
        for (int attempt = 0;; ++attempt) {
            try {
                return backend_->send(request);
            } catch (const TransientError& e) {
                if (attempt >= config_.max_retries) {
                    throw Error(ErrorKind::gateway, std::string("gave up after ") + std::to_string(attempt + 1) +
                                                        " attempts: " + e.what());
                }
                sleeper_(config_.backoff_base * (1LL << std::min(attempt, 16)));
            }
        }
    }

    /// Results line up with `requests` by index; failures are reported in
    /// place and do not stop the rest of the batch.
    std::vector<BatchResult> complete_batch(const std::vector<ChatRequest>& requests) const {
        require(!requests.empty(), "complete_batch: empty request list");
        std::vector<BatchResult> results(requests.size());
        parallel_for(requests.size(), config_.max_parallel, [&](std::size_t i) {
            try {
                results[i].reply = complete(requests[i]);
            } catch (const Error& e) {
                results[i].error = e.what();
                results[i].error_kind = e.kind();
            } catch (const std::exception& e) {
                results[i].error = e.what();
            }
        });
        return results;
    }

private:
    GatewayConfig config_;
    std::shared_ptr<ChatBackend> backend_;
    Sleeper sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
};

}  // namespace cafforge

#pragma once

// HTTP(S) chat-completion backend. Kept out of the umbrella header so that
// only targets that talk to a real endpoint pull in cpp-httplib (and, for
// https://, OpenSSL via CPPHTTPLIB_OPENSSL_SUPPORT).

#include "cafforge/gateway.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <string>

namespace cafforge {

class HttpBackend : public ChatBackend {
public:
    /// `endpoint` is a full URL such as "https://host/v1/chat/completions".
    explicit HttpBackend(const GatewayConfig& config) : timeout_(config.timeout) {
        const auto& url = config.endpoint;
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) {
            fail(ErrorKind::config, "gateway endpoint must be an absolute URL");
        }
        const auto path_start = url.find('/', scheme_end + 3);
        origin_ = url.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : url.substr(path_start);

        if (!config.api_key_env.empty()) {
            if (const char* key = std::getenv(config.api_key_env.c_str()); key != nullptr && *key != '\0') {
                api_key_ = key;
            }
        }
    }

    std::string send(const ChatRequest& request) override {
        nlohmann::json body = {
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature},
            {"top_p", request.top_p},
            {"max_tokens", request.max_tokens},
        };
        if (!request.model_name.empty()) {
            body["model"] = request.model_name;
        }

        httplib::Client client(origin_);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);
        httplib::Headers headers;
        if (!api_key_.empty()) {
            headers.emplace("Authorization", "Bearer " + api_key_);
        }

        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) {
            throw TransientError("chat request failed: " + httplib::to_string(res.error()));
        }
        const int status = res->status;
        if (status == 401 || status == 403) {
            throw PermanentError("chat endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
        }
        if (status == 408 || status == 429 || status >= 500) {
            throw TransientError("chat endpoint returned HTTP " + std::to_string(status));
        }
        if (status != 200) {
            throw PermanentError("chat endpoint returned HTTP " + std::to_string(status));
        }
        return extract_content(res->body);
    }

    /// Pulls choices[0].message.content out of a response envelope.
    static std::string extract_content(const std::string& payload) {
        const auto j = nlohmann::json::parse(payload, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw PermanentError("malformed response envelope: not a JSON object");
        }
        const auto choices = j.find("choices");
        if (choices == j.end() || !choices->is_array() || choices->empty()) {
            throw PermanentError("malformed response envelope: missing choices");
        }
        const auto& first = (*choices)[0];
        if (!first.is_object() || !first.contains("message") || !first["message"].is_object() ||
            !first["message"].contains("content") || !first["message"]["content"].is_string()) {
            throw PermanentError("malformed response envelope: missing message content");
        }
        return first["message"]["content"].get<std::string>();
    }

private:
    std::string origin_;
    std::string path_;
    std::string api_key_;
    std::chrono::seconds timeout_;
};

}  // namespace cafforge

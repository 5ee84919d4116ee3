#pragma once

#include <cstdlib>
#include <memory>
#include <semaphore>
#include <string>

#include <nlohmann/json.hpp>

#include "httplib.h"

#include "cpa/errors.hpp"
#include "cpa/llm.hpp"

namespace cpa {

/// Chat-completion client over JSON/HTTP, speaking either the Ollama or the
/// OpenAI wire shape. Connection errors and 5xx responses are retried with
/// exponential backoff up to max_retries_transport; those retries are
/// transport-level and invisible to the recovery chain. 4xx responses are
/// configuration errors and abort the run. In-flight requests are bounded by
/// max_in_flight (default 1, single-GPU serving).
class HttpLlmClient final : public LlmClient {
public:
    explicit HttpLlmClient(BackendConfig config) : config_(std::move(config)), slots_(config_.max_in_flight) {
        config_.validate();
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (key != nullptr && *key != '\0') api_key_ = key;
    }

    LlmResponse complete(const LlmRequest& request, bool use_fallback_model) override {
        slots_.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{slots_};

        detail::Stopwatch watch;
        const std::string model = (use_fallback_model && config_.fallback_model_name)
                                      ? *config_.fallback_model_name
                                      : config_.model_name;
        const std::string body = build_body(model, request.prompt_text);
        const std::string path =
            config_.flavor == ApiFlavor::Ollama ? "/api/chat" : "/v1/chat/completions";

        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        std::string last_error;
        for (int attempt = 0; attempt <= config_.max_retries_transport; ++attempt) {
            if (attempt > 0) {
                detail::sleep_seconds(config_.retry_backoff_seconds * static_cast<double>(1 << (attempt - 1)));
            }
            httplib::Client cli(config_.endpoint);
            cli.set_connection_timeout(config_.request_timeout_seconds, 0);
            cli.set_read_timeout(config_.request_timeout_seconds, 0);
            cli.set_write_timeout(config_.request_timeout_seconds, 0);

            auto res = cli.Post(path, headers, body, "application/json");
            if (!res) {
                last_error = "connection failed (" + httplib::to_string(res.error()) + ")";
                continue;
            }
            if (res->status >= 500) {
                last_error = "server error " + std::to_string(res->status);
                continue;
            }
            if (res->status >= 400) {
                throw BackendRefusalError("backend refused request (" + std::to_string(res->status) +
                                          ") for model " + model + ": " + res->body.substr(0, 200));
            }
            return {extract_text(res->body), watch.seconds(), model};
        }
        throw TransportError("transport failure after " + std::to_string(config_.max_retries_transport + 1) +
                             " attempt(s): " + last_error);
    }

    std::string describe() const override {
        return std::string("http:") + (config_.flavor == ApiFlavor::Ollama ? "ollama" : "openai") + ":" +
               config_.model_name;
    }

private:
    std::string build_body(const std::string& model, const std::string& prompt) const {
        nlohmann::json messages = nlohmann::json::array();
        messages.push_back({{"role", "user"}, {"content", prompt}});
        nlohmann::json body;
        body["model"] = model;
        body["messages"] = messages;
        if (config_.flavor == ApiFlavor::Ollama) {
            body["stream"] = false;
            body["options"] = {{"temperature", config_.temperature},
                               {"num_predict", config_.max_output_tokens}};
        } else {
            body["temperature"] = config_.temperature;
            body["max_tokens"] = config_.max_output_tokens;
        }
        return body.dump();
    }

    std::string extract_text(const std::string& body) const {
        try {
            nlohmann::json j = nlohmann::json::parse(body);
            if (config_.flavor == ApiFlavor::Ollama) {
                return j.at("message").at("content").get<std::string>();
            }
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("unparseable backend response: ") + e.what());
        }
    }

    BackendConfig config_;
    std::string api_key_;
    std::counting_semaphore<> slots_;
};

}  // namespace cpa

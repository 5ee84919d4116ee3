#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpa/errors.hpp"
#include "cpa/reduce.hpp"
#include "cpa/util.hpp"

namespace cpa {

enum class ApiFlavor { Ollama, OpenAi };

inline ApiFlavor api_flavor_from_string(std::string_view s) {
    std::string v = to_lower(trim_view(s));
    if (v == "ollama") return ApiFlavor::Ollama;
    if (v == "openai") return ApiFlavor::OpenAi;
    throw ConfigError("unknown api flavor: " + std::string(s));
}

/// Settings for the HTTP chat-completion backend. The fallback model serves
/// the third recovery stage ("ask a different model").
struct BackendConfig {
    std::string endpoint = "http://127.0.0.1:11434";
    std::string model_name;
    std::optional<std::string> fallback_model_name;
    double temperature = 0.0;
    int max_output_tokens = 64;
    int request_timeout_seconds = 120;
    int max_retries_transport = 2;
    double retry_backoff_seconds = 0.5;
    ApiFlavor flavor = ApiFlavor::Ollama;
    std::string api_key_env = "CPA_API_KEY";
    int max_in_flight = 1;

    void validate() const {
        if (model_name.empty()) throw ConfigError("backend: model name is required");
        if (fallback_model_name && *fallback_model_name == model_name) {
            throw ConfigError("backend: fallback model must differ from the primary model");
        }
        if (temperature < 0.0) throw ConfigError("backend: temperature must be >= 0");
        if (max_output_tokens < 1) throw ConfigError("backend: max output tokens must be >= 1");
        if (request_timeout_seconds < 1) throw ConfigError("backend: request timeout must be >= 1s");
        if (max_retries_transport < 0) throw ConfigError("backend: transport retries must be >= 0");
        if (retry_backoff_seconds < 0.0) throw ConfigError("backend: retry backoff must be >= 0");
        if (max_in_flight < 1) throw ConfigError("backend: max in-flight requests must be >= 1");
    }
};

enum class PromptKind { Annotation, Retry, Topic };

/// What the pipeline hands a client per call. The HTTP backend sends only
/// prompt_text; mock backends may read the closed choice list and the
/// ground-truth hint to produce deterministic answers.
struct LlmRequest {
    std::string prompt_text;
    PromptKind kind = PromptKind::Annotation;
    std::vector<std::string> candidates;
    std::optional<std::string> ground_truth;
    std::string table_id;
    int column_index = -1;
};

struct LlmResponse {
    std::string text;
    double latency_seconds = 0.0;
    std::string model_used;
};

class LlmClient {
public:
    virtual ~LlmClient() = default;
    /// use_fallback_model selects the configured alternate model where one
    /// exists; mock backends ignore it.
    virtual LlmResponse complete(const LlmRequest& request, bool use_fallback_model) = 0;
    virtual std::string describe() const = 0;
};

namespace detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline void sleep_seconds(double s) {
    if (s > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(s));
}

}  // namespace detail

/// Answers with the ground-truth hint when it is in the candidate list, the
/// first candidate otherwise. Upper-bounds the pipeline: any loss under this
/// backend comes from filtering, not from the model.
class OracleClient final : public LlmClient {
public:
    explicit OracleClient(double simulated_delay_seconds = 0.0) : delay_(simulated_delay_seconds) {}

    LlmResponse complete(const LlmRequest& request, bool) override {
        if (request.candidates.empty()) throw ContractError("oracle backend: empty candidate list");
        detail::Stopwatch watch;
        detail::sleep_seconds(delay_);
        const std::string* answer = &request.candidates.front();
        if (request.ground_truth) {
            auto it = std::find(request.candidates.begin(), request.candidates.end(), *request.ground_truth);
            if (it != request.candidates.end()) answer = &*it;
        }
        return {*answer, watch.seconds(), "oracle"};
    }

    std::string describe() const override { return "oracle"; }

private:
    double delay_;
};

/// Always answers with the first candidate. Exercises the error-propagation
/// pathology of co-appearance filtering: one wrong early pick poisons the
/// candidate lists of later columns.
class FirstCandidateClient final : public LlmClient {
public:
    explicit FirstCandidateClient(double simulated_delay_seconds = 0.0) : delay_(simulated_delay_seconds) {}

    LlmResponse complete(const LlmRequest& request, bool) override {
        if (request.candidates.empty()) throw ContractError("first backend: empty candidate list");
        detail::Stopwatch watch;
        detail::sleep_seconds(delay_);
        return {request.candidates.front(), watch.seconds(), "first"};
    }

    std::string describe() const override { return "first"; }

private:
    double delay_;
};

/// Replays canned responses in order, cycling when exhausted. The cursor is
/// shared across calls, so scripted runs are only byte-reproducible with a
/// single worker.
class ScriptedClient final : public LlmClient {
public:
    explicit ScriptedClient(std::vector<std::string> responses, double simulated_delay_seconds = 0.0)
        : responses_(std::move(responses)), delay_(simulated_delay_seconds) {
        if (responses_.empty()) throw ConfigError("scripted backend: response list is empty");
    }

    /// One response per line; a trailing newline does not add a response.
    static ScriptedClient from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open script file: " + path.string());
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines.push_back(line);
        }
        if (lines.empty()) throw ConfigError("scripted backend: script file is empty: " + path.string());
        return ScriptedClient(std::move(lines));
    }

    LlmResponse complete(const LlmRequest&, bool) override {
        detail::Stopwatch watch;
        detail::sleep_seconds(delay_);
        std::string text;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            text = responses_[cursor_ % responses_.size()];
            ++cursor_;
        }
        return {std::move(text), watch.seconds(), "scripted"};
    }

    std::string describe() const override { return "scripted"; }

private:
    std::vector<std::string> responses_;
    double delay_;
    std::mutex mutex_;
    size_t cursor_ = 0;
};

/// Normalize a raw model reply down to a bare answer: trim, strip matching
/// quote/backtick/markdown wrappers, drop trailing punctuation.
inline std::string normalize_llm_answer(std::string_view text) {
    std::string_view s = trim_view(text);
    static constexpr std::string_view wrappers[] = {"```", "**", "__", "`", "\"", "'", "*", "_"};
    bool changed = true;
    while (changed && !s.empty()) {
        changed = false;
        for (auto w : wrappers) {
            if (s.size() >= 2 * w.size() && s.substr(0, w.size()) == w &&
                s.substr(s.size() - w.size()) == w) {
                s = trim_view(s.substr(w.size(), s.size() - 2 * w.size()));
                changed = true;
            }
        }
        while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == ';' ||
                              s.back() == ':' || s.back() == '!' || s.back() == '?')) {
            s = trim_view(s.substr(0, s.size() - 1));
            changed = true;
        }
    }
    return std::string(s);
}

namespace detail {

inline bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

inline bool contains_whole_token(std::string_view text, std::string_view token) {
    if (token.empty()) return false;
    size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string_view::npos) {
        bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
        size_t end = pos + token.size();
        bool right_ok = end == text.size() || !is_word_char(text[end]);
        if (left_ok && right_ok) return true;
        pos += 1;
    }
    return false;
}

}  // namespace detail

/// Extract exactly one choice from a model reply, or nothing.
/// Rules, in order: exact match of the normalized reply; case-insensitive
/// match; unique whole-token mention — if exactly one choice occurs as a
/// whole token anywhere in the raw reply, that choice wins, while two or
/// more distinct mentions are refused as ambiguous.
inline std::optional<std::string> parse_single_choice(std::string_view text,
                                                      const std::vector<std::string>& choices) {
    if (choices.empty()) return std::nullopt;
    std::string norm = normalize_llm_answer(text);
    if (norm.empty()) return std::nullopt;

    for (const auto& c : choices) {
        if (norm == c) return c;
    }
    std::string norm_lower = to_lower(norm);
    const std::string* ci_match = nullptr;
    int ci_count = 0;
    for (const auto& c : choices) {
        if (norm_lower == to_lower(c)) {
            ci_match = &c;
            ++ci_count;
        }
    }
    if (ci_count == 1) return *ci_match;
    if (ci_count > 1) return std::nullopt;

    const std::string* token_match = nullptr;
    int token_count = 0;
    for (const auto& c : choices) {
        if (detail::contains_whole_token(text, c)) {
            token_match = &c;
            ++token_count;
        }
    }
    if (token_count == 1) return *token_match;
    return std::nullopt;
}

/// parse_single_choice against a candidate set, typed. Never returns a label
/// outside the candidates; nothing signals a format failure that feeds the
/// recovery chain.
inline std::optional<RelationLabel> parse_single_relation(std::string_view text,
                                                          const CandidateSet& candidates) {
    auto choice = parse_single_choice(text, candidates.relation_strings());
    if (!choice) return std::nullopt;
    return RelationLabel(*choice);
}

}  // namespace cpa

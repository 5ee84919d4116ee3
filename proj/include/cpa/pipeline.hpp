#pragma once

#include <atomic>
#include <exception>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpa/csv.hpp"
#include "cpa/errors.hpp"
#include "cpa/llm.hpp"
#include "cpa/prompt.hpp"
#include "cpa/reduce.hpp"
#include "cpa/stats.hpp"
#include "cpa/table.hpp"
#include "cpa/type_detect.hpp"
#include "cpa/util.hpp"

namespace cpa {

/// Everything one annotation run needs, bound together: which filters to
/// apply, how to prompt, how to type columns, and whether dataset-supplied
/// domain labels short-circuit topic detection.
struct RunConfig {
    ApproachConfig approach;
    PromptParts prompt_parts;
    BackendConfig backend;
    int excerpt_rows = 5;
    TypeDetectMode inference_type_mode = TypeDetectMode::MajorityVote;
    int type_sample_limit = 500;
    bool use_gt_domain = false;
    PromptTemplate annotation_template = PromptTemplate::default_template();
};

/// One row of the machine-readable trace log: a single LLM call and how its
/// reply was consumed.
struct AttemptRecord {
    std::string table_id;
    int column_index = -1;  // -1 marks topic-detection calls
    int attempt = 1;
    std::string prompt_hash;
    std::string model;
    double latency_seconds = 0.0;
    std::string outcome;  // "ok:<answer>" | "parse-miss" | "transport-error"
};

struct TableRunTrace {
    std::string table_id;
    std::optional<DomainLabel> detected_domain;
    std::vector<Annotation> annotations;
    int failed_count = 0;
    double total_seconds = 0.0;
};

struct TableRunResult {
    TableRunTrace trace;
    std::vector<AttemptRecord> attempts;
};

namespace detail {

inline std::string prompt_hash(const RenderedPrompt& p) { return hex64(fnv1a64(p.text)); }

inline const DomainLabel& largest_domain(const StatsModel& stats) {
    const DomainLabel* best = nullptr;
    size_t best_size = 0;
    for (const auto& [d, rels] : stats.domain_dict) {
        if (best == nullptr || rels.size() > best_size) {  // ties keep the lexicographically first
            best = &d;
            best_size = rels.size();
        }
    }
    return *best;
}

}  // namespace detail

/// Resolve the table's domain. Dataset-supplied labels pass through when
/// use_gt_domain is set; otherwise a topic prompt runs over the known
/// domains, with one single-word retry, and unparseable output falls back to
/// the domain with the largest relation set — a weak guess that fallback-
/// capable reduction can still work with beats a dropped table.
inline DomainLabel detect_table_domain(const Table& table, const StatsModel& stats, LlmClient& client,
                                       const RunConfig& config,
                                       std::vector<AttemptRecord>* attempts_out = nullptr) {
    if (stats.domain_dict.empty()) throw ContractError("detect_table_domain: empty domain dictionary");
    if (config.use_gt_domain && table.domain) return *table.domain;

    std::set<DomainLabel> domains;
    std::vector<std::string> names;
    for (const auto& [d, rels] : stats.domain_dict) {
        domains.insert(d);
        names.push_back(d.str());
    }

    auto record = [&](int attempt, const RenderedPrompt& prompt, const std::string& model, double latency,
                      std::string outcome) {
        if (attempts_out != nullptr) {
            attempts_out->push_back({table.id, -1, attempt, detail::prompt_hash(prompt), model, latency,
                                     std::move(outcome)});
        }
    };

    LlmRequest request;
    request.kind = PromptKind::Topic;
    request.candidates = names;
    if (table.domain) request.ground_truth = table.domain->str();
    request.table_id = table.id;

    RenderedPrompt prompt = render_topic_prompt(table, domains, config.excerpt_rows);
    std::string previous;
    for (int attempt = 1; attempt <= 2; ++attempt) {
        if (attempt == 2) {
            prompt = render_retry_prompt(previous.empty() ? "(empty reply)" : previous, names);
        }
        request.prompt_text = prompt.text;
        try {
            LlmResponse response = client.complete(request, false);
            auto choice = parse_single_choice(response.text, names);
            record(attempt, prompt, response.model_used, response.latency_seconds,
                   choice ? "ok:" + *choice : "parse-miss");
            if (choice) return DomainLabel(*choice);
            previous = response.text;
        } catch (const TransportError&) {
            record(attempt, prompt, client.describe(), 0.0, "transport-error");
            break;
        }
    }
    return detail::largest_domain(stats);
}

/// Annotate the given columns of one table, left to right. Per column: type
/// the column, reduce the candidate list (prior predictions are excluded and
/// anchor co-appearance under the configured gate), then run the recovery
/// chain — main prompt, single-word retry, initial prompt against the
/// fallback model — until an answer parses or the column fails. Transport
/// failures abort the column, not the table.
inline TableRunResult annotate_table(const Table& table, const std::vector<int>& target_columns,
                                     const StatsModel& stats, const RunConfig& config, LlmClient& client) {
    for (size_t i = 0; i < target_columns.size(); ++i) {
        int col = target_columns[i];
        if (col < 0 || col >= table.column_count) {
            throw ContractError("annotate_table: target column " + std::to_string(col) +
                                " out of range for table " + table.id);
        }
        if (i > 0 && target_columns[i - 1] >= col) {
            throw ContractError("annotate_table: target columns must be sorted ascending and unique");
        }
    }

    TableRunResult result;
    result.trace.table_id = table.id;
    detail::Stopwatch table_watch;

    const bool needs_domain =
        config.approach.use_domain || config.approach.coappearance != CoAppearanceMode::Off;
    std::optional<DomainLabel> domain;
    if (needs_domain) {
        domain = detect_table_domain(table, stats, client, config, &result.attempts);
        result.trace.detected_domain = domain;
    }

    const std::set<RelationLabel> vocabulary = stats.vocabulary();
    const Table typing_sample = sample_rows(table, config.type_sample_limit);
    std::set<RelationLabel> already_predicted;

    for (int col : target_columns) {
        detail::Stopwatch column_watch;
        Annotation annotation;
        annotation.column = {table.id, col};

        PrimitiveType column_type =
            detect_column_type(typing_sample, col, config.inference_type_mode, config.type_sample_limit);
        CandidateSet candidates = reduce(vocabulary, domain, column_type, already_predicted,
                                         already_predicted, stats, config.approach);
        if (candidates.empty()) {
            annotation.status = AnnotationStatus::NoCandidates;
            annotation.attempts = 1;
            annotation.elapsed_seconds = column_watch.seconds();
            result.trace.annotations.push_back(std::move(annotation));
            continue;
        }

        LlmRequest request;
        request.kind = PromptKind::Annotation;
        request.candidates = candidates.relation_strings();
        request.table_id = table.id;
        request.column_index = col;
        if (auto it = table.ground_truth.find(col); it != table.ground_truth.end()) {
            request.ground_truth = it->second.str();
        }

        const RenderedPrompt main_prompt = render_annotation_prompt(
            table, col, candidates, config.prompt_parts, config.excerpt_rows, config.annotation_template);

        std::optional<RelationLabel> predicted;
        std::string previous_text;
        int attempt = 1;
        for (; attempt <= 3; ++attempt) {
            RenderedPrompt prompt = main_prompt;
            bool use_fallback_model = false;
            if (attempt == 2) {
                prompt = render_retry_prompt(previous_text.empty() ? "(empty reply)" : previous_text,
                                             candidates);
                request.kind = PromptKind::Retry;
            } else if (attempt == 3) {
                request.kind = PromptKind::Annotation;
                use_fallback_model = true;
            }
            request.prompt_text = prompt.text;

            try {
                LlmResponse response = client.complete(request, use_fallback_model);
                predicted = parse_single_relation(response.text, candidates);
                result.attempts.push_back({table.id, col, attempt, detail::prompt_hash(prompt),
                                           response.model_used, response.latency_seconds,
                                           predicted ? "ok:" + predicted->str() : "parse-miss"});
                if (predicted) break;
                previous_text = response.text;
            } catch (const TransportError&) {
                result.attempts.push_back(
                    {table.id, col, attempt, detail::prompt_hash(prompt), client.describe(), 0.0,
                     "transport-error"});
                break;
            }
        }

        if (predicted) {
            annotation.status = AnnotationStatus::Ok;
            annotation.predicted = predicted;
            annotation.attempts = attempt;
            already_predicted.insert(*predicted);
        } else {
            annotation.status = AnnotationStatus::FailedFormat;
            annotation.attempts = std::min(attempt, 3);
        }
        annotation.elapsed_seconds = column_watch.seconds();
        result.trace.annotations.push_back(std::move(annotation));
    }

    for (const auto& a : result.trace.annotations) {
        if (a.status != AnnotationStatus::Ok) ++result.trace.failed_count;
    }
    result.trace.total_seconds = table_watch.seconds();
    return result;
}

struct TargetColumn {
    std::string table_id;
    int column_index = 0;
    std::optional<RelationLabel> relation;  // present when targets come from a ground-truth file
};

struct DatasetRunResult {
    std::vector<TableRunTrace> traces;
    std::vector<AttemptRecord> attempts;
    std::vector<std::string> missing_tables;
};

/// Batch driver: resolves targets to tables, annotates each table (optionally
/// across workers; per-table state stays confined to its worker), and
/// assembles results in table order so outputs are reproducible regardless of
/// scheduling. Targets naming unknown tables are recorded and skipped.
inline DatasetRunResult run_dataset(const std::vector<Table>& tables,
                                    const std::vector<TargetColumn>& targets, const StatsModel& stats,
                                    const RunConfig& config, LlmClient& client, int workers = 1) {
    if (workers < 1) throw ContractError("run_dataset: workers must be >= 1");

    std::map<std::string, size_t> table_index;
    for (size_t i = 0; i < tables.size(); ++i) table_index.emplace(tables[i].id, i);

    std::map<size_t, std::map<int, std::optional<RelationLabel>>> per_table;
    DatasetRunResult result;
    std::set<std::string> missing_seen;
    for (const auto& t : targets) {
        auto it = table_index.find(t.table_id);
        if (it == table_index.end()) {
            if (missing_seen.insert(t.table_id).second) result.missing_tables.push_back(t.table_id);
            continue;
        }
        per_table[it->second][t.column_index] = t.relation;
    }

    struct Job {
        size_t table_pos;
        Table table;  // copy carrying ground truth merged from the target file
        std::vector<int> columns;
    };
    std::vector<Job> jobs;
    jobs.reserve(per_table.size());
    for (const auto& [pos, columns] : per_table) {
        Job job;
        job.table_pos = pos;
        job.table = tables[pos];
        for (const auto& [col, rel] : columns) {
            job.columns.push_back(col);
            if (rel) job.table.ground_truth.emplace(col, *rel);
        }
        jobs.push_back(std::move(job));
    }

    std::vector<TableRunResult> outputs(jobs.size());
    if (workers == 1 || jobs.size() <= 1) {
        for (size_t i = 0; i < jobs.size(); ++i) {
            outputs[i] = annotate_table(jobs[i].table, jobs[i].columns, stats, config, client);
        }
    } else {
        std::atomic<size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&]() {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                try {
                    outputs[i] = annotate_table(jobs[i].table, jobs[i].columns, stats, config, client);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        int n = std::min<int>(workers, static_cast<int>(jobs.size()));
        pool.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    for (auto& out : outputs) {
        result.traces.push_back(std::move(out.trace));
        result.attempts.insert(result.attempts.end(), out.attempts.begin(), out.attempts.end());
    }
    return result;
}

/// Predictions in the shape the challenge evaluator consumes:
/// table_id,column_index,relation with an empty relation field for failures.
inline void write_predictions_csv(std::ostream& out, const DatasetRunResult& result) {
    out << "table_id,column_index,relation\n";
    for (const auto& trace : result.traces) {
        for (const auto& a : trace.annotations) {
            write_csv_row(out, {a.column.table_id, std::to_string(a.column.column_index),
                                a.predicted ? a.predicted->str() : std::string{}});
        }
    }
}

/// One JSON object per LLM call: prompt hash, model, latency, parse outcome.
inline void write_trace_jsonl(std::ostream& out, const DatasetRunResult& result) {
    for (const auto& a : result.attempts) {
        nlohmann::json j;
        j["table_id"] = a.table_id;
        j["column_index"] = a.column_index;
        j["attempt"] = a.attempt;
        j["prompt_hash"] = a.prompt_hash;
        j["model"] = a.model;
        j["latency_seconds"] = a.latency_seconds;
        j["outcome"] = a.outcome;
        out << j.dump() << '\n';
    }
}

}  // namespace cpa

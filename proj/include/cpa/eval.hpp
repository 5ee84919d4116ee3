#pragma once

#include <cstdint>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpa/errors.hpp"
#include "cpa/table.hpp"

namespace cpa {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;    // ground-truth occurrences
    std::int64_t predicted = 0;  // submitted predictions of this class
    std::int64_t correct = 0;
};

/// Challenge-style scores. Micro metrics pool all decisions: precision over
/// submitted predictions, recall over all targets. Macro-F1 averages
/// per-class F1 over the classes present in the ground truth.
struct EvalReport {
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::map<RelationLabel, ClassMetrics> per_class;
    std::int64_t targets = 0;
    std::int64_t submitted = 0;
    std::int64_t correct = 0;
    std::int64_t failed_iterations = 0;  // blank predictions
    double mean_seconds_per_column = 0.0;
    std::vector<std::string> issues;  // duplicate or unknown-key rows, excluded from scoring
};

struct PredictionRow {
    std::string table_id;
    int column_index = 0;
    std::string relation;  // empty marks a failed column
};

struct GroundTruthRow {
    std::string table_id;
    int column_index = 0;
    RelationLabel relation;
};

/// Score predictions against ground truth. A prediction is correct iff it
/// exactly matches the ground-truth relation for its (table, column) key.
/// Duplicate prediction keys and predictions for non-target columns are
/// reported and excluded from "submitted"; blank predictions count against
/// recall but not precision.
inline EvalReport evaluate(const std::vector<PredictionRow>& predictions,
                           const std::vector<GroundTruthRow>& ground_truth,
                           double mean_seconds_per_column = 0.0) {
    using Key = std::pair<std::string, int>;
    EvalReport report;
    report.mean_seconds_per_column = mean_seconds_per_column;

    std::map<Key, RelationLabel> gt;
    for (const auto& row : ground_truth) {
        auto [it, inserted] = gt.emplace(Key{row.table_id, row.column_index}, row.relation);
        if (!inserted) {
            report.issues.push_back("DuplicateGroundTruth: " + row.table_id + ":" +
                                    std::to_string(row.column_index));
        }
    }
    report.targets = static_cast<std::int64_t>(gt.size());

    std::map<Key, int> key_counts;
    for (const auto& row : predictions) ++key_counts[{row.table_id, row.column_index}];

    for (const auto& [t, rels] : gt) report.per_class[rels].support++;

    for (const auto& row : predictions) {
        Key key{row.table_id, row.column_index};
        if (key_counts[key] > 1) {
            report.issues.push_back("DuplicatePrediction: " + row.table_id + ":" +
                                    std::to_string(row.column_index));
            continue;
        }
        auto gt_it = gt.find(key);
        if (gt_it == gt.end()) {
            report.issues.push_back("UnknownKey: " + row.table_id + ":" +
                                    std::to_string(row.column_index));
            continue;
        }
        if (trim_view(row.relation).empty()) {
            ++report.failed_iterations;
            continue;
        }
        RelationLabel predicted(row.relation);
        ++report.submitted;
        auto& metrics = report.per_class[predicted];
        ++metrics.predicted;
        if (predicted == gt_it->second) {
            ++report.correct;
            ++metrics.correct;
        }
    }

    double macro_sum = 0.0;
    std::int64_t macro_classes = 0;
    for (auto& [rel, m] : report.per_class) {
        m.precision = m.predicted > 0 ? static_cast<double>(m.correct) / static_cast<double>(m.predicted) : 0.0;
        m.recall = m.support > 0 ? static_cast<double>(m.correct) / static_cast<double>(m.support) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        if (m.support > 0) {
            macro_sum += m.f1;
            ++macro_classes;
        }
    }
    report.macro_f1 = macro_classes > 0 ? macro_sum / static_cast<double>(macro_classes) : 0.0;
    report.precision =
        report.submitted > 0 ? static_cast<double>(report.correct) / static_cast<double>(report.submitted) : 0.0;
    report.recall =
        report.targets > 0 ? static_cast<double>(report.correct) / static_cast<double>(report.targets) : 0.0;
    report.micro_f1 = (report.precision + report.recall) > 0.0
                          ? 2.0 * report.precision * report.recall / (report.precision + report.recall)
                          : 0.0;
    return report;
}

/// Relations the run identified with perfect precision: predicted at least
/// once and never wrongly. Classes never predicted give no evidence and stay
/// out of the gate.
inline std::set<RelationLabel> compute_precision_gate(const EvalReport& report) {
    std::set<RelationLabel> gate;
    for (const auto& [rel, m] : report.per_class) {
        if (m.predicted >= 1 && m.correct == m.predicted) gate.insert(rel);
    }
    return gate;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["micro_f1"] = report.micro_f1;
    j["macro_f1"] = report.macro_f1;
    j["precision"] = report.precision;
    j["recall"] = report.recall;
    j["targets"] = report.targets;
    j["submitted"] = report.submitted;
    j["correct"] = report.correct;
    j["failed_iterations"] = report.failed_iterations;
    j["mean_seconds_per_column"] = report.mean_seconds_per_column;
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [rel, m] : report.per_class) {
        per_class[rel.str()] = {{"precision", m.precision}, {"recall", m.recall},     {"f1", m.f1},
                                {"support", m.support},     {"predicted", m.predicted}, {"correct", m.correct}};
    }
    j["per_class"] = per_class;
    j["issues"] = report.issues;
    return j;
}

/// Fixed-order score line used by the CLI: Macro_F1, Micro_F1, P, R, Time.
inline std::string format_report_table(const EvalReport& report, std::string_view label = "") {
    std::ostringstream out;
    out << std::left << std::setw(10) << "Approach" << std::right << std::setw(10) << "Macro_F1"
        << std::setw(10) << "Micro_F1" << std::setw(8) << "P" << std::setw(8) << "R" << std::setw(9)
        << "Time(s)" << '\n';
    out << std::left << std::setw(10) << (label.empty() ? "-" : label) << std::right << std::fixed
        << std::setprecision(3) << std::setw(10) << report.macro_f1 << std::setw(10) << report.micro_f1
        << std::setw(8) << report.precision << std::setw(8) << report.recall << std::setprecision(2)
        << std::setw(9) << report.mean_seconds_per_column << '\n';
    return out.str();
}

}  // namespace cpa

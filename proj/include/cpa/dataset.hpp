#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cpa/csv.hpp"
#include "cpa/errors.hpp"
#include "cpa/eval.hpp"
#include "cpa/pipeline.hpp"
#include "cpa/table.hpp"

namespace cpa {

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void expect_header(const std::vector<std::string>& header, const std::vector<std::string>& expected,
                          const std::string& what) {
    if (header.size() < expected.size()) {
        throw MalformedInputError(what + ": missing header row (expected " + join(expected, ",") + ")");
    }
    for (size_t i = 0; i < expected.size(); ++i) {
        if (to_lower(trim(header[i])) != expected[i]) {
            throw MalformedInputError(what + ": unexpected header column '" + header[i] + "' (expected '" +
                                      expected[i] + "')");
        }
    }
}

inline int parse_column_index(const std::string& field, const std::string& what) {
    try {
        size_t pos = 0;
        int v = std::stoi(field, &pos);
        if (pos != field.size() || v < 0) throw std::invalid_argument("range");
        return v;
    } catch (const std::exception&) {
        throw MalformedInputError(what + ": bad column index '" + field + "'");
    }
}

}  // namespace detail

/// Ground truth: CSV with header table_id,column_index,relation.
inline std::vector<GroundTruthRow> load_ground_truth_csv(const std::filesystem::path& path) {
    auto rows = parse_csv(detail::read_file(path));
    if (rows.empty()) throw MalformedInputError("ground truth " + path.string() + ": empty file");
    detail::expect_header(rows[0], {"table_id", "column_index", "relation"}, "ground truth");
    std::vector<GroundTruthRow> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() < 3) {
            throw MalformedInputError("ground truth: row " + std::to_string(i + 1) + " has too few fields");
        }
        out.push_back({rows[i][0], detail::parse_column_index(rows[i][1], "ground truth"),
                       RelationLabel(rows[i][2])});
    }
    return out;
}

/// Targets for annotation: either the 3-column ground-truth shape (relations
/// then also feed the oracle backend) or a bare 2-column
/// table_id,column_index list.
inline std::vector<TargetColumn> load_targets_csv(const std::filesystem::path& path) {
    auto rows = parse_csv(detail::read_file(path));
    if (rows.empty()) throw MalformedInputError("targets " + path.string() + ": empty file");
    detail::expect_header(rows[0], {"table_id", "column_index"}, "targets");
    bool has_relation = rows[0].size() >= 3 && to_lower(trim(rows[0][2])) == "relation";
    std::vector<TargetColumn> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() < 2) {
            throw MalformedInputError("targets: row " + std::to_string(i + 1) + " has too few fields");
        }
        TargetColumn t;
        t.table_id = rows[i][0];
        t.column_index = detail::parse_column_index(rows[i][1], "targets");
        if (has_relation && rows[i].size() >= 3 && !trim(rows[i][2]).empty()) {
            t.relation = RelationLabel(rows[i][2]);
        }
        out.push_back(std::move(t));
    }
    return out;
}

/// Sidecar mapping table ids to domains: CSV with header table_id,domain.
inline std::map<std::string, DomainLabel> load_domain_map_csv(const std::filesystem::path& path) {
    auto rows = parse_csv(detail::read_file(path));
    if (rows.empty()) throw MalformedInputError("domain map " + path.string() + ": empty file");
    detail::expect_header(rows[0], {"table_id", "domain"}, "domain map");
    std::map<std::string, DomainLabel> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() < 2) {
            throw MalformedInputError("domain map: row " + std::to_string(i + 1) + " has too few fields");
        }
        out.emplace(rows[i][0], DomainLabel(rows[i][1]));
    }
    return out;
}

/// Dataset convention where each file name starts with its domain, e.g.
/// "Book_0423.csv" -> Book.
inline std::optional<DomainLabel> domain_from_filename(std::string_view stem) {
    size_t us = stem.find('_');
    if (us == std::string_view::npos || us == 0) return std::nullopt;
    return DomainLabel(stem.substr(0, us));
}

enum class DomainSource { None, SidecarMap, FilenamePrefix };

struct CorpusOptions {
    TableFormat format = TableFormat::Csv;
    DomainSource domain_source = DomainSource::None;
    std::filesystem::path domain_map_path;
};

struct LoadedCorpus {
    std::vector<Table> tables;
    int files_seen = 0;
    int files_skipped_malformed = 0;
    std::vector<std::string> warnings;
};

/// Load every table file in a directory, sorted by file name for
/// reproducibility. Malformed files are skipped and counted, not fatal.
/// Ground truth, when supplied, is attached by table id; rows naming invalid
/// columns are dropped with a warning so Table invariants hold.
inline LoadedCorpus load_corpus_dir(const std::filesystem::path& dir, const CorpusOptions& options,
                                    const std::vector<GroundTruthRow>* ground_truth = nullptr) {
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());

    std::map<std::string, DomainLabel> domain_map;
    if (options.domain_source == DomainSource::SidecarMap) {
        domain_map = load_domain_map_csv(options.domain_map_path);
    }
    std::map<std::string, std::map<int, RelationLabel>> gt_by_table;
    if (ground_truth != nullptr) {
        for (const auto& row : *ground_truth) gt_by_table[row.table_id].emplace(row.column_index, row.relation);
    }

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = to_lower(entry.path().extension().string());
        bool matches = options.format == TableFormat::Csv ? (ext == ".csv")
                                                          : (ext == ".json" || ext == ".jsonl");
        if (matches) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    LoadedCorpus out;
    for (const auto& path : files) {
        ++out.files_seen;
        std::string stem = path.stem().string();
        Table table;
        try {
            table = parse_table(detail::read_file(path), options.format, stem);
        } catch (const MalformedInputError& e) {
            ++out.files_skipped_malformed;
            out.warnings.push_back("skipped " + path.filename().string() + ": " + e.what());
            continue;
        }
        if (options.domain_source == DomainSource::SidecarMap) {
            auto it = domain_map.find(stem);
            if (it != domain_map.end()) table.domain = it->second;
        } else if (options.domain_source == DomainSource::FilenamePrefix) {
            table.domain = domain_from_filename(stem);
            if (!table.domain) {
                out.warnings.push_back("no domain prefix in file name: " + path.filename().string());
            }
        }
        if (auto it = gt_by_table.find(stem); it != gt_by_table.end()) {
            for (const auto& [col, rel] : it->second) {
                if (col >= table.column_count) {
                    out.warnings.push_back("ground truth column " + std::to_string(col) +
                                           " out of range for table " + stem);
                    continue;
                }
                table.ground_truth.emplace(col, rel);
            }
        }
        out.tables.push_back(std::move(table));
    }
    return out;
}

/// Predictions file as written by the pipeline: table_id,column_index,relation
/// with blank relations marking failed columns.
inline std::vector<PredictionRow> load_predictions_csv(const std::filesystem::path& path) {
    auto rows = parse_csv(detail::read_file(path));
    if (rows.empty()) throw MalformedInputError("predictions " + path.string() + ": empty file");
    detail::expect_header(rows[0], {"table_id", "column_index", "relation"}, "predictions");
    std::vector<PredictionRow> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() < 2) {
            throw MalformedInputError("predictions: row " + std::to_string(i + 1) + " has too few fields");
        }
        PredictionRow p;
        p.table_id = rows[i][0];
        p.column_index = detail::parse_column_index(rows[i][1], "predictions");
        p.relation = rows[i].size() >= 3 ? rows[i][2] : std::string{};
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace cpa

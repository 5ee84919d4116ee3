#pragma once

#include <compare>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpa/csv.hpp"
#include "cpa/errors.hpp"
#include "cpa/util.hpp"

namespace cpa {

/// A target-KG property identifier, e.g. a schema.org property name.
/// The value is trimmed on construction and compared byte-exactly; there is
/// no case folding at this layer.
class RelationLabel {
public:
    RelationLabel() = default;
    explicit RelationLabel(std::string_view v) : value_(trim(v)) {
        if (value_.empty()) throw MalformedInputError("relation label must be non-empty");
    }
    const std::string& str() const { return value_; }
    auto operator<=>(const RelationLabel&) const = default;

private:
    std::string value_;
};

/// An entity type / table topic, e.g. "Book" or "Person".
class DomainLabel {
public:
    DomainLabel() = default;
    explicit DomainLabel(std::string_view v) : value_(trim(v)) {
        if (value_.empty()) throw MalformedInputError("domain label must be non-empty");
    }
    const std::string& str() const { return value_; }
    auto operator<=>(const DomainLabel&) const = default;

private:
    std::string value_;
};

/// One parsed data point: a rectangular grid of cell strings with optional
/// domain label and optional per-column ground-truth relations. All typing of
/// cell contents happens later; cells stay raw strings here.
struct Table {
    std::string id;
    int column_count = 0;
    std::vector<std::vector<std::string>> rows;
    std::optional<DomainLabel> domain;
    std::map<int, RelationLabel> ground_truth;  // empty means unlabeled

    int row_count() const { return static_cast<int>(rows.size()); }
    const std::string& cell(int row, int col) const { return rows[static_cast<size_t>(row)][static_cast<size_t>(col)]; }
    bool operator==(const Table&) const = default;
};

struct ColumnRef {
    std::string table_id;
    int column_index = 0;
    auto operator<=>(const ColumnRef&) const = default;
};

enum class AnnotationStatus { Ok, FailedFormat, NoCandidates };

inline std::string_view to_string(AnnotationStatus s) {
    switch (s) {
        case AnnotationStatus::Ok: return "ok";
        case AnnotationStatus::FailedFormat: return "failed_format";
        case AnnotationStatus::NoCandidates: return "no_candidates";
    }
    return "unknown";
}

/// One column's outcome. `predicted` is present exactly when status is Ok;
/// `attempts` counts main prompt, single-word retry, and fallback-model
/// re-ask, so it is always in {1, 2, 3}.
struct Annotation {
    ColumnRef column;
    std::optional<RelationLabel> predicted;
    AnnotationStatus status = AnnotationStatus::FailedFormat;
    int attempts = 1;
    double elapsed_seconds = 0.0;
};

enum class TableFormat { Csv, JsonRows };

inline TableFormat table_format_from_string(std::string_view s) {
    std::string v = to_lower(trim_view(s));
    if (v == "csv") return TableFormat::Csv;
    if (v == "jsonrows" || v == "json") return TableFormat::JsonRows;
    throw ConfigError("unknown table format: " + std::string(s));
}

namespace detail {

inline std::string json_scalar_to_cell(const nlohmann::json& v, size_t line_no) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "";
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw MalformedInputError("jsonrows: non-scalar cell value at line " + std::to_string(line_no));
}

}  // namespace detail

/// Parse raw bytes into a Table.
///
/// CSV input must carry a header row; the header establishes the column count
/// and is not kept as data. JSON-rows input is one JSON array per line with
/// the first line establishing the column count. In both formats short rows
/// are padded with empty strings and over-long rows are a MalformedInputError.
inline Table parse_table(std::string_view raw, TableFormat format, std::string id = {}) {
    Table t;
    t.id = std::move(id);
    if (format == TableFormat::Csv) {
        auto parsed = parse_csv(raw);
        if (parsed.empty()) {
            throw MalformedInputError("csv: missing header row");
        }
        t.column_count = static_cast<int>(parsed[0].size());
        for (size_t r = 1; r < parsed.size(); ++r) {
            auto& row = parsed[r];
            if (static_cast<int>(row.size()) > t.column_count) {
                throw MalformedInputError("csv: row " + std::to_string(r) + " has " +
                                          std::to_string(row.size()) + " cells, header has " +
                                          std::to_string(t.column_count));
            }
            row.resize(static_cast<size_t>(t.column_count));
            t.rows.push_back(std::move(row));
        }
    } else {
        size_t line_no = 0;
        size_t start = 0;
        bool saw_first = false;
        while (start <= raw.size()) {
            size_t pos = raw.find('\n', start);
            std::string_view line = (pos == std::string_view::npos)
                                        ? raw.substr(start)
                                        : raw.substr(start, pos - start);
            start = (pos == std::string_view::npos) ? raw.size() + 1 : pos + 1;
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            if (trim_view(line).empty()) continue;

            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception&) {
                throw MalformedInputError("jsonrows: invalid JSON at line " + std::to_string(line_no));
            }
            if (!j.is_array()) {
                throw MalformedInputError("jsonrows: line " + std::to_string(line_no) + " is not an array");
            }
            std::vector<std::string> row;
            row.reserve(j.size());
            for (const auto& v : j) row.push_back(detail::json_scalar_to_cell(v, line_no));
            if (!saw_first) {
                t.column_count = static_cast<int>(row.size());
                saw_first = true;
            } else if (static_cast<int>(row.size()) > t.column_count) {
                throw MalformedInputError("jsonrows: row at line " + std::to_string(line_no) +
                                          " is wider than the first row");
            }
            row.resize(static_cast<size_t>(t.column_count));
            t.rows.push_back(std::move(row));
        }
        if (!saw_first) throw MalformedInputError("jsonrows: no rows");
    }
    if (t.column_count < 1) throw MalformedInputError("table must have at least one column");
    return t;
}

/// Inverse of parse_table for round-trips. CSV output uses a synthetic
/// c0..cN header; cell text survives byte-exactly in both formats.
inline std::string serialize_table(const Table& t, TableFormat format) {
    std::ostringstream out;
    if (format == TableFormat::Csv) {
        std::vector<std::string> header;
        header.reserve(static_cast<size_t>(t.column_count));
        for (int c = 0; c < t.column_count; ++c) header.push_back("c" + std::to_string(c));
        write_csv_row(out, header);
        for (const auto& row : t.rows) write_csv_row(out, row);
    } else {
        for (const auto& row : t.rows) {
            nlohmann::json j = nlohmann::json::array();
            for (const auto& cell : row) j.push_back(cell);
            out << j.dump() << '\n';
        }
    }
    return out.str();
}

/// Head sample: the first min(n, row_count) rows with id, width and labels
/// preserved. Deterministic so that dictionary builds are reproducible.
inline Table sample_rows(const Table& t, int n) {
    if (n < 1) throw ContractError("sample_rows: n must be >= 1");
    Table out = t;
    if (out.row_count() > n) out.rows.resize(static_cast<size_t>(n));
    return out;
}

inline std::vector<std::string> column_values(const Table& t, int column_index) {
    if (column_index < 0 || column_index >= t.column_count) {
        throw ContractError("column index " + std::to_string(column_index) + " out of range for table " + t.id);
    }
    std::vector<std::string> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) out.push_back(row[static_cast<size_t>(column_index)]);
    return out;
}

}  // namespace cpa

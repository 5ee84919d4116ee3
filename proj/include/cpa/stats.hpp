#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpa/errors.hpp"
#include "cpa/table.hpp"
#include "cpa/type_detect.hpp"
#include "cpa/util.hpp"

namespace cpa {

/// Per-primitive-type relation counts plus the frequency-filtered sets.
/// filtered[t] keeps the relations whose count reaches the threshold share of
/// the most frequent relation under t.
struct RangeDict {
    std::map<PrimitiveType, std::map<RelationLabel, std::int64_t>> counts;
    std::map<PrimitiveType, std::set<RelationLabel>> filtered;
    bool operator==(const RangeDict&) const = default;
};

using DomainDict = std::map<DomainLabel, std::set<RelationLabel>>;
using CoAppearanceDict = std::map<std::pair<DomainLabel, RelationLabel>, std::set<RelationLabel>>;

/// The three search-space-reduction dictionaries plus build metadata.
/// Produced offline, once per dataset, by a single pass over the labeled
/// training corpus.
struct StatsModel {
    DomainDict domain_dict;
    RangeDict range_dict;
    CoAppearanceDict co_dict;
    double threshold = 0.05;
    int sample_size = 500;
    std::string corpus_fingerprint;

    bool operator==(const StatsModel&) const = default;

    /// Every relation observed anywhere in the training corpus.
    std::set<RelationLabel> vocabulary() const {
        std::set<RelationLabel> out;
        for (const auto& [d, rels] : domain_dict) out.insert(rels.begin(), rels.end());
        for (const auto& [t, per_rel] : range_dict.counts) {
            for (const auto& [r, n] : per_rel) out.insert(r);
        }
        return out;
    }

    const std::set<RelationLabel>* co_partners(const DomainLabel& domain, const RelationLabel& relation) const {
        auto it = co_dict.find({domain, relation});
        return it == co_dict.end() ? nullptr : &it->second;
    }
};

struct BuildReport {
    int tables_seen = 0;
    int tables_used = 0;
    int tables_skipped_missing_labels = 0;
    std::int64_t columns_counted = 0;
};

namespace detail {

inline std::uint64_t table_fingerprint(const Table& t) {
    std::string buf = t.id;
    buf.push_back('\x1f');
    if (t.domain) buf += t.domain->str();
    for (const auto& [col, rel] : t.ground_truth) {
        buf.push_back('\x1e');
        buf += std::to_string(col);
        buf.push_back('=');
        buf += rel.str();
    }
    return fnv1a64(buf);
}

}  // namespace detail

/// One-pass accumulator over labeled tables. Partial accumulators merge
/// associatively (counts add, sets union), so a sharded build finalizes to
/// the same model as a sequential one; the threshold cut happens only in
/// finalize().
class StatsAccumulator {
public:
    explicit StatsAccumulator(int sample_size = 500) : sample_size_(sample_size) {
        if (sample_size < 1) throw ContractError("stats: sample_size must be >= 1");
    }

    /// Tables lacking a domain or ground truth are skipped and counted in the
    /// build report.
    void add(const Table& table) {
        ++report_.tables_seen;
        if (!table.domain || table.ground_truth.empty()) {
            ++report_.tables_skipped_missing_labels;
            return;
        }
        Table sample = sample_rows(table, sample_size_);
        const DomainLabel& domain = *table.domain;

        std::set<RelationLabel> relations;  // a relation counts once per table
        for (const auto& [col, rel] : table.ground_truth) {
            domain_dict_[domain].insert(rel);
            PrimitiveType t = detect_column_type(sample, col, TypeDetectMode::FirstCell, sample_size_);
            ++range_counts_[t][rel];
            relations.insert(rel);
            ++report_.columns_counted;
        }
        for (auto it = relations.begin(); it != relations.end(); ++it) {
            for (auto jt = std::next(it); jt != relations.end(); ++jt) {
                co_[{domain, *it}].insert(*jt);
                co_[{domain, *jt}].insert(*it);
            }
        }
        fingerprint_ ^= detail::table_fingerprint(table);
        ++report_.tables_used;
    }

    void merge(const StatsAccumulator& other) {
        if (other.sample_size_ != sample_size_) {
            throw ContractError("stats: cannot merge accumulators with different sample sizes");
        }
        report_.tables_seen += other.report_.tables_seen;
        report_.tables_used += other.report_.tables_used;
        report_.tables_skipped_missing_labels += other.report_.tables_skipped_missing_labels;
        report_.columns_counted += other.report_.columns_counted;
        for (const auto& [d, rels] : other.domain_dict_) domain_dict_[d].insert(rels.begin(), rels.end());
        for (const auto& [t, per_rel] : other.range_counts_) {
            for (const auto& [r, n] : per_rel) range_counts_[t][r] += n;
        }
        for (const auto& [key, partners] : other.co_) co_[key].insert(partners.begin(), partners.end());
        fingerprint_ ^= other.fingerprint_;
    }

    const BuildReport& report() const { return report_; }

    /// Applies the frequency cut and stamps metadata. A relation survives
    /// under type t when its count reaches ceil(threshold * max_count[t]).
    StatsModel finalize(double threshold) const {
        if (!(threshold > 0.0 && threshold <= 1.0)) {
            throw ContractError("stats: threshold must be in (0, 1]");
        }
        if (report_.tables_used == 0) {
            throw EmptyCorpusError("stats: no usable labeled tables in corpus");
        }
        StatsModel model;
        model.domain_dict = domain_dict_;
        model.range_dict.counts = range_counts_;
        model.co_dict = co_;
        model.threshold = threshold;
        model.sample_size = sample_size_;
        model.corpus_fingerprint =
            "fnv1a:" + hex64(fingerprint_) + ":" + std::to_string(report_.tables_used);
        for (const auto& [t, per_rel] : range_counts_) {
            std::int64_t max_count = 0;
            for (const auto& [r, n] : per_rel) max_count = std::max(max_count, n);
            auto cut = static_cast<std::int64_t>(std::ceil(threshold * static_cast<double>(max_count)));
            for (const auto& [r, n] : per_rel) {
                if (n >= cut) model.range_dict.filtered[t].insert(r);
            }
        }
        return model;
    }

private:
    int sample_size_;
    BuildReport report_;
    DomainDict domain_dict_;
    std::map<PrimitiveType, std::map<RelationLabel, std::int64_t>> range_counts_;
    CoAppearanceDict co_;
    std::uint64_t fingerprint_ = 0;
};

struct BuildResult {
    StatsModel model;
    BuildReport report;
};

inline BuildResult build_stats(const std::vector<Table>& corpus, double threshold = 0.05,
                               int sample_size = 500) {
    StatsAccumulator acc(sample_size);
    for (const auto& t : corpus) acc.add(t);
    return {acc.finalize(threshold), acc.report()};
}

inline constexpr int kStatsSchemaVersion = 1;

namespace detail {

inline nlohmann::json relation_set_to_json(const std::set<RelationLabel>& rels) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rels) arr.push_back(r.str());  // std::set iterates sorted
    return arr;
}

inline std::set<RelationLabel> relation_set_from_json(const nlohmann::json& arr) {
    std::set<RelationLabel> out;
    for (const auto& v : arr) out.insert(RelationLabel(v.get<std::string>()));
    return out;
}

}  // namespace detail

inline nlohmann::json stats_to_json(const StatsModel& model) {
    nlohmann::json j;
    j["version"] = kStatsSchemaVersion;
    j["threshold"] = model.threshold;
    j["sample_size"] = model.sample_size;
    j["corpus_fingerprint"] = model.corpus_fingerprint;
    nlohmann::json dd = nlohmann::json::object();
    for (const auto& [d, rels] : model.domain_dict) dd[d.str()] = detail::relation_set_to_json(rels);
    j["domain_dict"] = dd;
    nlohmann::json rc = nlohmann::json::object();
    for (const auto& [t, per_rel] : model.range_dict.counts) {
        nlohmann::json m = nlohmann::json::object();
        for (const auto& [r, n] : per_rel) m[r.str()] = n;
        rc[std::string(to_string(t))] = m;
    }
    j["range_dict_counts"] = rc;
    nlohmann::json rf = nlohmann::json::object();
    for (const auto& [t, rels] : model.range_dict.filtered) {
        rf[std::string(to_string(t))] = detail::relation_set_to_json(rels);
    }
    j["range_dict_filtered"] = rf;
    nlohmann::json co = nlohmann::json::object();
    for (const auto& [key, partners] : model.co_dict) {
        co[key.first.str() + "." + key.second.str()] = detail::relation_set_to_json(partners);
    }
    j["co_dict"] = co;
    return j;
}

inline StatsModel stats_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || !j["version"].is_number_integer()) {
        throw IoError("stats file: missing version field");
    }
    int version = j["version"].get<int>();
    if (version != kStatsSchemaVersion) {
        throw SchemaVersionError("stats file: schema version " + std::to_string(version) +
                                 " is not supported (expected " + std::to_string(kStatsSchemaVersion) + ")");
    }
    try {
        StatsModel model;
        model.threshold = j.at("threshold").get<double>();
        model.sample_size = j.at("sample_size").get<int>();
        model.corpus_fingerprint = j.at("corpus_fingerprint").get<std::string>();
        for (const auto& [d, rels] : j.at("domain_dict").items()) {
            model.domain_dict[DomainLabel(d)] = detail::relation_set_from_json(rels);
        }
        for (const auto& [t, per_rel] : j.at("range_dict_counts").items()) {
            auto type = primitive_type_from_string(t);
            for (const auto& [r, n] : per_rel.items()) {
                model.range_dict.counts[type][RelationLabel(r)] = n.get<std::int64_t>();
            }
        }
        for (const auto& [t, rels] : j.at("range_dict_filtered").items()) {
            model.range_dict.filtered[primitive_type_from_string(t)] = detail::relation_set_from_json(rels);
        }
        for (const auto& [key, partners] : j.at("co_dict").items()) {
            size_t dot = key.find('.');
            if (dot == std::string::npos || dot == 0 || dot + 1 >= key.size()) {
                throw IoError("stats file: malformed co_dict key: " + key);
            }
            model.co_dict[{DomainLabel(key.substr(0, dot)), RelationLabel(key.substr(dot + 1))}] =
                detail::relation_set_from_json(partners);
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("stats file: ") + e.what());
    }
}

inline void save_stats(const StatsModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << stats_to_json(model).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

inline StatsModel load_stats(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("stats file " + path.string() + ": " + e.what());
    }
    return stats_from_json(j);
}

}  // namespace cpa

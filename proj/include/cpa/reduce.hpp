#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cpa/errors.hpp"
#include "cpa/stats.hpp"
#include "cpa/type_detect.hpp"

namespace cpa {

enum class CoAppearanceMode { Off, Always, PrecisionGated };

/// Which reduction filters a run applies. The named variants:
///   base = none, d = domain, r = range, c = co-appearance,
///   rd = range+domain, rdc = range+domain+co-appearance,
///   rdc_p = rdc with co-appearance anchored only on precision-1.0 relations.
struct ApproachConfig {
    bool use_domain = false;
    bool use_range = false;
    CoAppearanceMode coappearance = CoAppearanceMode::Off;
    std::optional<std::set<RelationLabel>> precision_gate;

    static ApproachConfig from_name(std::string_view name) {
        std::string v = to_lower(trim_view(name));
        if (v == "base") return {};
        if (v == "d") return {.use_domain = true};
        if (v == "r") return {.use_range = true};
        if (v == "c") return {.coappearance = CoAppearanceMode::Always};
        if (v == "rd") return {.use_domain = true, .use_range = true};
        if (v == "rdc") return {.use_domain = true, .use_range = true, .coappearance = CoAppearanceMode::Always};
        if (v == "rdc_p") {
            return {.use_domain = true, .use_range = true, .coappearance = CoAppearanceMode::PrecisionGated};
        }
        throw ConfigError("unknown approach variant: " + std::string(name) +
                          " (expected base|d|r|c|rd|rdc|rdc_p)");
    }

    std::string name() const {
        if (coappearance == CoAppearanceMode::PrecisionGated) return "rdc_p";
        std::string n;
        if (use_range) n += 'r';
        if (use_domain) n += 'd';
        if (coappearance == CoAppearanceMode::Always) n += 'c';
        return n.empty() ? "base" : n;
    }
};

/// The ordered candidate list handed to the prompt, plus a record of which
/// filters shaped it. Relations are sorted lexicographically so prompts are
/// deterministic across runs.
struct CandidateSet {
    std::vector<RelationLabel> relations;
    std::vector<std::string> applied_filters;
    bool fallback_used = false;

    bool empty() const { return relations.empty(); }
    bool contains(const RelationLabel& r) const {
        return std::binary_search(relations.begin(), relations.end(), r);
    }
    std::vector<std::string> relation_strings() const {
        std::vector<std::string> out;
        out.reserve(relations.size());
        for (const auto& r : relations) out.push_back(r.str());
        return out;
    }
};

namespace detail {

inline std::set<RelationLabel> set_intersect(const std::set<RelationLabel>& a,
                                             const std::set<RelationLabel>& b) {
    std::set<RelationLabel> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.begin()));
    return out;
}

inline std::set<RelationLabel> set_minus(const std::set<RelationLabel>& a,
                                         const std::set<RelationLabel>& b) {
    std::set<RelationLabel> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.begin()));
    return out;
}

}  // namespace detail

/// Compute one column's candidate relations.
///
/// Filters apply in the order domain, range, co-appearance, each an
/// intersection; relations already predicted for this table are removed last.
/// Co-appearance intersects with the union of the partners of every anchor
/// (all prior predictions under Always; prior predictions inside the
/// precision gate under PrecisionGated) and contributes nothing when the
/// anchor set is empty. A domain missing from the dictionary turns the domain
/// filter into a tagged no-op rather than a failure.
///
/// When everything is filtered away and enable_fallback is set, filters are
/// undone one at a time, last-applied first, until the set is non-empty —
/// the LLM should never face an empty choice list. The final floor is the
/// full vocabulary minus prior predictions, which can itself be empty only
/// when the table has more target columns than there are relations.
inline CandidateSet reduce(const std::set<RelationLabel>& full_vocab,
                           const std::optional<DomainLabel>& domain, PrimitiveType column_type,
                           const std::set<RelationLabel>& already_predicted,
                           const std::set<RelationLabel>& anchor_predictions,
                           const StatsModel& stats, const ApproachConfig& config,
                           bool enable_fallback = true) {
    if (config.use_domain && !domain) {
        throw ContractError("reduce: domain filter requires a domain");
    }
    if (config.coappearance == CoAppearanceMode::PrecisionGated && !config.precision_gate) {
        throw ContractError("reduce: precision-gated co-appearance requires a gate set");
    }

    CandidateSet out;
    std::set<RelationLabel> current = full_vocab;
    // Snapshots taken before each applied filter, for last-in-first-out undo.
    std::vector<std::pair<std::string, std::set<RelationLabel>>> undo_stack;

    auto apply = [&](const char* tag, const std::set<RelationLabel>& filter_set) {
        undo_stack.emplace_back(tag, current);
        current = detail::set_intersect(current, filter_set);
        out.applied_filters.emplace_back(tag);
    };

    if (config.use_domain) {
        auto it = stats.domain_dict.find(*domain);
        if (it == stats.domain_dict.end()) {
            out.applied_filters.emplace_back("domain:unknown");
        } else {
            apply("domain", it->second);
        }
    }
    if (config.use_range) {
        static const std::set<RelationLabel> kEmpty;
        auto it = stats.range_dict.filtered.find(column_type);
        apply("range", it == stats.range_dict.filtered.end() ? kEmpty : it->second);
    }
    if (config.coappearance != CoAppearanceMode::Off) {
        if (!domain) {
            out.applied_filters.emplace_back("coappearance:no-domain");
        } else {
            std::set<RelationLabel> anchors = anchor_predictions;
            if (config.coappearance == CoAppearanceMode::PrecisionGated) {
                anchors = detail::set_intersect(anchors, *config.precision_gate);
            }
            if (!anchors.empty()) {
                std::set<RelationLabel> partners;
                for (const auto& a : anchors) {
                    if (const auto* p = stats.co_partners(*domain, a)) {
                        partners.insert(p->begin(), p->end());
                    }
                }
                apply("coappearance", partners);
            }
        }
    }

    std::set<RelationLabel> result = detail::set_minus(current, already_predicted);
    while (result.empty() && enable_fallback && !undo_stack.empty()) {
        auto [tag, before] = std::move(undo_stack.back());
        undo_stack.pop_back();
        out.fallback_used = true;
        out.applied_filters.push_back("removed:" + tag);
        result = detail::set_minus(before, already_predicted);
    }

    out.relations.assign(result.begin(), result.end());  // set order is lexicographic
    return out;
}

}  // namespace cpa

#pragma once

#include <array>
#include <cctype>
#include <map>
#include <string>
#include <string_view>

#include "cpa/errors.hpp"
#include "cpa/table.hpp"
#include "cpa/util.hpp"

namespace cpa {

/// The four primitive value types used for range filtering. String is the
/// universal fallback.
enum class PrimitiveType { String, Number, Date, Url };

inline std::string_view to_string(PrimitiveType t) {
    switch (t) {
        case PrimitiveType::String: return "String";
        case PrimitiveType::Number: return "Number";
        case PrimitiveType::Date: return "Date";
        case PrimitiveType::Url: return "URL";
    }
    return "String";
}

inline PrimitiveType primitive_type_from_string(std::string_view s) {
    std::string v = to_lower(trim_view(s));
    if (v == "string") return PrimitiveType::String;
    if (v == "number") return PrimitiveType::Number;
    if (v == "date") return PrimitiveType::Date;
    if (v == "url") return PrimitiveType::Url;
    throw ConfigError("unknown primitive type: " + std::string(s));
}

namespace detail {

// Grammar tables. Tune these against a corpus without touching the logic.

inline constexpr std::array<std::string_view, 3> kUrlSchemes = {"http", "https", "ftp"};

inline constexpr std::array<std::string_view, 58> kKnownTlds = {
    "ai",  "ar", "asia", "at", "au", "be", "biz", "br", "ca", "ch", "cn", "co",  "com", "cz", "de",
    "dev", "dk", "edu",  "es", "eu", "fi", "fr",  "gov", "gr", "hu", "ie", "il", "in",  "info",
    "int", "io", "it",   "jp", "kr", "mil", "mobi", "mx", "name", "net", "nl",  "no",  "nz",
    "org", "pl", "pro",  "pt", "ru", "se", "tr",  "tv", "ua", "uk", "us", "xyz", "za",  "app",
    "me",  "travel"};

struct MonthName {
    std::string_view name;
    int month;
};

inline constexpr std::array<MonthName, 24> kMonthNames = {{
    {"january", 1},  {"jan", 1},  {"february", 2}, {"feb", 2},  {"march", 3},     {"mar", 3},
    {"april", 4},    {"apr", 4},  {"may", 5},      {"may", 5},  {"june", 6},      {"jun", 6},
    {"july", 7},     {"jul", 7},  {"august", 8},   {"aug", 8},  {"september", 9}, {"sep", 9},
    {"october", 10}, {"oct", 10}, {"november", 11}, {"nov", 11}, {"december", 12}, {"dec", 12},
}};

// Years outside this window are treated as plain numbers; date parsing on noisy
// web tables otherwise produces outliers.
inline constexpr int kMinYear = 1000;
inline constexpr int kMaxYear = 2999;

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_alpha(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
inline bool is_alnum(char c) { return is_digit(c) || is_alpha(c); }

inline bool is_known_tld(std::string_view label) {
    std::string lower = to_lower(label);
    for (auto tld : kKnownTlds) {
        if (lower == tld) return true;
    }
    return false;
}

inline bool valid_host_label(std::string_view label) {
    if (label.empty()) return false;
    if (label.front() == '-' || label.back() == '-') return false;
    for (char c : label) {
        if (!is_alnum(c) && c != '-') return false;
    }
    return true;
}

inline bool is_url(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (is_space_char(c)) return false;
    }
    // Scheme-prefixed form.
    size_t scheme_end = s.find("://");
    if (scheme_end != std::string_view::npos) {
        std::string scheme = to_lower(s.substr(0, scheme_end));
        for (auto known : kUrlSchemes) {
            if (scheme == known) return s.size() > scheme_end + 3;
        }
        return false;
    }
    // Bare registered domain: needs a known TLD, plus either a path or a
    // leading www label. Web-table URLs are frequently scheme-less.
    size_t slash = s.find('/');
    std::string_view host = (slash == std::string_view::npos) ? s : s.substr(0, slash);
    bool has_path = slash != std::string_view::npos;
    auto labels = split(host, '.');
    if (labels.size() < 2) return false;
    for (const auto& label : labels) {
        if (!valid_host_label(label)) return false;
    }
    if (!is_known_tld(labels.back())) return false;
    bool has_www = to_lower(labels.front()) == "www";
    return has_path || has_www;
}

// Number grammar: optional sign, digits with optional thousands separators
// (comma, thin space, narrow no-break space), optional decimal part, optional
// exponent, plus at most one leading or trailing currency symbol or percent
// sign. Grouped digits must come in strict groups of three.
inline constexpr std::array<std::string_view, 5> kNumberAdornments = {
    "$", "%", "\xe2\x82\xac" /* euro */, "\xc2\xa3" /* pound */, "\xc2\xa5" /* yen */};

inline constexpr std::array<std::string_view, 3> kGroupSeparators = {
    ",", "\xe2\x80\x89" /* thin space */, "\xe2\x80\xaf" /* narrow nbsp */};

inline bool consume_prefix(std::string_view& s, std::string_view prefix) {
    if (s.substr(0, prefix.size()) == prefix) {
        s.remove_prefix(prefix.size());
        return true;
    }
    return false;
}

inline bool consume_adornment(std::string_view& s) {
    for (auto a : kNumberAdornments) {
        if (consume_prefix(s, a)) return true;
    }
    return false;
}

inline size_t take_digits(std::string_view& s) {
    size_t n = 0;
    while (!s.empty() && is_digit(s.front())) {
        s.remove_prefix(1);
        ++n;
    }
    return n;
}

inline bool is_number(std::string_view s) {
    if (s.empty()) return false;
    bool adorned = false;
    if (consume_adornment(s)) {
        adorned = true;
        consume_prefix(s, " ");
        if (s.empty()) return false;
    }
    if (!s.empty() && (s.front() == '+' || s.front() == '-')) s.remove_prefix(1);

    std::string_view after_first = s;
    size_t first_digits = take_digits(s);
    bool has_int_part = first_digits > 0;

    // Thousands-separated integer part.
    if (has_int_part && first_digits <= 3) {
        for (auto sep : kGroupSeparators) {
            std::string_view probe = after_first;
            probe.remove_prefix(first_digits);
            size_t groups = 0;
            while (consume_prefix(probe, sep)) {
                std::string_view group_start = probe;
                if (take_digits(probe) != 3 || group_start.size() - probe.size() != 3) break;
                ++groups;
            }
            if (groups > 0) {
                // Re-check the tail after the last full group; a dangling
                // separator or short group falls through to String.
                std::string_view rest = after_first;
                rest.remove_prefix(first_digits);
                size_t consumed_groups = 0;
                while (consumed_groups < groups) {
                    if (!consume_prefix(rest, sep)) break;
                    take_digits(rest);
                    ++consumed_groups;
                }
                s = rest;
                break;
            }
        }
    }

    bool has_fraction = false;
    if (!s.empty() && s.front() == '.') {
        s.remove_prefix(1);
        if (take_digits(s) == 0) return false;
        has_fraction = true;
    }
    if (!has_int_part && !has_fraction) return false;

    if (!s.empty() && (s.front() == 'e' || s.front() == 'E')) {
        s.remove_prefix(1);
        if (!s.empty() && (s.front() == '+' || s.front() == '-')) s.remove_prefix(1);
        if (take_digits(s) == 0) return false;
    }

    if (!s.empty() && !adorned) {
        consume_prefix(s, " ");
        if (!consume_adornment(s)) return false;
    }
    return s.empty();
}

inline int days_in_month(int year, int month) {
    static constexpr std::array<int, 12> days = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month < 1 || month > 12) return 0;
    bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    return (month == 2 && leap) ? 29 : days[static_cast<size_t>(month - 1)];
}

inline bool valid_ymd(int year, int month, int day) {
    if (year < kMinYear || year > kMaxYear) return false;
    if (month < 1 || month > 12) return false;
    return day >= 1 && day <= days_in_month(year, month);
}

inline bool take_uint(std::string_view& s, size_t min_digits, size_t max_digits, int& out) {
    size_t n = 0;
    int value = 0;
    while (n < max_digits && n < s.size() && is_digit(s[n])) {
        value = value * 10 + (s[n] - '0');
        ++n;
    }
    if (n < min_digits) return false;
    if (n < s.size() && is_digit(s[n])) return false;  // longer run than allowed
    s.remove_prefix(n);
    out = value;
    return true;
}

inline bool take_month_name(std::string_view& s, int& out) {
    size_t n = 0;
    while (n < s.size() && is_alpha(s[n])) ++n;
    if (n < 3) return false;
    std::string word = to_lower(s.substr(0, n));
    for (const auto& m : kMonthNames) {
        if (word == m.name) {
            s.remove_prefix(n);
            out = m.month;
            return true;
        }
    }
    return false;
}

inline void skip_spaces(std::string_view& s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
}

// ISO 8601 calendar date, optionally followed by a time-of-day and zone.
inline bool match_iso(std::string_view s) {
    int y = 0, mo = 0, d = 0;
    if (!take_uint(s, 4, 4, y)) return false;
    if (!consume_prefix(s, "-")) return false;
    if (!take_uint(s, 2, 2, mo)) return false;
    if (!consume_prefix(s, "-")) return false;
    if (!take_uint(s, 2, 2, d)) return false;
    if (!valid_ymd(y, mo, d)) return false;
    if (s.empty()) return true;
    if (!consume_prefix(s, "T") && !consume_prefix(s, " ")) return false;
    int h = 0, mi = 0;
    if (!take_uint(s, 2, 2, h) || h > 23) return false;
    if (!consume_prefix(s, ":")) return false;
    if (!take_uint(s, 2, 2, mi) || mi > 59) return false;
    if (consume_prefix(s, ":")) {
        int sec = 0;
        if (!take_uint(s, 2, 2, sec) || sec > 60) return false;
        if (consume_prefix(s, ".")) {
            if (take_digits(s) == 0) return false;
        }
    }
    if (s.empty()) return true;
    if (consume_prefix(s, "Z")) return s.empty();
    if (!consume_prefix(s, "+") && !consume_prefix(s, "-")) return false;
    int oh = 0, om = 0;
    if (!take_uint(s, 2, 2, oh) || oh > 14) return false;
    consume_prefix(s, ":");
    if (!take_uint(s, 2, 2, om) || om > 59) return false;
    return s.empty();
}

// "4 March 2021" / "04 Mar 2021"
inline bool match_dd_month_yyyy(std::string_view s) {
    int d = 0, mo = 0, y = 0;
    if (!take_uint(s, 1, 2, d)) return false;
    if (s.empty() || s.front() != ' ') return false;
    skip_spaces(s);
    if (!take_month_name(s, mo)) return false;
    if (s.empty() || s.front() != ' ') return false;
    skip_spaces(s);
    if (!take_uint(s, 4, 4, y)) return false;
    return s.empty() && valid_ymd(y, mo, d);
}

// "March 4, 2021"
inline bool match_month_dd_yyyy(std::string_view s) {
    int d = 0, mo = 0, y = 0;
    if (!take_month_name(s, mo)) return false;
    if (s.empty() || s.front() != ' ') return false;
    skip_spaces(s);
    if (!take_uint(s, 1, 2, d)) return false;
    if (!consume_prefix(s, ",")) return false;
    skip_spaces(s);
    if (!take_uint(s, 4, 4, y)) return false;
    return s.empty() && valid_ymd(y, mo, d);
}

// "2021/03/04"
inline bool match_yyyy_slash(std::string_view s) {
    int y = 0, mo = 0, d = 0;
    if (!take_uint(s, 4, 4, y)) return false;
    if (!consume_prefix(s, "/")) return false;
    if (!take_uint(s, 1, 2, mo)) return false;
    if (!consume_prefix(s, "/")) return false;
    if (!take_uint(s, 1, 2, d)) return false;
    return s.empty() && valid_ymd(y, mo, d);
}

// "MM/DD/YYYY" tried before "DD/MM/YYYY".
inline bool match_slash_date(std::string_view s) {
    int a = 0, b = 0, y = 0;
    if (!take_uint(s, 1, 2, a)) return false;
    if (!consume_prefix(s, "/")) return false;
    if (!take_uint(s, 1, 2, b)) return false;
    if (!consume_prefix(s, "/")) return false;
    if (!take_uint(s, 4, 4, y)) return false;
    if (!s.empty()) return false;
    return valid_ymd(y, a, b) || valid_ymd(y, b, a);
}

inline bool is_date(std::string_view s) {
    return match_iso(s) || match_dd_month_yyyy(s) || match_month_dd_yyyy(s) ||
           match_yyyy_slash(s) || match_slash_date(s);
}

}  // namespace detail

/// Classify one cell. Total and deterministic; decided most-specific-first
/// (URL, then Date, then Number) with String as the fallback. Empty and
/// whitespace-only cells are String.
inline PrimitiveType detect_cell_type(std::string_view cell) {
    std::string_view s = trim_view(cell);
    if (s.empty()) return PrimitiveType::String;
    if (detail::is_url(s)) return PrimitiveType::Url;
    if (detail::is_date(s)) return PrimitiveType::Date;
    if (detail::is_number(s)) return PrimitiveType::Number;
    return PrimitiveType::String;
}

enum class TypeDetectMode { FirstCell, MajorityVote };

inline TypeDetectMode type_detect_mode_from_string(std::string_view s) {
    std::string v = to_lower(trim_view(s));
    if (v == "first_cell" || v == "first") return TypeDetectMode::FirstCell;
    if (v == "majority" || v == "majority_vote") return TypeDetectMode::MajorityVote;
    throw ConfigError("unknown type detection mode: " + std::string(s));
}

/// Column-level type. FirstCell takes the type of the first non-empty cell;
/// MajorityVote takes the mode over up to sample_limit non-empty cells, with
/// ties resolving away from String and otherwise to the type seen first in
/// column order. An all-empty column is String.
inline PrimitiveType detect_column_type(const Table& table, int column_index, TypeDetectMode mode,
                                        int sample_limit = 500) {
    if (sample_limit < 1) throw ContractError("detect_column_type: sample_limit must be >= 1");
    if (column_index < 0 || column_index >= table.column_count) {
        throw ContractError("detect_column_type: column index out of range");
    }

    std::map<PrimitiveType, int> counts;
    std::map<PrimitiveType, int> first_seen;
    int seen = 0;
    for (int r = 0; r < table.row_count() && seen < sample_limit; ++r) {
        std::string_view cell = trim_view(table.cell(r, column_index));
        if (cell.empty()) continue;
        PrimitiveType t = detect_cell_type(cell);
        if (mode == TypeDetectMode::FirstCell) return t;
        if (counts[t]++ == 0) first_seen[t] = seen;
        ++seen;
    }
    if (counts.empty()) return PrimitiveType::String;

    int best = 0;
    for (const auto& [t, n] : counts) best = std::max(best, n);
    PrimitiveType winner = PrimitiveType::String;
    int winner_first = -1;
    for (const auto& [t, n] : counts) {
        if (n != best || t == PrimitiveType::String) continue;
        if (winner_first < 0 || first_seen[t] < winner_first) {
            winner = t;
            winner_first = first_seen[t];
        }
    }
    if (winner_first < 0) return PrimitiveType::String;  // only String reached the max
    return winner;
}

}  // namespace cpa

#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cpa/errors.hpp"
#include "cpa/reduce.hpp"
#include "cpa/table.hpp"
#include "cpa/util.hpp"

namespace cpa {

/// Independently toggleable prompt sections. All three on is the full prompt;
/// all three off is the bare task statement.
struct PromptParts {
    bool include_role = true;
    bool include_example = true;
    bool include_cot = true;

    /// Parse a comma-separated subset of {role, example, cot}; "none" or the
    /// empty string disables all three.
    static PromptParts from_spec(std::string_view spec) {
        PromptParts p{false, false, false};
        std::string v = to_lower(trim_view(spec));
        if (v.empty() || v == "none") return p;
        if (v == "full" || v == "all") return PromptParts{};
        for (const auto& part : split(v, ',')) {
            std::string s = trim(part);
            if (s == "role") p.include_role = true;
            else if (s == "example") p.include_example = true;
            else if (s == "cot") p.include_cot = true;
            else throw ConfigError("unknown prompt part: " + s);
        }
        return p;
    }

    std::string spec() const {
        std::vector<std::string> on;
        if (include_role) on.push_back("role");
        if (include_example) on.push_back("example");
        if (include_cot) on.push_back("cot");
        return on.empty() ? "none" : join(on, ",");
    }
};

struct RenderedPrompt {
    std::string text;
    int candidate_count = 0;
    int token_estimate = 0;
};

// Section wording. Each section is a self-contained block ending in a
// newline so that toggling one leaves the rest of the prompt byte-identical.
inline constexpr std::string_view kRoleSectionText =
    "You are an expert in semantic table interpretation and knowledge-graph vocabularies.\n";
inline constexpr std::string_view kExampleSectionText =
    "Example: in a table of people where the marked column holds values like 1974-08-16, "
    "and the candidate list contains birthDate, the correct answer is birthDate.\n";
inline constexpr std::string_view kCotSectionText =
    "Think step by step about what the values in the marked column have in common before "
    "deciding, then give only the final answer.\n";

inline constexpr std::string_view kDefaultAnnotationTemplate =
    "{role}Task: identify the relation between the table's subject and the marked target column.\n"
    "Answer with exactly one relation name copied verbatim from the candidate list below. "
    "Output only that word.\n"
    "{example}{cot}Table excerpt (target column marked with [*]):\n"
    "{table_excerpt}\n"
    "{column_marker}\n"
    "Candidate relations (one per line):\n"
    "{candidates}\n";

/// The annotation prompt skeleton. Wording ships as data so it can be edited
/// without a rebuild; the placeholders {role}, {example}, {cot},
/// {table_excerpt}, {column_marker} and {candidates} are substituted at
/// render time and must all be present.
class PromptTemplate {
public:
    static PromptTemplate default_template() { return PromptTemplate(std::string(kDefaultAnnotationTemplate)); }

    static PromptTemplate from_string(std::string text) {
        static constexpr std::string_view required[] = {"{role}",          "{example}",
                                                        "{cot}",           "{table_excerpt}",
                                                        "{column_marker}", "{candidates}"};
        for (auto placeholder : required) {
            if (text.find(placeholder) == std::string::npos) {
                throw ConfigError("prompt template: missing placeholder " + std::string(placeholder));
            }
        }
        return PromptTemplate(std::move(text));
    }

    static PromptTemplate load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open prompt template: " + path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        return from_string(buf.str());
    }

    const std::string& text() const { return text_; }

private:
    explicit PromptTemplate(std::string text) : text_(std::move(text)) {}
    std::string text_;
};

namespace detail {

inline constexpr size_t kMaxExcerptCellBytes = 80;

inline std::string excerpt_cell(std::string_view cell) {
    std::string out;
    out.reserve(std::min(cell.size(), kMaxExcerptCellBytes + 3));
    for (char c : cell) {
        out.push_back((c == '\n' || c == '\r' || c == '|') ? ' ' : c);
    }
    if (out.size() > kMaxExcerptCellBytes) {
        size_t cut = kMaxExcerptCellBytes;
        while (cut > 0 && (static_cast<unsigned char>(out[cut]) & 0xC0) == 0x80) --cut;  // UTF-8 boundary
        out.resize(cut);
        out += "...";
    }
    return out;
}

/// Pipe-delimited grid of the first excerpt_rows rows under a synthetic
/// c0..cN header; target_column < 0 renders without a marker.
inline std::string render_excerpt(const Table& table, int target_column, int excerpt_rows) {
    std::ostringstream out;
    for (int c = 0; c < table.column_count; ++c) {
        if (c > 0) out << " | ";
        out << 'c' << c;
        if (c == target_column) out << " [*]";
    }
    int n = std::min(excerpt_rows, table.row_count());
    for (int r = 0; r < n; ++r) {
        out << '\n';
        for (int c = 0; c < table.column_count; ++c) {
            if (c > 0) out << " | ";
            out << excerpt_cell(table.cell(r, c));
        }
    }
    return out.str();
}

inline std::string render_choice_list(const std::vector<std::string>& choices) {
    std::ostringstream out;
    for (size_t i = 0; i < choices.size(); ++i) {
        if (i > 0) out << '\n';
        out << "- " << choices[i];
    }
    return out.str();
}

inline void replace_all(std::string& text, std::string_view placeholder, std::string_view value) {
    size_t pos = 0;
    while ((pos = text.find(placeholder, pos)) != std::string::npos) {
        text.replace(pos, placeholder.size(), value);
        pos += value.size();
    }
}

inline int estimate_tokens(std::string_view text) {
    return static_cast<int>((text.size() + 3) / 4);
}

}  // namespace detail

/// Render the main annotation prompt: optional role preamble, the task
/// instruction, optional worked example, optional chain-of-thought nudge, the
/// table excerpt with the target column marked, and the candidate list.
/// Deterministic: identical inputs give byte-identical text.
inline RenderedPrompt render_annotation_prompt(const Table& table, int column_index,
                                               const CandidateSet& candidates, const PromptParts& parts,
                                               int excerpt_rows,
                                               const PromptTemplate& tmpl = PromptTemplate::default_template()) {
    if (candidates.empty()) throw ContractError("render_annotation_prompt: empty candidate list");
    if (excerpt_rows < 1) throw ContractError("render_annotation_prompt: excerpt_rows must be >= 1");
    if (column_index < 0 || column_index >= table.column_count) {
        throw ContractError("render_annotation_prompt: column index out of range");
    }

    std::string text = tmpl.text();
    detail::replace_all(text, "{role}", parts.include_role ? kRoleSectionText : std::string_view{});
    detail::replace_all(text, "{example}", parts.include_example ? kExampleSectionText : std::string_view{});
    detail::replace_all(text, "{cot}", parts.include_cot ? kCotSectionText : std::string_view{});
    detail::replace_all(text, "{table_excerpt}", detail::render_excerpt(table, column_index, excerpt_rows));
    detail::replace_all(text, "{column_marker}", "Target column: c" + std::to_string(column_index));
    detail::replace_all(text, "{candidates}", detail::render_choice_list(candidates.relation_strings()));

    RenderedPrompt out;
    out.candidate_count = static_cast<int>(candidates.relations.size());
    out.token_estimate = detail::estimate_tokens(text);
    out.text = std::move(text);
    return out;
}

/// Short second-stage prompt: quote the previous output and demand exactly
/// one choice from the list.
inline RenderedPrompt render_retry_prompt(std::string_view previous_output,
                                          const std::vector<std::string>& choices) {
    if (previous_output.empty()) throw ContractError("render_retry_prompt: previous output must be non-empty");
    if (choices.empty()) throw ContractError("render_retry_prompt: empty choice list");
    std::ostringstream out;
    out << "Your previous reply could not be read as a single choice from the list.\n"
        << "Previous reply:\n<<<\n"
        << previous_output << "\n>>>\n"
        << "Answer again with exactly one name copied verbatim from this list, and output nothing else:\n"
        << detail::render_choice_list(choices) << '\n';
    RenderedPrompt r;
    r.text = out.str();
    r.candidate_count = static_cast<int>(choices.size());
    r.token_estimate = detail::estimate_tokens(r.text);
    return r;
}

inline RenderedPrompt render_retry_prompt(std::string_view previous_output, const CandidateSet& candidates) {
    return render_retry_prompt(previous_output, candidates.relation_strings());
}

/// Topic-detection prompt: the table excerpt (no target marker) and the
/// closed list of known topics.
inline RenderedPrompt render_topic_prompt(const Table& table, const std::set<DomainLabel>& domains,
                                          int excerpt_rows) {
    if (domains.empty()) throw ContractError("render_topic_prompt: empty domain list");
    if (excerpt_rows < 1) throw ContractError("render_topic_prompt: excerpt_rows must be >= 1");
    std::vector<std::string> names;
    names.reserve(domains.size());
    for (const auto& d : domains) names.push_back(d.str());
    std::ostringstream out;
    out << "Task: identify the topic of the table below.\n"
        << "Answer with exactly one topic name copied verbatim from the candidate list below. "
        << "Output only that word.\n"
        << "Table excerpt:\n"
        << detail::render_excerpt(table, -1, excerpt_rows) << '\n'
        << "Candidate topics (one per line):\n"
        << detail::render_choice_list(names) << '\n';
    RenderedPrompt r;
    r.text = out.str();
    r.candidate_count = static_cast<int>(names.size());
    r.token_estimate = detail::estimate_tokens(r.text);
    return r;
}

}  // namespace cpa

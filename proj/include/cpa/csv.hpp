#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cpa/errors.hpp"

namespace cpa {

/// RFC 4180 reader. Quoted fields may contain delimiters, quotes ("" escape)
/// and line breaks. Accepts LF, CRLF and lone CR row endings. Blank lines are
/// skipped. Throws MalformedInputError on unbalanced or stray quotes.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    enum class State { FieldStart, Unquoted, Quoted, QuoteEnd };
    State state = State::FieldStart;
    size_t chars_in_row = 0;
    size_t line = 1;

    auto end_field = [&]() {
        row.push_back(std::move(field));
        field.clear();
        state = State::FieldStart;
    };
    auto end_row = [&]() {
        end_field();
        if (chars_in_row > 0) rows.push_back(std::move(row));
        row.clear();
        chars_in_row = 0;
    };

    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        bool is_newline = (c == '\n' || c == '\r');
        if (is_newline && state != State::Quoted) {
            end_row();
            ++line;
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            continue;
        }
        ++chars_in_row;
        switch (state) {
            case State::FieldStart:
                if (c == '"') {
                    state = State::Quoted;
                } else if (c == ',') {
                    end_field();
                } else {
                    field.push_back(c);
                    state = State::Unquoted;
                }
                break;
            case State::Unquoted:
                if (c == ',') {
                    end_field();
                } else if (c == '"') {
                    throw MalformedInputError("csv: stray quote in unquoted field at line " +
                                              std::to_string(line));
                } else {
                    field.push_back(c);
                }
                break;
            case State::Quoted:
                if (c == '"') {
                    state = State::QuoteEnd;
                } else {
                    field.push_back(c);
                }
                break;
            case State::QuoteEnd:
                if (c == '"') {
                    field.push_back('"');
                    state = State::Quoted;
                } else if (c == ',') {
                    end_field();
                } else {
                    throw MalformedInputError("csv: unexpected character after closing quote at line " +
                                              std::to_string(line));
                }
                break;
        }
    }
    if (state == State::Quoted) {
        throw MalformedInputError("csv: unbalanced quote at end of input");
    }
    end_row();
    return rows;
}

inline std::string csv_escape(std::string_view field) {
    bool needs_quotes = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs_quotes) return std::string(field);
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out << ',';
        out << csv_escape(fields[i]);
    }
    out << '\n';
}

}  // namespace cpa

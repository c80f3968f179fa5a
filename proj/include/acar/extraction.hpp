#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <numeric>
#include <optional>
#include <regex>
#include <string>
#include <string_view>

#include "acar/error.hpp"

namespace acar {

enum class AnswerFormat { NUMERIC, MULTIPLE_CHOICE, CODE, FREE_TEXT };

inline const char* to_string(AnswerFormat f) {
    switch (f) {
        case AnswerFormat::NUMERIC: return "numeric";
        case AnswerFormat::MULTIPLE_CHOICE: return "multiple_choice";
        case AnswerFormat::CODE: return "code";
        case AnswerFormat::FREE_TEXT: return "free_text";
    }
    return "unknown";
}

inline AnswerFormat answer_format_from_string(std::string_view s) {
    if (s == "numeric") return AnswerFormat::NUMERIC;
    if (s == "multiple_choice") return AnswerFormat::MULTIPLE_CHOICE;
    if (s == "code") return AnswerFormat::CODE;
    if (s == "free_text") return AnswerFormat::FREE_TEXT;
    throw Error(ErrorCode::PARSE_ERROR, "unknown answer format: " + std::string(s));
}

/// The equivalence-class representative that agreement is computed over.
/// Equality is exact string equality on (format, canonical_text).
struct CanonicalAnswer {
    AnswerFormat format = AnswerFormat::FREE_TEXT;
    std::string canonical_text;
    bool extraction_confident = false;
};

inline bool answers_equal(const CanonicalAnswer& a, const CanonicalAnswer& b) {
    if (a.format != b.format) {
        throw Error(ErrorCode::FORMAT_MISMATCH,
                    std::string("cannot compare ") + to_string(a.format) + " with " + to_string(b.format));
    }
    return a.canonical_text == b.canonical_text;
}

namespace detail {

inline bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

/// Lowercase, punctuation stripped, whitespace collapsed.
inline std::string normalize_free_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char raw : text) {
        unsigned char c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_space = true;
        }
    }
    return out;
}

/// Normalizes an integer digit string: no leading zeros, "-0" becomes "0".
inline std::string normalize_integer(bool negative, std::string digits) {
    std::size_t first = digits.find_first_not_of('0');
    digits = (first == std::string::npos) ? "0" : digits.substr(first);
    if (digits == "0") return "0";
    return negative ? "-" + digits : digits;
}

/// Canonical form of one number-like token: sign folded, leading/trailing
/// zeros stripped, rationals gcd-reduced ("2/4" -> "1/2", "4/2" -> "2").
/// Returns nullopt for degenerate tokens (zero denominator).
inline std::optional<std::string> normalize_numeric_token(std::string_view token) {
    std::string t(token);
    bool negative = false;
    if (!t.empty() && (t[0] == '+' || t[0] == '-')) {
        negative = t[0] == '-';
        t.erase(0, 1);
    }
    std::size_t slash = t.find('/');
    if (slash != std::string::npos) {
        std::string num = t.substr(0, slash);
        std::string den = t.substr(slash + 1);
        if (den.find_first_not_of('0') == std::string::npos) return std::nullopt;
        if (num.size() <= 18 && den.size() <= 18) {
            unsigned long long n = std::stoull(num);
            unsigned long long d = std::stoull(den);
            unsigned long long g = std::gcd(n, d);
            n /= g;
            d /= g;
            if (n == 0) return std::string("0");
            std::string reduced = std::to_string(n);
            if (negative) reduced.insert(0, "-");
            if (d != 1) reduced += "/" + std::to_string(d);
            return reduced;
        }
        // Too wide to reduce safely; normalize the parts textually.
        std::string n = normalize_integer(false, num);
        std::string d = normalize_integer(false, den);
        return (negative && n != "0" ? "-" : "") + n + "/" + d;
    }
    std::size_t dot = t.find('.');
    if (dot == std::string::npos) return normalize_integer(negative, t);
    std::string int_part = t.substr(0, dot);
    std::string frac = t.substr(dot + 1);
    std::size_t last = frac.find_last_not_of('0');
    frac = (last == std::string::npos) ? "" : frac.substr(0, last + 1);
    if (frac.empty()) return normalize_integer(negative, int_part.empty() ? "0" : int_part);
    std::size_t first = int_part.find_first_not_of('0');
    int_part = (first == std::string::npos) ? "0" : int_part.substr(first);
    return (negative ? "-" : "") + int_part + "." + frac;
}

/// Finds the last number-like token: integer, decimal, or rational, with an
/// optional sign, bounded by non-word characters on both sides. Last-match
/// favors the final answer after chain-of-thought text.
inline std::optional<std::string> last_numeric_token(const std::string& text) {
    static const std::regex pattern(R"([+-]?(?:\d+/\d+|\d+\.\d*|\.\d+|\d+))");
    std::optional<std::string> best;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), pattern);
         it != std::sregex_iterator(); ++it) {
        std::size_t pos = static_cast<std::size_t>(it->position());
        std::size_t end = pos + static_cast<std::size_t>(it->length());
        if (pos > 0 && (is_word_char(text[pos - 1]) || text[pos - 1] == '.')) continue;
        if (end < text.size() && is_word_char(text[end])) continue;
        auto normalized = normalize_numeric_token(it->str());
        if (normalized) best = std::move(normalized);
    }
    return best;
}

/// Last standalone A-E token (uppercase) or parenthesized option letter
/// (either case), as a single uppercase letter.
inline std::optional<std::string> last_choice_token(const std::string& text) {
    static const std::regex parenthesized(R"(\(([A-Ea-e])\))");
    static const std::regex standalone(R"(\b[A-E]\b)");
    std::optional<char> best;
    std::size_t best_pos = 0;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), parenthesized);
         it != std::sregex_iterator(); ++it) {
        std::size_t pos = static_cast<std::size_t>(it->position());
        if (!best || pos >= best_pos) {
            best = static_cast<char>(std::toupper(static_cast<unsigned char>(it->str(1)[0])));
            best_pos = pos;
        }
    }
    for (auto it = std::sregex_iterator(text.begin(), text.end(), standalone);
         it != std::sregex_iterator(); ++it) {
        std::size_t pos = static_cast<std::size_t>(it->position());
        if (!best || pos >= best_pos) {
            best = it->str()[0];
            best_pos = pos;
        }
    }
    if (!best) return std::nullopt;
    return std::string(1, *best);
}

/// Strips line (//, #) and block comments, normalizes string-literal quotes
/// to double quotes, collapses whitespace runs to single spaces. Comparison
/// is syntactic only; string literal contents are preserved verbatim.
inline std::string normalize_code(std::string_view code) {
    enum class State { NORMAL, LINE_COMMENT, BLOCK_COMMENT, STRING };
    State state = State::NORMAL;
    char string_delim = '"';
    std::string out;
    out.reserve(code.size());
    bool pending_space = false;
    auto emit = [&](char c) {
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    };
    for (std::size_t i = 0; i < code.size(); ++i) {
        char c = code[i];
        switch (state) {
            case State::NORMAL:
                if (c == '/' && i + 1 < code.size() && code[i + 1] == '/') {
                    state = State::LINE_COMMENT;
                    ++i;
                } else if (c == '/' && i + 1 < code.size() && code[i + 1] == '*') {
                    state = State::BLOCK_COMMENT;
                    ++i;
                } else if (c == '#') {
                    state = State::LINE_COMMENT;
                } else if (c == '"' || c == '\'' || c == '`') {
                    string_delim = c;
                    emit('"');
                    state = State::STRING;
                } else if (std::isspace(static_cast<unsigned char>(c))) {
                    pending_space = true;
                } else {
                    emit(c);
                }
                break;
            case State::LINE_COMMENT:
                if (c == '\n') {
                    pending_space = true;
                    state = State::NORMAL;
                }
                break;
            case State::BLOCK_COMMENT:
                if (c == '*' && i + 1 < code.size() && code[i + 1] == '/') {
                    pending_space = true;
                    state = State::NORMAL;
                    ++i;
                }
                break;
            case State::STRING:
                if (c == '\\' && i + 1 < code.size()) {
                    out.push_back(c);
                    out.push_back(code[i + 1]);
                    ++i;
                } else if (c == string_delim) {
                    out.push_back('"');
                    state = State::NORMAL;
                } else {
                    out.push_back(c);
                }
                break;
        }
    }
    return out;
}

/// Contents of the last complete ``` fenced block, language tag dropped.
inline std::optional<std::string> last_fenced_block(const std::string& text) {
    std::optional<std::string> best;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = text.find("```", pos);
        if (open == std::string::npos) break;
        std::size_t close = text.find("```", open + 3);
        if (close == std::string::npos) break;
        std::string body = text.substr(open + 3, close - open - 3);
        std::size_t newline = body.find('\n');
        if (newline != std::string::npos) {
            std::string first_line = body.substr(0, newline);
            bool tag_like = std::all_of(first_line.begin(), first_line.end(), [](char c) {
                return is_word_char(c) || c == '+' || c == '-' ||
                       std::isspace(static_cast<unsigned char>(c));
            });
            if (tag_like) body.erase(0, newline + 1);
        }
        best = std::move(body);
        pos = close + 3;
    }
    return best;
}

} // namespace detail

/// Maps a raw model response to its canonical answer. Total: degenerate
/// inputs yield a low-confidence fallback (the whole response, free-text
/// normalized) rather than an error, so routing always proceeds.
inline CanonicalAnswer extract(const std::string& response, AnswerFormat format) {
    switch (format) {
        case AnswerFormat::NUMERIC: {
            auto token = detail::last_numeric_token(response);
            if (token) return {format, *token, true};
            return {format, detail::normalize_free_text(response), false};
        }
        case AnswerFormat::MULTIPLE_CHOICE: {
            auto letter = detail::last_choice_token(response);
            if (letter) return {format, *letter, true};
            return {format, detail::normalize_free_text(response), false};
        }
        case AnswerFormat::CODE: {
            auto block = detail::last_fenced_block(response);
            if (block) {
                std::string normalized = detail::normalize_code(*block);
                return {format, normalized, !normalized.empty()};
            }
            return {format, detail::normalize_code(response), false};
        }
        case AnswerFormat::FREE_TEXT: {
            std::string normalized = detail::normalize_free_text(response);
            bool confident = !normalized.empty();
            return {format, normalized, confident};
        }
    }
    return {format, "", false};
}

} // namespace acar

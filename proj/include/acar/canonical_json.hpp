#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>

#include <json.hpp>

namespace acar {

/// Fixed-precision decimal formatting. One serialization for every writer is
/// what makes byte-level replay comparison possible, so all decimals in run
/// artifacts go through here. Negative zero collapses to zero.
inline std::string fixed_decimal(double value, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
    std::string s(buf);
    if (s.find_first_of("123456789") == std::string::npos && s[0] == '-') {
        s.erase(0, 1);
    }
    return s;
}

/// Rounds to the value the fixed-precision serialization denotes, so
/// in-memory doubles and reparsed artifacts compare equal.
inline double round_decimal(double value, int precision) {
    return std::strtod(fixed_decimal(value, precision).c_str(), nullptr);
}

/// JSON string literal with deterministic escaping.
inline std::string json_string(std::string_view s) {
    return nlohmann::json(std::string(s)).dump();
}

/// Incremental writer for canonical JSON objects/arrays: the caller supplies
/// keys in sorted order and pre-rendered values; output carries no
/// insignificant whitespace.
class CanonicalObject {
public:
    CanonicalObject() : out_("{") {}

    CanonicalObject& raw(std::string_view key, std::string_view rendered_value) {
        if (!first_) out_.push_back(',');
        first_ = false;
        out_ += json_string(key);
        out_.push_back(':');
        out_ += rendered_value;
        return *this;
    }

    CanonicalObject& str(std::string_view key, std::string_view value) {
        return raw(key, json_string(value));
    }

    CanonicalObject& boolean(std::string_view key, bool value) {
        return raw(key, value ? "true" : "false");
    }

    CanonicalObject& integer(std::string_view key, long long value) {
        return raw(key, std::to_string(value));
    }

    CanonicalObject& unsigned_integer(std::string_view key, unsigned long long value) {
        return raw(key, std::to_string(value));
    }

    CanonicalObject& decimal(std::string_view key, double value, int precision) {
        return raw(key, fixed_decimal(value, precision));
    }

    CanonicalObject& null(std::string_view key) {
        return raw(key, "null");
    }

    std::string finish() {
        out_.push_back('}');
        return std::move(out_);
    }

private:
    std::string out_;
    bool first_ = true;
};

class CanonicalArray {
public:
    CanonicalArray() : out_("[") {}

    CanonicalArray& raw(std::string_view rendered_value) {
        if (!first_) out_.push_back(',');
        first_ = false;
        out_ += rendered_value;
        return *this;
    }

    CanonicalArray& str(std::string_view value) { return raw(json_string(value)); }

    CanonicalArray& decimal(double value, int precision) {
        return raw(fixed_decimal(value, precision));
    }

    std::string finish() {
        out_.push_back(']');
        return std::move(out_);
    }

private:
    std::string out_;
    bool first_ = true;
};

} // namespace acar

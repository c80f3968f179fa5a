#pragma once

#include <stdexcept>
#include <string>

namespace acar {

// Contract-level failure identities. Tests match on the code, not the text.
enum class ErrorCode {
    DUPLICATE_ID,
    INVALID_RECORD,
    ILLEGAL_TRANSITION,
    PARSE_ERROR,
    IO_ERROR,
    FORMAT_MISMATCH,
    ARITY_ERROR,
    NO_MAJORITY,
    PROVIDER_ERROR,
    SIM_PROFILE_MISSING,
    INVALID_PROFILE,
    EMPTY_INPUT,
    INSUFFICIENT_DATA,
    UNDEFINED_CORRELATION,
    NONDETERMINISTIC_BASE,
    MISSING_TASK,
    CONFIG_ERROR,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DUPLICATE_ID: return "DUPLICATE_ID";
        case ErrorCode::INVALID_RECORD: return "INVALID_RECORD";
        case ErrorCode::ILLEGAL_TRANSITION: return "ILLEGAL_TRANSITION";
        case ErrorCode::PARSE_ERROR: return "PARSE_ERROR";
        case ErrorCode::IO_ERROR: return "IO_ERROR";
        case ErrorCode::FORMAT_MISMATCH: return "FORMAT_MISMATCH";
        case ErrorCode::ARITY_ERROR: return "ARITY_ERROR";
        case ErrorCode::NO_MAJORITY: return "NO_MAJORITY";
        case ErrorCode::PROVIDER_ERROR: return "PROVIDER_ERROR";
        case ErrorCode::SIM_PROFILE_MISSING: return "SIM_PROFILE_MISSING";
        case ErrorCode::INVALID_PROFILE: return "INVALID_PROFILE";
        case ErrorCode::EMPTY_INPUT: return "EMPTY_INPUT";
        case ErrorCode::INSUFFICIENT_DATA: return "INSUFFICIENT_DATA";
        case ErrorCode::UNDEFINED_CORRELATION: return "UNDEFINED_CORRELATION";
        case ErrorCode::NONDETERMINISTIC_BASE: return "NONDETERMINISTIC_BASE";
        case ErrorCode::MISSING_TASK: return "MISSING_TASK";
        case ErrorCode::CONFIG_ERROR: return "CONFIG_ERROR";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace acar

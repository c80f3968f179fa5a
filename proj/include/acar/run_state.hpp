#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "acar/error.hpp"

namespace acar {

/// Run lifecycle states. Progress is forward-only:
/// PENDING -> EXECUTING -> VERIFYING -> COMPLETED, nothing else.
enum class RunState { PENDING, EXECUTING, VERIFYING, COMPLETED };

inline const char* to_string(RunState s) {
    switch (s) {
        case RunState::PENDING: return "PENDING";
        case RunState::EXECUTING: return "EXECUTING";
        case RunState::VERIFYING: return "VERIFYING";
        case RunState::COMPLETED: return "COMPLETED";
    }
    return "UNKNOWN";
}

inline RunState run_state_from_string(std::string_view s) {
    if (s == "PENDING") return RunState::PENDING;
    if (s == "EXECUTING") return RunState::EXECUTING;
    if (s == "VERIFYING") return RunState::VERIFYING;
    if (s == "COMPLETED") return RunState::COMPLETED;
    throw Error(ErrorCode::PARSE_ERROR, "unknown run state: " + std::string(s));
}

constexpr std::array<RunState, 4> kAllRunStates = {
    RunState::PENDING, RunState::EXECUTING, RunState::VERIFYING, RunState::COMPLETED};

/// True for exactly the 3 legal ordered pairs out of the 16 possible.
inline bool is_legal_transition(RunState from, RunState to) {
    return (from == RunState::PENDING && to == RunState::EXECUTING) ||
           (from == RunState::EXECUTING && to == RunState::VERIFYING) ||
           (from == RunState::VERIFYING && to == RunState::COMPLETED);
}

/// Tracks one run's state with local logical ticks. Illegal transitions
/// throw and leave the machine untouched.
class RunStateMachine {
public:
    RunStateMachine() { history_.emplace_back(RunState::PENDING, 0); }

    RunState current() const { return history_.back().first; }

    const std::vector<std::pair<RunState, std::uint64_t>>& history() const { return history_; }

    void transition(RunState next) {
        if (!is_legal_transition(current(), next)) {
            throw Error(ErrorCode::ILLEGAL_TRANSITION,
                        std::string(to_string(current())) + " -> " + to_string(next));
        }
        history_.emplace_back(next, history_.back().second + 1);
    }

private:
    std::vector<std::pair<RunState, std::uint64_t>> history_;
};

} // namespace acar

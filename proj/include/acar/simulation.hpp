#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "acar/extraction.hpp"
#include "acar/jungler.hpp"
#include "acar/providers.hpp"
#include "acar/rng.hpp"

namespace acar {

/// A task list plus the simulated answer profiles that drive it.
struct SimulatedScenario {
    std::vector<SimulatedTaskProfile> profiles;
    // Task fields mirrored here so callers can write a tasks.jsonl.
    struct TaskSeed {
        std::string task_id;
        std::string benchmark;
        std::string prompt;
        AnswerFormat format = AnswerFormat::NUMERIC;
        CanonicalAnswer gold;
    };
    std::vector<TaskSeed> tasks;
};

namespace detail {

inline SimulatedScenario::TaskSeed make_task(const std::string& task_id,
                                             const std::string& benchmark,
                                             const std::string& gold) {
    return {task_id, benchmark, "Task " + task_id + ": compute the value.",
            AnswerFormat::NUMERIC, CanonicalAnswer{AnswerFormat::NUMERIC, gold, true}};
}

} // namespace detail

/// Workload whose probe-answer mix is calibrated so that, with 3 probe
/// samples, the three variance classes land at the observed escalation
/// fractions (0.329 single, 0.213 lite, 0.458 full). Derivation:
///   easy   {gold: 1.0}            -> P(s=0) = 1
///   medium {gold: .5, alt: .5}    -> P(s=0) = 1/4,   P(s=.5) = 3/4
///   hard   uniform over 100       -> P(s=0) = 1e-4,  P(s=.5) = .0297, P(s=1) = .9702
/// Solving the 3x3 mix for the target class probabilities gives archetype
/// fractions (0.262627, 0.265305, 0.472072).
inline SimulatedScenario build_escalation_workload(std::size_t n, const std::string& benchmark) {
    SimulatedScenario scenario;
    std::size_t easy = static_cast<std::size_t>(std::lround(0.262627 * static_cast<double>(n)));
    std::size_t medium = static_cast<std::size_t>(std::lround(0.265305 * static_cast<double>(n)));
    if (easy + medium > n) medium = n - easy;
    std::size_t hard = n - easy - medium;

    std::size_t index = 0;
    auto task_id = [&]() { return "esc-" + std::to_string(++index); };
    for (std::size_t i = 0; i < easy; ++i) {
        auto t = detail::make_task(task_id(), benchmark, "7");
        SimulatedTaskProfile p;
        p.task_id = t.task_id;
        p.answer_format = t.format;
        p.correct_answer = t.gold.canonical_text;
        p.answer_distribution = {{"7", 1.0}};
        scenario.tasks.push_back(t);
        scenario.profiles.push_back(std::move(p));
    }
    for (std::size_t i = 0; i < medium; ++i) {
        auto t = detail::make_task(task_id(), benchmark, "11");
        SimulatedTaskProfile p;
        p.task_id = t.task_id;
        p.answer_format = t.format;
        p.correct_answer = t.gold.canonical_text;
        p.answer_distribution = {{"11", 0.5}, {"12", 0.5}};
        scenario.tasks.push_back(t);
        scenario.profiles.push_back(std::move(p));
    }
    for (std::size_t i = 0; i < hard; ++i) {
        auto t = detail::make_task(task_id(), benchmark, "500");
        SimulatedTaskProfile p;
        p.task_id = t.task_id;
        p.answer_format = t.format;
        p.correct_answer = t.gold.canonical_text;
        for (long a = 0; a < 100; ++a) {
            p.answer_distribution.push_back({std::to_string(500 + a), 0.01});
        }
        scenario.tasks.push_back(t);
        scenario.profiles.push_back(std::move(p));
    }
    return scenario;
}

/// Workload reproducing the agreement-but-wrong ceiling: wrong_fraction of
/// the tasks have a probe distribution unanimous on a wrong answer, so the
/// router must stay single-agent and miss them. Ensemble bias gives the
/// first ensemble model the correct answer and the others distinct wrong
/// ones, so a full 3-model arena recovers exactly those tasks.
inline SimulatedScenario build_agreement_wrong_workload(std::size_t n, double wrong_fraction,
                                                        const std::vector<std::string>& ensemble,
                                                        const std::string& benchmark) {
    SimulatedScenario scenario;
    std::size_t wrong =
        static_cast<std::size_t>(std::lround(wrong_fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
        bool unanimous_wrong = i < wrong;
        auto t = detail::make_task("agw-" + std::to_string(i + 1), benchmark, "42");
        SimulatedTaskProfile p;
        p.task_id = t.task_id;
        p.answer_format = t.format;
        p.correct_answer = t.gold.canonical_text;
        if (unanimous_wrong) {
            p.answer_distribution = {{"13", 1.0}};
            p.per_model_bias[ensemble.at(0)] = {{"42", 1.0}};
            p.per_model_bias[ensemble.at(1)] = {{"13", 1.0}};
            p.per_model_bias[ensemble.at(2)] = {{"77", 1.0}};
        } else {
            p.answer_distribution = {{"42", 1.0}};
        }
        scenario.tasks.push_back(t);
        scenario.profiles.push_back(std::move(p));
    }
    return scenario;
}

/// Workload where each ensemble model is independently correct with its own
/// probability (wrong answers are model-specific and distinct), so stacking
/// models helps: expected accuracy ordering SINGLE <= ARENA_2 <= ARENA_3.
/// Per-task correctness is fixed at build time from a seeded stream, making
/// every configuration run over it fully deterministic at temperature 0.
inline SimulatedScenario build_monotone_workload(std::size_t n, std::uint64_t seed,
                                                 const std::vector<std::string>& ensemble,
                                                 const std::vector<double>& correct_prob,
                                                 const std::string& benchmark) {
    SimulatedScenario scenario;
    for (std::size_t i = 0; i < n; ++i) {
        auto t = detail::make_task("mono-" + std::to_string(i + 1), benchmark, "100");
        SimulatedTaskProfile p;
        p.task_id = t.task_id;
        p.answer_format = t.format;
        p.correct_answer = t.gold.canonical_text;
        p.answer_distribution = {{"100", 1.0}}; // probe unused by fixed configs
        for (std::size_t m = 0; m < ensemble.size(); ++m) {
            CounterRng rng = CounterRng::keyed(seed, {t.task_id, ensemble[m], "monotone"});
            bool correct = rng.uniform() < correct_prob.at(m);
            std::string answer = correct ? "100" : std::to_string(200 + m);
            p.per_model_bias[ensemble[m]] = {{answer, 1.0}};
        }
        scenario.tasks.push_back(t);
        scenario.profiles.push_back(std::move(p));
    }
    return scenario;
}

/// Workload exercising attribution: model correctness varies per task so
/// leave-one-out values have spread and proxy correlations are defined.
inline SimulatedScenario build_attribution_workload(std::size_t n, std::uint64_t seed,
                                                    const std::vector<std::string>& ensemble,
                                                    const std::string& benchmark) {
    SimulatedScenario scenario;
    for (std::size_t i = 0; i < n; ++i) {
        auto t = detail::make_task("att-" + std::to_string(i + 1), benchmark, "9");
        SimulatedTaskProfile p;
        p.task_id = t.task_id;
        p.answer_format = t.format;
        p.correct_answer = t.gold.canonical_text;
        // Probe fully disagrees so adaptive runs escalate to the full arena
        // and log all three ensemble responses.
        p.answer_distribution = {{"1", 0.34}, {"2", 0.33}, {"3", 0.33}};
        for (std::size_t m = 0; m < ensemble.size(); ++m) {
            CounterRng rng = CounterRng::keyed(seed, {t.task_id, ensemble[m], "attribution"});
            double draw = rng.uniform();
            std::string answer;
            if (draw < 0.55) {
                answer = "9";
            } else if (draw < 0.8) {
                answer = std::to_string(300 + m); // model-specific wrong answer
            } else {
                answer = "333"; // shared wrong answer
            }
            p.per_model_bias[ensemble[m]] = {{answer, 1.0}};
        }
        scenario.tasks.push_back(t);
        scenario.profiles.push_back(std::move(p));
    }
    return scenario;
}

} // namespace acar

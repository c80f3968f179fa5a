#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "acar/error.hpp"
#include "acar/extraction.hpp"
#include "acar/jungler.hpp"
#include "acar/providers.hpp"

namespace acar {

/// Self-consistency variance: (distinct answers - 1) / (N - 1).
/// For the default 3-sample probe the image is exactly {0.0, 0.5, 1.0}.
struct SigmaValue {
    double value = 0.0;
};

enum class ExecutionMode { SINGLE_AGENT, ARENA_LITE, FULL_ARENA };

inline const char* to_string(ExecutionMode m) {
    switch (m) {
        case ExecutionMode::SINGLE_AGENT: return "SINGLE_AGENT";
        case ExecutionMode::ARENA_LITE: return "ARENA_LITE";
        case ExecutionMode::FULL_ARENA: return "FULL_ARENA";
    }
    return "UNKNOWN";
}

inline ExecutionMode execution_mode_from_string(std::string_view s) {
    if (s == "SINGLE_AGENT") return ExecutionMode::SINGLE_AGENT;
    if (s == "ARENA_LITE") return ExecutionMode::ARENA_LITE;
    if (s == "FULL_ARENA") return ExecutionMode::FULL_ARENA;
    throw Error(ErrorCode::PARSE_ERROR, "unknown execution mode: " + std::string(s));
}

/// Number of distinct answer classes under canonical equality.
inline std::size_t distinct_answer_count(const std::vector<CanonicalAnswer>& answers) {
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < answers.size(); ++i) {
        bool seen = false;
        for (std::size_t j = 0; j < i && !seen; ++j) {
            seen = answers_equal(answers[i], answers[j]);
        }
        if (!seen) ++distinct;
    }
    return distinct;
}

/// Generalized N-sample variance. N must be at least 2.
inline SigmaValue compute_sigma_n(const std::vector<CanonicalAnswer>& answers) {
    if (answers.size() < 2) {
        throw Error(ErrorCode::ARITY_ERROR,
                    "need at least 2 probe answers, got " + std::to_string(answers.size()));
    }
    std::size_t distinct = distinct_answer_count(answers);
    return {static_cast<double>(distinct - 1) / static_cast<double>(answers.size() - 1)};
}

/// The 3-sample variance. Exactly 3 answers, same format.
inline SigmaValue compute_sigma(const std::vector<CanonicalAnswer>& answers) {
    if (answers.size() != 3) {
        throw Error(ErrorCode::ARITY_ERROR,
                    "sigma is defined over exactly 3 probe answers, got " +
                        std::to_string(answers.size()));
    }
    return compute_sigma_n(answers);
}

/// Variance-to-mode mapping: unanimity runs one model, full disagreement
/// runs the whole ensemble, anything in between runs the lite arena.
inline ExecutionMode select_mode(SigmaValue sigma) {
    if (sigma.value == 0.0) return ExecutionMode::SINGLE_AGENT;
    if (sigma.value == 1.0) return ExecutionMode::FULL_ARENA;
    return ExecutionMode::ARENA_LITE;
}

/// The answer class held by a strict majority of the samples.
/// Only meaningful when such a class exists; anything else is a
/// routing-contract violation surfaced as NO_MAJORITY.
inline CanonicalAnswer majority_vote(const std::vector<CanonicalAnswer>& answers) {
    if (answers.empty()) throw Error(ErrorCode::ARITY_ERROR, "majority vote over empty set");
    for (const CanonicalAnswer& candidate : answers) {
        std::size_t count = 0;
        for (const CanonicalAnswer& other : answers) {
            if (answers_equal(candidate, other)) ++count;
        }
        if (count * 2 > answers.size()) return candidate;
    }
    throw Error(ErrorCode::NO_MAJORITY, "no answer class holds a majority");
}

struct JudgeCandidate {
    std::string model_id;
    std::string response_text;
    CanonicalAnswer answer;
};

/// Deterministic selection of one candidate's answer from an ensemble.
class JudgeStrategy {
public:
    virtual ~JudgeStrategy() = default;
    virtual const char* name() const = 0;
    /// Returns the index of the winning candidate. Candidates arrive in
    /// canonical model order; implementations must be deterministic.
    virtual std::size_t select(const std::vector<JudgeCandidate>& candidates) const = 0;
};

/// Centroid selection: the candidate whose canonical answer has the greatest
/// total token-overlap similarity to all other candidates' answers. Ties
/// break toward the earliest model in canonical order.
class CentroidJudge : public JudgeStrategy {
public:
    const char* name() const override { return "centroid"; }

    std::size_t select(const std::vector<JudgeCandidate>& candidates) const override {
        std::vector<SparseVector> vectors;
        vectors.reserve(candidates.size());
        for (const JudgeCandidate& c : candidates) vectors.push_back(embed(c.answer.canonical_text));
        std::size_t best = 0;
        double best_score = -1.0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            double score = 0.0;
            for (std::size_t j = 0; j < candidates.size(); ++j) {
                if (i != j) score += cosine(vectors[i], vectors[j]);
            }
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }
        return best;
    }
};

/// Judge that delegates the pick to a model call: candidates are listed in
/// canonical order and the judge model must answer with a candidate number.
/// Falls back to centroid selection when the reply does not parse. Intended
/// for real-provider mode; costs one extra call.
class LlmJudge : public JudgeStrategy {
public:
    explicit LlmJudge(ModelProvider& judge_model) : judge_model_(judge_model) {}

    const char* name() const override { return "llm"; }

    std::size_t select(const std::vector<JudgeCandidate>& candidates) const override {
        std::ostringstream prompt;
        prompt << "You are judging candidate answers to the same task. "
               << "Reply with only the number of the best candidate.\n";
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            prompt << "Candidate " << (i + 1) << " (" << candidates[i].model_id << "):\n"
                   << candidates[i].response_text << "\n\n";
        }
        try {
            CallRequest request{"judge", prompt.str(), 0, 0.0};
            CallReceipt receipt = judge_model_.complete(request);
            CanonicalAnswer parsed = extract(receipt.response_text, AnswerFormat::NUMERIC);
            if (parsed.extraction_confident) {
                long index = std::strtol(parsed.canonical_text.c_str(), nullptr, 10);
                if (index >= 1 && static_cast<std::size_t>(index) <= candidates.size()) {
                    return static_cast<std::size_t>(index - 1);
                }
            }
        } catch (const Error&) {
            // fall through to the deterministic strategy
        }
        return CentroidJudge().select(candidates);
    }

private:
    ModelProvider& judge_model_;
};

/// Convenience wrapper around the default centroid strategy.
inline CanonicalAnswer judge_select(const std::vector<JudgeCandidate>& candidates,
                                    const JudgeStrategy& strategy = CentroidJudge()) {
    if (candidates.empty()) throw Error(ErrorCode::ARITY_ERROR, "judge over empty candidate set");
    return candidates[strategy.select(candidates)].answer;
}

/// Routing parameters. The probe runs at a configurable temperature while
/// ensemble calls stay at temperature 0; probe sample count N generalizes
/// the variance quantization but defaults to 3.
struct RoutingConfig {
    std::string probe_model;
    std::vector<std::string> ensemble_models;
    int probe_samples = 3;
    double probe_temperature = 0.7;
    std::string judge_strategy = "centroid"; // "centroid" | "llm"
};

/// Parses a key = value routing config file. Lines starting with '#' are
/// comments; ensemble_models is a comma-separated ordered list.
inline RoutingConfig parse_routing_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IO_ERROR, "cannot read " + path);
    RoutingConfig config;
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        std::size_t a = s.find_first_not_of(" \t\r");
        std::size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::string trimmed = trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        std::size_t eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::CONFIG_ERROR,
                        path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        std::string key = trim(trimmed.substr(0, eq));
        std::string value = trim(trimmed.substr(eq + 1));
        if (key == "probe_model") {
            config.probe_model = value;
        } else if (key == "ensemble_models") {
            config.ensemble_models.clear();
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = trim(item);
                if (!item.empty()) config.ensemble_models.push_back(item);
            }
        } else if (key == "N" || key == "probe_samples") {
            config.probe_samples = std::stoi(value);
        } else if (key == "probe_temperature") {
            config.probe_temperature = std::stod(value);
        } else if (key == "judge_strategy") {
            config.judge_strategy = value;
        } else {
            throw Error(ErrorCode::CONFIG_ERROR,
                        path + ":" + std::to_string(line_no) + ": unknown key " + key);
        }
    }
    if (config.probe_samples < 2) {
        throw Error(ErrorCode::CONFIG_ERROR, "probe_samples must be >= 2");
    }
    if (config.judge_strategy != "centroid" && config.judge_strategy != "llm") {
        throw Error(ErrorCode::CONFIG_ERROR, "unknown judge_strategy " + config.judge_strategy);
    }
    return config;
}

/// What one routed task produced, ready to be folded into a run record.
struct RoutedCall {
    std::string phase; // "probe" | "ensemble" | "verify"
    std::uint64_t sample_index = 0;
    CallReceipt receipt;
};

struct RoutingDecision {
    SigmaValue sigma;
    ExecutionMode mode = ExecutionMode::SINGLE_AGENT;
    std::vector<CanonicalAnswer> probe_answers;
    CanonicalAnswer final_answer;
    std::vector<std::string> models_invoked; // ensemble models beyond the probe
    double probe_cost_usd = 0.0;
    double ensemble_cost_usd = 0.0;
    std::vector<RoutedCall> calls;
    bool degraded = false;     // at least one provider call failed
    bool disagreement = false; // an arena-lite verifier disagreed with the vote
};

struct RouteInputs {
    std::string task_id;
    AnswerFormat format = AnswerFormat::FREE_TEXT;
    std::string probe_prompt;
    std::string ensemble_prompt; // possibly retrieval-augmented
};

namespace detail {

/// A failed call degrades to an empty low-confidence answer instead of
/// stalling the route; the failure is visible through the degraded flag and
/// an empty-response call entry.
inline CallReceipt degraded_receipt(const ModelProvider& provider, const std::string& prompt) {
    CallReceipt receipt;
    receipt.model_id = provider.model_id();
    receipt.prompt_hash = sha256_hex(prompt);
    receipt.rate_in_usd_per_1k = provider.rate().input_usd_per_1k;
    receipt.rate_out_usd_per_1k = provider.rate().output_usd_per_1k;
    return receipt;
}

} // namespace detail

/// Runs the full routing procedure for one task: N probe samples, variance,
/// mode selection, mode-specific execution, decision assembly.
///
/// Results are keyed to canonical model order regardless of call scheduling,
/// so the decision is reproducible under any concurrency.
inline RoutingDecision route_task(const RouteInputs& inputs, ModelProvider& probe,
                                  const std::vector<ModelProvider*>& ensemble,
                                  const RoutingConfig& config,
                                  const JudgeStrategy& judge = CentroidJudge()) {
    if (ensemble.size() < 3) {
        throw Error(ErrorCode::CONFIG_ERROR, "routing needs 3 ensemble models");
    }
    RoutingDecision decision;

    // Phase 1: difficulty estimation.
    for (int i = 0; i < config.probe_samples; ++i) {
        CallRequest request{inputs.task_id, inputs.probe_prompt,
                            static_cast<std::uint64_t>(i), config.probe_temperature};
        CallReceipt receipt;
        try {
            receipt = probe.complete(request);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::PROVIDER_ERROR &&
                e.code() != ErrorCode::SIM_PROFILE_MISSING) {
                throw;
            }
            receipt = detail::degraded_receipt(probe, inputs.probe_prompt);
            decision.degraded = true;
        }
        decision.probe_answers.push_back(extract(receipt.response_text, inputs.format));
        decision.calls.push_back({"probe", static_cast<std::uint64_t>(i), std::move(receipt)});
    }
    decision.sigma = compute_sigma_n(decision.probe_answers);
    decision.mode = select_mode(decision.sigma);

    auto call_ensemble = [&](ModelProvider& provider, const char* phase) -> const CallReceipt& {
        CallRequest request{inputs.task_id, inputs.ensemble_prompt, 0, 0.0};
        CallReceipt receipt;
        try {
            receipt = provider.complete(request);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::PROVIDER_ERROR &&
                e.code() != ErrorCode::SIM_PROFILE_MISSING) {
                throw;
            }
            receipt = detail::degraded_receipt(provider, inputs.ensemble_prompt);
            decision.degraded = true;
        }
        decision.models_invoked.push_back(provider.model_id());
        decision.calls.push_back({phase, 0, std::move(receipt)});
        return decision.calls.back().receipt;
    };

    // Phase 2: adaptive routing.
    switch (decision.mode) {
        case ExecutionMode::SINGLE_AGENT:
            decision.final_answer = decision.probe_answers.front();
            break;
        case ExecutionMode::ARENA_LITE: {
            decision.final_answer = majority_vote(decision.probe_answers);
            for (std::size_t i = 0; i < 2; ++i) {
                const CallReceipt& receipt = call_ensemble(*ensemble[i], "verify");
                CanonicalAnswer verifier = extract(receipt.response_text, inputs.format);
                if (!answers_equal(verifier, decision.final_answer)) {
                    decision.disagreement = true; // logged, never overrides the vote
                }
            }
            break;
        }
        case ExecutionMode::FULL_ARENA: {
            std::vector<JudgeCandidate> candidates;
            for (std::size_t i = 0; i < 3; ++i) {
                const CallReceipt& receipt = call_ensemble(*ensemble[i], "ensemble");
                candidates.push_back({ensemble[i]->model_id(), receipt.response_text,
                                      extract(receipt.response_text, inputs.format)});
            }
            decision.final_answer = judge_select(candidates, judge);
            break;
        }
    }

    for (const RoutedCall& call : decision.calls) {
        if (call.phase == "probe") {
            decision.probe_cost_usd += call.receipt.cost_usd;
        } else {
            decision.ensemble_cost_usd += call.receipt.cost_usd;
        }
    }
    decision.probe_cost_usd = round_decimal(decision.probe_cost_usd, 6);
    decision.ensemble_cost_usd = round_decimal(decision.ensemble_cost_usd, 6);
    return decision;
}

} // namespace acar

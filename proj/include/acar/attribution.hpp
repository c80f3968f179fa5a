#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "acar/error.hpp"
#include "acar/extraction.hpp"
#include "acar/jungler.hpp"
#include "acar/providers.hpp"
#include "acar/record.hpp"
#include "acar/router.hpp"

namespace acar {

/// Ground-truth contribution of each model: score(full ensemble) minus
/// score(ensemble without the model), re-judged from the same cached
/// responses, with binary correctness scoring. Values lie in {-1, 0, 1}.
inline std::map<std::string, double> leave_one_out_cached(
    const std::vector<JudgeCandidate>& cached, const CanonicalAnswer& gold,
    const JudgeStrategy& judge = CentroidJudge()) {
    if (cached.size() < 2) {
        throw Error(ErrorCode::ARITY_ERROR, "leave-one-out needs at least 2 cached responses");
    }
    auto score = [&](const std::vector<JudgeCandidate>& ensemble) -> int {
        return answers_equal(judge_select(ensemble, judge), gold) ? 1 : 0;
    };
    int full = score(cached);
    std::map<std::string, double> contributions;
    for (std::size_t i = 0; i < cached.size(); ++i) {
        std::vector<JudgeCandidate> reduced;
        for (std::size_t j = 0; j < cached.size(); ++j) {
            if (j != i) reduced.push_back(cached[j]);
        }
        contributions[cached[i].model_id] = static_cast<double>(full - score(reduced));
    }
    return contributions;
}

/// Provider-facing variant: builds the response cache with one temperature-0
/// call per model, then runs the cached counterfactual. Only deterministic
/// (simulated) providers admit a valid counterfactual without a cache.
inline std::map<std::string, double> leave_one_out(const std::string& task_id,
                                                   const std::string& prompt,
                                                   const CanonicalAnswer& gold,
                                                   AnswerFormat format,
                                                   const std::vector<ModelProvider*>& ensemble,
                                                   const JudgeStrategy& judge = CentroidJudge()) {
    if (ensemble.size() < 2) {
        throw Error(ErrorCode::ARITY_ERROR, "leave-one-out needs at least 2 models");
    }
    std::vector<JudgeCandidate> cached;
    for (ModelProvider* provider : ensemble) {
        if (provider->kind() != ProviderKind::SIMULATED) {
            throw Error(ErrorCode::NONDETERMINISTIC_BASE,
                        "counterfactual over uncached non-deterministic provider " +
                            provider->model_id());
        }
        CallReceipt receipt = provider->complete({task_id, prompt, 0, 0.0});
        cached.push_back({provider->model_id(), receipt.response_text,
                          extract(receipt.response_text, format)});
    }
    return leave_one_out_cached(cached, gold, judge);
}

inline const char* const kProxyNames[] = {"SIMILARITY_TO_FINAL", "OUTPUT_ENTROPY",
                                          "AGREEMENT_PATTERN"};

/// The paper-style cheap signals, per model:
/// - SIMILARITY_TO_FINAL: cosine between response text and final answer text
/// - OUTPUT_ENTROPY: token-frequency Shannon entropy (natural log) normalized
///   by log(distinct tokens); the 0/0 single-token case is 0
/// - AGREEMENT_PATTERN: fraction of other models sharing this canonical answer
inline std::map<std::string, std::map<std::string, double>> proxy_signals(
    const std::vector<JudgeCandidate>& responses, const CanonicalAnswer& final_answer) {
    if (responses.empty()) throw Error(ErrorCode::ARITY_ERROR, "proxy signals need >=1 response");
    std::map<std::string, std::map<std::string, double>> out;
    SparseVector final_vec = embed(final_answer.canonical_text);
    for (std::size_t i = 0; i < responses.size(); ++i) {
        const JudgeCandidate& r = responses[i];
        out["SIMILARITY_TO_FINAL"][r.model_id] = cosine(embed(r.response_text), final_vec);

        std::vector<std::string> tokens = tokenize_lower(r.response_text);
        std::map<std::string, std::size_t> freq;
        for (const std::string& t : tokens) ++freq[t];
        double entropy = 0.0;
        if (freq.size() > 1) {
            double total = static_cast<double>(tokens.size());
            for (const auto& [token, count] : freq) {
                double p = static_cast<double>(count) / total;
                entropy -= p * std::log(p);
            }
            entropy /= std::log(static_cast<double>(freq.size()));
        }
        out["OUTPUT_ENTROPY"][r.model_id] = entropy;

        double agreeing = 0.0;
        for (std::size_t j = 0; j < responses.size(); ++j) {
            if (j != i && answers_equal(responses[j].answer, r.answer)) agreeing += 1.0;
        }
        out["AGREEMENT_PATTERN"][r.model_id] =
            responses.size() > 1 ? agreeing / static_cast<double>(responses.size() - 1) : 0.0;
    }
    return out;
}

namespace detail {

/// Fractional ranks with ties averaged (1-based).
inline std::vector<double> fractional_ranks(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg_rank;
        i = j + 1;
    }
    return ranks;
}

} // namespace detail

/// Spearman rank correlation with averaged ties: Pearson correlation of the
/// fractional ranks. Exact +/-1.0 on identical / reversed rankings.
inline double correlate(const std::vector<double>& ground_truth,
                        const std::vector<double>& proxy) {
    if (ground_truth.size() != proxy.size()) {
        throw Error(ErrorCode::ARITY_ERROR, "correlate needs paired observations");
    }
    if (ground_truth.size() < 3) {
        throw Error(ErrorCode::INSUFFICIENT_DATA,
                    "rank correlation needs >=3 pairs, got " +
                        std::to_string(ground_truth.size()));
    }
    std::vector<double> rx = detail::fractional_ranks(ground_truth);
    std::vector<double> ry = detail::fractional_ranks(proxy);
    double n = static_cast<double>(rx.size());
    double mean_x = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    double mean_y = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double cov = 0.0, var_x = 0.0, var_y = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        double dx = rx[i] - mean_x;
        double dy = ry[i] - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if (var_x == 0.0 || var_y == 0.0) {
        throw Error(ErrorCode::UNDEFINED_CORRELATION,
                    "rank correlation undefined for zero-variance input");
    }
    return cov / std::sqrt(var_x * var_y);
}

/// Per-task attribution: ground truth plus all proxy signals.
struct AttributionReport {
    std::string task_id;
    std::map<std::string, double> loo_values;
    std::map<std::string, std::map<std::string, double>> proxy_values;
};

/// Batch-level output: per-task reports plus pooled rank correlation of each
/// proxy against the leave-one-out ground truth across all (task, model)
/// pairs. A proxy whose correlation is undefined carries a status note.
struct AttributionSummary {
    std::vector<AttributionReport> reports;
    std::map<std::string, double> rank_correlation;
    std::map<std::string, std::string> correlation_status; // "ok" or reason
    std::size_t pairs = 0;
};

/// Runs counterfactual attribution over recorded runs, using each record's
/// logged ensemble responses as the cache — zero extra model calls. Records
/// without at least 2 ensemble responses or without gold answers are skipped.
inline AttributionSummary attribute_records(
    const std::vector<RunRecord>& records,
    const std::map<std::string, CanonicalAnswer>& gold_by_task,
    const JudgeStrategy& judge = CentroidJudge()) {
    AttributionSummary summary;
    std::map<std::string, std::vector<double>> pooled_proxy;
    std::vector<double> pooled_truth;

    for (const RunRecord& record : records) {
        auto gold_it = gold_by_task.find(record.task_id);
        if (gold_it == gold_by_task.end()) continue;
        std::vector<JudgeCandidate> cached;
        for (const CallLog& call : record.calls) {
            if (call.phase != "ensemble") continue;
            if (call.receipt.response_text.empty()) continue; // degraded call
            cached.push_back({call.receipt.model_id, call.receipt.response_text,
                              extract(call.receipt.response_text, record.final_answer.format)});
        }
        if (cached.size() < 2) continue;

        AttributionReport report;
        report.task_id = record.task_id;
        report.loo_values = leave_one_out_cached(cached, gold_it->second, judge);
        report.proxy_values = proxy_signals(cached, record.final_answer);
        for (const JudgeCandidate& c : cached) {
            pooled_truth.push_back(report.loo_values.at(c.model_id));
            for (const char* proxy : kProxyNames) {
                pooled_proxy[proxy].push_back(report.proxy_values.at(proxy).at(c.model_id));
            }
        }
        summary.reports.push_back(std::move(report));
    }

    summary.pairs = pooled_truth.size();
    for (const char* proxy : kProxyNames) {
        try {
            summary.rank_correlation[proxy] = correlate(pooled_truth, pooled_proxy[proxy]);
            summary.correlation_status[proxy] = "ok";
        } catch (const Error& e) {
            summary.correlation_status[proxy] = to_string(e.code());
        }
    }
    return summary;
}

} // namespace acar

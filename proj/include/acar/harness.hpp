#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "acar/artifact_store.hpp"
#include "acar/error.hpp"
#include "acar/extraction.hpp"
#include "acar/hash.hpp"
#include "acar/jungler.hpp"
#include "acar/providers.hpp"
#include "acar/record.hpp"
#include "acar/router.hpp"

namespace acar {

struct Task {
    std::string task_id;
    std::string benchmark;
    std::string prompt;
    AnswerFormat answer_format = AnswerFormat::FREE_TEXT;
    std::optional<CanonicalAnswer> gold_answer;
};

inline std::vector<Task> load_tasks(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IO_ERROR, "cannot read " + path);
    std::vector<Task> tasks;
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            Task t;
            t.task_id = j.at("task_id").get<std::string>();
            t.benchmark = j.at("benchmark").get<std::string>();
            t.prompt = j.at("prompt").get<std::string>();
            t.answer_format = answer_format_from_string(j.at("answer_format").get<std::string>());
            if (j.contains("gold_answer") && !j["gold_answer"].is_null()) {
                const auto& g = j["gold_answer"];
                CanonicalAnswer gold;
                gold.format = answer_format_from_string(g.at("format").get<std::string>());
                gold.canonical_text = g.at("canonical_text").get<std::string>();
                gold.extraction_confident = g.value("extraction_confident", true);
                t.gold_answer = std::move(gold);
            }
            if (t.task_id.empty()) throw Error(ErrorCode::PARSE_ERROR, "empty task_id");
            auto [it, inserted] = seen.emplace(t.task_id, line_no);
            if (!inserted) {
                throw Error(ErrorCode::PARSE_ERROR,
                            "duplicate task_id " + t.task_id + " (first at line " +
                                std::to_string(it->second) + ")");
            }
            tasks.push_back(std::move(t));
        } catch (const Error& e) {
            throw Error(ErrorCode::PARSE_ERROR, path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const std::exception& ex) {
            throw Error(ErrorCode::PARSE_ERROR,
                        path + ":" + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return tasks;
}

inline void save_tasks(const std::vector<Task>& tasks, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IO_ERROR, "cannot write " + path);
    for (const Task& t : tasks) {
        nlohmann::json j;
        j["task_id"] = t.task_id;
        j["benchmark"] = t.benchmark;
        j["prompt"] = t.prompt;
        j["answer_format"] = to_string(t.answer_format);
        if (t.gold_answer) {
            j["gold_answer"] = {{"format", to_string(t.gold_answer->format)},
                                {"canonical_text", t.gold_answer->canonical_text},
                                {"extraction_confident", t.gold_answer->extraction_confident}};
        } else {
            j["gold_answer"] = nullptr;
        }
        out << j.dump() << "\n";
    }
}

enum class ConfigurationKind { SINGLE_MODEL, ARENA_2, ARENA_3, ACAR_U, ACAR_UJ };

inline const char* to_string(ConfigurationKind c) {
    switch (c) {
        case ConfigurationKind::SINGLE_MODEL: return "SINGLE_MODEL";
        case ConfigurationKind::ARENA_2: return "ARENA_2";
        case ConfigurationKind::ARENA_3: return "ARENA_3";
        case ConfigurationKind::ACAR_U: return "ACAR_U";
        case ConfigurationKind::ACAR_UJ: return "ACAR_UJ";
    }
    return "UNKNOWN";
}

inline ConfigurationKind configuration_from_string(const std::string& s) {
    if (s == "SINGLE_MODEL") return ConfigurationKind::SINGLE_MODEL;
    if (s == "ARENA_2") return ConfigurationKind::ARENA_2;
    if (s == "ARENA_3") return ConfigurationKind::ARENA_3;
    if (s == "ACAR_U") return ConfigurationKind::ACAR_U;
    if (s == "ACAR_UJ") return ConfigurationKind::ACAR_UJ;
    throw Error(ErrorCode::CONFIG_ERROR, "unknown configuration: " + s);
}

/// One probe model plus the fixed 3-model ensemble, in canonical order.
struct ProviderSet {
    std::shared_ptr<ModelProvider> probe;
    std::vector<std::shared_ptr<ModelProvider>> ensemble;
};

/// Default simulated fleet: a cheap probe and three ensemble models with
/// distinct cost rates and latency profiles.
inline ProviderSet make_simulated_providers(std::shared_ptr<const SimulatedWorkload> workload,
                                            std::uint64_t seed) {
    ProviderSet set;
    set.probe = std::make_shared<SimulatedProvider>(
        "sim-probe", CostRate{0.0005, 0.0015}, seed, workload,
        SimulatedLatencyParams{5.3, 0.25});
    set.ensemble = {
        std::make_shared<SimulatedProvider>("sim-alpha", CostRate{0.003, 0.015}, seed, workload,
                                            SimulatedLatencyParams{6.2, 0.3}),
        std::make_shared<SimulatedProvider>("sim-beta", CostRate{0.0025, 0.0125}, seed, workload,
                                            SimulatedLatencyParams{6.1, 0.3}),
        std::make_shared<SimulatedProvider>("sim-gamma", CostRate{0.002, 0.01}, seed, workload,
                                            SimulatedLatencyParams{6.0, 0.3}),
    };
    return set;
}

struct RetrievalOptions {
    bool enabled = false;
    std::string store_path;
    double similarity_threshold = 0.0;
    std::size_t max_injected = 3;
    std::size_t top_k = 3;
};

struct BatchOptions {
    ConfigurationKind config = ConfigurationKind::SINGLE_MODEL;
    std::uint64_t seed = 0;
    std::string out_dir = "artifacts";
    RetrievalOptions retrieval;
    double probe_temperature = 0.7;
    int probe_samples = 3;
    unsigned parallelism = 4;
    std::string rubric_version = "rubric-v1";
};

inline const char* kPromptTemplate =
    "You are a careful problem solver. Work step by step, then state the final answer.\n"
    "\n"
    "Task:\n"
    "{task}\n";

inline std::string render_prompt(const Task& task) {
    std::string out = kPromptTemplate;
    const std::string placeholder = "{task}";
    std::size_t pos = out.find(placeholder);
    out.replace(pos, placeholder.size(), task.prompt);
    return out;
}

inline std::string platform_descriptor() {
#if defined(__linux__)
    const char* os = "linux";
#elif defined(__APPLE__)
    const char* os = "darwin";
#else
    const char* os = "unknown-os";
#endif
#if defined(__x86_64__) || defined(_M_X64)
    const char* arch = "x86_64";
#elif defined(__aarch64__)
    const char* arch = "aarch64";
#else
    const char* arch = "unknown-arch";
#endif
    return std::string(os) + "-" + arch;
}

inline std::string batch_label(ConfigurationKind config, std::uint64_t seed) {
    std::string label = to_string(config);
    std::transform(label.begin(), label.end(), label.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return label + "-s" + std::to_string(seed);
}

namespace detail {

/// Mode-dependent coordination overhead added to per-call latency; the
/// multi-model modes pay for fan-out coordination and judging.
inline double coordination_overhead_ms(ConfigurationKind config,
                                       const std::optional<ExecutionMode>& mode) {
    if (mode) {
        switch (*mode) {
            case ExecutionMode::SINGLE_AGENT: return 0.0;
            case ExecutionMode::ARENA_LITE: return 150.0;
            case ExecutionMode::FULL_ARENA: return 400.0;
        }
    }
    switch (config) {
        case ConfigurationKind::SINGLE_MODEL: return 0.0;
        case ConfigurationKind::ARENA_2: return 150.0;
        default: return 400.0;
    }
}

/// Phase latency model: calls within one phase run in parallel, phases are
/// sequential, so the record latency is the sum of per-phase maxima.
inline double record_latency_ms(const std::vector<CallLog>& calls, ConfigurationKind config,
                                const std::optional<ExecutionMode>& mode) {
    double probe_max = 0.0;
    double rest_max = 0.0;
    for (const CallLog& call : calls) {
        if (call.phase == "probe") {
            probe_max = std::max(probe_max, call.receipt.latency_ms);
        } else {
            rest_max = std::max(rest_max, call.receipt.latency_ms);
        }
    }
    return round_decimal(probe_max + rest_max + coordination_overhead_ms(config, mode), 3);
}

inline CallReceipt complete_or_degrade(ModelProvider& provider, const CallRequest& request,
                                       bool& degraded) {
    try {
        return provider.complete(request);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::PROVIDER_ERROR && e.code() != ErrorCode::SIM_PROFILE_MISSING) {
            throw;
        }
        degraded = true;
        CallReceipt receipt;
        receipt.model_id = provider.model_id();
        receipt.prompt_hash = sha256_hex(request.prompt);
        receipt.rate_in_usd_per_1k = provider.rate().input_usd_per_1k;
        receipt.rate_out_usd_per_1k = provider.rate().output_usd_per_1k;
        return receipt;
    }
}

/// Executes one task under one configuration and assembles the run record
/// (everything except the writer-assigned timestamps).
inline RunRecord execute_task(const Task& task, const ProviderSet& providers,
                              const BatchOptions& options, const ExperienceStore* store) {
    RunStateMachine machine;
    machine.transition(RunState::EXECUTING);

    RunRecord record;
    record.task_id = task.task_id;
    record.benchmark = task.benchmark;
    record.config_label = to_string(options.config);
    record.run_id = batch_label(options.config, options.seed) + "-" + task.task_id;
    record.fingerprint.seed = options.seed;
    record.fingerprint.prompt_template_hash = sha256_hex(kPromptTemplate);
    record.fingerprint.rubric_version = options.rubric_version;
    record.fingerprint.model_identifiers.push_back(providers.probe->model_id());
    for (const auto& m : providers.ensemble) {
        record.fingerprint.model_identifiers.push_back(m->model_id());
    }
    record.fingerprint.platform_descriptor = platform_descriptor();

    std::string base_prompt = render_prompt(task);
    std::string ensemble_prompt = base_prompt;

    if (options.config == ConfigurationKind::ACAR_UJ && options.retrieval.enabled) {
        if (store == nullptr) {
            throw Error(ErrorCode::CONFIG_ERROR, "ACAR_UJ requires an experience store");
        }
        RetrievalResult result = retrieve(*store, task.prompt, options.retrieval.top_k,
                                          options.retrieval.similarity_threshold);
        ensemble_prompt = inject(base_prompt, result, options.retrieval.max_injected);
        RetrievalTrace trace;
        trace.base_prompt_hash = sha256_hex(base_prompt);
        trace.augmented_prompt_hash = sha256_hex(ensemble_prompt);
        trace.injected = result.injected;
        trace.threshold_applied = result.threshold_applied;
        for (const RetrievalHit& hit : result.hits) {
            trace.similarities.push_back(round_decimal(hit.similarity, 6));
        }
        record.retrieval = std::move(trace);
    }

    switch (options.config) {
        case ConfigurationKind::ACAR_U:
        case ConfigurationKind::ACAR_UJ: {
            RoutingConfig routing;
            routing.probe_model = providers.probe->model_id();
            for (const auto& m : providers.ensemble) {
                routing.ensemble_models.push_back(m->model_id());
            }
            routing.probe_samples = options.probe_samples;
            routing.probe_temperature = options.probe_temperature;
            std::vector<ModelProvider*> ensemble;
            for (const auto& m : providers.ensemble) ensemble.push_back(m.get());
            RouteInputs inputs{task.task_id, task.answer_format, base_prompt, ensemble_prompt};
            RoutingDecision decision =
                route_task(inputs, *providers.probe, ensemble, routing, CentroidJudge());
            record.sigma = decision.sigma.value;
            record.mode = decision.mode;
            record.probe_answers = decision.probe_answers;
            record.final_answer = decision.final_answer;
            record.probe_cost_usd = decision.probe_cost_usd;
            record.ensemble_cost_usd = decision.ensemble_cost_usd;
            record.degraded = decision.degraded;
            record.disagreement = decision.disagreement;
            for (const RoutedCall& call : decision.calls) {
                record.calls.push_back({call.phase, call.sample_index, call.receipt});
            }
            break;
        }
        case ConfigurationKind::SINGLE_MODEL: {
            CallRequest request{task.task_id, ensemble_prompt, 0, 0.0};
            CallReceipt receipt =
                complete_or_degrade(*providers.ensemble[0], request, record.degraded);
            record.final_answer = extract(receipt.response_text, task.answer_format);
            record.ensemble_cost_usd = receipt.cost_usd;
            record.calls.push_back({"ensemble", 0, std::move(receipt)});
            break;
        }
        case ConfigurationKind::ARENA_2:
        case ConfigurationKind::ARENA_3: {
            std::size_t width = options.config == ConfigurationKind::ARENA_2 ? 2 : 3;
            std::vector<JudgeCandidate> candidates;
            double total = 0.0;
            for (std::size_t i = 0; i < width; ++i) {
                CallRequest request{task.task_id, ensemble_prompt, 0, 0.0};
                CallReceipt receipt =
                    complete_or_degrade(*providers.ensemble[i], request, record.degraded);
                candidates.push_back({providers.ensemble[i]->model_id(), receipt.response_text,
                                      extract(receipt.response_text, task.answer_format)});
                total += receipt.cost_usd;
                record.calls.push_back({"ensemble", 0, std::move(receipt)});
            }
            record.final_answer = judge_select(candidates, CentroidJudge());
            record.ensemble_cost_usd = round_decimal(total, 6);
            break;
        }
    }
    record.cost_usd = round_decimal(record.probe_cost_usd + record.ensemble_cost_usd, 6);
    record.latency_ms = record_latency_ms(record.calls, options.config, record.mode);

    machine.transition(RunState::VERIFYING);
    if (task.gold_answer && task.gold_answer->format == record.final_answer.format) {
        record.answer_correct = answers_equal(record.final_answer, *task.gold_answer);
    }
    machine.transition(RunState::COMPLETED);
    record.state_history = machine.history();
    return record;
}

} // namespace detail

/// Runs one configuration over a task batch. Tasks execute concurrently up
/// to options.parallelism; the single writer commits records in task order,
/// so output is identical for any parallelism level. Returns the runs path.
inline std::string run_batch(const std::vector<Task>& tasks, const ProviderSet& providers,
                             const BatchOptions& options) {
    if (providers.probe == nullptr || providers.ensemble.size() != 3) {
        throw Error(ErrorCode::CONFIG_ERROR, "need a probe model and exactly 3 ensemble models");
    }
    std::unique_ptr<ExperienceStore> store;
    if (options.config == ConfigurationKind::ACAR_UJ && options.retrieval.enabled) {
        if (options.retrieval.store_path.empty()) {
            throw Error(ErrorCode::CONFIG_ERROR, "retrieval enabled but no store path given");
        }
        store = std::make_unique<ExperienceStore>(
            ExperienceStore::load(options.retrieval.store_path));
    }

    std::filesystem::path dir =
        std::filesystem::path(options.out_dir) / batch_label(options.config, options.seed);
    std::filesystem::create_directories(dir);
    ArtifactStore artifacts((dir / "runs.jsonl").string());

    unsigned parallelism = std::max(1u, options.parallelism);
    std::vector<std::future<RunRecord>> futures(tasks.size());
    std::size_t next_launch = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        while (next_launch < tasks.size() && next_launch < i + parallelism) {
            const Task& task = tasks[next_launch];
            futures[next_launch] = std::async(std::launch::async, [&task, &providers, &options,
                                                                   s = store.get()]() {
                return detail::execute_task(task, providers, options, s);
            });
            ++next_launch;
        }
        RunRecord record = futures[i].get();
        artifacts.stamp_and_append(record);
    }
    return artifacts.path();
}

struct BenchmarkMetrics {
    std::size_t total = 0;
    std::size_t correct = 0;
    double total_cost_usd = 0.0;
    std::array<std::size_t, 3> mode_counts{}; // single, lite, full
    std::size_t mode_total = 0;

    double accuracy() const {
        return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
    }
};

struct ConfigMetrics {
    std::size_t total = 0;
    std::size_t correct = 0;
    double total_cost_usd = 0.0;
    std::array<std::size_t, 3> mode_counts{};
    std::size_t mode_total = 0;
    double latency_p50_ms = 0.0;
    double latency_p90_ms = 0.0;
    double latency_p99_ms = 0.0;
    std::map<std::string, BenchmarkMetrics> by_benchmark;
    std::vector<double> cumulative_full_arena; // after each record, timestamp order

    double accuracy() const {
        return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
    }
    std::array<double, 3> escalation_fractions() const {
        std::array<double, 3> f{};
        if (mode_total > 0) {
            for (std::size_t i = 0; i < 3; ++i) {
                f[i] = static_cast<double>(mode_counts[i]) / static_cast<double>(mode_total);
            }
        }
        return f;
    }
};

struct MetricsReport {
    std::map<std::string, ConfigMetrics> by_config;
    std::optional<RetrievalStats> retrieval;
};

namespace detail {

inline double percentile(std::vector<double> sorted_values, double p) {
    if (sorted_values.empty()) return 0.0;
    double rank = p / 100.0 * static_cast<double>(sorted_values.size());
    std::size_t index = static_cast<std::size_t>(std::ceil(rank));
    if (index > 0) --index;
    if (index >= sorted_values.size()) index = sorted_values.size() - 1;
    return sorted_values[index];
}

inline std::size_t mode_slot(ExecutionMode mode) {
    switch (mode) {
        case ExecutionMode::SINGLE_AGENT: return 0;
        case ExecutionMode::ARENA_LITE: return 1;
        case ExecutionMode::FULL_ARENA: return 2;
    }
    return 0;
}

} // namespace detail

/// Exact recount of accuracy, cost, escalation, latency, and retrieval
/// aggregates from recorded runs against the task list's gold answers.
inline MetricsReport score(const std::vector<RunRecord>& records, const std::vector<Task>& tasks) {
    std::map<std::string, const Task*> by_id;
    for (const Task& t : tasks) by_id[t.task_id] = &t;

    std::map<std::string, std::vector<double>> latencies;
    std::map<std::string, std::vector<std::pair<std::uint64_t, bool>>> full_arena_series;
    std::vector<std::tuple<std::string, bool, std::vector<double>>> retrieval_traces;

    MetricsReport report;
    for (const RunRecord& record : records) {
        auto it = by_id.find(record.task_id);
        if (it == by_id.end()) {
            throw Error(ErrorCode::MISSING_TASK,
                        "run " + record.run_id + " references unknown task " + record.task_id);
        }
        const Task& task = *it->second;
        ConfigMetrics& config = report.by_config[record.config_label];
        BenchmarkMetrics& bench = config.by_benchmark[record.benchmark];
        ++config.total;
        ++bench.total;
        bool correct = false;
        if (task.gold_answer && task.gold_answer->format == record.final_answer.format) {
            correct = answers_equal(record.final_answer, *task.gold_answer);
        }
        if (correct) {
            ++config.correct;
            ++bench.correct;
        }
        config.total_cost_usd += record.cost_usd;
        bench.total_cost_usd += record.cost_usd;
        if (record.mode) {
            std::size_t slot = detail::mode_slot(*record.mode);
            ++config.mode_counts[slot];
            ++config.mode_total;
            ++bench.mode_counts[slot];
            ++bench.mode_total;
            full_arena_series[record.config_label].emplace_back(
                record.logical_timestamp, *record.mode == ExecutionMode::FULL_ARENA);
        }
        latencies[record.config_label].push_back(record.latency_ms);
        if (record.retrieval) {
            retrieval_traces.emplace_back(record.benchmark, record.retrieval->injected,
                                          record.retrieval->similarities);
        }
    }

    for (auto& [label, config] : report.by_config) {
        config.total_cost_usd = round_decimal(config.total_cost_usd, 6);
        for (auto& [name, bench] : config.by_benchmark) {
            bench.total_cost_usd = round_decimal(bench.total_cost_usd, 6);
        }
        std::vector<double>& lat = latencies[label];
        std::sort(lat.begin(), lat.end());
        config.latency_p50_ms = detail::percentile(lat, 50.0);
        config.latency_p90_ms = detail::percentile(lat, 90.0);
        config.latency_p99_ms = detail::percentile(lat, 99.0);
        auto& series = full_arena_series[label];
        std::sort(series.begin(), series.end());
        std::size_t full_so_far = 0;
        for (std::size_t i = 0; i < series.size(); ++i) {
            if (series[i].second) ++full_so_far;
            config.cumulative_full_arena.push_back(static_cast<double>(full_so_far) /
                                                   static_cast<double>(i + 1));
        }
    }
    if (!retrieval_traces.empty()) report.retrieval = retrieval_stats(retrieval_traces);
    return report;
}

/// One CSV per paper figure, deterministic content and column order.
/// Returns the paths written.
inline std::vector<std::string> emit_figures(const MetricsReport& report,
                                             const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    auto open_csv = [&](const std::string& name, const std::string& header) {
        std::string path = (std::filesystem::path(out_dir) / name).string();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IO_ERROR, "cannot write " + path);
        out << header << "\n";
        written.push_back(path);
        return out;
    };

    {
        auto out = open_csv("fig1_sigma_histogram.csv", "config,sigma,count,fraction");
        for (const auto& [label, config] : report.by_config) {
            if (config.mode_total == 0) continue;
            const char* sigmas[3] = {"0.0", "0.5", "1.0"};
            auto fractions = config.escalation_fractions();
            for (std::size_t i = 0; i < 3; ++i) {
                out << label << "," << sigmas[i] << "," << config.mode_counts[i] << ","
                    << fixed_decimal(fractions[i], 6) << "\n";
            }
        }
    }
    {
        auto out = open_csv("fig2_overall_pass_rate.csv", "config,correct,total,accuracy");
        for (const auto& [label, config] : report.by_config) {
            out << label << "," << config.correct << "," << config.total << ","
                << fixed_decimal(config.accuracy(), 6) << "\n";
        }
    }
    {
        auto out = open_csv("fig3_benchmark_pass_rate.csv",
                            "config,benchmark,correct,total,accuracy");
        for (const auto& [label, config] : report.by_config) {
            for (const auto& [bench, metrics] : config.by_benchmark) {
                out << label << "," << bench << "," << metrics.correct << "," << metrics.total
                    << "," << fixed_decimal(metrics.accuracy(), 6) << "\n";
            }
        }
    }
    {
        auto out = open_csv("fig4_cost_accuracy.csv", "config,total_cost_usd,accuracy");
        for (const auto& [label, config] : report.by_config) {
            out << label << "," << fixed_decimal(config.total_cost_usd, 6) << ","
                << fixed_decimal(config.accuracy(), 6) << "\n";
        }
    }
    {
        auto out = open_csv("fig5_escalation_by_benchmark.csv",
                            "config,benchmark,single_fraction,lite_fraction,full_fraction");
        for (const auto& [label, config] : report.by_config) {
            for (const auto& [bench, metrics] : config.by_benchmark) {
                if (metrics.mode_total == 0) continue;
                out << label << "," << bench;
                for (std::size_t i = 0; i < 3; ++i) {
                    double fraction = static_cast<double>(metrics.mode_counts[i]) /
                                      static_cast<double>(metrics.mode_total);
                    out << "," << fixed_decimal(fraction, 6);
                }
                out << "\n";
            }
        }
    }
    {
        auto out = open_csv("fig6_cumulative_full_arena.csv",
                            "config,task_index,cumulative_full_arena_fraction");
        for (const auto& [label, config] : report.by_config) {
            for (std::size_t i = 0; i < config.cumulative_full_arena.size(); ++i) {
                out << label << "," << (i + 1) << ","
                    << fixed_decimal(config.cumulative_full_arena[i], 6) << "\n";
            }
        }
    }
    {
        auto out = open_csv("fig7_latency_distribution.csv", "config,p50_ms,p90_ms,p99_ms");
        for (const auto& [label, config] : report.by_config) {
            out << label << "," << fixed_decimal(config.latency_p50_ms, 3) << ","
                << fixed_decimal(config.latency_p90_ms, 3) << ","
                << fixed_decimal(config.latency_p99_ms, 3) << "\n";
        }
    }
    {
        auto out = open_csv("fig8_retrieval_hit_rate.csv", "benchmark,hits,tasks,hit_rate");
        if (report.retrieval) {
            for (const auto& [bench, counts] : report.retrieval->hits_by_benchmark) {
                out << bench << "," << counts.first << "," << counts.second << ","
                    << fixed_decimal(report.retrieval->hit_rate_by_benchmark.at(bench), 6) << "\n";
            }
            out << "ALL," << static_cast<std::size_t>(std::llround(
                                  report.retrieval->hit_rate *
                                  static_cast<double>(report.retrieval->tasks)))
                << "," << report.retrieval->tasks << ","
                << fixed_decimal(report.retrieval->hit_rate, 6) << "\n";
        }
    }
    {
        auto out = open_csv("fig9_similarity_histogram.csv", "bin_low,bin_high,count");
        if (report.retrieval) {
            for (std::size_t i = 0; i < report.retrieval->histogram.size(); ++i) {
                out << fixed_decimal(static_cast<double>(i) * 0.05, 2) << ","
                    << fixed_decimal(static_cast<double>(i + 1) * 0.05, 2) << ","
                    << report.retrieval->histogram[i] << "\n";
            }
        }
    }
    return written;
}

struct AuditIssue {
    std::size_t line = 0; // 1-based; 0 = file level
    std::string message;
};

struct AuditSummary {
    std::size_t lines = 0;
    std::vector<AuditIssue> parse_errors;
    std::vector<AuditIssue> violations;

    bool clean() const { return parse_errors.empty() && violations.empty(); }
};

/// Full integrity pass over a runs file: parse errors, structural invariant
/// violations, sigma/mode consistency, per-call and per-record cost formula
/// checks, duplicate run ids, and logical-timestamp monotonicity.
inline AuditSummary audit(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IO_ERROR, "cannot read " + path);
    AuditSummary summary;
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t> run_ids;
    std::optional<std::uint64_t> last_timestamp;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            summary.parse_errors.push_back({line_no, "empty line"});
            continue;
        }
        ++summary.lines;
        RunRecord record;
        try {
            record = parse_record(line);
        } catch (const Error& e) {
            summary.parse_errors.push_back({line_no, e.what()});
            continue;
        }
        for (const std::string& violation : record_violations(record)) {
            summary.violations.push_back({line_no, violation});
        }
        auto [it, inserted] = run_ids.emplace(record.run_id, line_no);
        if (!inserted) {
            summary.violations.push_back(
                {line_no, "duplicate run_id " + record.run_id + " (first at line " +
                              std::to_string(it->second) + ")"});
        }
        if (last_timestamp && record.logical_timestamp <= *last_timestamp) {
            summary.violations.push_back({line_no, "logical_timestamp not strictly increasing"});
        }
        last_timestamp = record.logical_timestamp;
        if (record.sigma && record.probe_answers.size() == 3) {
            double recomputed = compute_sigma(record.probe_answers).value;
            if (recomputed != *record.sigma) {
                summary.violations.push_back({line_no, "sigma does not match probe answers"});
            }
        }
        double probe_total = 0.0;
        double ensemble_total = 0.0;
        for (std::size_t i = 0; i < record.calls.size(); ++i) {
            const CallReceipt& receipt = record.calls[i].receipt;
            double expected = cost_of(receipt);
            if (fixed_decimal(expected, 6) != fixed_decimal(receipt.cost_usd, 6)) {
                summary.violations.push_back(
                    {line_no, "call " + std::to_string(i) + " cost does not match token formula"});
            }
            if (record.calls[i].phase == "probe") {
                probe_total += receipt.cost_usd;
            } else {
                ensemble_total += receipt.cost_usd;
            }
        }
        if (fixed_decimal(round_decimal(probe_total, 6), 6) !=
            fixed_decimal(record.probe_cost_usd, 6)) {
            summary.violations.push_back({line_no, "probe_cost_usd does not match call sum"});
        }
        if (fixed_decimal(round_decimal(ensemble_total, 6), 6) !=
            fixed_decimal(record.ensemble_cost_usd, 6)) {
            summary.violations.push_back({line_no, "ensemble_cost_usd does not match call sum"});
        }
    }
    return summary;
}

} // namespace acar

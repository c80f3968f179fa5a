#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "acar/canonical_json.hpp"
#include "acar/error.hpp"
#include "acar/extraction.hpp"
#include "acar/hash.hpp"
#include "acar/rng.hpp"

namespace acar {

enum class ProviderKind { SIMULATED, HTTP };

inline const char* to_string(ProviderKind k) {
    return k == ProviderKind::SIMULATED ? "simulated" : "http";
}

struct CostRate {
    double input_usd_per_1k = 0.0;
    double output_usd_per_1k = 0.0;
};

struct CallRequest {
    std::string task_id;
    std::string prompt;
    std::uint64_t sample_index = 0;
    double temperature = 0.0;
};

struct CallReceipt {
    std::string model_id;
    std::string prompt_hash;
    std::string response_text;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    double rate_in_usd_per_1k = 0.0;
    double rate_out_usd_per_1k = 0.0;
    double cost_usd = 0.0;
    double latency_ms = 0.0;
};

/// Per-token cost, rounded to the canonical 6-decimal artifact precision.
inline double call_cost_usd(std::int64_t input_tokens, std::int64_t output_tokens,
                            const CostRate& rate) {
    double raw = static_cast<double>(input_tokens) / 1000.0 * rate.input_usd_per_1k +
                 static_cast<double>(output_tokens) / 1000.0 * rate.output_usd_per_1k;
    return round_decimal(raw, 6);
}

inline double cost_of(const CallReceipt& receipt) {
    return call_cost_usd(receipt.input_tokens, receipt.output_tokens,
                         {receipt.rate_in_usd_per_1k, receipt.rate_out_usd_per_1k});
}

inline std::int64_t whitespace_token_count(std::string_view text) {
    std::int64_t count = 0;
    bool in_token = false;
    for (char raw : text) {
        bool space = std::isspace(static_cast<unsigned char>(raw)) != 0;
        if (!space && !in_token) ++count;
        in_token = !space;
    }
    return count;
}

class ModelProvider {
public:
    virtual ~ModelProvider() = default;
    virtual const std::string& model_id() const = 0;
    virtual ProviderKind kind() const = 0;
    virtual const CostRate& rate() const = 0;
    virtual CallReceipt complete(const CallRequest& request) = 0;
};

/// One weighted answer class in a simulated task's response distribution.
struct WeightedAnswer {
    std::string answer_text;
    double probability = 0.0;
};

/// Scripted behavior for one task: a base answer distribution, the correct
/// answer, and optional per-model overrides.
struct SimulatedTaskProfile {
    std::string task_id;
    AnswerFormat answer_format = AnswerFormat::NUMERIC;
    std::vector<WeightedAnswer> answer_distribution;
    std::string correct_answer;
    std::map<std::string, std::vector<WeightedAnswer>> per_model_bias;
};

namespace detail {

inline void check_distribution(const std::vector<WeightedAnswer>& dist, const std::string& task_id) {
    if (dist.empty()) {
        throw Error(ErrorCode::INVALID_PROFILE, "empty answer distribution for task " + task_id);
    }
    double total = 0.0;
    for (const WeightedAnswer& w : dist) {
        if (w.probability < 0.0) {
            throw Error(ErrorCode::INVALID_PROFILE, "negative probability for task " + task_id);
        }
        total += w.probability;
    }
    if (total < 1.0 - 1e-9 || total > 1.0 + 1e-9) {
        throw Error(ErrorCode::INVALID_PROFILE,
                    "probabilities sum to " + std::to_string(total) + " for task " + task_id);
    }
}

} // namespace detail

/// Simulated workload: one profile per task id, loadable from JSONL.
class SimulatedWorkload {
public:
    void add(SimulatedTaskProfile profile) {
        detail::check_distribution(profile.answer_distribution, profile.task_id);
        for (const auto& [model_id, dist] : profile.per_model_bias) {
            detail::check_distribution(dist, profile.task_id + " (bias " + model_id + ")");
        }
        profiles_[profile.task_id] = std::move(profile);
    }

    const SimulatedTaskProfile* find(const std::string& task_id) const {
        auto it = profiles_.find(task_id);
        return it == profiles_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return profiles_.size(); }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IO_ERROR, "cannot write " + path);
        for (const auto& [task_id, p] : profiles_) {
            nlohmann::json j;
            j["task_id"] = p.task_id;
            j["answer_format"] = to_string(p.answer_format);
            auto render_dist = [](const std::vector<WeightedAnswer>& dist) {
                nlohmann::json arr = nlohmann::json::array();
                for (const WeightedAnswer& w : dist) {
                    arr.push_back({{"answer", w.answer_text}, {"p", w.probability}});
                }
                return arr;
            };
            j["answer_distribution"] = render_dist(p.answer_distribution);
            j["correct_answer"] = p.correct_answer;
            if (!p.per_model_bias.empty()) {
                nlohmann::json bias;
                for (const auto& [model_id, dist] : p.per_model_bias) {
                    bias[model_id] = render_dist(dist);
                }
                j["per_model_bias"] = bias;
            }
            out << j.dump() << "\n";
        }
    }

    static SimulatedWorkload load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorCode::IO_ERROR, "cannot read " + path);
        SimulatedWorkload workload;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                nlohmann::json j = nlohmann::json::parse(line);
                SimulatedTaskProfile p;
                p.task_id = j.at("task_id").get<std::string>();
                p.answer_format = answer_format_from_string(j.at("answer_format").get<std::string>());
                auto parse_dist = [](const nlohmann::json& arr) {
                    std::vector<WeightedAnswer> dist;
                    for (const auto& item : arr) {
                        dist.push_back({item.at("answer").get<std::string>(),
                                        item.at("p").get<double>()});
                    }
                    return dist;
                };
                p.answer_distribution = parse_dist(j.at("answer_distribution"));
                p.correct_answer = j.at("correct_answer").get<std::string>();
                if (j.contains("per_model_bias")) {
                    for (const auto& [model_id, dist] : j.at("per_model_bias").items()) {
                        p.per_model_bias[model_id] = parse_dist(dist);
                    }
                }
                workload.add(std::move(p));
            } catch (const Error&) {
                throw;
            } catch (const std::exception& ex) {
                throw Error(ErrorCode::PARSE_ERROR,
                            path + ":" + std::to_string(line_no) + ": " + ex.what());
            }
        }
        return workload;
    }

private:
    std::map<std::string, SimulatedTaskProfile> profiles_;
};

struct SimulatedLatencyParams {
    double log_mean = 6.0;  // exp(6) ~ 400ms median
    double log_sigma = 0.3;
};

/// Deterministic provider for desk-scale runs. Each completion is a pure
/// function of (batch seed, task id, model id, sample index, temperature):
/// temperature 0 returns the distribution mode, anything else draws from the
/// task's answer distribution on a counter-based stream. No mutable state,
/// safe to share across threads.
class SimulatedProvider : public ModelProvider {
public:
    SimulatedProvider(std::string model_id, CostRate rate, std::uint64_t batch_seed,
                      std::shared_ptr<const SimulatedWorkload> workload,
                      SimulatedLatencyParams latency = {})
        : model_id_(std::move(model_id)),
          rate_(rate),
          batch_seed_(batch_seed),
          workload_(std::move(workload)),
          latency_(latency) {}

    const std::string& model_id() const override { return model_id_; }
    ProviderKind kind() const override { return ProviderKind::SIMULATED; }
    const CostRate& rate() const override { return rate_; }

    CallReceipt complete(const CallRequest& request) override {
        if (request.prompt.empty()) {
            throw Error(ErrorCode::PROVIDER_ERROR, "empty prompt");
        }
        const SimulatedTaskProfile* profile = workload_->find(request.task_id);
        if (profile == nullptr) {
            throw Error(ErrorCode::SIM_PROFILE_MISSING,
                        "no simulated profile for task " + request.task_id);
        }
        const std::vector<WeightedAnswer>* dist = &profile->answer_distribution;
        auto bias = profile->per_model_bias.find(model_id_);
        if (bias != profile->per_model_bias.end()) dist = &bias->second;

        CounterRng rng = CounterRng::keyed(
            batch_seed_, {request.task_id, model_id_, std::to_string(request.sample_index),
                          fixed_decimal(request.temperature, 6)});

        const std::string& answer = request.temperature == 0.0 ? pick_mode(*dist)
                                                               : pick_draw(*dist, rng.uniform());
        CallReceipt receipt;
        receipt.model_id = model_id_;
        receipt.prompt_hash = sha256_hex(request.prompt);
        receipt.response_text = render_response(answer, profile->answer_format);
        receipt.input_tokens = whitespace_token_count(request.prompt);
        receipt.output_tokens = whitespace_token_count(receipt.response_text);
        receipt.rate_in_usd_per_1k = rate_.input_usd_per_1k;
        receipt.rate_out_usd_per_1k = rate_.output_usd_per_1k;
        receipt.cost_usd = call_cost_usd(receipt.input_tokens, receipt.output_tokens, rate_);
        receipt.latency_ms =
            round_decimal(rng.lognormal(latency_.log_mean, latency_.log_sigma), 3);
        return receipt;
    }

    /// Response text rendered so that extraction recovers the scripted answer.
    static std::string render_response(const std::string& answer, AnswerFormat format) {
        switch (format) {
            case AnswerFormat::NUMERIC:
                return "After working through the steps, the answer is " + answer + ".";
            case AnswerFormat::MULTIPLE_CHOICE:
                return "Considering every option, the answer is (" + answer + ").";
            case AnswerFormat::CODE:
                return "```\n" + answer + "\n```";
            case AnswerFormat::FREE_TEXT:
                return answer;
        }
        return answer;
    }

private:
    static const std::string& pick_mode(const std::vector<WeightedAnswer>& dist) {
        const WeightedAnswer* best = &dist.front();
        for (const WeightedAnswer& w : dist) {
            if (w.probability > best->probability ||
                (w.probability == best->probability && w.answer_text < best->answer_text)) {
                best = &w;
            }
        }
        return best->answer_text;
    }

    static const std::string& pick_draw(const std::vector<WeightedAnswer>& dist, double u) {
        double cumulative = 0.0;
        for (const WeightedAnswer& w : dist) {
            cumulative += w.probability;
            if (u < cumulative) return w.answer_text;
        }
        return dist.back().answer_text;
    }

    std::string model_id_;
    CostRate rate_;
    std::uint64_t batch_seed_;
    std::shared_ptr<const SimulatedWorkload> workload_;
    SimulatedLatencyParams latency_;
};

/// Declarative provider description, loadable from a JSON config file.
struct ProviderSpec {
    std::string model_id;
    ProviderKind kind = ProviderKind::SIMULATED;
    CostRate rate;
    // HTTP-only fields
    std::string endpoint;
    std::string api_key_env;
    int max_concurrent = 4;
    int max_retries = 3;
    int timeout_seconds = 60;
    int backoff_ms = 250;
    // Simulated-only fields
    SimulatedLatencyParams latency;
};

inline std::vector<ProviderSpec> load_provider_specs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IO_ERROR, "cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& ex) {
        throw Error(ErrorCode::CONFIG_ERROR, path + ": " + ex.what());
    }
    std::vector<ProviderSpec> specs;
    for (const auto& item : j.at("providers")) {
        ProviderSpec spec;
        spec.model_id = item.at("model_id").get<std::string>();
        std::string kind = item.value("kind", "simulated");
        if (kind == "simulated") {
            spec.kind = ProviderKind::SIMULATED;
        } else if (kind == "http") {
            spec.kind = ProviderKind::HTTP;
        } else {
            throw Error(ErrorCode::CONFIG_ERROR, "unknown provider kind: " + kind);
        }
        spec.rate.input_usd_per_1k = item.value("input_usd_per_1k", 0.0);
        spec.rate.output_usd_per_1k = item.value("output_usd_per_1k", 0.0);
        if (spec.rate.input_usd_per_1k < 0.0 || spec.rate.output_usd_per_1k < 0.0) {
            throw Error(ErrorCode::CONFIG_ERROR, "negative cost rate for " + spec.model_id);
        }
        spec.endpoint = item.value("endpoint", "");
        spec.api_key_env = item.value("api_key_env", "");
        spec.max_concurrent = item.value("max_concurrent", 4);
        spec.max_retries = item.value("max_retries", 3);
        spec.timeout_seconds = item.value("timeout_seconds", 60);
        spec.backoff_ms = item.value("backoff_ms", 250);
        spec.latency.log_mean = item.value("latency_log_mean", 6.0);
        spec.latency.log_sigma = item.value("latency_log_sigma", 0.3);
        if (spec.kind == ProviderKind::HTTP && spec.endpoint.empty()) {
            throw Error(ErrorCode::CONFIG_ERROR, "http provider " + spec.model_id + " needs an endpoint");
        }
        specs.push_back(std::move(spec));
    }
    if (specs.empty()) throw Error(ErrorCode::CONFIG_ERROR, path + ": no providers defined");
    return specs;
}

} // namespace acar

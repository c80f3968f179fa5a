#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "acar/canonical_json.hpp"
#include "acar/error.hpp"
#include "acar/extraction.hpp"
#include "acar/providers.hpp"
#include "acar/router.hpp"
#include "acar/run_state.hpp"

namespace acar {

/// Everything that must be pinned for a run to be reproducible.
struct EnvironmentFingerprint {
    std::uint64_t seed = 0;
    std::string prompt_template_hash;
    std::string rubric_version;
    std::vector<std::string> model_identifiers;
    std::string platform_descriptor;
};

/// One provider call inside a run record. Response text is retained so the
/// artifact file doubles as the response cache for counterfactual analysis.
struct CallLog {
    std::string phase; // "probe" | "ensemble" | "verify"
    std::uint64_t sample_index = 0;
    CallReceipt receipt;
};

/// Retrieval augmentation evidence: both prompt hashes plus the injected
/// hit similarities, so injection is auditable without re-running.
struct RetrievalTrace {
    std::string base_prompt_hash;
    std::string augmented_prompt_hash;
    bool injected = false;
    std::vector<double> similarities;
    double threshold_applied = 0.0;
};

/// The decision trace appended to the immutable run log, one JSONL line per
/// task. sigma/mode/probe_answers are present only for adaptive configs.
struct RunRecord {
    std::string run_id;
    std::string task_id;
    std::string benchmark;
    std::string config_label;
    EnvironmentFingerprint fingerprint;
    std::optional<double> sigma;
    std::optional<ExecutionMode> mode;
    std::vector<CanonicalAnswer> probe_answers;
    CanonicalAnswer final_answer;
    std::optional<bool> answer_correct;
    double probe_cost_usd = 0.0;
    double ensemble_cost_usd = 0.0;
    double cost_usd = 0.0;
    double latency_ms = 0.0;
    std::vector<CallLog> calls;
    std::optional<RetrievalTrace> retrieval;
    bool degraded = false;
    bool disagreement = false;
    std::uint64_t logical_timestamp = 0;
    std::optional<std::string> wall_timestamp;
    std::vector<std::pair<RunState, std::uint64_t>> state_history;
    std::optional<std::string> supersedes;
};

inline const char* const kConfigurationNames[] = {"SINGLE_MODEL", "ARENA_2", "ARENA_3",
                                                  "ACAR_U", "ACAR_UJ"};

inline bool is_configuration_name(const std::string& name) {
    for (const char* known : kConfigurationNames) {
        if (name == known) return true;
    }
    return false;
}

namespace detail {

inline std::string answer_json(const CanonicalAnswer& a) {
    CanonicalObject obj;
    obj.str("canonical_text", a.canonical_text);
    obj.boolean("extraction_confident", a.extraction_confident);
    obj.str("format", to_string(a.format));
    return obj.finish();
}

inline std::string call_json(const CallLog& call) {
    CanonicalObject obj;
    obj.decimal("cost_usd", call.receipt.cost_usd, 6);
    obj.unsigned_integer("input_tokens", call.receipt.input_tokens);
    obj.decimal("latency_ms", call.receipt.latency_ms, 3);
    obj.str("model_id", call.receipt.model_id);
    obj.unsigned_integer("output_tokens", call.receipt.output_tokens);
    obj.str("phase", call.phase);
    obj.str("prompt_hash", call.receipt.prompt_hash);
    obj.decimal("rate_in_usd_per_1k", call.receipt.rate_in_usd_per_1k, 6);
    obj.decimal("rate_out_usd_per_1k", call.receipt.rate_out_usd_per_1k, 6);
    obj.str("response_text", call.receipt.response_text);
    obj.unsigned_integer("sample_index", call.sample_index);
    return obj.finish();
}

inline std::string fingerprint_json(const EnvironmentFingerprint& fp) {
    CanonicalArray models;
    for (const std::string& id : fp.model_identifiers) models.str(id);
    CanonicalObject obj;
    obj.raw("model_identifiers", models.finish());
    obj.str("platform_descriptor", fp.platform_descriptor);
    obj.str("prompt_template_hash", fp.prompt_template_hash);
    obj.str("rubric_version", fp.rubric_version);
    obj.unsigned_integer("seed", fp.seed);
    return obj.finish();
}

inline std::string retrieval_json(const RetrievalTrace& r) {
    CanonicalArray sims;
    for (double s : r.similarities) sims.decimal(s, 6);
    CanonicalObject obj;
    obj.str("augmented_prompt_hash", r.augmented_prompt_hash);
    obj.str("base_prompt_hash", r.base_prompt_hash);
    obj.boolean("injected", r.injected);
    obj.raw("similarities", sims.finish());
    obj.decimal("threshold_applied", r.threshold_applied, 6);
    return obj.finish();
}

} // namespace detail

/// Canonical JSONL form: sorted keys, fixed decimal widths, no insignificant
/// whitespace. With include_wall=false this is the replay-comparison form.
inline std::string canonical_line(const RunRecord& r, bool include_wall = true) {
    CanonicalObject obj;
    if (r.answer_correct) {
        obj.boolean("answer_correct", *r.answer_correct);
    } else {
        obj.null("answer_correct");
    }
    obj.str("benchmark", r.benchmark);
    CanonicalArray calls;
    for (const CallLog& call : r.calls) calls.raw(detail::call_json(call));
    obj.raw("calls", calls.finish());
    obj.str("config_label", r.config_label);
    obj.decimal("cost_usd", r.cost_usd, 6);
    obj.boolean("degraded", r.degraded);
    obj.boolean("disagreement", r.disagreement);
    obj.decimal("ensemble_cost_usd", r.ensemble_cost_usd, 6);
    obj.raw("final_answer", detail::answer_json(r.final_answer));
    obj.raw("fingerprint", detail::fingerprint_json(r.fingerprint));
    obj.decimal("latency_ms", r.latency_ms, 3);
    obj.unsigned_integer("logical_timestamp", r.logical_timestamp);
    if (r.mode) {
        obj.str("mode", to_string(*r.mode));
    } else {
        obj.null("mode");
    }
    CanonicalArray probes;
    for (const CanonicalAnswer& a : r.probe_answers) probes.raw(detail::answer_json(a));
    obj.raw("probe_answers", probes.finish());
    obj.decimal("probe_cost_usd", r.probe_cost_usd, 6);
    if (r.retrieval) {
        obj.raw("retrieval", detail::retrieval_json(*r.retrieval));
    } else {
        obj.null("retrieval");
    }
    obj.str("run_id", r.run_id);
    if (r.sigma) {
        obj.decimal("sigma", *r.sigma, 1);
    } else {
        obj.null("sigma");
    }
    CanonicalArray history;
    for (const auto& [state, tick] : r.state_history) {
        CanonicalObject entry;
        entry.str("state", to_string(state));
        entry.unsigned_integer("t", tick);
        history.raw(entry.finish());
    }
    obj.raw("state_history", history.finish());
    if (r.supersedes) {
        obj.str("supersedes", *r.supersedes);
    } else {
        obj.null("supersedes");
    }
    obj.str("task_id", r.task_id);
    if (include_wall) {
        if (r.wall_timestamp) {
            obj.str("wall_timestamp", *r.wall_timestamp);
        } else {
            obj.null("wall_timestamp");
        }
    }
    return obj.finish();
}

namespace detail {

inline CanonicalAnswer parse_answer(const nlohmann::json& j) {
    CanonicalAnswer a;
    a.canonical_text = j.at("canonical_text").get<std::string>();
    a.extraction_confident = j.at("extraction_confident").get<bool>();
    a.format = answer_format_from_string(j.at("format").get<std::string>());
    return a;
}

} // namespace detail

/// Parses one runs.jsonl line. Throws PARSE_ERROR on malformed JSON or a
/// missing/ill-typed field; the caller attaches the line number.
inline RunRecord parse_record(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::PARSE_ERROR, std::string("bad JSON: ") + e.what());
    }
    try {
        RunRecord r;
        if (!j.at("answer_correct").is_null()) r.answer_correct = j["answer_correct"].get<bool>();
        r.benchmark = j.at("benchmark").get<std::string>();
        for (const auto& cj : j.at("calls")) {
            CallLog call;
            call.phase = cj.at("phase").get<std::string>();
            call.sample_index = cj.at("sample_index").get<std::uint64_t>();
            call.receipt.cost_usd = cj.at("cost_usd").get<double>();
            call.receipt.input_tokens = cj.at("input_tokens").get<std::uint64_t>();
            call.receipt.latency_ms = cj.at("latency_ms").get<double>();
            call.receipt.model_id = cj.at("model_id").get<std::string>();
            call.receipt.output_tokens = cj.at("output_tokens").get<std::uint64_t>();
            call.receipt.prompt_hash = cj.at("prompt_hash").get<std::string>();
            call.receipt.rate_in_usd_per_1k = cj.at("rate_in_usd_per_1k").get<double>();
            call.receipt.rate_out_usd_per_1k = cj.at("rate_out_usd_per_1k").get<double>();
            call.receipt.response_text = cj.at("response_text").get<std::string>();
            r.calls.push_back(std::move(call));
        }
        r.config_label = j.at("config_label").get<std::string>();
        r.cost_usd = j.at("cost_usd").get<double>();
        r.degraded = j.at("degraded").get<bool>();
        r.disagreement = j.at("disagreement").get<bool>();
        r.ensemble_cost_usd = j.at("ensemble_cost_usd").get<double>();
        r.final_answer = detail::parse_answer(j.at("final_answer"));
        const auto& fj = j.at("fingerprint");
        r.fingerprint.seed = fj.at("seed").get<std::uint64_t>();
        r.fingerprint.prompt_template_hash = fj.at("prompt_template_hash").get<std::string>();
        r.fingerprint.rubric_version = fj.at("rubric_version").get<std::string>();
        r.fingerprint.platform_descriptor = fj.at("platform_descriptor").get<std::string>();
        for (const auto& m : fj.at("model_identifiers")) {
            r.fingerprint.model_identifiers.push_back(m.get<std::string>());
        }
        r.latency_ms = j.at("latency_ms").get<double>();
        r.logical_timestamp = j.at("logical_timestamp").get<std::uint64_t>();
        if (!j.at("mode").is_null()) {
            r.mode = execution_mode_from_string(j["mode"].get<std::string>());
        }
        for (const auto& pj : j.at("probe_answers")) {
            r.probe_answers.push_back(detail::parse_answer(pj));
        }
        r.probe_cost_usd = j.at("probe_cost_usd").get<double>();
        if (!j.at("retrieval").is_null()) {
            const auto& rj = j["retrieval"];
            RetrievalTrace t;
            t.augmented_prompt_hash = rj.at("augmented_prompt_hash").get<std::string>();
            t.base_prompt_hash = rj.at("base_prompt_hash").get<std::string>();
            t.injected = rj.at("injected").get<bool>();
            for (const auto& s : rj.at("similarities")) t.similarities.push_back(s.get<double>());
            t.threshold_applied = rj.at("threshold_applied").get<double>();
            r.retrieval = std::move(t);
        }
        r.run_id = j.at("run_id").get<std::string>();
        if (!j.at("sigma").is_null()) r.sigma = j["sigma"].get<double>();
        for (const auto& sj : j.at("state_history")) {
            r.state_history.emplace_back(run_state_from_string(sj.at("state").get<std::string>()),
                                         sj.at("t").get<std::uint64_t>());
        }
        if (!j.at("supersedes").is_null()) r.supersedes = j["supersedes"].get<std::string>();
        r.task_id = j.at("task_id").get<std::string>();
        if (j.contains("wall_timestamp") && !j["wall_timestamp"].is_null()) {
            r.wall_timestamp = j["wall_timestamp"].get<std::string>();
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::PARSE_ERROR, std::string("bad record field: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::PARSE_ERROR, std::string("bad record field: ") + e.what());
    }
}

/// Structural invariant check. Returns human-readable violations; a record
/// is appendable only when this list is empty.
inline std::vector<std::string> record_violations(const RunRecord& r) {
    std::vector<std::string> out;
    if (r.run_id.empty()) out.push_back("run_id empty");
    if (r.task_id.empty()) out.push_back("task_id empty");
    if (!is_configuration_name(r.config_label)) {
        out.push_back("config_label not one of the five configurations: " + r.config_label);
    }
    if (r.fingerprint.prompt_template_hash.empty()) out.push_back("prompt_template_hash empty");
    if (r.fingerprint.rubric_version.empty()) out.push_back("rubric_version empty");
    if (r.fingerprint.platform_descriptor.empty()) out.push_back("platform_descriptor empty");
    if (r.fingerprint.model_identifiers.empty()) out.push_back("model_identifiers empty");
    if (r.sigma) {
        if (*r.sigma != 0.0 && *r.sigma != 0.5 && *r.sigma != 1.0) {
            out.push_back("sigma not in {0.0, 0.5, 1.0}");
        }
        if (!r.mode) {
            out.push_back("sigma present without mode");
        } else if (select_mode({*r.sigma}) != *r.mode) {
            out.push_back("mode inconsistent with sigma");
        }
        if (r.probe_answers.size() != 3) out.push_back("probe_answers must hold exactly 3 answers");
    } else {
        if (r.mode) out.push_back("mode present without sigma");
        if (!r.probe_answers.empty()) out.push_back("probe_answers present without sigma");
    }
    if (r.cost_usd < 0.0 || r.probe_cost_usd < 0.0 || r.ensemble_cost_usd < 0.0) {
        out.push_back("negative cost");
    }
    if (round_decimal(r.probe_cost_usd + r.ensemble_cost_usd, 6) != r.cost_usd) {
        out.push_back("cost_usd does not equal probe_cost_usd + ensemble_cost_usd");
    }
    if (r.state_history.empty()) {
        out.push_back("state_history empty");
    } else {
        if (r.state_history.front().first != RunState::PENDING) {
            out.push_back("state_history does not start at PENDING");
        }
        for (std::size_t i = 1; i < r.state_history.size(); ++i) {
            if (r.state_history[i].second <= r.state_history[i - 1].second) {
                out.push_back("state_history timestamps not strictly increasing");
            }
            if (!is_legal_transition(r.state_history[i - 1].first, r.state_history[i].first)) {
                out.push_back(std::string("illegal transition ") +
                              to_string(r.state_history[i - 1].first) + " -> " +
                              to_string(r.state_history[i].first));
            }
        }
    }
    if (r.supersedes && *r.supersedes == r.run_id) out.push_back("record supersedes itself");
    return out;
}

} // namespace acar

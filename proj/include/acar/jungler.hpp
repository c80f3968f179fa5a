#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "acar/canonical_json.hpp"
#include "acar/error.hpp"
#include "acar/extraction.hpp"
#include "acar/hash.hpp"

namespace acar {

/// L2-normalized sparse term-frequency vector over hashed tokens.
/// Entries are sorted by token hash so dot products are a linear merge and
/// serialization order is deterministic.
struct SparseVector {
    std::vector<std::pair<std::uint64_t, double>> entries;

    bool empty() const { return entries.empty(); }

    double dot(const SparseVector& other) const {
        double sum = 0.0;
        std::size_t i = 0, j = 0;
        while (i < entries.size() && j < other.entries.size()) {
            if (entries[i].first < other.entries[j].first) {
                ++i;
            } else if (entries[i].first > other.entries[j].first) {
                ++j;
            } else {
                sum += entries[i].second * other.entries[j].second;
                ++i;
                ++j;
            }
        }
        return sum;
    }
};

namespace detail {

inline std::vector<std::string> tokenize_lower(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char raw : text) {
        unsigned char c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

} // namespace detail

/// Deterministic embedding: lowercased token frequencies, L2-normalized.
/// Empty text maps to the zero vector (similarity 0 to everything).
inline SparseVector embed(std::string_view text) {
    std::map<std::uint64_t, double> counts;
    for (const std::string& token : detail::tokenize_lower(text)) {
        counts[fnv1a64(token)] += 1.0;
    }
    SparseVector vec;
    vec.entries.assign(counts.begin(), counts.end());
    double norm_sq = 0.0;
    for (const auto& [hash, count] : vec.entries) norm_sq += count * count;
    if (norm_sq > 0.0) {
        double norm = std::sqrt(norm_sq);
        for (auto& [hash, weight] : vec.entries) weight /= norm;
    }
    return vec;
}

/// Cosine similarity in [0, 1]. Equal non-empty vectors score exactly 1.0.
inline double cosine(const SparseVector& a, const SparseVector& b) {
    if (a.empty() || b.empty()) return 0.0;
    if (a.entries == b.entries) return 1.0;
    return std::clamp(a.dot(b), 0.0, 1.0);
}

enum class Outcome { CORRECT, INCORRECT, UNKNOWN };

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::CORRECT: return "CORRECT";
        case Outcome::INCORRECT: return "INCORRECT";
        case Outcome::UNKNOWN: return "UNKNOWN";
    }
    return "UNKNOWN";
}

inline Outcome outcome_from_string(std::string_view s) {
    if (s == "CORRECT") return Outcome::CORRECT;
    if (s == "INCORRECT") return Outcome::INCORRECT;
    if (s == "UNKNOWN") return Outcome::UNKNOWN;
    throw Error(ErrorCode::PARSE_ERROR, "unknown outcome: " + std::string(s));
}

/// One stored (task, answer, outcome) triple. The vector is always the
/// deterministic embedding of task_text and is recomputed on load rather
/// than persisted.
struct Experience {
    std::string experience_id;
    std::string task_text;
    CanonicalAnswer answer;
    Outcome outcome = Outcome::UNKNOWN;
    SparseVector vector;
};

struct RetrievalHit {
    Experience experience;
    double similarity = 0.0;
};

struct RetrievalResult {
    std::vector<RetrievalHit> hits; // sorted by descending similarity
    double threshold_applied = 0.0;
    bool injected = false;
};

/// Read-mostly experience store. Retrieval never mutates contents; appends
/// serialize through an internal writer lock.
class ExperienceStore {
public:
    void add(Experience e) {
        if (e.task_text.empty()) {
            throw Error(ErrorCode::INVALID_RECORD, "experience task_text must be non-empty");
        }
        e.vector = embed(e.task_text);
        std::lock_guard<std::mutex> lock(write_mutex_);
        entries_.push_back(std::move(e));
    }

    std::size_t size() const { return entries_.size(); }

    const std::vector<Experience>& entries() const { return entries_; }

    /// Content hash over the persisted form; retrieval must not change it.
    std::string content_hash() const {
        std::string blob;
        for (const Experience& e : entries_) blob += serialize_line(e) + "\n";
        return sha256_hex(blob);
    }

    static std::string serialize_line(const Experience& e) {
        std::string answer = CanonicalObject()
                                 .str("canonical_text", e.answer.canonical_text)
                                 .boolean("extraction_confident", e.answer.extraction_confident)
                                 .str("format", to_string(e.answer.format))
                                 .finish();
        return CanonicalObject()
            .raw("answer", answer)
            .str("experience_id", e.experience_id)
            .str("outcome", to_string(e.outcome))
            .str("task_text", e.task_text)
            .finish();
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IO_ERROR, "cannot write " + path);
        for (const Experience& e : entries_) out << serialize_line(e) << "\n";
    }

    static ExperienceStore load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorCode::IO_ERROR, "cannot read " + path);
        ExperienceStore store;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                nlohmann::json j = nlohmann::json::parse(line);
                Experience e;
                e.experience_id = j.at("experience_id").get<std::string>();
                e.task_text = j.at("task_text").get<std::string>();
                e.outcome = outcome_from_string(j.at("outcome").get<std::string>());
                const auto& a = j.at("answer");
                e.answer.format = answer_format_from_string(a.at("format").get<std::string>());
                e.answer.canonical_text = a.at("canonical_text").get<std::string>();
                e.answer.extraction_confident = a.at("extraction_confident").get<bool>();
                store.add(std::move(e));
            } catch (const Error&) {
                throw;
            } catch (const std::exception& ex) {
                throw Error(ErrorCode::PARSE_ERROR,
                            path + ":" + std::to_string(line_no) + ": " + ex.what());
            }
        }
        return store;
    }

private:
    std::vector<Experience> entries_;
    mutable std::mutex write_mutex_;
};

/// Top-k retrieval by cosine similarity. A hit must share at least one token
/// with the query (similarity > 0) and meet the threshold. Ties break by
/// insertion order.
inline RetrievalResult retrieve(const ExperienceStore& store, const std::string& query,
                                std::size_t k, double threshold) {
    if (k < 1) throw Error(ErrorCode::ARITY_ERROR, "k must be >= 1");
    if (threshold < 0.0 || threshold > 1.0) {
        throw Error(ErrorCode::CONFIG_ERROR, "threshold must be in [0, 1]");
    }
    SparseVector query_vec = embed(query);
    RetrievalResult result;
    result.threshold_applied = threshold;
    std::vector<std::pair<double, std::size_t>> scored;
    const auto& entries = store.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        double sim = cosine(query_vec, entries[i].vector);
        if (sim > 0.0 && sim >= threshold) scored.emplace_back(sim, i);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (scored.size() > k) scored.resize(k);
    for (const auto& [sim, idx] : scored) {
        result.hits.push_back({entries[idx], sim});
    }
    result.injected = !result.hits.empty();
    return result;
}

/// Fixed augmentation template. Stable bytes keep prompt hashes comparable
/// across runs.
inline std::string inject(const std::string& prompt, const RetrievalResult& result,
                          std::size_t max_examples) {
    if (!result.injected) return prompt;
    std::string out;
    std::size_t count = std::min(max_examples, result.hits.size());
    for (std::size_t i = 0; i < count; ++i) {
        const Experience& e = result.hits[i].experience;
        out += "=== Similar past example ===\n";
        out += "Task: " + e.task_text + "\n";
        out += "Answer: " + e.answer.canonical_text + "\n";
        out += "Outcome: " + std::string(to_string(e.outcome)) + "\n";
        out += "=== End example ===\n\n";
    }
    out += prompt;
    return out;
}

struct RetrievalStats {
    double hit_rate = 0.0;                      // fraction of tasks with injected=true
    std::map<std::string, double> hit_rate_by_benchmark;
    std::map<std::string, std::pair<std::size_t, std::size_t>> hits_by_benchmark; // hits, total
    std::array<std::size_t, 20> histogram{};    // similarity counts over [0,1] in 20 bins
    double median_similarity = 0.0;
    std::size_t tasks = 0;
    std::size_t retrieved = 0;                  // total retrieved experiences across tasks
};

/// Aggregates retrieval behavior from per-task traces:
/// (benchmark, injected, hit similarities) tuples.
inline RetrievalStats retrieval_stats(
    const std::vector<std::tuple<std::string, bool, std::vector<double>>>& traces) {
    if (traces.empty()) {
        throw Error(ErrorCode::EMPTY_INPUT, "no retrieval traces to aggregate");
    }
    RetrievalStats stats;
    stats.tasks = traces.size();
    std::size_t injected_count = 0;
    std::vector<double> all_sims;
    for (const auto& [benchmark, injected, sims] : traces) {
        auto& [hits, total] = stats.hits_by_benchmark[benchmark];
        ++total;
        if (injected) {
            ++hits;
            ++injected_count;
        }
        for (double s : sims) {
            all_sims.push_back(s);
            auto bin = static_cast<std::size_t>(std::clamp(s, 0.0, 1.0) * 20.0);
            stats.histogram[std::min<std::size_t>(bin, 19)]++;
        }
    }
    stats.hit_rate = static_cast<double>(injected_count) / static_cast<double>(traces.size());
    for (const auto& [benchmark, counts] : stats.hits_by_benchmark) {
        stats.hit_rate_by_benchmark[benchmark] =
            static_cast<double>(counts.first) / static_cast<double>(counts.second);
    }
    stats.retrieved = all_sims.size();
    if (!all_sims.empty()) {
        std::sort(all_sims.begin(), all_sims.end());
        std::size_t n = all_sims.size();
        stats.median_similarity = (n % 2 == 1)
                                      ? all_sims[n / 2]
                                      : (all_sims[n / 2 - 1] + all_sims[n / 2]) / 2.0;
    }
    return stats;
}

} // namespace acar

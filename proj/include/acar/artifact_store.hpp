#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "acar/error.hpp"
#include "acar/record.hpp"

namespace acar {

inline std::string iso8601_utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

/// Append-only run log. All writes funnel through one writer which assigns
/// logical timestamps in hand-off order; nothing is ever rewritten in place.
class ArtifactStore {
public:
    explicit ArtifactStore(std::string path) : path_(std::move(path)) {
        std::filesystem::path parent = std::filesystem::path(path_).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        if (std::filesystem::exists(path_)) {
            std::ifstream in(path_, std::ios::binary);
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty()) continue;
                RunRecord record;
                try {
                    record = parse_record(line);
                } catch (const Error& e) {
                    throw Error(ErrorCode::PARSE_ERROR,
                                path_ + ":" + std::to_string(line_no) + ": " + e.what());
                }
                run_ids_.insert(record.run_id);
                next_logical_ = std::max(next_logical_, record.logical_timestamp + 1);
                ++length_;
            }
        }
    }

    const std::string& path() const { return path_; }

    std::size_t length() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return length_;
    }

    /// Validates and appends one record. Duplicates and invariant violations
    /// are rejected before any byte reaches the file.
    void append(const RunRecord& record) {
        std::lock_guard<std::mutex> lock(mutex_);
        append_locked(record);
    }

    /// Assigns the next logical timestamp and a wall timestamp, then appends.
    /// This is the normal entry point for freshly produced records.
    void stamp_and_append(RunRecord& record) {
        std::lock_guard<std::mutex> lock(mutex_);
        record.logical_timestamp = next_logical_;
        record.wall_timestamp = iso8601_utc_now();
        append_locked(record);
    }

private:
    void append_locked(const RunRecord& record) {
        if (run_ids_.count(record.run_id)) {
            throw Error(ErrorCode::DUPLICATE_ID, "run_id already present: " + record.run_id);
        }
        std::vector<std::string> violations = record_violations(record);
        if (!violations.empty()) {
            std::string msg = "invalid record " + record.run_id + ":";
            for (const std::string& v : violations) msg += " [" + v + "]";
            throw Error(ErrorCode::INVALID_RECORD, msg);
        }
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        if (!out) throw Error(ErrorCode::IO_ERROR, "cannot open " + path_ + " for append");
        out << canonical_line(record) << '\n';
        out.flush();
        if (!out) throw Error(ErrorCode::IO_ERROR, "write failed on " + path_);
        run_ids_.insert(record.run_id);
        next_logical_ = std::max(next_logical_, record.logical_timestamp + 1);
        ++length_;
    }

    std::string path_;
    mutable std::mutex mutex_;
    std::unordered_set<std::string> run_ids_;
    std::uint64_t next_logical_ = 0;
    std::size_t length_ = 0;
};

/// Reads a whole runs file; parse failures carry the 1-based line number.
inline std::vector<RunRecord> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IO_ERROR, "cannot read " + path);
    std::vector<RunRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(parse_record(line));
        } catch (const Error& e) {
            throw Error(ErrorCode::PARSE_ERROR,
                        path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

struct ReplayMismatch {
    std::size_t line = 0; // 1-based
    std::vector<std::string> fields;
};

struct ReplayReport {
    std::size_t lines_left = 0;
    std::size_t lines_right = 0;
    std::size_t matched = 0;
    std::vector<ReplayMismatch> mismatches;

    bool full_match() const {
        return lines_left == lines_right && mismatches.empty() && matched == lines_left;
    }
};

namespace detail {

/// Field-level diff of two canonical records, wall timestamp excluded.
inline std::vector<std::string> differing_fields(const RunRecord& a, const RunRecord& b) {
    nlohmann::json ja = nlohmann::json::parse(canonical_line(a, /*include_wall=*/false));
    nlohmann::json jb = nlohmann::json::parse(canonical_line(b, /*include_wall=*/false));
    std::vector<std::string> fields;
    for (auto it = ja.begin(); it != ja.end(); ++it) {
        if (jb.at(it.key()) != it.value()) fields.push_back(it.key());
    }
    return fields;
}

} // namespace detail

/// Byte-exact comparison of two run logs under canonical serialization,
/// excluding wall_timestamp. Lines pair up positionally.
inline ReplayReport replay_verify(const std::string& left_path, const std::string& right_path) {
    std::vector<RunRecord> left = read_all(left_path);
    std::vector<RunRecord> right = read_all(right_path);
    ReplayReport report;
    report.lines_left = left.size();
    report.lines_right = right.size();
    std::size_t common = std::min(left.size(), right.size());
    for (std::size_t i = 0; i < common; ++i) {
        if (canonical_line(left[i], false) == canonical_line(right[i], false)) {
            ++report.matched;
        } else {
            report.mismatches.push_back({i + 1, detail::differing_fields(left[i], right[i])});
        }
    }
    for (std::size_t i = common; i < std::max(left.size(), right.size()); ++i) {
        report.mismatches.push_back({i + 1, {"<missing line>"}});
    }
    return report;
}

} // namespace acar

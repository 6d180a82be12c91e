#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "examforge/store/event_log.hpp"

namespace examforge::store {

struct UsageRow {
    std::string mode;
    std::size_t exercises = 0;
    std::size_t students = 0;
    std::size_t submissions = 0;
};

struct ExerciseUsage {
    std::string exercise;
    std::string mode;
    std::size_t sessions = 0;
    std::size_t students = 0;
    std::size_t submissions = 0;
};

/// Rows for formative, summative and exam in that order, plus a total.
/// Students are distinct session owners; a session without a recorded
/// owner counts as its own student.
struct UsageSummary {
    std::vector<UsageRow> by_mode;
    UsageRow total;
    std::vector<ExerciseUsage> by_exercise;
};

UsageSummary aggregate_usage(const std::vector<EventRecord>& events);

nlohmann::ordered_json to_json(const UsageSummary& summary);

/// Plain-text table, one row per mode.
std::string format_usage_table(const UsageSummary& summary);

/// A session rebuilt from its events.
struct ReplayedSession {
    std::string session_id;
    std::string exercise_id;
    std::string mode;
    std::uint64_t seed = 0;
    std::string owner;
    std::vector<std::string> path;
    std::map<std::string, int> stage_scores;
    std::map<std::string, double> stage_weights;
    std::size_t submissions = 0;
    bool finished = false;
    std::optional<int> total;           // recomputed from the stage scores
    std::optional<int> recorded_total;  // as written by sessionFinished
};

using SessionFilter = std::function<bool(const ReplayedSession&)>;

std::vector<ReplayedSession> replay_sessions(const std::vector<EventRecord>& events,
                                             const SessionFilter& filter = {});

/// round(sum(w * s) / sum(w)); 0 when all weights are zero.
int weighted_total(const std::map<std::string, int>& scores, const std::map<std::string, double>& weights);

}  // namespace examforge::store

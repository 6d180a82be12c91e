#include "examforge/store/stats.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace examforge::store {

namespace {

const std::vector<std::string> kModes = {"formative", "summative", "exam"};

template <class T>
T member(const nlohmann::ordered_json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        return fallback;
    }
}

}  // namespace

UsageSummary aggregate_usage(const std::vector<EventRecord>& events) {
    struct SessionInfo {
        std::string exercise;
        std::string mode;
        std::string owner;
    };
    std::map<std::string, SessionInfo> sessions;
    std::map<std::pair<std::string, std::string>, ExerciseUsage> per_exercise;
    std::map<std::pair<std::string, std::string>, std::set<std::string>> exercise_students;

    for (const auto& e : events) {
        if (e.kind == EventKind::SessionStarted) {
            SessionInfo info{member<std::string>(e.payload, "exercise", ""), member<std::string>(e.payload, "mode", ""),
                             member<std::string>(e.payload, "owner", "")};
            if (info.owner.empty()) info.owner = e.session_id;
            auto key = std::make_pair(info.exercise, info.mode);
            auto& row = per_exercise[key];
            row.exercise = info.exercise;
            row.mode = info.mode;
            ++row.sessions;
            exercise_students[key].insert(info.owner);
            sessions[e.session_id] = std::move(info);
        } else if (e.kind == EventKind::SubmissionMade) {
            auto it = sessions.find(e.session_id);
            if (it == sessions.end()) continue;  // its start record was lost
            ++per_exercise[{it->second.exercise, it->second.mode}].submissions;
        }
    }

    UsageSummary out;
    out.total.mode = "total";
    std::set<std::string> all_exercises;
    std::set<std::string> all_students;
    for (const auto& mode : kModes) {
        UsageRow row;
        row.mode = mode;
        std::set<std::string> students;
        for (const auto& [key, usage] : per_exercise) {
            if (key.second != mode) continue;
            ++row.exercises;
            row.submissions += usage.submissions;
            for (const auto& s : exercise_students[key]) students.insert(s);
            all_exercises.insert(key.first);
        }
        row.students = students.size();
        all_students.insert(students.begin(), students.end());
        out.total.submissions += row.submissions;
        out.by_mode.push_back(row);
    }
    out.total.exercises = all_exercises.size();
    out.total.students = all_students.size();
    for (auto& [key, usage] : per_exercise) {
        usage.students = exercise_students[key].size();
        out.by_exercise.push_back(usage);
    }
    return out;
}

nlohmann::ordered_json to_json(const UsageSummary& summary) {
    auto row = [](const UsageRow& r) {
        return nlohmann::ordered_json{{"mode", r.mode},
                                      {"exercises", r.exercises},
                                      {"students", r.students},
                                      {"submissions", r.submissions}};
    };
    nlohmann::ordered_json j;
    j["byMode"] = nlohmann::ordered_json::array();
    for (const auto& r : summary.by_mode) j["byMode"].push_back(row(r));
    j["total"] = row(summary.total);
    j["byExercise"] = nlohmann::ordered_json::array();
    for (const auto& u : summary.by_exercise) {
        j["byExercise"].push_back({{"exercise", u.exercise},
                                   {"mode", u.mode},
                                   {"sessions", u.sessions},
                                   {"students", u.students},
                                   {"submissions", u.submissions}});
    }
    return j;
}

std::string format_usage_table(const UsageSummary& summary) {
    std::string out;
    char line[128];
    std::snprintf(line, sizeof line, "%-10s %10s %10s %12s\n", "Mode", "Exercises", "Students", "Submissions");
    out += line;
    auto emit = [&](const UsageRow& r) {
        std::snprintf(line, sizeof line, "%-10s %10zu %10zu %12zu\n", r.mode.c_str(), r.exercises, r.students,
                      r.submissions);
        out += line;
    };
    for (const auto& r : summary.by_mode) emit(r);
    emit(summary.total);
    return out;
}

int weighted_total(const std::map<std::string, int>& scores, const std::map<std::string, double>& weights) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& [stage, w] : weights) {
        auto it = scores.find(stage);
        num += w * (it == scores.end() ? 0 : it->second);
        den += w;
    }
    if (den <= 0.0) return 0;
    return static_cast<int>(std::lround(num / den));
}

std::vector<ReplayedSession> replay_sessions(const std::vector<EventRecord>& events, const SessionFilter& filter) {
    std::vector<ReplayedSession> order;
    std::map<std::string, std::size_t> index;

    auto visit = [](ReplayedSession& s, const std::string& stage) {
        if (stage.empty()) return;
        if (s.path.empty() || s.path.back() != stage) s.path.push_back(stage);
    };

    for (const auto& e : events) {
        if (e.kind == EventKind::SessionStarted) {
            ReplayedSession s;
            s.session_id = e.session_id;
            s.exercise_id = member<std::string>(e.payload, "exercise", "");
            s.mode = member<std::string>(e.payload, "mode", "");
            s.seed = member<std::uint64_t>(e.payload, "seed", 0);
            s.owner = member<std::string>(e.payload, "owner", e.session_id);
            visit(s, member<std::string>(e.payload, "entry", ""));
            index[e.session_id] = order.size();
            order.push_back(std::move(s));
            continue;
        }
        auto it = index.find(e.session_id);
        if (it == index.end()) continue;
        ReplayedSession& s = order[it->second];
        const std::string stage = member<std::string>(e.payload, "stage", "");
        switch (e.kind) {
            case EventKind::SubmissionMade:
                ++s.submissions;
                s.stage_scores[stage] = member<int>(e.payload, "stageScore", 0);
                s.stage_weights[stage] = member<double>(e.payload, "weight", 1.0);
                visit(s, member<std::string>(e.payload, "next", ""));
                break;
            case EventKind::StageSkipped:
                s.stage_scores[stage] = 0;
                s.stage_weights[stage] = member<double>(e.payload, "weight", 1.0);
                visit(s, member<std::string>(e.payload, "next", ""));
                break;
            case EventKind::SessionFinished: {
                s.finished = true;
                s.recorded_total = member<int>(e.payload, "total", 0);
                auto w = e.payload.find("weights");
                std::map<std::string, double> weights;
                for (const auto& stage_id : s.path) {
                    double weight = s.stage_weights.count(stage_id) ? s.stage_weights[stage_id] : 1.0;
                    if (w != e.payload.end() && w->is_object() && w->contains(stage_id)) {
                        weight = member<double>(*w, stage_id.c_str(), weight);
                    }
                    weights[stage_id] = weight;
                }
                s.stage_weights = weights;
                s.total = weighted_total(s.stage_scores, weights);
                break;
            }
            default: break;
        }
    }
    if (!filter) return order;
    std::vector<ReplayedSession> out;
    for (auto& s : order) {
        if (filter(s)) out.push_back(std::move(s));
    }
    return out;
}

}  // namespace examforge::store

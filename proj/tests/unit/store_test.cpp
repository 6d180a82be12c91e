#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "examforge/store/event_log.hpp"
#include "examforge/store/stats.hpp"
#include "support/fixtures.hpp"

using namespace examforge::store;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

auto fixed_clock(std::chrono::system_clock::time_point t) {
    return [t] { return t; };
}

const auto kDay = std::chrono::system_clock::from_time_t(1767225600);  // 2026-01-01

void start(EventLog& log, const std::string& session, const std::string& exercise, const std::string& mode,
           const std::string& owner = "") {
    ordered_json p{{"exercise", exercise}, {"mode", mode}, {"seed", 1}, {"entry", "a"}};
    if (!owner.empty()) p["owner"] = owner;
    log.append(session, EventKind::SessionStarted, p);
}

void submit(EventLog& log, const std::string& session) {
    log.append(session, EventKind::SubmissionMade, {{"stage", "a"}, {"stageScore", 100}, {"weight", 1}});
}

}  // namespace

TEST_SUITE("event log") {
    TEST_CASE("record round trip") {
        EventRecord e{7, "2026-01-01T00:00:00.000Z", "s1", EventKind::HintRequested, {{"stage", "a"}, {"index", 0}}};
        const std::string line = encode_event(e);
        CHECK(line.back() == '\n');
        auto back = decode_event(line);
        CHECK(back.seq == 7);
        CHECK(back.kind == EventKind::HintRequested);
        CHECK(back.payload == e.payload);
        CHECK(encode_event(back) == line);
        CHECK_THROWS_AS(decode_event("{\"seq\":0}"), std::invalid_argument);
        CHECK_THROWS_AS(decode_event("{\"seq\":1,\"ts\":\"\",\"session\":\"s\",\"kind\":\"nope\",\"payload\":{}}"),
                        std::invalid_argument);
        CHECK_THROWS_AS(decode_event("[]"), std::invalid_argument);
    }

    TEST_CASE("timestamps") {
        CHECK(format_timestamp(kDay) == "2026-01-01T00:00:00.000Z");
        CHECK(format_timestamp(kDay + std::chrono::milliseconds(1500)) == "2026-01-01T00:00:01.500Z");
    }

    TEST_CASE("sequence starts at one, increases, survives reopen and day change") {
        auto dir = examforge::testing::temp_dir("log1");
        {
            EventLog log(dir, {fixed_clock(kDay), false});
            CHECK(log.append("s", EventKind::SessionStarted, {}) == 1);
            CHECK(log.append("s", EventKind::SubmissionMade, {}) == 2);
        }
        EventLog log(dir, {fixed_clock(kDay + std::chrono::hours(24)), false});
        CHECK(log.last_seq() == 2);
        CHECK(log.append("s", EventKind::SessionFinished, {}) == 3);
        auto files = log_files(dir);
        REQUIRE(files.size() == 2);
        CHECK(files[0].filename() == "events-2026-01-01.jsonl");
        CHECK(files[1].filename() == "events-2026-01-02.jsonl");
        auto all = read_log(dir, false);
        REQUIRE(all.events.size() == 3);
        CHECK(all.events[2].seq == 3);
    }

    TEST_CASE("empty or missing directory") {
        CHECK(read_log("/nonexistent/examforge").events.empty());
        auto dir = examforge::testing::temp_dir("log2");
        CHECK(read_log(dir).events.empty());
        CHECK(replay_sessions({}).empty());
    }

    TEST_CASE("truncated last line loses one record") {
        auto dir = examforge::testing::temp_dir("log3");
        {
            EventLog log(dir, {fixed_clock(kDay), false});
            for (int i = 0; i < 5; ++i) submit(log, "s");
        }
        const auto file = log_files(dir).at(0);
        const auto size = fs::file_size(file);
        fs::resize_file(file, size - 7);
        auto tolerant = read_log(dir);
        CHECK(tolerant.events.size() == 4);
        REQUIRE(tolerant.corruptions.size() == 1);
        CHECK(tolerant.corruptions[0].line == 5);
        CHECK(tolerant.corruptions[0].after_seq == 4);
        CHECK_THROWS_AS(read_log(dir, false), StorageError);

        // appending after the crash starts a fresh line
        EventLog log(dir, {fixed_clock(kDay), false});
        CHECK(log.append("s", EventKind::SessionFinished, {}) == 5);
        auto again = read_log(dir);
        CHECK(again.events.size() == 5);
        CHECK(again.corruptions.size() == 1);
    }

    TEST_CASE("non-increasing sequence is a corruption") {
        auto dir = examforge::testing::temp_dir("log4");
        std::ofstream(dir / "events-2026-01-01.jsonl")
            << encode_event({2, "t", "s", EventKind::SessionStarted, ordered_json::object()})
            << encode_event({2, "t", "s", EventKind::SessionStarted, ordered_json::object()});
        auto c = read_log(dir);
        CHECK(c.events.size() == 1);
        CHECK(c.corruptions.size() == 1);
    }
}

TEST_SUITE("usage") {
    TEST_CASE("two exercises, three sessions, seven submissions") {
        auto dir = examforge::testing::temp_dir("use1");
        EventLog log(dir, {fixed_clock(kDay), false});
        start(log, "s1", "cauchy", "formative", "ann");
        start(log, "s2", "cauchy", "formative", "bob");
        start(log, "s3", "hypo", "formative", "ann");
        for (int i = 0; i < 3; ++i) submit(log, "s1");
        for (int i = 0; i < 2; ++i) submit(log, "s2");
        for (int i = 0; i < 2; ++i) submit(log, "s3");
        log.append("s1", EventKind::HintRequested, {{"stage", "a"}, {"index", 0}});
        auto u = aggregate_usage(read_log(dir).events);
        CHECK(u.total.exercises == 2);
        CHECK(u.total.submissions == 7);
        CHECK(u.total.students == 2);
        CHECK(u.by_mode[0].mode == "formative");
        CHECK(u.by_mode[0].exercises == 2);
        CHECK(u.by_mode[1].submissions == 0);
        REQUIRE(u.by_exercise.size() == 2);
        CHECK(u.by_exercise[0].sessions == 2);
        CHECK(u.by_exercise[0].submissions == 5);
    }

    TEST_CASE("sessions without owner count as students") {
        auto dir = examforge::testing::temp_dir("use2");
        EventLog log(dir, {fixed_clock(kDay), false});
        for (const char* s : {"a", "b", "c"}) start(log, s, "x", "summative");
        auto u = aggregate_usage(read_log(dir).events);
        CHECK(u.total.students == 3);
        CHECK(u.total.submissions == 0);
        CHECK(u.by_mode[1].students == 3);
    }

    TEST_CASE("empty log gives a zero table") {
        auto u = aggregate_usage({});
        CHECK(u.by_mode.size() == 3);
        CHECK(u.total.exercises == 0);
        const std::string table = format_usage_table(u);
        CHECK(table.find("Exercises") != std::string::npos);
        CHECK(table.find("exam") != std::string::npos);
        CHECK(to_json(u)["total"]["submissions"] == 0);
    }

    TEST_CASE("random logs match a brute-force count") {
        std::mt19937_64 rng(5);
        const char* modes[] = {"formative", "summative", "exam"};
        for (int round = 0; round < 10; ++round) {
            std::vector<EventRecord> events;
            std::map<std::string, std::pair<std::string, std::string>> session_info;
            std::uint64_t seq = 0;
            for (int i = 0; i < 300; ++i) {
                EventRecord e;
                e.seq = ++seq;
                e.session_id = "s" + std::to_string(rng() % 40);
                if (!session_info.count(e.session_id) || rng() % 10 == 0) {
                    e.kind = EventKind::SessionStarted;
                    std::string ex = "e" + std::to_string(rng() % 5);
                    std::string mode = modes[rng() % 3];
                    e.payload = {{"exercise", ex}, {"mode", mode}, {"owner", "u" + std::to_string(rng() % 15)}};
                    session_info[e.session_id] = {ex, mode};
                } else {
                    e.kind = rng() % 2 ? EventKind::SubmissionMade : EventKind::HintRequested;
                }
                events.push_back(e);
            }
            auto u = aggregate_usage(events);
            // count per mode directly from the list
            for (const auto& row : u.by_mode) {
                std::set<std::string> ex, owners;
                std::size_t subs = 0;
                std::map<std::string, std::string> mode_of;
                for (const auto& e : events) {
                    if (e.kind == EventKind::SessionStarted) {
                        mode_of[e.session_id] = e.payload["mode"];
                        if (e.payload["mode"] == row.mode) {
                            ex.insert(e.payload["exercise"]);
                            owners.insert(e.payload["owner"]);
                        }
                    } else if (e.kind == EventKind::SubmissionMade && mode_of[e.session_id] == row.mode) {
                        ++subs;
                    }
                }
                CHECK(row.exercises == ex.size());
                CHECK(row.students == owners.size());
                CHECK(row.submissions == subs);
            }
        }
    }

    TEST_CASE("weighted total") {
        CHECK(weighted_total({{"a", 100}, {"b", 0}}, {{"a", 1}, {"b", 1}}) == 50);
        CHECK(weighted_total({{"a", 100}, {"b", 0}}, {{"a", 3}, {"b", 1}}) == 75);
        CHECK(weighted_total({{"a", 100}}, {{"a", 0}}) == 0);
        CHECK(weighted_total({{"a", 50}, {"b", 100}, {"c", 100}}, {{"a", 1}, {"b", 1}, {"c", 1}}) == 83);
        CHECK(weighted_total({{"a", 100}, {"b", 100}, {"c", 100}, {"d", 0}, {"e", 100}},
                             {{"a", 1}, {"b", 1}, {"c", 1}, {"d", 1}, {"e", 1}}) == 80);
    }
}

#include <random>
#include <thread>

#include "doctest.h"
#include "examforge/session/session.hpp"
#include "examforge/store/stats.hpp"
#include "support/harness.hpp"

using namespace examforge::session;
using examforge::expr::Value;
using examforge::testing::Harness;
using examforge::testing::load_fixture;
using examforge::testing::pinned_hypothesis_test;
using Code = SessionError::Code;

namespace {

std::string cauchy_correct(const examforge::expr::Bindings& b) {
    return "(1/pi)*atan((x-(" + std::to_string(b.get("m").as_integer()) + "))/" +
           std::to_string(b.get("k").as_integer()) + ")+1/2";
}

Code code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const SessionError& e) {
        return e.code();
    }
    FAIL("no SessionError");
    return Code::InvalidInput;
}

// tail, dist, df, stat -> decision, all correct for the pinned data
void walk_to_decision(Session& s) {
    REQUIRE(s.submit({{"tail", "1"}}).outcome == Outcome::Advanced);
    REQUIRE(s.submit({{"dist", "Student t"}}).next->stage_id == "df");
    REQUIRE(s.submit({{"df", "3"}}).next->stage_id == "stat");
}

}  // namespace

TEST_SUITE("numbers") {
    TEST_CASE("parse_number") {
        CHECK(parse_number("-1.2672") == -1.2672);
        CHECK(parse_number("  +3 ") == 3.0);
        CHECK(parse_number("1e-3") == 0.001);
        CHECK(parse_number("2.5E2") == 250.0);
        for (const char* bad : {"", "don't know", "1,5", "0x10", "inf", "nan", "1.2.3", "- 1", "1e", "--1", "1 2"}) {
            CAPTURE(bad);
            CHECK_FALSE(parse_number(bad).has_value());
        }
    }
}

TEST_SUITE("cauchy") {
    TEST_CASE("correct answer advances with full score") {
        Harness h("sess-c1");
        auto s = Session::start(load_fixture("cauchy_cdf"), Mode::Formative, 11, h.pool);
        CHECK(s->view().stage_id == "cdf");
        auto r = s->submit({{"F", cauchy_correct(s->bindings())}});
        CHECK(r.outcome == Outcome::Advanced);
        CHECK(r.score == 100);
        CHECK(r.rule == 0u);
        REQUIRE(r.next);
        CHECK(r.next->stage_id == "quantile");
    }

    TEST_CASE("substitution slip stays for a redo") {
        Harness h("sess-c2");
        auto s = Session::start(load_fixture("cauchy_cdf"), Mode::Formative, 12, h.pool);
        auto r = s->submit({{"F", "(1/(pi*k))*atan((x-m)/k)+1/2"}});
        CHECK(r.outcome == Outcome::Redo);
        CHECK(r.rule == 3u);
        REQUIRE(r.feedback);
        CHECK(r.feedback->find("substitution") != std::string::npos);
        CHECK(s->current_stage() == "cdf");
        CHECK(s->view().attempt == 1);
        CHECK(s->submit({{"F", "k^2+1"}}).rule == 1u);
        CHECK(s->submit({{"F", "tan(x)"}}).rule == 2u);
    }

    TEST_CASE("wrong constant detours to the constant stage") {
        Harness h("sess-c3");
        auto s = Session::start(load_fixture("cauchy_cdf"), Mode::Formative, 13, h.pool);
        auto r = s->submit({{"F", "(1/pi)*atan((x-m)/k)"}});
        CHECK(r.rule == 4u);
        CHECK(r.score == 50);
        REQUIRE(r.next);
        CHECK(r.next->stage_id == "constant");
    }

    TEST_CASE("unparsable formula without fallback hits the catch-all") {
        Harness h("sess-c4");
        auto s = Session::start(load_fixture("cauchy_cdf"), Mode::Formative, 14, h.pool);
        auto r = s->submit({{"F", "atan((x"}});
        CHECK(r.rule == std::optional<std::size_t>(6));
        INFO(s->records().back().rule_id);
        CHECK(r.outcome == Outcome::Redo);
        CHECK(s->records().back().parse_failed);
    }

    TEST_CASE("hints in order, then exhausted; refused in summative") {
        Harness h("sess-c5");
        auto def = load_fixture("cauchy_cdf");
        auto s = Session::start(def, Mode::Formative, 15, h.pool);
        const auto k = std::to_string(s->bindings().get("k").as_integer());
        CHECK(s->hint() == def->stage("cdf").hints[0]);
        CHECK(s->hint().find("/" + k) != std::string::npos);
        CHECK(s->view().next_hint == 2);
        CHECK(s->hint().find("atan") != std::string::npos);
        CHECK_FALSE(s->view().hint_available);
        CHECK(code_of([&] { s->hint(); }) == Code::HintsExhausted);

        auto t = Session::start(def, Mode::Summative, 15, h.pool);
        CHECK(code_of([&] { t->hint(); }) == Code::ModeViolation);
        CHECK_FALSE(t->view().hint_available);
        CHECK(t->view().hints_total == 0);
    }

    TEST_CASE("summative never redoes and never gives feedback") {
        Harness h("sess-c6");
        auto s = Session::start(load_fixture("cauchy_cdf"), Mode::Summative, 16, h.pool);
        auto r = s->submit({{"F", "tan(x)"}});
        CHECK(r.outcome == Outcome::Advanced);
        CHECK_FALSE(r.feedback);
        CHECK(r.next->stage_id == "quantile");
        auto skip = s->skip();
        CHECK_FALSE(skip.solution);
        CHECK(skip.completed);
        auto result = s->finish();
        CHECK(result.total == 0);
        CHECK_FALSE(result.abandoned);
    }

    TEST_CASE("same seed renders the same, other seeds vary") {
        Harness h("sess-c7");
        auto def = load_fixture("cauchy_cdf");
        auto a = Session::start(def, Mode::Formative, 99, h.pool);
        auto b = Session::start(def, Mode::Formative, 99, h.pool);
        CHECK(a->view().task == b->view().task);
        std::set<std::string> tasks;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            tasks.insert(Session::start(def, Mode::Formative, seed, h.pool)->view().task);
        }
        CHECK(tasks.size() > 5);
    }

    TEST_CASE("mode not offered is refused") {
        Harness h("sess-c8");
        CHECK(code_of([&] { Session::start(load_fixture("cauchy_cdf"), Mode::Exam, 1, h.pool); }) ==
              Code::ModeViolation);
    }

    TEST_CASE("invalid exercise is refused") {
        Harness h("sess-c9");
        auto def = std::make_shared<const examforge::exercise::ExerciseDefinition>(
            examforge::exercise::load_exercise_file(examforge::testing::fixture("invalid/missing_fallback.json")));
        CHECK(code_of([&] { Session::start(def, Mode::Formative, 1, h.pool); }) == Code::InvalidExercise);
        CHECK(h.pool.size() == 0);
    }
}

TEST_SUITE("hypothesis") {
    TEST_CASE("distribution choice routes around the df stage") {
        Harness h("sess-h1");
        auto def = load_fixture("hypothesis_test");
        auto s = Session::start(def, Mode::Formative, 3, h.pool);
        s->submit({{"tail", "right tailed"}});
        CHECK(s->submit({{"dist", "1"}}).next->stage_id == "df");

        auto t = Session::start(def, Mode::Formative, 3, h.pool);
        t->submit({{"tail", "1"}});
        CHECK(t->submit({{"dist", "normal"}}).next->stage_id == "stat");
    }

    TEST_CASE("wrong tail proceeds on its own subpath") {
        Harness h("sess-h2");
        auto s = Session::start(load_fixture("hypothesis_test"), Mode::Formative, 4, h.pool);
        auto r = s->submit({{"tail", "left tailed"}});
        CHECK(r.outcome == Outcome::Advanced);
        CHECK(r.score == 0);
        CHECK(r.next->stage_id == "dist");
        CHECK(s->eval_in_workspace("tail") == Value(0));
    }

    TEST_CASE("corridor boundaries") {
        Harness h("sess-h3");
        auto def = pinned_hypothesis_test();
        for (auto [input, accepted] : {std::pair{"-1.2662", true}, {"-1.2682", true}, {"-1.2665", true},
                                       {"-1.2672", true}, {"-1.2690", false}, {"-1.2661", false},
                                       {"-1.2683", false}}) {
            CAPTURE(input);
            auto s = Session::start(def, Mode::Formative, 1, h.pool);
            walk_to_decision(*s);
            auto r = s->submit({{"t", input}});
            CHECK((r.score == 100) == accepted);
            CHECK(r.next->stage_id == "decision");
        }
    }

    TEST_CASE("carry-forward keeps wrong values") {
        Harness h("sess-h4");
        auto s = Session::start(pinned_hypothesis_test(), Mode::Formative, 1, h.pool);
        walk_to_decision(*s);
        CHECK(s->submit({{"t", "-2.5"}}).score == 0);
        CHECK(s->eval_in_workspace("t_in") == Value(-2.5));
        CHECK(s->eval_in_workspace("dist") == Value(1));
    }

    TEST_CASE("don't know routes to the fallback with score zero") {
        Harness h("sess-h5");
        auto s = Session::start(pinned_hypothesis_test(), Mode::Formative, 1, h.pool);
        walk_to_decision(*s);
        auto r = s->submit({{"t", "don't know"}});
        CHECK(r.outcome == Outcome::Fallback);
        CHECK(r.score == 0);
        CHECK(r.next->stage_id == "decision_fb");
        CHECK(s->stage_scores().at("stat") == 0);
        CHECK_THROWS(s->eval_in_workspace("t_in"));
    }

    TEST_CASE("skipping the statistic reveals it and takes the fallback") {
        Harness h("sess-h6");
        auto s = Session::start(pinned_hypothesis_test(), Mode::Formative, 1, h.pool);
        walk_to_decision(*s);
        auto r = s->skip();
        REQUIRE(r.solution);
        CHECK(*r.solution == "t = -1.2672");
        CHECK(r.next->stage_id == "decision_fb");
    }

    TEST_CASE("consistent decision scores full marks and totals are weighted") {
        Harness h("sess-h7");
        auto s = Session::start(pinned_hypothesis_test(), Mode::Formative, 1, h.pool);
        walk_to_decision(*s);
        s->submit({{"t", "-1.2672"}});
        // right tailed t test, df 3: critical value qt(0.95, 3) = 2.3534
        auto r = s->submit({{"crit", "2.3534"}, {"decision", "do not reject H0"}});
        CHECK(r.score == 100);
        CHECK(r.completed);
        CHECK(code_of([&] { s->submit({{"crit", "1"}, {"decision", "0"}}); }) == Code::Completed);
        auto result = s->finish();
        CHECK(result.total == 100);
        CHECK(result.path == std::vector<std::string>{"tail", "dist", "df", "stat", "decision"});
        CHECK(code_of([&] { s->submit({{"tail", "1"}}); }) == Code::Finished);
        CHECK(code_of([&] { s->finish(); }) == Code::Finished);
    }

    TEST_CASE("skipped stage counts zero in the total") {
        Harness h("sess-h8");
        auto s = Session::start(pinned_hypothesis_test(), Mode::Formative, 1, h.pool);
        walk_to_decision(*s);
        s->skip();
        s->submit({{"crit", "2.3534"}, {"decision", "1"}});
        auto result = s->finish();
        CHECK(result.stage_scores.at("stat") == 0);
        CHECK(result.total == 80);
    }

    TEST_CASE("inputs are checked") {
        Harness h("sess-h9");
        auto s = Session::start(load_fixture("hypothesis_test"), Mode::Formative, 1, h.pool);
        CHECK(code_of([&] { s->submit({}); }) == Code::InvalidInput);
        CHECK(code_of([&] { s->submit({{"tail", "7"}}); }) == Code::InvalidInput);
        CHECK(code_of([&] { s->submit({{"tail", "sideways"}}); }) == Code::InvalidInput);
        CHECK(code_of([&] { s->submit({{"tail", "1"}, {"x", "1"}}); }) == Code::InvalidInput);
        CHECK(code_of([&] { s->skip(); }) == Code::NotSkippable);
        CHECK(code_of([&] { s->finish(); }) == Code::NotTerminal);
        auto r = s->finish(true);
        CHECK(r.abandoned);
        CHECK(r.total == 0);
    }
}

TEST_SUITE("engine properties") {
    TEST_CASE("redo cap forces an advance with the best score") {
        Harness h("sess-p1");
        auto s = Session::start(load_fixture("cauchy_cdf"), Mode::Formative, 2, h.pool);
        for (int i = 0; i < 9; ++i) CHECK(s->submit({{"F", "tan(x)"}}).outcome == Outcome::Redo);
        auto r = s->submit({{"F", "tan(x)"}});
        CHECK(r.outcome == Outcome::Advanced);
        CHECK(r.next->stage_id == "quantile");
    }

    TEST_CASE("workspace closes on finish") {
        Harness h("sess-p2");
        auto s = Session::start(load_fixture("minimal"), Mode::Formative, 2, h.pool);
        CHECK(h.pool.size() == 1);
        CHECK(h.core.workspace_count() == 1);
        CHECK(s->submit({{"s", "999"}}).outcome == Outcome::Redo);
        CHECK(s->submit({{"s", std::to_string(s->bindings().get("total").as_integer())}}).completed);
        s->finish();
        CHECK(h.pool.size() == 0);
        CHECK(h.core.workspace_count() == 0);
    }

    TEST_CASE("random action sequences terminate with scores in range and replay identically") {
        Harness h("sess-p3");
        const char* names[] = {"cauchy_cdf", "hypothesis_test", "minimal", "histogram_plot"};
        const char* answers[] = {"0", "1", "2", "-1.5", "3", "x", "tan(x)", "(1/pi)*atan((x-m)/k)+1/2", "oops", "50"};
        std::mt19937_64 rng(2024);
        for (int round = 0; round < 24; ++round) {
            auto def = load_fixture(names[round % 4]);
            const Mode mode = round % 3 == 0 && def->allows(Mode::Summative) ? Mode::Summative : Mode::Formative;
            const std::uint64_t seed = rng();
            auto s = Session::start(def, mode, seed, h.pool);
            std::size_t steps = 0;
            const std::size_t bound = def->stages.size() * 10 + 5;
            while (!s->completed()) {
                REQUIRE(++steps <= bound);
                const auto view = s->view();
                const Stage& stage = def->stage(view.stage_id);
                const int pick = static_cast<int>(rng() % 10);
                if (pick == 0 && view.hint_available) {
                    s->hint();
                    continue;
                }
                if (pick == 1 && stage.skippable) {
                    s->skip();
                    continue;
                }
                std::map<std::string, std::string> in;
                for (const auto& el : view.inputs) {
                    in[el.id] = examforge::exercise::is_choice(el.kind) ? std::to_string(rng() % el.options.size())
                                                                        : answers[rng() % 10];
                }
                auto r = s->submit(in);
                CHECK(r.score >= 0);
                CHECK(r.score <= 100);
            }
            auto live = s->finish();
            CHECK(live.total >= 0);
            CHECK(live.total <= 100);
            auto again = replay(def, mode, seed, s->actions(), h.pool, {.session_id = "replay-" + std::to_string(round)});
            again.session_id = live.session_id;
            CHECK(again == live);
        }
    }
}

TEST_SUITE("persistence") {
    TEST_CASE("events fold back to the live result") {
        Harness h("sess-e1");
        auto dir = examforge::testing::temp_dir("sess-e1-log");
        examforge::store::EventLog log(dir);
        auto s = Session::start(pinned_hypothesis_test(), Mode::Formative, 1, h.pool, {.owner = "alice", .log = &log});
        walk_to_decision(*s);
        s->skip();
        s->submit({{"crit", "2.3534"}, {"decision", "1"}});
        auto live = s->finish();
        auto contents = examforge::store::read_log(dir);
        CHECK(contents.corruptions.empty());
        auto replayed = examforge::store::replay_sessions(contents.events);
        REQUIRE(replayed.size() == 1);
        CHECK(replayed[0].path == live.path);
        CHECK(replayed[0].stage_scores == live.stage_scores);
        CHECK(replayed[0].total == live.total);
        CHECK(replayed[0].recorded_total == live.total);
        CHECK(replayed[0].owner == "alice");
        CHECK(replayed[0].submissions == 4);
    }

    TEST_CASE("exam mode refuses to continue without storage") {
        Harness h("sess-e2");
        auto dir = examforge::testing::temp_dir("sess-e2-log");
        auto doc = examforge::testing::fixture_json("minimal");
        doc["modes"] = {"formative", "exam"};
        doc["stages"]["sum"]["repeatable"] = false;
        auto def = std::make_shared<const examforge::exercise::ExerciseDefinition>(
            examforge::exercise::load_exercise(doc.dump()));
        // the first record of each log lands on 2026-01-01, later ones on a
        // day whose file is a full device
        std::filesystem::create_symlink("/dev/full", dir / "events-2026-01-02.jsonl");
        auto day_one = std::chrono::system_clock::from_time_t(1767225600);
        auto make_clock = [&] {
            return [n = std::make_shared<int>(0), day_one] {
                return (*n)++ == 0 ? day_one : day_one + std::chrono::hours(24);
            };
        };
        examforge::store::EventLog exam_log(dir, {.clock = make_clock(), .sync = false});
        auto exam = Session::start(def, Mode::Exam, 1, h.pool, {.log = &exam_log});
        CHECK(code_of([&] { exam->submit({{"s", "1"}}); }) == Code::Storage);
        CHECK(exam->records().empty());
        CHECK(exam->current_stage() == "sum");

        examforge::store::EventLog practice_log(dir, {.clock = make_clock(), .sync = false});
        auto practice = Session::start(def, Mode::Formative, 1, h.pool, {.log = &practice_log});
        CHECK_NOTHROW(practice->submit({{"s", "1"}}));
        CHECK(practice->records().size() == 1);
    }

    TEST_CASE("append to a full device surfaces an error") {
        auto dir = examforge::testing::temp_dir("sess-e3-log");
        std::filesystem::create_symlink("/dev/full", dir / "events-2026-01-01.jsonl");
        auto day_one = std::chrono::system_clock::from_time_t(1767225600);
        examforge::store::EventLog log(dir, {.clock = [=] { return day_one; }, .sync = false});
        CHECK_THROWS_AS(log.append("s", examforge::store::EventKind::SessionStarted, {}), examforge::store::StorageError);
        CHECK(log.last_seq() == 0);
    }
}

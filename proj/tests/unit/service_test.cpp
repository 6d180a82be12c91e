#include <regex>
#include <thread>

#include "doctest.h"
#include "examforge/service/service.hpp"
#include "httplib.h"
#include "support/harness.hpp"

using namespace examforge;
using nlohmann::json;

namespace {

struct Server {
    testing::Harness h;
    service::Service svc;
    int port;
    httplib::Client client;

    explicit Server(const std::string& tag, std::string instructor_token = "")
        : h(tag),
          svc(service::ServiceConfig{testing::fixture("exercises"), (h.root / "data").string(), "*",
                                     std::move(instructor_token)},
              h.connector),
          port(svc.start_background()),
          client("127.0.0.1", port) {
        client.set_read_timeout(30);
    }

    std::pair<int, json> post(const std::string& path, const json& body, const std::string& definition) {
        auto res = client.Post(path, body.dump(), "application/json");
        REQUIRE(res);
        return check(*res, definition);
    }

    std::pair<int, json> get(const std::string& path, const std::string& definition) {
        auto res = client.Get(path);
        REQUIRE(res);
        return check(*res, definition);
    }

    static std::pair<int, json> check(const httplib::Response& res, const std::string& definition) {
        auto body = json::parse(res.body);
        const std::string def = res.status == 200 ? definition : "error";
        auto violations = service::api_schema().validate(body, def);
        INFO(def, " ", res.body);
        CHECK(violations.empty());
        return {res.status, body};
    }

    std::string start(const std::string& exercise, const std::string& mode, std::uint64_t seed = 3) {
        auto [status, body] = post("/sessions", {{"exerciseId", exercise}, {"mode", mode}, {"seed", seed}},
                                   "startResponse");
        REQUIRE(status == 200);
        return body["token"];
    }
};

std::string cauchy_answer(const std::string& task) {
    std::smatch m;
    REQUIRE(std::regex_search(task, m, std::regex(R"(f\(x\) = (\d+)/\(pi\*\(\d+\^2 \+ \(x - \((-?\d+)\)\))")));
    return "(1/pi)*atan((x-(" + m[2].str() + "))/" + m[1].str() + ")+1/2";
}

}  // namespace

TEST_SUITE("service") {
    TEST_CASE("exercise list") {
        Server s("svc1");
        auto [status, body] = s.get("/exercises", "exerciseList");
        CHECK(status == 200);
        CHECK(body.size() == 4);
        CHECK(body[0]["id"] == "cauchy_cdf");
    }

    TEST_CASE("formative walk with hints, feedback and finish") {
        Server s("svc2");
        auto [st, started] = s.post("/sessions", {{"exerciseId", "cauchy_cdf"}, {"mode", "formative"}, {"seed", 9}},
                                    "startResponse");
        REQUIRE(st == 200);
        const std::string token = started["token"];
        CHECK(token.size() == 32);
        const auto view = started["firstStageView"];
        CHECK(view["stageId"] == "cdf");
        CHECK(view["hintsTotal"] == 3);
        const std::string base = "/sessions/" + token;

        auto [hs, hint] = s.post(base + "/hints", json::object(), "hintResponse");
        CHECK(hs == 200);
        CHECK(!hint["hintText"].get<std::string>().empty());

        auto [rs, redo] = s.post(base + "/submissions", {{"inputs", {{"F", "tan(x)"}}}}, "submitResponse");
        CHECK(rs == 200);
        CHECK(redo["outcome"] == "redo");
        CHECK(redo["score"] == 0);
        CHECK(redo.contains("feedback"));

        auto [ss, adv] = s.post(base + "/submissions", {{"inputs", {{"F", cauchy_answer(view["task"])}}}},
                                "submitResponse");
        CHECK(ss == 200);
        CHECK(adv["outcome"] == "advanced");
        CHECK(adv["score"] == 100);
        CHECK(adv["nextStageView"]["stageId"] == "quantile");

        auto [cs, current] = s.get(base + "/stage", "stageView");
        CHECK(cs == 200);
        CHECK(current["stageId"] == "quantile");

        auto [ks, skipped] = s.post(base + "/skip", json::object(), "skipResponse");
        CHECK(ks == 200);
        CHECK(skipped["completed"] == true);
        CHECK(skipped.contains("solutionText"));

        auto [fs, result] = s.post(base + "/finish", json::object(), "sessionResult");
        CHECK(fs == 200);
        CHECK(result["abandoned"] == false);
        CHECK(result["path"] == json::array({"cdf", "quantile"}));
        CHECK(result["seed"] == 9);

        auto [again, err] = s.post(base + "/submissions", {{"inputs", {{"q", "1"}}}}, "submitResponse");
        CHECK(again == 409);
        CHECK(err["error"]["code"] == "finished");
        CHECK(s.post(base + "/finish", json::object(), "sessionResult").first == 409);
    }

    TEST_CASE("summative hides scores and refuses hints") {
        Server s("svc3");
        const std::string base = "/sessions/" + s.start("cauchy_cdf", "summative");
        auto [hs, herr] = s.post(base + "/hints", json::object(), "hintResponse");
        CHECK(hs == 403);
        CHECK(herr["error"]["code"] == "mode-violation");
        auto [fs, ferr] = s.post(base + "/finish", json::object(), "sessionResult");
        CHECK(fs == 409);
        CHECK(ferr["error"]["code"] == "not-terminal");
        auto [rs, r] = s.post(base + "/submissions", {{"inputs", {{"F", "tan(x)"}}}}, "submitResponse");
        CHECK(rs == 200);
        CHECK(r["outcome"] == "advanced");
        CHECK_FALSE(r.contains("score"));
        CHECK_FALSE(r.contains("feedback"));
        CHECK_FALSE(r["nextStageView"].contains("hintsTotal"));
        auto [as, abandoned] = s.post(base + "/finish", {{"abandon", true}}, "sessionResult");
        CHECK(as == 200);
        // already on the terminal stage
        CHECK(abandoned["abandoned"] == false);
    }

    TEST_CASE("request errors") {
        Server s("svc4");
        CHECK(s.post("/sessions", {{"exerciseId", "nope"}, {"mode", "formative"}}, "").first == 404);
        CHECK(s.post("/sessions", {{"exerciseId", "minimal"}, {"mode", "exam"}}, "").first == 403);
        CHECK(s.post("/sessions", {{"exerciseId", "minimal"}}, "").first == 422);
        CHECK(s.post("/sessions", {{"exerciseId", "minimal"}, {"mode", "formative"}, {"seed", -1}}, "").first == 422);
        CHECK(s.get("/sessions/0123/stage", "").first == 404);
        CHECK(s.get("/nowhere", "").first == 404);

        auto res = s.client.Post("/sessions", "{not json", "application/json");
        REQUIRE(res);
        CHECK(res->status == 422);

        const std::string base = "/sessions/" + s.start("minimal", "formative");
        CHECK(s.post(base + "/submissions", {{"inputs", {{"zz", "1"}}}}, "").first == 422);
        CHECK(s.post(base + "/submissions", {{"inputs", {{"s", 1.5}}}}, "").first == 422);
        CHECK(s.post(base + "/skip", json::object(), "").first == 403);
        CHECK(s.post(base + "/hints", json::object(), "").first == 409);
    }

    TEST_CASE("seed omitted gives a random one") {
        Server s("svc5");
        auto [st, body] = s.post("/sessions", {{"exerciseId", "minimal"}, {"mode", "formative"}, {"student", "ann"}},
                                 "startResponse");
        REQUIRE(st == 200);
        auto [fs, result] = s.post("/sessions/" + body["token"].get<std::string>() + "/finish", {{"abandon", true}},
                                   "sessionResult");
        CHECK(fs == 200);
        CHECK(result["seed"].is_number_unsigned());
    }

    TEST_CASE("stats and instructor token") {
        Server s("svc6", "letmein");
        s.start("minimal", "formative");
        s.start("cauchy_cdf", "summative");
        CHECK(s.get("/stats", "").first == 403);
        httplib::Headers headers{{"Authorization", "Bearer letmein"}};
        auto res = s.client.Get("/stats", headers);
        REQUIRE(res);
        auto [status, body] = Server::check(*res, "usageSummary");
        CHECK(status == 200);
        CHECK(body["total"]["exercises"] == 2);
        CHECK(body["total"]["students"] == 2);
        res = s.client.Get("/stats", {{"X-Instructor-Token", "letmein"}});
        REQUIRE(res);
        CHECK(res->status == 200);
    }

    TEST_CASE("media is served with its type") {
        Server s("svc7");
        auto [st, body] = s.post("/sessions", {{"exerciseId", "histogram_plot"}, {"mode", "formative"}, {"seed", 1}},
                                 "startResponse");
        REQUIRE(st == 200);
        std::smatch m;
        const std::string task = body["firstStageView"]["task"];
        REQUIRE(std::regex_search(task, m, std::regex(R"(\[\[media:([0-9a-f]+)\]\])")));
        auto res = s.client.Get("/media/" + m[1].str());
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(res->get_header_value("Content-Type") == "image/svg+xml");
        CHECK(res->body.find("<svg") != std::string::npos);
        CHECK(s.client.Get("/media/00")->status == 404);
    }

    TEST_CASE("cors preflight") {
        Server s("svc8");
        auto res = s.client.Options("/sessions");
        REQUIRE(res);
        CHECK(res->status == 204);
        CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
        CHECK(res->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
    }

    TEST_CASE("concurrent sessions on separate tokens") {
        Server s("svc9");
        constexpr int kClients = 8;
        std::vector<std::thread> threads;
        std::atomic<int> completed{0};
        for (int i = 0; i < kClients; ++i) {
            threads.emplace_back([&, i] {
                httplib::Client c("127.0.0.1", s.port);
                c.set_read_timeout(30);
                json start{{"exerciseId", "cauchy_cdf"}, {"mode", "formative"}, {"seed", 100 + i}};
                auto r = c.Post("/sessions", start.dump(), "application/json");
                if (!r || r->status != 200) return;
                auto body = json::parse(r->body);
                const std::string base = "/sessions/" + body["token"].get<std::string>();
                json submit{{"inputs", {{"F", cauchy_answer(body["firstStageView"]["task"])}}}};
                r = c.Post(base + "/submissions", submit.dump(), "application/json");
                if (!r || json::parse(r->body)["score"] != 100) return;
                r = c.Post(base + "/finish", R"({"abandon":true})", "application/json");
                if (r && r->status == 200 && json::parse(r->body)["stageScores"]["cdf"] == 100) ++completed;
            });
        }
        for (auto& t : threads) t.join();
        CHECK(completed == kClients);
        CHECK(s.svc.session_count() == kClients);
    }
}

#include "examforge/service/service.hpp"

#include <random>
#include <thread>

#include <spdlog/spdlog.h>

#include "examforge/exercise/instantiate.hpp"
#include "examforge/exercise/template.hpp"
#include "examforge/exercise/validate.hpp"
#include "examforge/schemas.hpp"
#include "examforge/store/stats.hpp"
#include "httplib.h"

namespace examforge::service {

using nlohmann::ordered_json;
using session::SessionError;

namespace {

struct HttpError {
    int status;
    std::string code;
    std::string message;
};

void reply(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, const HttpError& e) {
    reply(res, e.status, {{"error", {{"code", e.code}, {"message", e.message}}}});
}

HttpError map_session_error(const SessionError& e) {
    using C = SessionError::Code;
    const std::string code(session::to_string(e.code()));
    switch (e.code()) {
        case C::Finished:
        case C::Completed:
        case C::HintsExhausted:
        case C::NotTerminal: return {409, code, e.what()};
        case C::ModeViolation:
        case C::NotSkippable: return {403, code, e.what()};
        case C::InvalidInput: return {422, code, e.what()};
        case C::InvalidExercise:
        case C::Storage: break;
    }
    spdlog::error("session failure: {}", e.what());
    return {500, "internal", "internal error"};
}

ordered_json parse_body(const httplib::Request& req, std::string_view definition) {
    ordered_json body;
    if (req.body.empty()) {
        body = ordered_json::object();
    } else {
        try {
            body = ordered_json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
            throw HttpError{422, "malformed", "request body is not JSON"};
        }
    }
    auto violations = api_schema().validate(nlohmann::json::parse(body.dump()), definition);
    if (!violations.empty()) {
        const auto& v = violations.front();
        throw HttpError{422, "malformed", (v.pointer.empty() ? "/" : v.pointer) + ": " + v.message};
    }
    return body;
}

std::uint64_t entropy_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace

const exercise::JsonSchema& api_schema() {
    static const exercise::JsonSchema schema = exercise::JsonSchema::parse(schemas::api);
    return schema;
}

ordered_json to_json(const session::StageView& view) {
    ordered_json j;
    j["exerciseId"] = view.exercise_id;
    j["stageId"] = view.stage_id;
    j["mode"] = exercise::to_string(view.mode);
    j["task"] = view.task;
    j["inputs"] = ordered_json::array();
    for (const auto& in : view.inputs) {
        j["inputs"].push_back(
            {{"id", in.id}, {"kind", exercise::to_string(in.kind)}, {"label", in.label}, {"options", in.options}});
    }
    if (view.mode == exercise::Mode::Formative) {
        j["hintAvailable"] = view.hint_available;
        j["nextHint"] = view.next_hint;
        j["hintsTotal"] = view.hints_total;
    }
    j["skippable"] = view.skippable;
    j["attempt"] = view.attempt;
    return j;
}

ordered_json to_json(const session::SubmissionResult& r, exercise::Mode mode) {
    ordered_json j;
    j["outcome"] = session::to_string(r.outcome);
    if (mode == exercise::Mode::Formative) {
        j["score"] = r.score;
        if (r.feedback) j["feedback"] = *r.feedback;
    }
    if (r.next) j["nextStageView"] = to_json(*r.next);
    j["completed"] = r.completed;
    return j;
}

ordered_json to_json(const session::SkipResult& r) {
    ordered_json j;
    if (r.solution) j["solutionText"] = *r.solution;
    if (r.next) j["nextStageView"] = to_json(*r.next);
    j["completed"] = r.completed;
    return j;
}

ordered_json to_json(const session::SessionResult& r) {
    return {{"exerciseId", r.exercise_id},
            {"mode", exercise::to_string(r.mode)},
            {"seed", r.seed},
            {"path", r.path},
            {"stageScores", r.stage_scores},
            {"stageWeights", r.stage_weights},
            {"total", r.total},
            {"abandoned", r.abandoned}};
}

struct Service::Impl {
    httplib::Server server;
    std::thread thread;
};

Service::Service(ServiceConfig config, std::shared_ptr<backend::Connector> connector)
    : impl_(std::make_unique<Impl>()), config_(std::move(config)) {
    std::vector<std::string> errors;
    for (auto& [id, def] : exercise::load_exercise_dir(config_.exercises_dir, &errors)) {
        auto diagnostics = exercise::validate_exercise(def);
        if (exercise::has_errors(diagnostics)) {
            spdlog::warn("exercise '{}' not offered: {}", id, exercise::format(diagnostics.front()));
            continue;
        }
        exercises_.emplace(id, std::make_shared<const exercise::ExerciseDefinition>(std::move(def)));
    }
    for (const auto& e : errors) spdlog::warn("exercise not loaded: {}", e);

    backend::PoolOptions pool_options;
    pool_options.capacity = config_.pool_capacity;
    pool_ = std::make_unique<backend::BackendPool>(std::move(connector), pool_options);
    if (!config_.data_dir.empty()) log_ = std::make_unique<store::EventLog>(config_.data_dir);
    install(impl_->server);
}

Service::~Service() {
    stop();
    std::lock_guard lock(mutex_);
    sessions_.clear();
}

std::size_t Service::session_count() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

struct Routes {
    Service& svc;

    static std::shared_ptr<session::Session> find(Service& svc, const std::string& token) {
        std::lock_guard lock(svc.mutex_);
        auto it = svc.sessions_.find(token);
        if (it == svc.sessions_.end()) throw HttpError{404, "unknown-session", "no such session"};
        return it->second;
    }

    template <class F>
    static httplib::Server::Handler guard(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const HttpError& e) {
                reply_error(res, e);
            } catch (const SessionError& e) {
                reply_error(res, map_session_error(e));
            } catch (const backend::CapacityError& e) {
                spdlog::warn("{}", e.what());
                reply_error(res, {503, "capacity", "too many open sessions"});
            } catch (const std::exception& e) {
                spdlog::error("{} {}: {}", req.method, req.path, e.what());
                reply_error(res, {500, "internal", "internal error"});
            }
        };
    }

    void install(httplib::Server& s) {
        s.Get("/exercises", guard([&svc = svc](const httplib::Request&, httplib::Response& res) {
            ordered_json out = ordered_json::array();
            for (const auto& [id, def] : svc.exercises_) {
                ordered_json modes = ordered_json::array();
                for (auto m : def->modes) modes.push_back(exercise::to_string(m));
                out.push_back({{"id", id}, {"title", def->title}, {"modesAllowed", modes}});
            }
            reply(res, 200, out);
        }));

        s.Post("/sessions", guard([&svc = svc](const httplib::Request& req, httplib::Response& res) {
            auto body = parse_body(req, "startRequest");
            const std::string exercise_id = body["exerciseId"];
            auto it = svc.exercises_.find(exercise_id);
            if (it == svc.exercises_.end()) throw HttpError{404, "unknown-exercise", "no such exercise"};
            const auto mode = *exercise::mode_from_string(body["mode"].get<std::string>());
            const std::uint64_t seed = body.contains("seed") ? body["seed"].get<std::uint64_t>() : entropy_seed();
            session::SessionOptions options;
            options.owner = body.value("student", "");
            options.redo_cap = svc.config_.redo_cap;
            options.log = svc.log_.get();
            std::shared_ptr<session::Session> s;
            try {
                s = session::Session::start(it->second, mode, seed, *svc.pool_, options);
            } catch (const exercise::InstantiationError& e) {
                spdlog::error("instantiating '{}': {}", exercise_id, e.what());
                throw HttpError{500, "backend", "backend failure"};
            }
            const std::string token = session::random_token();
            auto view = s->view();
            {
                std::lock_guard lock(svc.mutex_);
                svc.sessions_[token] = s;
                for (const auto& [name, value] : s->bindings()) {
                    if (value.is_image()) svc.media_.emplace(exercise::media_id(value.as_image()), value.as_image());
                }
            }
            reply(res, 200, {{"token", token}, {"mode", exercise::to_string(mode)}, {"firstStageView", to_json(view)}});
        }));

        s.Get(R"(/sessions/([^/]+)/stage)", guard([&svc = svc](const httplib::Request& req, httplib::Response& res) {
            auto s = find(svc, req.matches[1]);
            if (s->finished()) throw HttpError{409, "finished", "session is finished"};
            reply(res, 200, to_json(s->view()));
        }));

        s.Post(R"(/sessions/([^/]+)/submissions)", guard([&svc = svc](const httplib::Request& req, httplib::Response& res) {
            auto s = find(svc, req.matches[1]);
            auto body = parse_body(req, "submitRequest");
            std::map<std::string, std::string> inputs;
            for (auto& [id, v] : body["inputs"].items()) {
                inputs[id] = v.is_string() ? v.get<std::string>() : std::to_string(v.get<std::uint64_t>());
            }
            reply(res, 200, to_json(s->submit(inputs), s->mode()));
        }));

        s.Post(R"(/sessions/([^/]+)/hints)", guard([&svc = svc](const httplib::Request& req, httplib::Response& res) {
            auto s = find(svc, req.matches[1]);
            reply(res, 200, {{"hintText", s->hint()}});
        }));

        s.Post(R"(/sessions/([^/]+)/skip)", guard([&svc = svc](const httplib::Request& req, httplib::Response& res) {
            auto s = find(svc, req.matches[1]);
            reply(res, 200, to_json(s->skip()));
        }));

        s.Post(R"(/sessions/([^/]+)/finish)", guard([&svc = svc](const httplib::Request& req, httplib::Response& res) {
            auto s = find(svc, req.matches[1]);
            auto body = parse_body(req, "finishRequest");
            reply(res, 200, to_json(s->finish(body.value("abandon", false))));
        }));

        s.Get("/stats", guard([&svc = svc](const httplib::Request& req, httplib::Response& res) {
            if (!svc.config_.instructor_token.empty()) {
                const std::string expected = "Bearer " + svc.config_.instructor_token;
                if (req.get_header_value("Authorization") != expected &&
                    req.get_header_value("X-Instructor-Token") != svc.config_.instructor_token) {
                    throw HttpError{403, "forbidden", "instructor token required"};
                }
            }
            std::vector<store::EventRecord> events;
            if (svc.log_) events = store::read_log(svc.log_->dir()).events;
            reply(res, 200, store::to_json(store::aggregate_usage(events)));
        }));

        s.Get(R"(/media/([0-9a-f]+))", guard([&svc = svc](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(svc.mutex_);
            auto it = svc.media_.find(req.matches[1]);
            if (it == svc.media_.end()) throw HttpError{404, "unknown-media", "no such media"};
            res.status = 200;
            res.set_content(it->second.bytes, it->second.media_type);
        }));

        s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) {
                reply_error(res, {res.status, res.status == 404 ? "not-found" : "error", httplib::status_message(res.status)});
            }
        });

        if (!svc.config_.cors_origin.empty()) {
            s.set_default_headers({{"Access-Control-Allow-Origin", svc.config_.cors_origin},
                                   {"Vary", "Origin"}});
            s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
                res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
                res.set_header("Access-Control-Allow-Headers", "Content-Type, Authorization, X-Instructor-Token");
                res.status = 204;
            });
        }
    }
};

void Service::install(httplib::Server& server) { Routes{*this}.install(server); }

bool Service::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int Service::start_background(const std::string& host) {
    const int port = impl_->server.bind_to_any_port(host);
    if (port <= 0) return port;
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void Service::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace examforge::service

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "examforge/backend/client.hpp"
#include "examforge/exercise/json_schema.hpp"
#include "examforge/session/session.hpp"
#include "examforge/store/event_log.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace examforge::service {

struct ServiceConfig {
    std::string exercises_dir;
    std::string data_dir;          // empty: no event log, /stats reports zeros
    std::string cors_origin;       // empty: no CORS headers
    std::string instructor_token;  // empty: /stats is open
    std::size_t redo_cap = 10;
    std::size_t pool_capacity = 256;
};

/// JSON views shared by the HTTP layer and the CLI.
nlohmann::ordered_json to_json(const session::StageView& view);
nlohmann::ordered_json to_json(const session::SubmissionResult& result, exercise::Mode mode);
nlohmann::ordered_json to_json(const session::SkipResult& result);
nlohmann::ordered_json to_json(const session::SessionResult& result);

/// Shipped API schema, parsed once.
const exercise::JsonSchema& api_schema();

/// Sessions keyed by token, exercises loaded at construction, one backend
/// pool, and the optional event log.
class Service {
public:
    Service(ServiceConfig config, std::shared_ptr<backend::Connector> connector);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Routes on an httplib server; does not start listening.
    void install(httplib::Server& server);

    /// Bind and serve until stop(). Returns false if binding failed.
    bool listen(const std::string& host, int port);
    /// Bind to an ephemeral port and serve on a background thread.
    int start_background(const std::string& host = "127.0.0.1");
    void stop();

    const std::map<std::string, std::shared_ptr<const exercise::ExerciseDefinition>>& exercises() const {
        return exercises_;
    }
    std::size_t session_count() const;
    backend::BackendPool& pool() { return *pool_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;

    ServiceConfig config_;
    std::map<std::string, std::shared_ptr<const exercise::ExerciseDefinition>> exercises_;
    std::unique_ptr<backend::BackendPool> pool_;
    std::unique_ptr<store::EventLog> log_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<session::Session>> sessions_;
    std::map<std::string, expr::Image> media_;

    friend struct Routes;
};

}  // namespace examforge::service

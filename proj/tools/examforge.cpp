// Author and operator tooling: validate, preview, simulate, serve, stats.

#include <csignal>
#include <cstdint>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <thread>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "examforge/cli/commands.hpp"
#include "examforge/service/service.hpp"
#include "examforge/store/stats.hpp"

using namespace examforge;

namespace {

int serve(const service::ServiceConfig& config, const std::string& listen, const std::string& backend_address) {
    std::unique_ptr<cli::EmbeddedBackend> embedded;
    std::shared_ptr<backend::Connector> connector;
    if (backend_address.empty()) {
        embedded = std::make_unique<cli::EmbeddedBackend>();
        connector = embedded->connector();
    } else {
        connector = std::make_shared<backend::TcpConnector>(backend::parse_address(backend_address));
        try {
            backend::BackendPool probe(connector);
            probe.open("probe", "probe");
            probe.close("probe", "probe");
        } catch (const std::exception& e) {
            std::cerr << "examforge: backend at " << backend_address << " is not usable: " << e.what() << "\n";
            return 1;
        }
    }
    const auto address = backend::parse_address(listen);

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    service::Service svc(config, connector);
    spdlog::info("{} exercises, listening on {}", svc.exercises().size(), listen);
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        if (sig == SIGTERM || sig == SIGINT) svc.stop();
    });
    const bool ok = svc.listen(address.host, address.port);
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    if (!ok) {
        std::cerr << "examforge: cannot listen on " << listen << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"examforge: multi-stage exercise tooling"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    std::string exercises_dir = "exercises";
    std::string data_dir = "data";
    std::string log_level = "warn";
    app.add_option("--seed", seed, "seed for instantiation (preview base, simulate override)")
        ->envname("EXAMFORGE_SEED");
    app.add_option("--exercises-dir", exercises_dir, "directory of exercise files")->envname("EXAMFORGE_EXERCISES_DIR");
    app.add_option("--data-dir", data_dir, "event log directory")->envname("EXAMFORGE_DATA_DIR");
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error")->envname("EXAMFORGE_LOG_LEVEL");

    auto* validate_cmd = app.add_subcommand("validate", "check exercise files; exit 0 clean, 1 diagnostics, 2 I/O");
    std::vector<std::string> validate_paths;
    validate_cmd->add_option("paths", validate_paths, "exercise files or directories")->required();

    auto* preview_cmd = app.add_subcommand("preview", "render variants of an exercise to a directory");
    std::string preview_ref;
    std::size_t variants = 3;
    std::string preview_out = "preview";
    preview_cmd->add_option("exercise", preview_ref, "exercise file or id")->required();
    preview_cmd->add_option("-n,--variants", variants, "number of variants");
    preview_cmd->add_option("-o,--out", preview_out, "output directory");

    auto* simulate_cmd = app.add_subcommand("simulate", "run a scripted attempt in-process");
    std::string script;
    simulate_cmd->add_option("script", script, "simulation script (JSON)")->required();

    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
    std::string listen = "127.0.0.1:8080";
    std::string backend_address;
    service::ServiceConfig config;
    serve_cmd->add_option("--listen", listen, "host:port")->envname("EXAMFORGE_LISTEN");
    serve_cmd->add_option("--backend", backend_address, "evaluation backend host:port; embedded when absent")
        ->envname("EXAMFORGE_BACKEND");
    serve_cmd->add_option("--cors-origin", config.cors_origin, "allowed browser origin")->envname("EXAMFORGE_CORS_ORIGIN");
    serve_cmd->add_option("--instructor-token", config.instructor_token, "token required for /stats")
        ->envname("EXAMFORGE_INSTRUCTOR_TOKEN");
    serve_cmd->add_option("--redo-cap", config.redo_cap, "attempts per stage before a forced advance");
    serve_cmd->add_option("--max-sessions", config.pool_capacity, "open workspaces at most");

    auto* stats_cmd = app.add_subcommand("stats", "usage per mode from the event log");
    bool stats_json = false;
    stats_cmd->add_flag("--json", stats_json, "print JSON instead of a table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*validate_cmd) return cli::validate(validate_paths, std::cout);

        if (*preview_cmd) {
            auto def = cli::resolve_exercise(preview_ref, exercises_dir);
            cli::EmbeddedBackend backend;
            cli::preview(def, variants, seed.value_or(1), preview_out, backend.pool());
            std::cout << "wrote " << variants << " variants of " << def.id << " to " << preview_out << "\n";
            return 0;
        }

        if (*simulate_cmd) {
            cli::EmbeddedBackend backend;
            auto report = cli::simulate_file(script, exercises_dir, seed, backend.pool());
            std::cout << report.text;
            return report.failures == 0 ? 0 : 1;
        }

        if (*serve_cmd) {
            config.exercises_dir = exercises_dir;
            config.data_dir = data_dir;
            return serve(config, listen, backend_address);
        }

        if (*stats_cmd) {
            auto contents = store::read_log(data_dir);
            for (const auto& c : contents.corruptions) {
                std::cerr << "examforge: skipped " << c.file << ":" << c.line << ": " << c.message << "\n";
            }
            auto usage = store::aggregate_usage(contents.events);
            if (stats_json) {
                std::cout << store::to_json(usage).dump(2) << "\n";
            } else {
                std::cout << store::format_usage_table(usage);
            }
            return 0;
        }
    } catch (const cli::UsageError& e) {
        std::cerr << "examforge: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "examforge: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

// Reference evaluation backend: newline-delimited JSON over TCP.

#include <csignal>
#include <cstdint>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <thread>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "examforge/backend/transport.hpp"

using namespace examforge::backend;

int main(int argc, char** argv) {
    CLI::App app{"examforge evaluation backend"};
    std::string listen = "127.0.0.1:7411";
    std::optional<std::uint64_t> seed;
    std::string scratch;
    std::string log_level = "info";
    app.add_option("--listen", listen, "address to listen on (host:port)")->envname("EXAMFORGE_BACKEND_LISTEN");
    app.add_option("--seed", seed, "fixed seed policy; default seeds each workspace from entropy");
    app.add_option("--scratch-dir", scratch, "root directory for workspace scratch space");
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error");
    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(log_level));

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    try {
        BackendCore core({scratch, seed});
        TcpServer server(core, parse_address(listen));
        std::cout << "listening on port " << server.port() << std::endl;
        std::thread waiter([&] {
            int sig = 0;
            sigwait(&signals, &sig);
            spdlog::info("signal {}, shutting down", sig);
            server.stop();
        });
        server.run();
        pthread_kill(waiter.native_handle(), SIGTERM);
        waiter.join();
    } catch (const std::exception& e) {
        std::cerr << "examforge-backend: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

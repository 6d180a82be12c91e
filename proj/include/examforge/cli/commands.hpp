#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "examforge/backend/client.hpp"
#include "examforge/backend/core.hpp"
#include "examforge/backend/transport.hpp"
#include "examforge/exercise/json_schema.hpp"
#include "examforge/exercise/model.hpp"
#include "json.hpp"

namespace examforge::cli {

/// Bad invocation or unreadable input; maps to exit status 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reference backend running in-process, with a private scratch directory
/// removed on destruction.
class EmbeddedBackend {
public:
    EmbeddedBackend();
    ~EmbeddedBackend();

    backend::BackendPool& pool() { return *pool_; }
    std::shared_ptr<backend::Connector> connector() { return connector_; }

private:
    std::filesystem::path scratch_;
    std::unique_ptr<backend::BackendCore> core_;
    std::shared_ptr<backend::Connector> connector_;
    std::unique_ptr<backend::BackendPool> pool_;
};

/// Each path is an exercise file or a directory of them. Prints one line
/// per diagnostic, or "<file>: ok". Returns 0 clean, 1 diagnostics or
/// load errors, 2 unreadable or not JSON.
int validate(const std::vector<std::string>& paths, std::ostream& out);

/// `ref` is a file path, or an exercise id looked up in `exercises_dir`.
exercise::ExerciseDefinition resolve_exercise(const std::string& ref, const std::string& exercises_dir);

/// Writes `variant-NNN/` directories with stages.txt, values.txt and the
/// images of each variant. Variant i uses seed + i.
void preview(const exercise::ExerciseDefinition& def, std::size_t variants, std::uint64_t seed,
             const std::filesystem::path& out_dir, backend::BackendPool& pool);

const exercise::JsonSchema& simulation_schema();

struct SimulationReport {
    std::string text;
    std::size_t actions = 0;
    std::size_t failures = 0;
};

/// Runs a script against `pool` with session id "sim". Submit inputs are
/// templates over the session values and the script's `let` names.
/// `seed` overrides the script's seed.
/// Throws UsageError for scripts that do not match the schema or name a
/// missing exercise or variable.
SimulationReport simulate(const nlohmann::json& script, const std::filesystem::path& script_dir,
                          const std::string& exercises_dir, std::optional<std::uint64_t> seed,
                          backend::BackendPool& pool);

SimulationReport simulate_file(const std::filesystem::path& script, const std::string& exercises_dir,
                               std::optional<std::uint64_t> seed, backend::BackendPool& pool);

}  // namespace examforge::cli

#pragma once

#include <cstdint>
#include <stdexcept>

#include "examforge/backend/client.hpp"
#include "examforge/exercise/model.hpp"

namespace examforge::exercise {

class InstantiationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Seeds the workspace, then evaluates each variable as `name := code` in
/// order so later specs see earlier results. Values stay in the workspace.
/// Backend errors and kind mismatches throw InstantiationError; transport
/// failures propagate as backend::TransportError.
expr::Bindings instantiate(const ExerciseDefinition& def, backend::WorkspaceConnection& ws, std::uint64_t seed);

/// `set_seed(hi, lo)` for a 64-bit seed.
std::string seed_command(std::uint64_t seed);

bool kind_matches(VariableKind kind, const expr::Value& value);

}  // namespace examforge::exercise

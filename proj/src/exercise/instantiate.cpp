#include "examforge/exercise/instantiate.hpp"

namespace examforge::exercise {

std::string seed_command(std::uint64_t seed) {
    return "set_seed(" + std::to_string(seed >> 32) + ", " + std::to_string(seed & 0xffffffffULL) + ")";
}

bool kind_matches(VariableKind kind, const expr::Value& v) {
    switch (kind) {
        case VariableKind::Number: return v.is_numeric();
        case VariableKind::Integer: return v.is_integer();
        case VariableKind::String: return v.is_string();
        case VariableKind::Vector: return v.is_vector();
        case VariableKind::Image: return v.is_image();
    }
    return false;
}

expr::Bindings instantiate(const ExerciseDefinition& def, backend::WorkspaceConnection& ws, std::uint64_t seed) {
    expr::Bindings out;
    try {
        ws.eval(seed_command(seed));
    } catch (const backend::BackendError& e) {
        throw InstantiationError(std::string("cannot seed workspace: ") + e.what());
    }
    for (const auto& v : def.variables) {
        expr::Value value;
        try {
            value = ws.eval(v.name + " := " + expr::serialize(v.expression));
        } catch (const backend::BackendError& e) {
            throw InstantiationError("variable '" + v.name + "': " + e.what());
        }
        if (!kind_matches(v.kind, value)) {
            throw InstantiationError("variable '" + v.name + "' is declared " + std::string(to_string(v.kind)) +
                                     " but produced " + std::string(expr::to_string(value.type())));
        }
        out.set(v.name, std::move(value));
    }
    return out;
}

}  // namespace examforge::exercise

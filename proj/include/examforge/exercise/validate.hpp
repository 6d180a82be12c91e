#pragma once

#include <string>
#include <vector>

#include "examforge/exercise/model.hpp"

namespace examforge::exercise {

enum class Severity { Error, Warning };

struct Diagnostic {
    Severity severity = Severity::Error;
    std::string pointer;  // JSON pointer into the exercise document
    std::string message;
};

/// Structural and semantic checks of a loaded exercise. Empty iff clean.
///
/// Errors: dangling stage ids, forward references between variables,
/// unreachable stages, cycles, dead ends, a missing catch-all rule,
/// non-boolean conditions, unknown names, carry-forward values that may be
/// consumed without a fallback, and carry-forward names that some path
/// reaches unbound.
/// Warnings: rules shadowed by an earlier catch-all, repeatable stages in
/// exercises meant only for summative or exam use, zero total weight.
std::vector<Diagnostic> validate_exercise(const ExerciseDefinition& def);

bool has_errors(const std::vector<Diagnostic>& diagnostics);

/// "error /stages/x/next: message"
std::string format(const Diagnostic& d);

/// Names a stage's rule conditions see for its inputs, e.g. `sub`,
/// `sub_F`, `input`, `input_t`, `choice`, `choice_tail`.
std::vector<std::string> input_scope_names(const Stage& stage);

}  // namespace examforge::exercise

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "examforge/expr/equivalence.hpp"
#include "examforge/expr/expression.hpp"
#include "examforge/expr/numeric.hpp"

namespace examforge::exercise {

enum class Mode { Formative, Summative, Exam };

std::string_view to_string(Mode mode);
std::optional<Mode> mode_from_string(std::string_view text);

enum class VariableKind { Number, Integer, String, Vector, Image };

std::string_view to_string(VariableKind kind);

struct VariableSpec {
    std::string name;
    std::string code;
    expr::Expression expression;
    VariableKind kind = VariableKind::Number;
};

enum class InputKind { MultipleChoice, DropDown, NumericFill, FormulaFill };

std::string_view to_string(InputKind kind);

inline bool is_choice(InputKind k) { return k == InputKind::MultipleChoice || k == InputKind::DropDown; }

struct InputElement {
    std::string id;
    InputKind kind = InputKind::NumericFill;
    std::string label;
    std::vector<std::string> options;  // templates, choice kinds only
    std::optional<std::string> carry_forward_as;
};

struct FeedbackRule {
    std::string id;
    std::string when;
    expr::Expression condition;
    std::string message;
    int score = 0;
    bool terminal = true;  // false: formative mode stays in the stage for a redo
};

struct Transition {
    std::string when;
    expr::Expression condition;
    std::string target;
};

struct Stage {
    std::string id;
    std::string task;
    std::vector<InputElement> inputs;
    std::vector<std::string> hints;
    std::vector<FeedbackRule> rules;
    std::string solution;
    std::vector<Transition> transitions;
    std::optional<std::string> next;
    std::optional<std::string> fallback;
    bool repeatable = true;
    bool skippable = false;
    double weight = 1.0;
    expr::Corridor tolerance;

    bool terminal() const { return !next && transitions.empty(); }
    const InputElement* input(std::string_view id) const;
};

struct ExerciseDefinition {
    std::string id;
    std::string title;
    std::vector<Mode> modes{Mode::Formative};
    expr::EquivalenceOptions equivalence;
    std::vector<VariableSpec> variables;
    std::map<std::string, Stage, std::less<>> stages;
    std::vector<std::string> stage_order;  // document order
    std::string entry;

    const Stage& stage(std::string_view id) const;
    bool allows(Mode mode) const;
    std::set<std::string> terminal_stage_ids() const;
};

/// Load failure with a JSON pointer to the offending member.
class LoadError : public std::runtime_error {
public:
    LoadError(std::string pointer, const std::string& message)
        : std::runtime_error((pointer.empty() ? std::string("/") : pointer) + ": " + message),
          pointer_(std::move(pointer)), detail_(message) {}

    const std::string& pointer() const { return pointer_; }
    const std::string& detail() const { return detail_; }

private:
    std::string pointer_;
    std::string detail_;
};

/// The document is not JSON at all (as opposed to a schema or semantic
/// problem).
class SyntaxLoadError : public LoadError {
public:
    using LoadError::LoadError;
};

/// Parse, schema-check and pre-parse every expression of an exercise file.
ExerciseDefinition load_exercise(std::string_view document);

ExerciseDefinition load_exercise_file(const std::string& path);

/// Every `*.json` exercise in a directory, keyed by id. Files that fail
/// to load are reported through `errors` when given, else rethrown.
std::map<std::string, ExerciseDefinition> load_exercise_dir(const std::string& dir,
                                                            std::vector<std::string>* errors = nullptr);

/// Source text of the shipped exercise schema.
std::string_view exercise_schema_text();

}  // namespace examforge::exercise

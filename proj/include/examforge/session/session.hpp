#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "examforge/backend/client.hpp"
#include "examforge/exercise/model.hpp"
#include "examforge/expr/predicates.hpp"
#include "examforge/store/event_log.hpp"

namespace examforge::session {

using exercise::ExerciseDefinition;
using exercise::Mode;
using exercise::Stage;

class SessionError : public std::runtime_error {
public:
    enum class Code {
        Finished,        // session already finished
        Completed,       // last stage answered, only finish remains
        ModeViolation,   // hint in summative or exam mode
        NotSkippable,
        HintsExhausted,
        InvalidInput,    // inputs missing, unknown or out of range
        NotTerminal,     // finish before reaching a terminal stage
        InvalidExercise,
        Storage,         // exam-mode event could not be persisted
    };

    SessionError(Code code, const std::string& message) : std::runtime_error(message), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

/// Stable kebab-case name, e.g. "not-skippable".
std::string_view to_string(SessionError::Code code);

enum class Outcome { Advanced, Redo, Fallback };

std::string_view to_string(Outcome outcome);

struct InputView {
    std::string id;
    exercise::InputKind kind;
    std::string label;
    std::vector<std::string> options;
};

/// What a student sees of the current stage. Never carries answers.
struct StageView {
    std::string exercise_id;
    std::string stage_id;
    Mode mode = Mode::Formative;
    std::string task;
    std::vector<InputView> inputs;
    bool hint_available = false;
    std::size_t next_hint = 0;
    std::size_t hints_total = 0;
    bool skippable = false;
    std::size_t attempt = 0;  // earlier attempts at this stage
};

struct SubmissionRecord {
    std::string stage_id;
    std::map<std::string, std::string> raw;
    std::map<std::string, expr::Value> parsed;  // formulas as their canonical text
    bool parse_failed = false;
    std::optional<std::size_t> rule;  // none when routed to the fallback
    std::string rule_id;
    int score = 0;
    std::optional<std::string> feedback;
    Outcome outcome = Outcome::Advanced;
    std::optional<std::string> next;  // none: redo or end of exercise
    std::chrono::system_clock::time_point timestamp;
};

struct SubmissionResult {
    Outcome outcome = Outcome::Advanced;
    int score = 0;
    std::optional<std::size_t> rule;
    std::optional<std::string> feedback;  // formative only
    std::optional<StageView> next;        // absent on redo and after the last stage
    bool completed = false;
};

struct SkipResult {
    std::optional<std::string> solution;  // formative only
    std::optional<StageView> next;
    bool completed = false;
};

struct SessionResult {
    std::string session_id;
    std::string exercise_id;
    Mode mode = Mode::Formative;
    std::uint64_t seed = 0;
    std::vector<std::string> path;
    std::map<std::string, int> stage_scores;
    std::map<std::string, double> stage_weights;
    int total = 0;
    bool abandoned = false;

    bool operator==(const SessionResult&) const = default;
};

struct SessionOptions {
    std::string session_id;  // generated when empty
    std::string owner;       // defaults to the session id
    std::size_t redo_cap = 10;
    store::EventLog* log = nullptr;
};

/// Condition scope for a stage's rules and transitions: session bindings
/// plus the submitted values. Formulas go to the predicate scope only.
struct InputScope {
    expr::Bindings values;
    expr::PredicateScope::Formulas formulas;
};

/// First transition whose condition holds, else `next`; nullopt for a
/// terminal stage. Condition errors count as false.
std::optional<std::string> resolve_path(const ExerciseDefinition& def, const Stage& stage,
                                        const expr::Bindings& bindings, const InputScope& scope,
                                        std::optional<std::size_t> rule, int score);

/// Decimal with `.` separator, optional sign and exponent, surrounding
/// whitespace ignored. nullopt for anything else.
std::optional<double> parse_number(std::string_view text);

/// Scripted action for replay and simulation.
struct Action {
    enum class Kind { Submit, Hint, Skip, Finish };
    Kind kind = Kind::Submit;
    std::map<std::string, std::string> inputs;
};

/// One student's attempt at one exercise. All operations are serialized
/// on an internal mutex; the object may be used from any thread.
class Session {
public:
    /// Validates, opens a workspace through the pool and instantiates the
    /// variables. Throws SessionError(InvalidExercise),
    /// exercise::InstantiationError or backend errors.
    static std::shared_ptr<Session> start(std::shared_ptr<const ExerciseDefinition> def, Mode mode,
                                          std::uint64_t seed, backend::BackendPool& pool,
                                          SessionOptions options = {});

    ~Session();

    StageView view() const;

    SubmissionResult submit(const std::map<std::string, std::string>& inputs);
    std::string hint();
    SkipResult skip();
    /// `abandon` allows finishing before a terminal stage is done.
    SessionResult finish(bool abandon = false);

    const std::string& id() const { return id_; }
    const std::string& owner() const { return owner_; }
    const ExerciseDefinition& definition() const { return *def_; }
    Mode mode() const { return mode_; }
    std::uint64_t seed() const { return seed_; }
    bool finished() const;
    bool completed() const;
    std::string current_stage() const;
    std::vector<SubmissionRecord> records() const;
    /// Every accepted call in order, raw inputs included.
    std::vector<Action> actions() const;
    std::vector<std::string> path() const;
    std::map<std::string, int> stage_scores() const;
    expr::Bindings bindings() const;
    std::optional<SessionResult> result() const;

    /// Image bytes referenced by `[[media:<id>]]` tokens in rendered text.
    std::optional<expr::Image> media(const std::string& id) const;

    /// Evaluate in this session's workspace (carry-forward checks, tools).
    expr::Value eval_in_workspace(const std::string& code);

private:
    Session() = default;

    StageView view_locked() const;
    void enter(const std::string& stage_id);
    void require_active() const;
    void record_event(store::EventKind kind, nlohmann::ordered_json payload);
    void write_carry(const std::string& name, const expr::Value& value);
    SessionResult finish_locked(bool abandon);

    mutable std::mutex mutex_;
    std::shared_ptr<const ExerciseDefinition> def_;
    Mode mode_ = Mode::Formative;
    std::uint64_t seed_ = 0;
    std::string id_;
    std::string owner_;
    SessionOptions options_;
    backend::BackendPool* pool_ = nullptr;
    std::shared_ptr<backend::WorkspaceConnection> workspace_;
    expr::Bindings bindings_;
    std::map<std::string, expr::Image> media_;

    std::string current_;
    bool completed_ = false;
    bool finished_ = false;
    std::vector<std::string> path_;
    std::map<std::string, std::size_t> attempts_;
    std::map<std::string, std::size_t> hints_;
    std::map<std::string, int> scores_;
    std::map<std::string, int> best_;
    std::vector<SubmissionRecord> records_;
    std::vector<Action> actions_;
    std::optional<SessionResult> result_;
};

/// Runs the actions on a fresh session with the same definition, mode and
/// seed and returns the result; a trailing finish (abandon if needed) is
/// implied. Hints refused by the mode are ignored.
SessionResult replay(std::shared_ptr<const ExerciseDefinition> def, Mode mode, std::uint64_t seed,
                     const std::vector<Action>& actions, backend::BackendPool& pool,
                     SessionOptions options = {});

/// 128 random bits as 32 hex digits.
std::string random_token();

}  // namespace examforge::session

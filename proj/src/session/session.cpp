#include "examforge/session/session.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include <sodium.h>
#include <spdlog/spdlog.h>

#include "examforge/exercise/instantiate.hpp"
#include "examforge/exercise/template.hpp"
#include "examforge/exercise/validate.hpp"
#include "examforge/expr/errors.hpp"
#include "examforge/expr/parser.hpp"
#include "examforge/store/stats.hpp"

namespace examforge::session {

using exercise::InputKind;
using nlohmann::ordered_json;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

expr::Bindings merged(const expr::Bindings& base, const expr::Bindings& extra) {
    expr::Bindings out = base;
    for (const auto& [name, value] : extra) out.set(name, value);
    return out;
}

bool holds(const expr::Expression& condition, const expr::Bindings& bindings, const expr::PredicateScope& scope,
           std::string_view where) {
    try {
        return expr::evaluate_condition(condition, bindings, scope);
    } catch (const std::exception& e) {
        spdlog::debug("condition {} failed: {}", where, e.what());
        return false;
    }
}

std::string render_or_raw(std::string_view text, const expr::Bindings& bindings) {
    try {
        return exercise::render_template(text, bindings);
    } catch (const std::exception& e) {
        spdlog::warn("template rendering failed: {}", e.what());
        return std::string(text);
    }
}

std::string value_literal(const expr::Value& v) {
    if (v.is_integer()) return std::to_string(v.as_integer());
    return expr::format_double(v.as_double());
}

ordered_json json_value(const expr::Value& v) {
    if (v.is_integer()) return v.as_integer();
    if (v.is_numeric()) return v.as_double();
    return expr::canonical_text(v);
}

}  // namespace

std::string_view to_string(SessionError::Code code) {
    using C = SessionError::Code;
    switch (code) {
        case C::Finished: return "finished";
        case C::Completed: return "completed";
        case C::ModeViolation: return "mode-violation";
        case C::NotSkippable: return "not-skippable";
        case C::HintsExhausted: return "hints-exhausted";
        case C::InvalidInput: return "invalid-input";
        case C::NotTerminal: return "not-terminal";
        case C::InvalidExercise: return "invalid-exercise";
        case C::Storage: return "storage";
    }
    return "unknown";
}

std::string_view to_string(Outcome outcome) {
    switch (outcome) {
        case Outcome::Advanced: return "advanced";
        case Outcome::Redo: return "redo";
        case Outcome::Fallback: return "fallback";
    }
    return "?";
}

std::optional<double> parse_number(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
    for (char c : text) {
        if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'e' || c == 'E' || c == '+' ||
              c == '-')) {
            return std::nullopt;
        }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string random_token() {
    static const int init = sodium_init();
    (void)init;
    unsigned char bytes[16];
    randombytes_buf(bytes, sizeof bytes);
    char hex[sizeof bytes * 2 + 1];
    sodium_bin2hex(hex, sizeof hex, bytes, sizeof bytes);
    return hex;
}

std::optional<std::string> resolve_path(const ExerciseDefinition& def, const Stage& stage,
                                        const expr::Bindings& bindings, const InputScope& scope,
                                        std::optional<std::size_t> rule, int score) {
    if (stage.terminal()) return std::nullopt;
    expr::Bindings env = merged(bindings, scope.values);
    if (rule) env.set("rule", expr::Value(static_cast<std::int64_t>(*rule)));
    env.set("score", expr::Value(score));
    expr::PredicateScope predicates(scope.formulas, stage.tolerance, def.equivalence);
    for (std::size_t i = 0; i < stage.transitions.size(); ++i) {
        const auto& t = stage.transitions[i];
        if (holds(t.condition, env, predicates, stage.id + " transition " + std::to_string(i))) return t.target;
    }
    return stage.next;
}

std::shared_ptr<Session> Session::start(std::shared_ptr<const ExerciseDefinition> def, Mode mode,
                                        std::uint64_t seed, backend::BackendPool& pool, SessionOptions options) {
    const auto diagnostics = exercise::validate_exercise(*def);
    if (exercise::has_errors(diagnostics)) {
        for (const auto& d : diagnostics) {
            if (d.severity == exercise::Severity::Error) {
                throw SessionError(SessionError::Code::InvalidExercise,
                                   "exercise '" + def->id + "' is invalid: " + exercise::format(d));
            }
        }
    }
    if (!def->allows(mode)) {
        throw SessionError(SessionError::Code::ModeViolation, "exercise '" + def->id + "' is not offered in " +
                                                                  std::string(exercise::to_string(mode)) + " mode");
    }

    std::shared_ptr<Session> s(new Session());
    s->def_ = std::move(def);
    s->mode_ = mode;
    s->seed_ = seed;
    s->id_ = options.session_id.empty() ? "s" + random_token().substr(0, 20) : options.session_id;
    s->owner_ = options.owner.empty() ? s->id_ : options.owner;
    s->options_ = std::move(options);
    s->pool_ = &pool;
    s->workspace_ = pool.open(s->id_, s->def_->id);
    try {
        s->bindings_ = exercise::instantiate(*s->def_, *s->workspace_, seed);
        for (const auto& [name, value] : s->bindings_) {
            if (value.is_image()) s->media_.emplace(exercise::media_id(value.as_image()), value.as_image());
        }
        s->record_event(store::EventKind::SessionStarted, {{"exercise", s->def_->id},
                                                          {"mode", exercise::to_string(mode)},
                                                          {"seed", seed},
                                                          {"owner", s->owner_},
                                                          {"entry", s->def_->entry}});
    } catch (...) {
        pool.close(s->id_, s->def_->id);
        s->finished_ = true;
        throw;
    }
    s->enter(s->def_->entry);
    return s;
}

Session::~Session() {
    if (!finished_ && pool_) pool_->close(id_, def_->id);
}

void Session::enter(const std::string& stage_id) {
    current_ = stage_id;
    path_.push_back(stage_id);
}

void Session::require_active() const {
    if (finished_) throw SessionError(SessionError::Code::Finished, "session is finished");
    if (completed_) throw SessionError(SessionError::Code::Completed, "the last stage is done, only finish remains");
}

void Session::record_event(store::EventKind kind, ordered_json payload) {
    if (!options_.log) return;
    try {
        options_.log->append(id_, kind, std::move(payload));
    } catch (const store::StorageError& e) {
        if (mode_ == Mode::Exam && kind != store::EventKind::SessionFinished) {
            throw SessionError(SessionError::Code::Storage, std::string("cannot record the event: ") + e.what());
        }
        spdlog::error("session {}: event not recorded: {}", id_, e.what());
    }
}

void Session::write_carry(const std::string& name, const expr::Value& value) {
    workspace_->eval(name + " := " + value_literal(value));
    bindings_.set(name, value);
}

StageView Session::view() const {
    std::lock_guard lock(mutex_);
    return view_locked();
}

StageView Session::view_locked() const {
    const Stage& stage = def_->stage(current_);
    StageView v;
    v.exercise_id = def_->id;
    v.stage_id = stage.id;
    v.mode = mode_;
    v.task = exercise::render_template(stage.task, bindings_);
    for (const auto& in : stage.inputs) {
        InputView iv{in.id, in.kind, exercise::render_template(in.label, bindings_), {}};
        for (const auto& o : in.options) iv.options.push_back(exercise::render_template(o, bindings_));
        v.inputs.push_back(std::move(iv));
    }
    if (mode_ == Mode::Formative) {
        auto it = hints_.find(stage.id);
        v.next_hint = it == hints_.end() ? 0 : it->second;
        v.hints_total = stage.hints.size();
        v.hint_available = v.next_hint < v.hints_total;
    }
    v.skippable = stage.skippable;
    auto a = attempts_.find(stage.id);
    v.attempt = a == attempts_.end() ? 0 : a->second;
    return v;
}

SubmissionResult Session::submit(const std::map<std::string, std::string>& inputs) {
    std::lock_guard lock(mutex_);
    require_active();
    const Stage& stage = def_->stage(current_);

    for (const auto& [id, raw] : inputs) {
        if (!stage.input(id)) throw SessionError(SessionError::Code::InvalidInput, "stage has no input '" + id + "'");
    }

    SubmissionRecord rec;
    rec.stage_id = stage.id;
    rec.timestamp = std::chrono::system_clock::now();
    InputScope scope;
    std::vector<std::pair<std::string, expr::Value>> carries;
    bool first_formula = true, first_numeric = true, first_choice = true;

    for (const auto& in : stage.inputs) {
        auto it = inputs.find(in.id);
        if (it == inputs.end()) throw SessionError(SessionError::Code::InvalidInput, "missing input '" + in.id + "'");
        const std::string& raw = it->second;
        rec.raw[in.id] = raw;

        std::optional<expr::Value> value;
        if (exercise::is_choice(in.kind)) {
            const std::string_view text = trim(raw);
            std::size_t index = in.options.size();
            std::int64_t n = -1;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
            if (ec == std::errc() && ptr == text.data() + text.size() && n >= 0) {
                index = static_cast<std::size_t>(n);
            } else {
                for (std::size_t k = 0; k < in.options.size(); ++k) {
                    if (exercise::render_template(in.options[k], bindings_) == text) index = k;
                }
            }
            if (index >= in.options.size()) {
                throw SessionError(SessionError::Code::InvalidInput, "'" + raw + "' is not an option of '" + in.id + "'");
            }
            value = expr::Value(static_cast<std::int64_t>(index));
            scope.values.set("choice_" + in.id, *value);
            if (first_choice) scope.values.set("choice", *value);
            first_choice = false;
        } else if (in.kind == InputKind::NumericFill) {
            if (auto d = parse_number(raw)) {
                value = expr::Value(*d);
                scope.values.set("input_" + in.id, *value);
                if (first_numeric) scope.values.set("input", *value);
            } else {
                rec.parse_failed = true;
            }
            first_numeric = false;
        } else {
            try {
                auto f = expr::parse(raw, expr::ParseOptions::formula_input());
                scope.formulas["sub_" + in.id] = f;
                if (first_formula) scope.formulas["sub"] = f;
                value = expr::Value(expr::serialize(f));
            } catch (const expr::ParseError&) {
                rec.parse_failed = true;
            }
            first_formula = false;
        }
        if (value) {
            rec.parsed[in.id] = *value;
            if (in.carry_forward_as) carries.emplace_back(*in.carry_forward_as, *value);
        }
    }

    SubmissionResult result;
    const double weight = stage.weight;
    const std::size_t attempt = attempts_[stage.id] + 1;

    if (rec.parse_failed && stage.fallback) {
        rec.outcome = Outcome::Fallback;
        rec.score = 0;
        rec.next = stage.fallback;
        record_event(store::EventKind::SubmissionMade, {{"stage", stage.id},
                                                        {"inputs", rec.raw},
                                                        {"parseFailed", true},
                                                        {"rule", nullptr},
                                                        {"ruleId", nullptr},
                                                        {"score", 0},
                                                        {"stageScore", 0},
                                                        {"outcome", "fallback"},
                                                        {"next", *rec.next},
                                                        {"weight", weight}});
        attempts_[stage.id] = attempt;
        scores_[stage.id] = 0;
        actions_.push_back({Action::Kind::Submit, inputs});
        records_.push_back(rec);
        enter(*rec.next);
        result.outcome = Outcome::Fallback;
        result.next = view_locked();
        return result;
    }

    const expr::Bindings env = merged(bindings_, scope.values);
    const expr::PredicateScope predicates(scope.formulas, stage.tolerance, def_->equivalence);
    std::size_t matched = stage.rules.size();
    for (std::size_t i = 0; i < stage.rules.size(); ++i) {
        if (holds(stage.rules[i].condition, env, predicates, stage.id + " rule " + std::to_string(i))) {
            matched = i;
            break;
        }
    }
    if (matched == stage.rules.size()) {
        // validation guarantees a catch-all; keep going with a zero score
        spdlog::error("session {}: no rule matched in stage {}", id_, stage.id);
        matched = stage.rules.size() - 1;
    }
    const auto& rule = stage.rules[matched];
    rec.rule = matched;
    rec.rule_id = rule.id;
    rec.score = rule.score;
    if (mode_ == Mode::Formative) rec.feedback = render_or_raw(rule.message, env);

    int best = std::max(rule.score, best_.count(stage.id) ? best_[stage.id] : 0);
    bool redo = mode_ == Mode::Formative && !rule.terminal && stage.repeatable;
    int stage_score = rule.score;
    if (redo && attempt >= options_.redo_cap) {
        redo = false;
        stage_score = best;
    }

    InputScope after = scope;
    for (const auto& [name, value] : carries) after.values.set(name, value);
    if (!redo) rec.next = resolve_path(*def_, stage, bindings_, after, matched, rule.score);
    rec.outcome = redo ? Outcome::Redo : Outcome::Advanced;

    ordered_json parsed = ordered_json::object();
    for (const auto& [id, v] : rec.parsed) parsed[id] = json_value(v);
    record_event(store::EventKind::SubmissionMade, {{"stage", stage.id},
                                                    {"inputs", rec.raw},
                                                    {"parsed", parsed},
                                                    {"parseFailed", rec.parse_failed},
                                                    {"rule", matched},
                                                    {"ruleId", rule.id},
                                                    {"score", rule.score},
                                                    {"stageScore", redo ? best : stage_score},
                                                    {"outcome", std::string(to_string(rec.outcome))},
                                                    {"next", rec.next ? ordered_json(*rec.next) : ordered_json()},
                                                    {"weight", weight}});

    attempts_[stage.id] = attempt;
    best_[stage.id] = best;
    scores_[stage.id] = redo ? best : stage_score;
    actions_.push_back({Action::Kind::Submit, inputs});
    for (const auto& [name, value] : carries) write_carry(name, value);
    records_.push_back(rec);

    result.outcome = rec.outcome;
    result.score = rule.score;
    result.rule = matched;
    result.feedback = rec.feedback;
    if (!redo) {
        if (rec.next) {
            enter(*rec.next);
            result.next = view_locked();
        } else {
            completed_ = true;
            result.completed = true;
        }
    }
    return result;
}

std::string Session::hint() {
    std::lock_guard lock(mutex_);
    require_active();
    if (mode_ != Mode::Formative) {
        throw SessionError(SessionError::Code::ModeViolation, "hints are only available in formative mode");
    }
    const Stage& stage = def_->stage(current_);
    std::size_t& used = hints_[stage.id];
    if (used >= stage.hints.size()) {
        throw SessionError(SessionError::Code::HintsExhausted, "no more hints for this stage");
    }
    std::string text = render_or_raw(stage.hints[used], bindings_);
    record_event(store::EventKind::HintRequested, {{"stage", stage.id}, {"index", used}});
    ++used;
    actions_.push_back({Action::Kind::Hint, {}});
    return text;
}

SkipResult Session::skip() {
    std::lock_guard lock(mutex_);
    require_active();
    const Stage& stage = def_->stage(current_);
    if (!stage.skippable) throw SessionError(SessionError::Code::NotSkippable, "stage '" + stage.id + "' cannot be skipped");

    const bool carries = std::any_of(stage.inputs.begin(), stage.inputs.end(),
                                     [](const auto& in) { return in.carry_forward_as.has_value(); });
    std::optional<std::string> next = (carries && stage.fallback) ? stage.fallback : stage.next;
    if (stage.terminal()) next.reset();

    record_event(store::EventKind::StageSkipped, {{"stage", stage.id},
                                                  {"next", next ? ordered_json(*next) : ordered_json()},
                                                  {"weight", stage.weight}});
    SkipResult out;
    if (mode_ == Mode::Formative) out.solution = render_or_raw(stage.solution, bindings_);
    scores_[stage.id] = 0;
    actions_.push_back({Action::Kind::Skip, {}});
    if (next) {
        enter(*next);
        out.next = view_locked();
    } else {
        completed_ = true;
        out.completed = true;
    }
    return out;
}

SessionResult Session::finish(bool abandon) {
    std::lock_guard lock(mutex_);
    return finish_locked(abandon);
}

SessionResult Session::finish_locked(bool abandon) {
    if (finished_) throw SessionError(SessionError::Code::Finished, "session is finished");
    const bool at_end = completed_ || def_->stage(current_).terminal();
    if (!at_end && !abandon) {
        throw SessionError(SessionError::Code::NotTerminal, "the exercise is not done yet");
    }
    SessionResult r;
    r.session_id = id_;
    r.exercise_id = def_->id;
    r.mode = mode_;
    r.seed = seed_;
    r.path = path_;
    for (const auto& s : path_) {
        r.stage_scores[s] = scores_.count(s) ? scores_.at(s) : 0;
        r.stage_weights[s] = def_->stage(s).weight;
    }
    r.total = store::weighted_total(r.stage_scores, r.stage_weights);
    r.abandoned = !at_end;

    record_event(store::EventKind::SessionFinished, {{"total", r.total},
                                                     {"stageScores", r.stage_scores},
                                                     {"path", r.path},
                                                     {"weights", r.stage_weights},
                                                     {"abandoned", r.abandoned}});
    actions_.push_back({Action::Kind::Finish, {}});
    pool_->close(id_, def_->id);
    finished_ = true;
    result_ = r;
    return r;
}

bool Session::finished() const {
    std::lock_guard lock(mutex_);
    return finished_;
}

bool Session::completed() const {
    std::lock_guard lock(mutex_);
    return completed_;
}

std::string Session::current_stage() const {
    std::lock_guard lock(mutex_);
    return current_;
}

std::vector<SubmissionRecord> Session::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::vector<Action> Session::actions() const {
    std::lock_guard lock(mutex_);
    return actions_;
}

std::vector<std::string> Session::path() const {
    std::lock_guard lock(mutex_);
    return path_;
}

std::map<std::string, int> Session::stage_scores() const {
    std::lock_guard lock(mutex_);
    return scores_;
}

expr::Bindings Session::bindings() const {
    std::lock_guard lock(mutex_);
    return bindings_;
}

std::optional<SessionResult> Session::result() const {
    std::lock_guard lock(mutex_);
    return result_;
}

std::optional<expr::Image> Session::media(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = media_.find(id);
    if (it == media_.end()) return std::nullopt;
    return it->second;
}

expr::Value Session::eval_in_workspace(const std::string& code) {
    std::lock_guard lock(mutex_);
    if (finished_) throw SessionError(SessionError::Code::Finished, "session is finished");
    return workspace_->eval(code);
}

SessionResult replay(std::shared_ptr<const ExerciseDefinition> def, Mode mode, std::uint64_t seed,
                     const std::vector<Action>& actions, backend::BackendPool& pool, SessionOptions options) {
    auto s = Session::start(std::move(def), mode, seed, pool, std::move(options));
    for (const auto& a : actions) {
        switch (a.kind) {
            case Action::Kind::Submit: s->submit(a.inputs); break;
            case Action::Kind::Hint:
                try {
                    s->hint();
                } catch (const SessionError& e) {
                    if (e.code() != SessionError::Code::ModeViolation) throw;
                }
                break;
            case Action::Kind::Skip: s->skip(); break;
            case Action::Kind::Finish: return s->finish(true);
        }
    }
    return s->finish(true);
}

}  // namespace examforge::session

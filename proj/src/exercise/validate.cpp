#include "examforge/exercise/validate.hpp"

#include <deque>
#include <functional>
#include <map>
#include <set>

#include "examforge/exercise/json_schema.hpp"
#include "examforge/exercise/template.hpp"
#include "examforge/expr/analysis.hpp"
#include "examforge/expr/functions.hpp"

namespace examforge::exercise {

using expr::Expression;
using expr::NodeKind;

namespace {

const std::set<std::string> kReserved = {"sub", "input", "choice", "rule", "score", "pi", "e", "true", "false"};

enum class Kind { Boolean, Other };

bool formula_name(const std::string& name) { return name == "sub" || name.rfind("sub_", 0) == 0; }

// Visits identifiers, skipping Name/Function arguments. `in_formula` is set
// below Formula-role arguments of predicates.
void walk(const Expression& e, bool in_formula,
          const std::function<void(const std::string&, bool in_formula)>& visit) {
    if (e.kind() == NodeKind::Identifier) {
        visit(e.name(), in_formula);
        return;
    }
    const expr::FunctionInfo* info = e.kind() == NodeKind::Call ? expr::find_function(e.name()) : nullptr;
    for (std::size_t i = 0; i < e.children().size(); ++i) {
        bool child_formula = in_formula;
        if (info) {
            const auto role = info->role_of(i);
            if (role == expr::ArgRole::Name || role == expr::ArgRole::Function) continue;
            child_formula = child_formula || role == expr::ArgRole::Formula;
        }
        walk(e.child(i), child_formula, visit);
    }
}

Kind kind_of(const Expression& e) {
    switch (e.kind()) {
        case NodeKind::Logical:
        case NodeKind::Comparison: return Kind::Boolean;
        case NodeKind::Identifier:
            return e.name() == "true" || e.name() == "false" ? Kind::Boolean : Kind::Other;
        case NodeKind::Call:
            if (e.name() == "dependsOn" || e.name() == "usesFunction" || e.name() == "equivalent" ||
                e.name() == "inCorridor") {
                return Kind::Boolean;
            }
            if (e.name() == "ifelse") {
                return kind_of(e.child(1)) == Kind::Boolean && kind_of(e.child(2)) == Kind::Boolean ? Kind::Boolean
                                                                                                    : Kind::Other;
            }
            return Kind::Other;
        default: return Kind::Other;
    }
}

// First non-boolean operand of a logical operator, if any.
const Expression* bad_logical_operand(const Expression& e) {
    if (e.kind() == NodeKind::Logical) {
        for (const auto& c : e.children()) {
            if (kind_of(c) != Kind::Boolean) return &c;
            if (auto* bad = bad_logical_operand(c)) return bad;
        }
    }
    if (e.kind() == NodeKind::Call && e.name() == "ifelse" && kind_of(e.child(0)) != Kind::Boolean) {
        return &e.child(0);
    }
    for (const auto& c : e.children()) {
        if (auto* bad = bad_logical_operand(c)) return bad;
    }
    return nullptr;
}

class Checker {
public:
    explicit Checker(const ExerciseDefinition& def) : def_(def) {
        for (const auto& v : def.variables) variables_.insert(v.name);
        for (const auto& id : def.stage_order) {
            for (const auto& in : def.stage(id).inputs) {
                if (in.carry_forward_as) carry_owner_[*in.carry_forward_as] = {id, &in};
            }
        }
    }

    std::vector<Diagnostic> run() {
        check_variables();
        check_graph();
        for (const auto& id : def_.stage_order) check_stage(def_.stage(id));
        check_carries();
        check_modes();
        return std::move(out_);
    }

private:
    struct Carry {
        std::string stage;
        const InputElement* input;
    };

    // Names referenced by a stage, split by when they are needed.
    struct Uses {
        std::set<std::string> on_arrival;       // task, hints, rules, messages, solution
        std::set<std::string> in_transitions;
    };

    void error(std::string at, std::string message) {
        out_.push_back({Severity::Error, std::move(at), std::move(message)});
    }
    void warning(std::string at, std::string message) {
        out_.push_back({Severity::Warning, std::move(at), std::move(message)});
    }

    static std::string stage_at(const std::string& id) { return "/stages/" + pointer_token(id); }

    void check_variables() {
        std::set<std::string> defined;
        for (std::size_t i = 0; i < def_.variables.size(); ++i) {
            const auto& v = def_.variables[i];
            const std::string at = "/variables/" + std::to_string(i);
            if (kReserved.count(v.name)) error(at + "/name", "'" + v.name + "' is a reserved name");
            walk(v.expression, false, [&](const std::string& name, bool in_formula) {
                if (defined.count(name) || expr::is_implicit_constant(name)) return;
                if (variables_.count(name)) {
                    error(at + "/code", "refers to '" + name + "' before it is defined");
                } else {
                    error(at + "/code", "unknown name '" + name + "'");
                }
            });
            defined.insert(v.name);
        }
    }

    std::vector<std::pair<std::string, bool>> edges(const Stage& s) const {
        std::vector<std::pair<std::string, bool>> out;
        for (const auto& t : s.transitions) out.emplace_back(t.target, false);
        if (s.next) out.emplace_back(*s.next, false);
        if (s.fallback) out.emplace_back(*s.fallback, true);
        return out;
    }

    bool exists(const std::string& id) const { return def_.stages.count(id) > 0; }

    void check_graph() {
        if (!exists(def_.entry)) error("/entry", "unknown stage '" + def_.entry + "'");
        for (const auto& id : def_.stage_order) {
            const Stage& s = def_.stage(id);
            const std::string at = stage_at(id);
            if (s.next && !exists(*s.next)) error(at + "/next", "unknown stage '" + *s.next + "'");
            if (s.fallback && !exists(*s.fallback)) error(at + "/fallback", "unknown stage '" + *s.fallback + "'");
            for (std::size_t i = 0; i < s.transitions.size(); ++i) {
                if (!exists(s.transitions[i].target)) {
                    error(at + "/transitions/" + std::to_string(i) + "/to",
                          "unknown stage '" + s.transitions[i].target + "'");
                }
            }
            if (!s.transitions.empty() && !s.next) {
                error(at + "/next", "stage has transitions but no default next stage");
            }
        }
        if (!exists(def_.entry)) return;

        // Reachability from entry.
        std::set<std::string> seen{def_.entry};
        std::deque<std::string> queue{def_.entry};
        while (!queue.empty()) {
            const std::string id = queue.front();
            queue.pop_front();
            for (const auto& [to, fb] : edges(def_.stage(id))) {
                if (exists(to) && seen.insert(to).second) queue.push_back(to);
            }
        }
        for (const auto& id : def_.stage_order) {
            if (!seen.count(id)) error(stage_at(id), "stage is unreachable from entry '" + def_.entry + "'");
        }

        // Cycles (three-colour DFS).
        std::map<std::string, int> colour;
        std::set<std::string> reported;
        std::function<void(const std::string&)> dfs = [&](const std::string& id) {
            colour[id] = 1;
            for (const auto& [to, fb] : edges(def_.stage(id))) {
                if (!exists(to)) continue;
                if (colour[to] == 1) {
                    if (reported.insert(to).second) {
                        error(stage_at(id), "stage graph has a cycle through '" + to +
                                                "' (redo is modelled by repeatable, not by edges)");
                    }
                } else if (colour[to] == 0) {
                    dfs(to);
                }
            }
            colour[id] = 2;
        };
        for (const auto& id : def_.stage_order) {
            if (colour[id] == 0) dfs(id);
        }

        // Dead ends: every stage must be able to reach a terminal one.
        std::set<std::string> finishing;
        for (const auto& id : def_.stage_order) {
            if (def_.stage(id).terminal()) finishing.insert(id);
        }
        for (bool grew = true; grew;) {
            grew = false;
            for (const auto& id : def_.stage_order) {
                if (finishing.count(id)) continue;
                for (const auto& [to, fb] : edges(def_.stage(id))) {
                    if (finishing.count(to)) {
                        finishing.insert(id);
                        grew = true;
                        break;
                    }
                }
            }
        }
        for (const auto& id : def_.stage_order) {
            if (!finishing.count(id)) error(stage_at(id), "no terminal stage is reachable from this stage");
        }
    }

    void check_names(const Expression& e, const std::string& at, const std::set<std::string>& extra) {
        walk(e, false, [&](const std::string& name, bool in_formula) {
            if (in_formula) return;
            if (variables_.count(name) || carry_owner_.count(name) || extra.count(name) ||
                expr::is_implicit_constant(name)) {
                if (formula_name(name)) error(at, "formula '" + name + "' can only be a predicate argument");
                return;
            }
            error(at, "unknown name '" + name + "'");
        });
    }

    void check_condition(const Expression& e, const std::string& at, const std::set<std::string>& scope) {
        check_names(e, at, scope);
        if (kind_of(e) != Kind::Boolean) error(at, "condition is not boolean: " + expr::serialize(e));
        if (const Expression* bad = bad_logical_operand(e)) {
            error(at, "operand is not boolean: " + expr::serialize(*bad));
        }
    }

    void check_template(const std::string& text, const std::string& at, const std::set<std::string>& extra,
                        std::set<std::string>& used) {
        for (const auto& p : Template::parse(text).placeholders()) {
            used.insert(p.name);
            if (variables_.count(p.name) || carry_owner_.count(p.name) || extra.count(p.name)) continue;
            error(at, "placeholder '" + p.name + "' names nothing in scope");
        }
    }

    static void collect(const Expression& e, std::set<std::string>& used) {
        walk(e, false, [&](const std::string& name, bool) { used.insert(name); });
    }

    void check_stage(const Stage& s) {
        const std::string at = stage_at(s.id);
        const auto names = input_scope_names(s);
        std::set<std::string> scope(names.begin(), names.end());
        std::set<std::string> message_scope;
        for (const auto& n : names) {
            if (!formula_name(n)) message_scope.insert(n);
        }
        Uses& uses = uses_[s.id];

        check_template(s.task, at + "/task", {}, uses.on_arrival);
        check_template(s.solution, at + "/solution", {}, uses.on_arrival);
        for (std::size_t i = 0; i < s.hints.size(); ++i) {
            check_template(s.hints[i], at + "/hints/" + std::to_string(i), {}, uses.on_arrival);
        }

        for (std::size_t i = 0; i < s.inputs.size(); ++i) {
            const auto& in = s.inputs[i];
            const std::string iat = at + "/inputs/" + std::to_string(i);
            if (is_choice(in.kind) && in.options.empty()) error(iat + "/options", "choice input needs options");
            for (std::size_t k = 0; k < in.options.size(); ++k) {
                check_template(in.options[k], iat + "/options/" + std::to_string(k), {}, uses.on_arrival);
            }
            check_template(in.label, iat + "/label", {}, uses.on_arrival);
            if (in.carry_forward_as) {
                const std::string& c = *in.carry_forward_as;
                if (in.kind == InputKind::FormulaFill) {
                    error(iat + "/carryForwardAs", "formula inputs cannot be carried forward");
                }
                if (variables_.count(c)) error(iat + "/carryForwardAs", "'" + c + "' is also a variable");
                if (kReserved.count(c) || c.rfind("sub_", 0) == 0 || c.rfind("input_", 0) == 0 ||
                    c.rfind("choice_", 0) == 0) {
                    error(iat + "/carryForwardAs", "'" + c + "' is a reserved name");
                }
            }
        }

        for (std::size_t i = 0; i < s.rules.size(); ++i) {
            const auto& r = s.rules[i];
            const std::string rat = at + "/rules/" + std::to_string(i);
            check_condition(r.condition, rat + "/when", scope);
            collect(r.condition, uses.on_arrival);
            check_template(r.message, rat + "/message", message_scope, uses.on_arrival);
            const bool catch_all = r.condition.kind() == NodeKind::Identifier && r.condition.name() == "true";
            if (catch_all && i + 1 < s.rules.size()) {
                warning(at + "/rules/" + std::to_string(i + 1), "rule can never match: an earlier rule is the catch-all");
            }
        }
        const auto& last = s.rules.back().condition;
        if (!(last.kind() == NodeKind::Identifier && last.name() == "true")) {
            error(at + "/rules/" + std::to_string(s.rules.size() - 1) + "/when",
                  "last rule must be the catch-all `true`");
        }

        std::set<std::string> transition_scope = scope;
        transition_scope.insert("rule");
        transition_scope.insert("score");
        for (std::size_t i = 0; i < s.transitions.size(); ++i) {
            check_condition(s.transitions[i].condition, at + "/transitions/" + std::to_string(i) + "/when",
                            transition_scope);
            collect(s.transitions[i].condition, uses.in_transitions);
        }
    }

    bool consumed(const std::string& carry, const std::string& owner) const {
        for (const auto& [id, u] : uses_) {
            if (u.in_transitions.count(carry)) return true;
            if (id != owner && u.on_arrival.count(carry)) return true;
        }
        return false;
    }

    void check_carries() {
        if (!exists(def_.entry)) return;
        for (const auto& [c, owner] : carry_owner_) {
            const Stage& p = def_.stage(owner.stage);
            const std::string at = stage_at(owner.stage);
            if (!consumed(c, owner.stage)) continue;
            const bool numeric = owner.input->kind == InputKind::NumericFill;
            if ((numeric || p.skippable) && !p.fallback) {
                error(at + "/fallback", "fallback required: '" + c + "' is consumed later but " +
                                            (numeric ? "non-numeric input" : "a skip") + " leaves it unset");
            }

            // Walk (stage, carry bound) states; flag uses on paths where the
            // value was never set.
            std::set<std::pair<std::string, bool>> seen;
            std::deque<std::pair<std::string, bool>> queue{{def_.entry, false}};
            seen.insert(queue.front());
            std::set<std::string> reported;
            while (!queue.empty()) {
                auto [id, bound] = queue.front();
                queue.pop_front();
                const Stage& s = def_.stage(id);
                const bool declares = id == owner.stage;
                if (!bound && !reported.count(id)) {
                    const Uses& u = uses_[id];
                    if (u.on_arrival.count(c) || (!declares && u.in_transitions.count(c))) {
                        reported.insert(id);
                        error(stage_at(id), "'" + c + "' may be unset when this stage is reached");
                    }
                }
                for (const auto& [to, fb] : edges(s)) {
                    if (!exists(to)) continue;
                    std::pair<std::string, bool> next{to, bound || (declares && !fb)};
                    if (seen.insert(next).second) queue.push_back(next);
                }
            }
        }
    }

    void check_modes() {
        if (!def_.allows(Mode::Formative)) {
            for (const auto& id : def_.stage_order) {
                if (def_.stage(id).repeatable) {
                    warning(stage_at(id) + "/repeatable",
                            "repeatable stage in an exercise meant for summative or exam use");
                }
            }
        }
        double total = 0;
        for (const auto& [id, s] : def_.stages) total += s.weight;
        if (total <= 0) warning("/stages", "all stage weights are zero; totals will be 0");
    }

    const ExerciseDefinition& def_;
    std::set<std::string> variables_;
    std::map<std::string, Carry> carry_owner_;
    std::map<std::string, Uses> uses_;
    std::vector<Diagnostic> out_;
};

}  // namespace

std::vector<std::string> input_scope_names(const Stage& stage) {
    std::vector<std::string> out;
    bool first_formula = true, first_numeric = true, first_choice = true;
    for (const auto& in : stage.inputs) {
        const char* prefix = in.kind == InputKind::FormulaFill   ? "sub"
                             : in.kind == InputKind::NumericFill ? "input"
                                                                 : "choice";
        bool& first = in.kind == InputKind::FormulaFill   ? first_formula
                      : in.kind == InputKind::NumericFill ? first_numeric
                                                          : first_choice;
        if (first) out.emplace_back(prefix);
        first = false;
        out.push_back(std::string(prefix) + "_" + in.id);
    }
    return out;
}

std::vector<Diagnostic> validate_exercise(const ExerciseDefinition& def) { return Checker(def).run(); }

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
    for (const auto& d : diagnostics) {
        if (d.severity == Severity::Error) return true;
    }
    return false;
}

std::string format(const Diagnostic& d) {
    return std::string(d.severity == Severity::Error ? "error " : "warning ") + (d.pointer.empty() ? "/" : d.pointer) +
           ": " + d.message;
}

}  // namespace examforge::exercise

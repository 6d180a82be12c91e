#include "examforge/exercise/model.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "examforge/exercise/json_schema.hpp"
#include "examforge/exercise/template.hpp"
#include "examforge/expr/errors.hpp"
#include "examforge/expr/parser.hpp"
#include "examforge/schemas.hpp"
#include "json.hpp"

namespace examforge::exercise {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::pair<Mode, std::string_view> kModes[] = {
    {Mode::Formative, "formative"}, {Mode::Summative, "summative"}, {Mode::Exam, "exam"}};
constexpr std::pair<VariableKind, std::string_view> kVariableKinds[] = {
    {VariableKind::Number, "number"}, {VariableKind::Integer, "integer"}, {VariableKind::String, "string"},
    {VariableKind::Vector, "vector"}, {VariableKind::Image, "image"}};
constexpr std::pair<InputKind, std::string_view> kInputKinds[] = {
    {InputKind::MultipleChoice, "multipleChoice"}, {InputKind::DropDown, "dropDown"},
    {InputKind::NumericFill, "numericFill"}, {InputKind::FormulaFill, "formulaFill"}};

template <typename E, std::size_t N>
std::string_view name_of(const std::pair<E, std::string_view> (&table)[N], E value) {
    for (const auto& [v, name] : table) {
        if (v == value) return name;
    }
    return "?";
}

template <typename E, std::size_t N>
E value_of(const std::pair<E, std::string_view> (&table)[N], std::string_view name) {
    for (const auto& [v, n] : table) {
        if (n == name) return v;
    }
    throw std::invalid_argument("unknown enum text");
}

const JsonSchema& schema() {
    static const JsonSchema s = JsonSchema::parse(schemas::exercise);
    return s;
}

const expr::ParseOptions kConditionOptions{false, true, false, 200};
const expr::ParseOptions kVariableOptions{true, false, true, 200};

class Builder {
public:
    explicit Builder(const ojson& doc) : doc_(doc) {}

    ExerciseDefinition build() {
        ExerciseDefinition def;
        def.id = doc_["id"].get<std::string>();
        def.title = doc_["title"].get<std::string>();
        if (doc_.contains("modes")) {
            def.modes.clear();
            for (const auto& m : doc_["modes"]) {
                const Mode mode = value_of(kModes, m.get<std::string>());
                if (def.allows(mode)) fail("/modes", "duplicate mode '" + m.get<std::string>() + "'");
                def.modes.push_back(mode);
            }
        }
        if (doc_.contains("equivalence")) {
            const auto& eq = doc_["equivalence"];
            if (eq.contains("trials")) def.equivalence.trials = eq["trials"].get<std::size_t>();
            if (eq.contains("relTol")) def.equivalence.rel_tol = eq["relTol"].get<double>();
        }

        std::set<std::string> names;
        const auto& vars = doc_["variables"];
        for (std::size_t i = 0; i < vars.size(); ++i) {
            const std::string at = "/variables/" + std::to_string(i);
            VariableSpec v;
            v.name = vars[i]["name"].get<std::string>();
            if (!names.insert(v.name).second) fail(at + "/name", "duplicate variable '" + v.name + "'");
            v.code = vars[i]["code"].get<std::string>();
            v.expression = expression(at + "/code", v.code, kVariableOptions);
            v.kind = value_of(kVariableKinds, vars[i]["kind"].get<std::string>());
            def.variables.push_back(std::move(v));
        }

        std::set<std::string> carries;
        for (const auto& [id, body] : doc_["stages"].items()) {
            Stage s = stage(id, body, carries);
            def.stage_order.push_back(id);
            def.stages.emplace(id, std::move(s));
        }

        def.entry = doc_["entry"].get<std::string>();
        require_stage(def, "/entry", def.entry);
        for (const auto& id : def.stage_order) {
            const Stage& s = def.stage(id);
            const std::string at = "/stages/" + pointer_token(id);
            if (s.next) require_stage(def, at + "/next", *s.next);
            if (s.fallback) require_stage(def, at + "/fallback", *s.fallback);
            for (std::size_t i = 0; i < s.transitions.size(); ++i) {
                require_stage(def, at + "/transitions/" + std::to_string(i) + "/to", s.transitions[i].target);
            }
        }
        return def;
    }

private:
    [[noreturn]] static void fail(const std::string& at, const std::string& message) { throw LoadError(at, message); }

    static expr::Expression expression(const std::string& at, const std::string& text,
                                       const expr::ParseOptions& options) {
        try {
            return expr::parse(text, options);
        } catch (const expr::ParseError& e) {
            fail(at, "syntax error: " + std::string(e.what()));
        }
    }

    static std::string templ(const std::string& at, const ojson& node) {
        std::string text = node.get<std::string>();
        try {
            Template::parse(text);
        } catch (const TemplateError& e) {
            fail(at, e.what());
        }
        return text;
    }

    static void require_stage(const ExerciseDefinition& def, const std::string& at, const std::string& id) {
        if (!def.stages.count(id)) fail(at, "unknown stage '" + id + "'");
    }

    Stage stage(const std::string& id, const ojson& body, std::set<std::string>& carries) {
        const std::string at = "/stages/" + pointer_token(id);
        Stage s;
        s.id = id;
        s.task = templ(at + "/task", body["task"]);

        std::set<std::string> input_ids;
        const auto& inputs = body["inputs"];
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            const std::string iat = at + "/inputs/" + std::to_string(i);
            const auto& in = inputs[i];
            InputElement e;
            e.id = in["id"].get<std::string>();
            if (!input_ids.insert(e.id).second) fail(iat + "/id", "duplicate input id '" + e.id + "'");
            e.kind = value_of(kInputKinds, in["kind"].get<std::string>());
            if (in.contains("label")) e.label = templ(iat + "/label", in["label"]);
            if (in.contains("options")) {
                if (!is_choice(e.kind)) fail(iat + "/options", "options are only allowed on choice inputs");
                for (std::size_t k = 0; k < in["options"].size(); ++k) {
                    e.options.push_back(templ(iat + "/options/" + std::to_string(k), in["options"][k]));
                }
            }
            if (in.contains("carryForwardAs")) {
                e.carry_forward_as = in["carryForwardAs"].get<std::string>();
                if (!carries.insert(*e.carry_forward_as).second) {
                    fail(iat + "/carryForwardAs", "carry-forward name '" + *e.carry_forward_as + "' used twice");
                }
            }
            s.inputs.push_back(std::move(e));
        }

        if (body.contains("hints")) {
            for (std::size_t i = 0; i < body["hints"].size(); ++i) {
                s.hints.push_back(templ(at + "/hints/" + std::to_string(i), body["hints"][i]));
            }
        }

        std::set<std::string> rule_ids;
        const auto& rules = body["rules"];
        for (std::size_t i = 0; i < rules.size(); ++i) {
            const std::string rat = at + "/rules/" + std::to_string(i);
            const auto& r = rules[i];
            FeedbackRule rule;
            rule.id = r.contains("id") ? r["id"].get<std::string>() : std::to_string(i);
            if (!rule_ids.insert(rule.id).second) fail(rat + "/id", "duplicate rule id '" + rule.id + "'");
            rule.when = r["when"].get<std::string>();
            rule.condition = expression(rat + "/when", rule.when, kConditionOptions);
            rule.message = templ(rat + "/message", r["message"]);
            rule.score = r["score"].get<int>();
            rule.terminal = r.value("terminal", true);
            s.rules.push_back(std::move(rule));
        }

        if (body.contains("solution")) s.solution = templ(at + "/solution", body["solution"]);
        if (body.contains("transitions")) {
            const auto& ts = body["transitions"];
            for (std::size_t i = 0; i < ts.size(); ++i) {
                const std::string tat = at + "/transitions/" + std::to_string(i);
                Transition t;
                t.when = ts[i]["when"].get<std::string>();
                t.condition = expression(tat + "/when", t.when, kConditionOptions);
                t.target = ts[i]["to"].get<std::string>();
                s.transitions.push_back(std::move(t));
            }
        }
        if (body.contains("next")) s.next = body["next"].get<std::string>();
        if (body.contains("fallback")) s.fallback = body["fallback"].get<std::string>();
        s.repeatable = body.value("repeatable", true);
        s.skippable = body.value("skippable", false);
        s.weight = body.value("weight", 1.0);
        if (body.contains("tolerance")) {
            const auto& tol = body["tolerance"];
            s.tolerance.decimals = tol.value("decimals", 4);
            s.tolerance.half_width = tol.value("corridor", 0.0);
        }
        return s;
    }

    const ojson& doc_;
};

}  // namespace

std::string_view to_string(Mode mode) { return name_of(kModes, mode); }
std::string_view to_string(VariableKind kind) { return name_of(kVariableKinds, kind); }
std::string_view to_string(InputKind kind) { return name_of(kInputKinds, kind); }

std::optional<Mode> mode_from_string(std::string_view text) {
    for (const auto& [m, name] : kModes) {
        if (name == text) return m;
    }
    return std::nullopt;
}

const InputElement* Stage::input(std::string_view id) const {
    for (const auto& e : inputs) {
        if (e.id == id) return &e;
    }
    return nullptr;
}

const Stage& ExerciseDefinition::stage(std::string_view id) const {
    auto it = stages.find(id);
    if (it == stages.end()) throw std::out_of_range("unknown stage '" + std::string(id) + "'");
    return it->second;
}

bool ExerciseDefinition::allows(Mode mode) const {
    for (Mode m : modes) {
        if (m == mode) return true;
    }
    return false;
}

std::set<std::string> ExerciseDefinition::terminal_stage_ids() const {
    std::set<std::string> out;
    for (const auto& [id, s] : stages) {
        if (s.terminal()) out.insert(id);
    }
    return out;
}

std::string_view exercise_schema_text() { return schemas::exercise; }

ExerciseDefinition load_exercise(std::string_view document) {
    // nlohmann keeps the last of duplicated members; catch them here.
    std::vector<std::set<std::string>> open_objects;
    std::string duplicate;
    const ojson::parser_callback_t watch = [&](int, ojson::parse_event_t event, ojson& parsed) {
        switch (event) {
            case ojson::parse_event_t::object_start: open_objects.emplace_back(); break;
            case ojson::parse_event_t::object_end: open_objects.pop_back(); break;
            case ojson::parse_event_t::key:
                if (!open_objects.back().insert(parsed.get<std::string>()).second && duplicate.empty()) {
                    duplicate = parsed.get<std::string>();
                }
                break;
            default: break;
        }
        return true;
    };
    ojson doc;
    try {
        doc = ojson::parse(document, watch);
    } catch (const ojson::parse_error& e) {
        throw SyntaxLoadError("", std::string("not a JSON document: ") + e.what());
    }
    if (!duplicate.empty()) throw LoadError("", "duplicate member '" + duplicate + "'");

    auto violations = schema().validate(nlohmann::json::parse(document));
    if (!violations.empty()) {
        std::string message = violations.front().message;
        if (violations.size() > 1) message += " (and " + std::to_string(violations.size() - 1) + " more)";
        throw LoadError(violations.front().pointer, message);
    }
    return Builder(doc).build();
}

ExerciseDefinition load_exercise_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_exercise(ss.str());
}

std::map<std::string, ExerciseDefinition> load_exercise_dir(const std::string& dir,
                                                            std::vector<std::string>* errors) {
    std::map<std::string, ExerciseDefinition> out;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        try {
            ExerciseDefinition def = load_exercise_file(f.string());
            const std::string id = def.id;
            if (!out.emplace(id, std::move(def)).second) {
                throw LoadError("/id", "exercise id '" + id + "' defined twice");
            }
        } catch (const std::exception& e) {
            if (!errors) throw;
            errors->push_back(f.filename().string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace examforge::exercise

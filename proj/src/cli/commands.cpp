#include "examforge/cli/commands.hpp"

#include <unistd.h>

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "examforge/exercise/instantiate.hpp"
#include "examforge/exercise/template.hpp"
#include "examforge/exercise/validate.hpp"
#include "examforge/schemas.hpp"
#include "examforge/session/session.hpp"

namespace examforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json_file(const fs::path& path) {
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError(path.string() + ": not JSON: " + e.what());
    }
}

std::vector<fs::path> exercise_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

json exercise_document(const std::string& ref, const std::string& exercises_dir) {
    if (fs::is_regular_file(ref)) return parse_json_file(ref);
    if (exercises_dir.empty() || !fs::is_directory(exercises_dir)) {
        throw UsageError("no exercise file '" + ref + "' and no exercises directory to look it up in");
    }
    for (const auto& f : exercise_files(exercises_dir)) {
        json doc;
        try {
            doc = parse_json_file(f);
        } catch (const UsageError&) {
            continue;
        }
        if (doc.is_object() && doc.value("id", "") == ref) return doc;
    }
    throw UsageError("no exercise '" + ref + "' in " + exercises_dir);
}

std::string extension_for(const std::string& media_type) {
    if (media_type == "image/svg+xml") return ".svg";
    if (media_type == "image/png") return ".png";
    return ".bin";
}

std::string quoted(const std::string& s) {
    std::ostringstream out;
    out << std::quoted(s);
    return out.str();
}

std::string optional_text(const json& v) { return v.is_null() ? "-" : v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

EmbeddedBackend::EmbeddedBackend() {
    std::string tmpl = (fs::temp_directory_path() / "examforge-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("cannot create scratch directory");
    scratch_ = tmpl;
    core_ = std::make_unique<backend::BackendCore>(backend::CoreOptions{scratch_, std::nullopt});
    connector_ = std::make_shared<backend::LoopbackConnector>(*core_);
    pool_ = std::make_unique<backend::BackendPool>(connector_);
}

EmbeddedBackend::~EmbeddedBackend() {
    pool_.reset();
    connector_.reset();
    core_.reset();
    std::error_code ec;
    fs::remove_all(scratch_, ec);
}

int validate(const std::vector<std::string>& paths, std::ostream& out) {
    int status = 0;
    auto worse = [&](int s) { status = std::max(status, s); };
    std::vector<fs::path> files;
    for (const auto& p : paths) {
        if (fs::is_directory(p)) {
            auto more = exercise_files(p);
            files.insert(files.end(), more.begin(), more.end());
        } else {
            files.emplace_back(p);
        }
    }
    if (files.empty()) {
        out << "no exercise files\n";
        return 2;
    }
    for (const auto& f : files) {
        const std::string name = f.string();
        std::string text;
        try {
            text = read_file(f);
        } catch (const UsageError& e) {
            out << name << ": " << e.what() << "\n";
            worse(2);
            continue;
        }
        try {
            auto def = exercise::load_exercise(text);
            auto diagnostics = exercise::validate_exercise(def);
            for (const auto& d : diagnostics) out << name << ": " << exercise::format(d) << "\n";
            if (exercise::has_errors(diagnostics)) {
                worse(1);
            } else if (diagnostics.empty()) {
                out << name << ": ok\n";
            }
        } catch (const exercise::SyntaxLoadError& e) {
            out << name << ": not JSON: " << e.detail() << "\n";
            worse(2);
        } catch (const exercise::LoadError& e) {
            out << name << ": error " << e.what() << "\n";
            worse(1);
        }
    }
    return status;
}

exercise::ExerciseDefinition resolve_exercise(const std::string& ref, const std::string& exercises_dir) {
    return exercise::load_exercise(exercise_document(ref, exercises_dir).dump());
}

void preview(const exercise::ExerciseDefinition& def, std::size_t variants, std::uint64_t seed,
             const fs::path& out_dir, backend::BackendPool& pool) {
    if (variants == 0) throw UsageError("number of variants must be at least 1");
    auto diagnostics = exercise::validate_exercise(def);
    if (exercise::has_errors(diagnostics)) {
        throw UsageError("exercise '" + def.id + "' is invalid: " + exercise::format(diagnostics.front()));
    }
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < variants; ++i) {
        std::ostringstream name;
        name << "variant-" << std::setw(3) << std::setfill('0') << (i + 1);
        const fs::path dir = out_dir / name.str();
        fs::remove_all(dir);
        fs::create_directories(dir);

        const std::uint64_t variant_seed = seed + i;
        const std::string key = "preview-" + std::to_string(i);
        expr::Bindings bindings;
        {
            auto ws = pool.open(key, def.id);
            try {
                bindings = exercise::instantiate(def, *ws, variant_seed);
            } catch (...) {
                pool.close(key, def.id);
                throw;
            }
            pool.close(key, def.id);
        }

        std::ofstream values(dir / "values.txt");
        values << "seed " << variant_seed << "\n";
        for (const auto& v : def.variables) {
            const auto& value = bindings.get(v.name);
            if (value.is_image()) {
                const auto& img = value.as_image();
                const std::string file = exercise::media_id(img) + extension_for(img.media_type);
                std::ofstream(dir / file, std::ios::binary) << img.bytes;
                values << v.name << " = " << file << "\n";
            } else {
                values << v.name << " = " << expr::canonical_text(value) << "\n";
            }
        }

        std::ofstream stages(dir / "stages.txt");
        for (const auto& id : def.stage_order) {
            const auto& st = def.stage(id);
            stages << "## " << id << "\n" << exercise::render_template(st.task, bindings) << "\n";
            for (const auto& in : st.inputs) {
                stages << "input " << in.id << " (" << exercise::to_string(in.kind) << ")";
                if (!in.label.empty()) stages << " " << exercise::render_template(in.label, bindings);
                stages << "\n";
                for (std::size_t k = 0; k < in.options.size(); ++k) {
                    stages << "  [" << k << "] " << exercise::render_template(in.options[k], bindings) << "\n";
                }
            }
            for (std::size_t k = 0; k < st.hints.size(); ++k) {
                stages << "hint " << (k + 1) << ": " << exercise::render_template(st.hints[k], bindings) << "\n";
            }
            if (!st.solution.empty()) {
                stages << "solution: " << exercise::render_template(st.solution, bindings) << "\n";
            }
            stages << "\n";
        }
    }
}

const exercise::JsonSchema& simulation_schema() {
    static const exercise::JsonSchema schema = exercise::JsonSchema::parse(schemas::simulation);
    return schema;
}

SimulationReport simulate(const json& script, const fs::path& script_dir, const std::string& exercises_dir,
                          std::optional<std::uint64_t> seed, backend::BackendPool& pool) {
    auto violations = simulation_schema().validate(script);
    if (!violations.empty()) {
        const auto& v = violations.front();
        throw UsageError("script " + (v.pointer.empty() ? "/" : v.pointer) + ": " + v.message);
    }
    if (script.contains("exercise") == script.contains("exerciseFile")) {
        throw UsageError("script must name exactly one of exercise or exerciseFile");
    }
    json doc = script.contains("exercise")
                   ? exercise_document(script["exercise"], exercises_dir)
                   : parse_json_file(script_dir / script["exerciseFile"].get<std::string>());
    if (script.contains("overrides")) {
        for (const auto& [name, override_spec] : script["overrides"].items()) {
            bool found = false;
            for (auto& v : doc["variables"]) {
                if (v.value("name", "") != name) continue;
                found = true;
                if (override_spec.is_string()) {
                    v["code"] = override_spec;
                } else {
                    v["code"] = override_spec["code"];
                    if (override_spec.contains("kind")) v["kind"] = override_spec["kind"];
                }
            }
            if (!found) throw UsageError("override of unknown variable '" + name + "'");
        }
    }
    auto def = std::make_shared<const exercise::ExerciseDefinition>(exercise::load_exercise(doc.dump()));
    const auto mode = *exercise::mode_from_string(script.value("mode", "formative"));
    const std::uint64_t run_seed = seed ? *seed : script.value("seed", std::uint64_t{0});
    const bool formative = mode == exercise::Mode::Formative;

    session::SessionOptions options;
    options.session_id = "sim";
    std::shared_ptr<session::Session> s;
    try {
        s = session::Session::start(def, mode, run_seed, pool, options);
    } catch (const session::SessionError& e) {
        throw UsageError(e.what());
    }

    // script-local names for input templates, evaluated once after start
    expr::Bindings locals;
    if (script.contains("let")) {
        for (const auto& [name, code] : script["let"].items()) locals.set(name, s->eval_in_workspace(code));
    }

    SimulationReport report;
    std::ostringstream out;
    out << "exercise " << def->id << " mode " << exercise::to_string(mode) << " seed " << run_seed << "\n";

    for (const auto& action : script["actions"]) {
        ++report.actions;
        const std::string what = action["do"];
        json observed = json::object();
        observed["stage"] = s->finished() ? json() : json(s->current_stage());
        std::ostringstream line;
        line << "#" << report.actions << " " << what;
        if (!observed["stage"].is_null()) line << " " << observed["stage"].get<std::string>();
        try {
            if (what == "submit") {
                std::map<std::string, std::string> inputs;
                auto bindings = s->bindings();
                for (const auto& [name, value] : locals) bindings.set(name, value);
                if (action.contains("inputs")) {
                    for (const auto& [id, v] : action["inputs"].items()) {
                        inputs[id] = exercise::render_template(v.get<std::string>(), bindings);
                    }
                }
                for (const auto& [id, v] : inputs) line << " " << id << "=" << quoted(v);
                auto r = s->submit(inputs);
                const auto record = s->records().back();
                observed["outcome"] = std::string(session::to_string(r.outcome));
                observed["rule"] = r.rule ? json(*r.rule) : json();
                observed["ruleId"] = record.rule_id.empty() ? json() : json(record.rule_id);
                observed["next"] = r.next ? json(r.next->stage_id) : json();
                observed["completed"] = r.completed;
                line << " -> " << observed["outcome"].get<std::string>();
                if (formative) {
                    observed["score"] = r.score;
                    line << " score " << r.score;
                }
                line << " rule " << optional_text(observed["ruleId"]);
                line << " next " << optional_text(observed["next"]);
                if (r.completed) line << " completed";
                if (formative && r.feedback) {
                    observed["feedback"] = *r.feedback;
                    line << "\n   feedback: " << *r.feedback;
                }
                if (r.next) observed["text"] = r.next->task;
            } else if (what == "hint") {
                observed["hint"] = s->hint();
                line << " -> " << observed["hint"].get<std::string>();
            } else if (what == "skip") {
                auto r = s->skip();
                observed["next"] = r.next ? json(r.next->stage_id) : json();
                observed["completed"] = r.completed;
                line << " -> next " << optional_text(observed["next"]);
                if (r.completed) line << " completed";
                if (r.solution) {
                    observed["solution"] = *r.solution;
                    line << "\n   solution: " << *r.solution;
                }
                if (r.next) observed["text"] = r.next->task;
            } else {
                auto r = s->finish(action.value("abandon", false));
                observed["total"] = r.total;
                observed["abandoned"] = r.abandoned;
                observed["path"] = r.path;
                line << " -> total " << r.total << " path";
                for (const auto& p : r.path) line << " " << p;
                if (r.abandoned) line << " abandoned";
            }
        } catch (const session::SessionError& e) {
            observed["error"] = std::string(session::to_string(e.code()));
            line << " -> error " << observed["error"].get<std::string>();
        }
        out << line.str() << "\n";

        const json expect = action.value("expect", json::object());
        std::vector<std::string> mismatches;
        if (observed.contains("error") && !expect.contains("error")) {
            mismatches.push_back("unexpected error " + observed["error"].get<std::string>());
        }
        for (const auto& [key, want] : expect.items()) {
            static const std::map<std::string, std::string> contains_keys{{"feedbackContains", "feedback"},
                                                                          {"hintContains", "hint"},
                                                                          {"solutionContains", "solution"},
                                                                          {"textContains", "text"}};
            if (auto c = contains_keys.find(key); c != contains_keys.end()) {
                const json got = observed.value(c->second, json());
                if (!got.is_string() || got.get<std::string>().find(want.get<std::string>()) == std::string::npos) {
                    mismatches.push_back("expected " + c->second + " containing " + quoted(want) + ", got " +
                                         (got.is_string() ? quoted(got) : std::string("none")));
                }
                continue;
            }
            const std::string field = key == "rule" && want.is_string() ? "ruleId" : key;
            const json got = observed.value(field, json());
            if (got != want) mismatches.push_back("expected " + key + " " + want.dump() + ", got " + got.dump());
        }
        for (const auto& m : mismatches) out << "   FAIL " << m << "\n";
        if (!mismatches.empty()) ++report.failures;
    }
    out << report.actions << " actions, " << report.failures << " failed\n";
    report.text = out.str();
    return report;
}

SimulationReport simulate_file(const fs::path& script, const std::string& exercises_dir,
                               std::optional<std::uint64_t> seed, backend::BackendPool& pool) {
    return simulate(parse_json_file(script), script.parent_path(), exercises_dir, seed, pool);
}

}  // namespace examforge::cli

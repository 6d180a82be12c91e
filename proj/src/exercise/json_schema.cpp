#include "examforge/exercise/json_schema.hpp"

#include <map>
#include <regex>
#include <stdexcept>

namespace examforge::exercise {

using nlohmann::json;

namespace {

bool has_type(const json& instance, const std::string& type) {
    if (type == "object") return instance.is_object();
    if (type == "array") return instance.is_array();
    if (type == "string") return instance.is_string();
    if (type == "boolean") return instance.is_boolean();
    if (type == "null") return instance.is_null();
    if (type == "number") return instance.is_number();
    if (type == "integer") {
        if (instance.is_number_integer()) return true;
        if (instance.is_number_float()) {
            const double v = instance.get<double>();
            return v == static_cast<double>(static_cast<long long>(v));
        }
        return false;
    }
    throw std::invalid_argument("schema uses unknown type '" + type + "'");
}

std::string type_list(const json& t) {
    if (t.is_string()) return t.get<std::string>();
    std::string out;
    for (const auto& s : t) out += (out.empty() ? "" : " or ") + s.get<std::string>();
    return out;
}

const std::regex& cached_regex(const std::string& pattern) {
    thread_local std::map<std::string, std::regex> cache;
    auto it = cache.find(pattern);
    if (it == cache.end()) it = cache.emplace(pattern, std::regex(pattern, std::regex::ECMAScript)).first;
    return it->second;
}

}  // namespace

std::string pointer_token(std::string_view token) {
    std::string out;
    for (char c : token) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out += c;
    }
    return out;
}

JsonSchema::JsonSchema(json schema) : root_(std::move(schema)) {}

JsonSchema JsonSchema::parse(std::string_view text) { return JsonSchema(json::parse(text)); }

std::vector<SchemaViolation> JsonSchema::validate(const json& instance) const {
    std::vector<SchemaViolation> out;
    check(root_, instance, "", out);
    return out;
}

std::vector<SchemaViolation> JsonSchema::validate(const json& instance, std::string_view definition) const {
    auto defs = root_.find("definitions");
    if (defs == root_.end() || !defs->contains(std::string(definition))) {
        throw std::invalid_argument("schema has no definition '" + std::string(definition) + "'");
    }
    std::vector<SchemaViolation> out;
    check((*defs)[std::string(definition)], instance, "", out);
    return out;
}

const json& JsonSchema::resolve(const json& schema) const {
    const json* s = &schema;
    for (int hops = 0; s->is_object() && s->contains("$ref"); ++hops) {
        if (hops > 32) throw std::invalid_argument("schema $ref chain too deep");
        const std::string ref = (*s)["$ref"].get<std::string>();
        if (ref.rfind("#", 0) != 0) throw std::invalid_argument("only local $ref is supported: " + ref);
        s = &root_.at(json::json_pointer(ref.substr(1)));
    }
    return *s;
}

void JsonSchema::check(const json& schema_in, const json& instance, const std::string& pointer,
                       std::vector<SchemaViolation>& out) const {
    const json& schema = resolve(schema_in);
    if (schema.is_boolean()) {
        if (!schema.get<bool>()) out.push_back({pointer, "value not allowed"});
        return;
    }
    auto fail = [&](std::string message) { out.push_back({pointer, std::move(message)}); };

    if (auto t = schema.find("type"); t != schema.end()) {
        bool ok = false;
        if (t->is_string()) ok = has_type(instance, t->get<std::string>());
        else
            for (const auto& s : *t) ok = ok || has_type(instance, s.get<std::string>());
        if (!ok) {
            fail("expected " + type_list(*t));
            return;
        }
    }
    if (auto e = schema.find("enum"); e != schema.end()) {
        bool ok = false;
        for (const auto& v : *e) ok = ok || v == instance;
        if (!ok) fail("value " + instance.dump() + " is not one of " + e->dump());
    }
    if (auto c = schema.find("const"); c != schema.end() && *c != instance) fail("expected " + c->dump());
    if (auto a = schema.find("anyOf"); a != schema.end()) {
        bool ok = false;
        for (const auto& sub : *a) {
            std::vector<SchemaViolation> tmp;
            check(sub, instance, pointer, tmp);
            ok = ok || tmp.empty();
        }
        if (!ok) fail("value matches none of the allowed shapes");
    }

    if (instance.is_number()) {
        const double v = instance.get<double>();
        if (auto m = schema.find("minimum"); m != schema.end() && v < m->get<double>()) {
            fail("must be >= " + m->dump());
        }
        if (auto m = schema.find("maximum"); m != schema.end() && v > m->get<double>()) {
            fail("must be <= " + m->dump());
        }
        if (auto m = schema.find("exclusiveMinimum"); m != schema.end() && v <= m->get<double>()) {
            fail("must be > " + m->dump());
        }
    }
    if (instance.is_string()) {
        const auto& s = instance.get_ref<const std::string&>();
        if (auto m = schema.find("minLength"); m != schema.end() && s.size() < m->get<std::size_t>()) {
            fail("string shorter than " + m->dump());
        }
        if (auto p = schema.find("pattern"); p != schema.end() &&
                                             !std::regex_search(s, cached_regex(p->get<std::string>()))) {
            fail("'" + s + "' does not match " + p->get<std::string>());
        }
    }
    if (instance.is_array()) {
        if (auto m = schema.find("minItems"); m != schema.end() && instance.size() < m->get<std::size_t>()) {
            fail("needs at least " + m->dump() + " item(s)");
        }
        if (auto m = schema.find("maxItems"); m != schema.end() && instance.size() > m->get<std::size_t>()) {
            fail("allows at most " + m->dump() + " item(s)");
        }
        if (auto items = schema.find("items"); items != schema.end()) {
            for (std::size_t i = 0; i < instance.size(); ++i) {
                check(*items, instance[i], pointer + "/" + std::to_string(i), out);
            }
        }
    }
    if (instance.is_object()) {
        if (auto m = schema.find("minProperties"); m != schema.end() && instance.size() < m->get<std::size_t>()) {
            fail("needs at least " + m->dump() + " member(s)");
        }
        if (auto req = schema.find("required"); req != schema.end()) {
            for (const auto& name : *req) {
                if (!instance.contains(name.get<std::string>())) {
                    fail("missing required member '" + name.get<std::string>() + "'");
                }
            }
        }
        const json* props = schema.contains("properties") ? &schema["properties"] : nullptr;
        const json* extra = schema.contains("additionalProperties") ? &schema["additionalProperties"] : nullptr;
        const json* names = schema.contains("propertyNames") ? &schema["propertyNames"] : nullptr;
        for (const auto& [key, value] : instance.items()) {
            const std::string child = pointer + "/" + pointer_token(key);
            if (names) {
                std::vector<SchemaViolation> tmp;
                check(*names, json(key), child, tmp);
                for (auto& v : tmp) out.push_back({child, "member name: " + v.message});
            }
            if (props && props->contains(key)) {
                check((*props)[key], value, child, out);
            } else if (extra) {
                if (extra->is_boolean() && !extra->get<bool>()) {
                    out.push_back({child, "unexpected member '" + key + "'"});
                } else if (!extra->is_boolean()) {
                    check(*extra, value, child, out);
                }
            }
        }
    }
}

}  // namespace examforge::exercise

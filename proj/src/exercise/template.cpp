#include "examforge/exercise/template.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

#include "examforge/expr/numeric.hpp"

namespace examforge::exercise {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_identifier(std::string_view s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    }
    return true;
}

Placeholder parse_slot(std::string_view body, std::size_t offset) {
    auto bad = [&](const std::string& why) {
        return TemplateError("placeholder at offset " + std::to_string(offset) + ": " + why);
    };
    Placeholder p;
    const auto bar = body.find('|');
    const std::string_view name = trim(body.substr(0, bar));
    if (!is_identifier(name)) throw bad("'" + std::string(name) + "' is not a name");
    p.name = std::string(name);
    if (bar == std::string_view::npos) return p;

    std::string_view filter = trim(body.substr(bar + 1));
    const auto colon = filter.find(':');
    if (colon == std::string_view::npos || trim(filter.substr(0, colon)) != "round") {
        throw bad("only the round:d filter is supported");
    }
    const std::string_view digits = trim(filter.substr(colon + 1));
    int d = -1;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), d);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || d < 0 || d > 15) {
        throw bad("round needs a digit count in [0, 15]");
    }
    p.round = d;
    return p;
}

std::string render_value(const Placeholder& p, const expr::Value& v) {
    if (v.is_image()) return media_token(v.as_image());
    if (!p.round) return expr::canonical_text(v);
    if (v.is_numeric()) return expr::format_fixed(v.as_double(), *p.round);
    if (v.is_vector()) {
        std::string out = "c(";
        bool first = true;
        for (double x : v.as_vector()) {
            if (!first) out += ", ";
            first = false;
            out += expr::format_fixed(x, *p.round);
        }
        return out + ")";
    }
    throw TemplateError("round applied to non-numeric '" + p.name + "'");
}

}  // namespace

Template Template::parse(std::string_view text) {
    Template t;
    std::string literal;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text.compare(i, 2, "{{") == 0) {
            const auto close = text.find("}}", i + 2);
            if (close == std::string_view::npos) {
                throw TemplateError("unterminated placeholder at offset " + std::to_string(i));
            }
            if (!literal.empty()) t.parts_.push_back({std::move(literal), std::nullopt});
            literal.clear();
            t.parts_.push_back({{}, parse_slot(text.substr(i + 2, close - i - 2), i)});
            i = close + 2;
        } else {
            literal += text[i++];
        }
    }
    if (!literal.empty()) t.parts_.push_back({std::move(literal), std::nullopt});
    return t;
}

std::vector<Placeholder> Template::placeholders() const {
    std::vector<Placeholder> out;
    for (const auto& p : parts_) {
        if (p.slot) out.push_back(*p.slot);
    }
    return out;
}

std::string Template::render(const expr::Bindings& bindings) const {
    std::string out;
    for (const auto& p : parts_) {
        if (!p.slot) {
            out += p.text;
            continue;
        }
        const expr::Value* v = bindings.find(p.slot->name);
        if (!v) throw TemplateError("unbound placeholder '" + p.slot->name + "'");
        out += render_value(*p.slot, *v);
    }
    return out;
}

std::string render_template(std::string_view text, const expr::Bindings& bindings) {
    return Template::parse(text).render(bindings);
}

std::string media_id(const expr::Image& image) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    mix(image.media_type);
    mix(std::string_view("\0", 1));
    mix(image.bytes);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string media_token(const expr::Image& image) { return "[[media:" + media_id(image) + "]]"; }

}  // namespace examforge::exercise

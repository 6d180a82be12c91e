#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "examforge/expr/value.hpp"

namespace examforge::exercise {

class TemplateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// `{{name}}` or `{{name | round:d}}`.
struct Placeholder {
    std::string name;
    std::optional<int> round;
};

/// Text with placeholders, split once so rendering is a simple walk.
class Template {
public:
    /// Throws TemplateError on an unterminated or malformed placeholder.
    static Template parse(std::string_view text);

    std::vector<Placeholder> placeholders() const;

    /// Throws TemplateError for unbound names and for round on a
    /// non-numeric value.
    std::string render(const expr::Bindings& bindings) const;

private:
    struct Part {
        std::string text;
        std::optional<Placeholder> slot;
    };
    std::vector<Part> parts_;
};

std::string render_template(std::string_view text, const expr::Bindings& bindings);

/// Stable id for image bytes (64-bit FNV-1a, hex).
std::string media_id(const expr::Image& image);

/// What an image placeholder renders to.
std::string media_token(const expr::Image& image);

}  // namespace examforge::exercise

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace examforge::exercise {

struct SchemaViolation {
    std::string pointer;  // JSON pointer into the instance
    std::string message;
};

/// Validator for the draft-07 subset our schemas use: type, enum, const,
/// properties, required, additionalProperties, propertyNames,
/// minProperties, items, minItems, maxItems, minimum, maximum,
/// exclusiveMinimum, minLength, pattern, anyOf, and local $ref.
class JsonSchema {
public:
    explicit JsonSchema(nlohmann::json schema);

    static JsonSchema parse(std::string_view text);

    std::vector<SchemaViolation> validate(const nlohmann::json& instance) const;
    /// Against `#/definitions/<definition>` of this schema.
    std::vector<SchemaViolation> validate(const nlohmann::json& instance, std::string_view definition) const;
    template <class Json>
    std::vector<SchemaViolation> validate_any(const Json& instance) const {
        return validate(nlohmann::json::parse(instance.dump()));
    }

private:
    void check(const nlohmann::json& schema, const nlohmann::json& instance, const std::string& pointer,
               std::vector<SchemaViolation>& out) const;
    const nlohmann::json& resolve(const nlohmann::json& schema) const;

    nlohmann::json root_;
};

/// Escape one reference token for a JSON pointer.
std::string pointer_token(std::string_view token);

}  // namespace examforge::exercise

#include "examforge/expr/numeric.hpp"

#include <cmath>
#include <cstdio>

namespace examforge::expr {

double round_half_away(double v, int digits) {
    if (!std::isfinite(v)) return v;
    const double scale = std::pow(10.0, digits);
    const double x = v * scale;
    if (!std::isfinite(x)) return v;
    const double whole = std::trunc(x);
    const double frac = std::abs(x - whole);
    double r;
    if (std::abs(frac - 0.5) <= 1e-9 * std::max(1.0, std::abs(x))) {
        r = whole + (x < 0 ? -1.0 : 1.0);
    } else {
        r = std::round(x);
    }
    return r / scale;
}

std::string format_fixed(double v, int digits) {
    const double r = round_half_away(v, digits);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, r);
    std::string text(buf);
    // "-0.0000" reads oddly in a task text.
    if (text.front() == '-' && text.find_first_not_of("-0.") == std::string::npos) text.erase(0, 1);
    return text;
}

bool within_corridor(double input, double correct, const Corridor& corridor) {
    if (!std::isfinite(input) || !std::isfinite(correct)) return false;
    // Compare in integer units of the last kept decimal so that the
    // boundaries of the corridor are exact.
    const double scale = std::pow(10.0, corridor.decimals);
    const double a = round_half_away(input, corridor.decimals) * scale;
    const double b = round_half_away(correct, corridor.decimals) * scale;
    const double diff_units = std::abs(std::round(a) - std::round(b));
    const double allowed_units = corridor.half_width * scale;
    return diff_units <= allowed_units + 1e-9;
}

}  // namespace examforge::expr

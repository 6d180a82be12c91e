#pragma once

#include <string>

namespace examforge::expr {

/// Round to `digits` decimals, halves away from zero. Products like
/// 0.77455 * 1e4 that land a hair below .5 through binary representation
/// are still treated as ties.
double round_half_away(double v, int digits);

/// Fixed-point text with exactly `digits` decimals after rounding.
std::string format_fixed(double v, int digits);

/// Accepted band around a correct numeric answer: both values are rounded
/// to `decimals` places, then compared against an inclusive half-width.
struct Corridor {
    int decimals = 4;
    double half_width = 0.0;

    bool operator==(const Corridor&) const = default;
};

bool within_corridor(double input, double correct, const Corridor& corridor);

}  // namespace examforge::expr

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace mannfix {

/// Dense vector of non-negative extended reals. Entries are finite during
/// iteration; +inf only appears in exact values computed by `analysis`.
using ValueVector = std::vector<double>;

/// A map R_+^d -> R_+^d.
using Operator = std::function<ValueVector(const ValueVector&)>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Slack on probability mass: a distribution with total mass in
/// [1 - kMassTolerance, 1 + kMassTolerance] counts as full mass.
inline constexpr double kMassTolerance = 1e-12;

/// Largest double below one. Parameter values that would be exactly 1 are
/// mapped here so that every emitted parameter stays in [0,1).
inline constexpr double kAlmostOne = 1.0 - 0x1p-52;

class DimensionMismatch : public std::invalid_argument {
public:
    DimensionMismatch(const std::string& where, std::size_t expected, std::size_t actual)
        : std::invalid_argument(where + ": expected dimension " + std::to_string(expected) +
                                ", got " + std::to_string(actual)) {}
};

inline void require_dimension(const char* where, std::size_t expected, std::size_t actual) {
    if (expected != actual) throw DimensionMismatch(where, expected, actual);
}

/// Supremum norm of x - y.
double sup_distance(const ValueVector& x, const ValueVector& y);

/// Supremum distance restricted to components where `reference` is finite.
/// Components with an infinite reference value are skipped.
double error_vs_reference(const ValueVector& x, const ValueVector& reference);

double sup_norm(const ValueVector& x);

/// A 0-box {x in R_+^d | x <= bound}; bound entries may be +inf.
struct ZeroBox {
    ValueVector bound;

    static ZeroBox unbounded(std::size_t dimension) {
        return ZeroBox{ValueVector(dimension, kInfinity)};
    }

    std::size_t dimension() const { return bound.size(); }

    /// 0 <= x <= bound pointwise, with an absolute slack on the upper bound.
    bool contains(const ValueVector& x, double slack = 0.0) const;
};

} // namespace mannfix

#pragma once

#include <span>
#include <vector>

namespace vsi {

/// 1-D interpolant through sorted, strictly increasing knots.
///
///   1 knot     constant
///   2-3 knots  piecewise linear
///   4+ knots   natural cubic spline (zero second derivative at both ends)
///
/// Outside [x_front, x_back] the value is clamped to the nearest knot's y.
class KnotInterpolator {
public:
    /// Throws InvalidInput when the knots are empty, unsorted, duplicated or
    /// differ in length from the values.
    KnotInterpolator(std::vector<double> x, std::vector<double> y);

    double operator()(double x) const;

    /// Evaluate at 0, 1, ..., count - 1 in one sweep.
    std::vector<double> sample_grid(std::size_t count) const;

    bool is_cubic() const noexcept { return !second_derivs_.empty(); }

private:
    double eval_in(std::size_t segment, double x) const;

    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> second_derivs_;  // empty unless cubic
};

}  // namespace vsi

#include "vsi/spline.hpp"

#include <algorithm>

#include "vsi/core.hpp"

namespace vsi {

KnotInterpolator::KnotInterpolator(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.empty())
        throw InvalidInput("KnotInterpolator: no knots");
    if (x_.size() != y_.size())
        throw InvalidInput("KnotInterpolator: knot/value length mismatch");
    for (std::size_t i = 1; i < x_.size(); ++i)
        if (!(x_[i] > x_[i - 1]))
            throw InvalidInput("KnotInterpolator: knots must be strictly increasing");

    const std::size_t n = x_.size();
    if (n < 4)
        return;

    // Tridiagonal system for the interior second derivatives (Thomas algorithm).
    second_derivs_.assign(n, 0.0);
    const std::size_t m = n - 2;
    std::vector<double> diag(m), upper(m), rhs(m);
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = k + 1;
        const double h0 = x_[i] - x_[i - 1];
        const double h1 = x_[i + 1] - x_[i];
        diag[k] = 2.0 * (h0 + h1);
        upper[k] = h1;
        rhs[k] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t k = 1; k < m; ++k) {
        const double lower = x_[k + 1] - x_[k];  // h_{i-1} for row k
        const double factor = lower / diag[k - 1];
        diag[k] -= factor * upper[k - 1];
        rhs[k] -= factor * rhs[k - 1];
    }
    second_derivs_[m] = rhs[m - 1] / diag[m - 1];
    for (std::size_t k = m - 1; k-- > 0;)
        second_derivs_[k + 1] = (rhs[k] - upper[k] * second_derivs_[k + 2]) / diag[k];
}

double KnotInterpolator::eval_in(std::size_t i, double x) const {
    const double x0 = x_[i], x1 = x_[i + 1];
    const double h = x1 - x0;
    const double a = x1 - x;
    const double b = x - x0;
    if (second_derivs_.empty())
        return (y_[i] * a + y_[i + 1] * b) / h;
    const double m0 = second_derivs_[i], m1 = second_derivs_[i + 1];
    return m0 * a * a * a / (6.0 * h) + m1 * b * b * b / (6.0 * h) + (y_[i] / h - m0 * h / 6.0) * a +
           (y_[i + 1] / h - m1 * h / 6.0) * b;
}

double KnotInterpolator::operator()(double x) const {
    if (x <= x_.front())
        return y_.front();
    if (x >= x_.back())
        return y_.back();
    // x_[i] <= x < x_[i + 1]
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const auto i = static_cast<std::size_t>(it - x_.begin()) - 1;
    if (x == x_[i])
        return y_[i];
    return eval_in(i, x);
}

std::vector<double> KnotInterpolator::sample_grid(std::size_t count) const {
    std::vector<double> out(count);
    std::size_t i = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const double x = static_cast<double>(k);
        if (x <= x_.front()) {
            out[k] = y_.front();
            continue;
        }
        if (x >= x_.back()) {
            out[k] = y_.back();
            continue;
        }
        while (x_[i + 1] <= x)
            ++i;
        out[k] = x == x_[i] ? y_[i] : eval_in(i, x);
    }
    return out;
}

}  // namespace vsi

#pragma once

// Deliberately naive reference implementations used to cross-check the
// library. They share no code with src/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace oracle {

struct Segment {
    double b, e;
};

inline double soft_threshold(double c, double theta, double alpha) {
    double excess = c - theta;
    if (excess < 0) excess = 0;
    double v = c + alpha * excess;
    return v > 1.0 ? 1.0 : v;
}

/// Per frame, per segment: the literal max over qualifying kernels.
inline std::vector<double> text_scores(const std::vector<Segment>& segs, const std::vector<double>& enhanced,
                                       std::int64_t n_frames, double fps, double W, double seg_threshold) {
    std::vector<double> out(static_cast<std::size_t>(n_frames), 0.0);
    for (std::int64_t f = 0; f < n_frames; ++f) {
        const double t = static_cast<double>(f) / fps;
        double best = 0.0;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            if (!(enhanced[i] > seg_threshold)) continue;
            if (t < segs[i].b - W || t > segs[i].e + W) continue;
            const double c = 0.5 * (segs[i].b + segs[i].e);
            const double sigma = (segs[i].e - segs[i].b + 2 * W) / 4;
            double k;
            if (sigma == 0)
                k = (t == c) ? enhanced[i] : 0.0;
            else
                k = enhanced[i] * std::exp(-(t - c) * (t - c) / (2 * sigma * sigma));
            best = std::max(best, k);
        }
        out[static_cast<std::size_t>(f)] = std::min(1.0, std::max(0.0, best));
    }
    return out;
}

/// Natural cubic spline second derivatives: assemble the full n x n system
/// and solve it by Gaussian elimination (rows with a zero multiplier skipped).
inline std::vector<double> natural_second_derivatives(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
    a[0][0] = 1;
    a[n - 1][n - 1] = 1;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
        a[i][i - 1] = h0 / 6;
        a[i][i] = (h0 + h1) / 3;
        a[i][i + 1] = h1 / 6;
        a[i][n] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    for (std::size_t col = 0; col < n; ++col) {
        for (std::size_t r = col + 1; r < n; ++r) {
            if (a[r][col] == 0.0) continue;
            const double factor = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= n; ++c) a[r][c] -= factor * a[col][c];
        }
    }
    std::vector<double> m(n);
    for (std::size_t i = n; i-- > 0;) {
        double acc = a[i][n];
        for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * m[c];
        m[i] = acc / a[i][i];
    }
    return m;
}

/// Interpolant through (x, y) knots: constant, piecewise linear (2-3 knots)
/// or natural cubic (4+), held flat outside the knot range.
class Interpolant {
public:
    Interpolant(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        if (x_.size() >= 4) m_ = natural_second_derivatives(x_, y_);
    }

    double operator()(double q) const {
        const std::size_t n = x_.size();
        if (n == 1) return y_[0];
        if (q <= x_.front()) return y_.front();
        if (q >= x_.back()) return y_.back();
        std::size_t i = 0;
        while (!(q >= x_[i] && q <= x_[i + 1])) ++i;
        const double h = x_[i + 1] - x_[i];
        if (n <= 3) return y_[i] + (y_[i + 1] - y_[i]) * (q - x_[i]) / h;
        const double A = (x_[i + 1] - q) / h, B = (q - x_[i]) / h;
        return A * y_[i] + B * y_[i + 1] + ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6;
    }

private:
    std::vector<double> x_, y_, m_;
};

inline double interpolate(const std::vector<double>& x, const std::vector<double>& y, double q) {
    return Interpolant(x, y)(q);
}

/// The four-step distribution update, frame by frame.
inline std::vector<double> distribution(std::int64_t n_frames, std::vector<std::pair<std::int64_t, double>> scored) {
    std::sort(scored.begin(), scored.end());
    std::vector<double> x, y;
    for (auto [f, s] : scored) {
        x.push_back(static_cast<double>(f));
        y.push_back(s);
    }
    const Interpolant curve(x, y);
    std::vector<double> sig(static_cast<std::size_t>(n_frames));
    double total = 0;
    auto it = scored.begin();
    for (std::int64_t f = 0; f < n_frames; ++f) {
        double s;
        while (it != scored.end() && it->first < f) ++it;
        if (it != scored.end() && it->first == f) {
            s = it->second;
        } else {
            s = curve(static_cast<double>(f));
            s = std::min(3.0, std::max(-1.0, s));
        }
        s = std::max(1.0 / static_cast<double>(n_frames), s);
        sig[static_cast<std::size_t>(f)] = 1.0 / (1.0 + std::exp(-s));
        total += sig[static_cast<std::size_t>(f)];
    }
    for (auto& v : sig) v /= total;
    return sig;
}

inline std::vector<double> znorm(const std::vector<double>& v, double eps) {
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(v.size()));
    std::vector<double> out;
    for (double x : v) out.push_back((x - mean) / (sd + eps));
    return out;
}

}  // namespace oracle

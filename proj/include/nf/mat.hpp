#pragma once

// Small dense matrix/vector helpers for the classification head. The head
// is tiny (a few thousand parameters), so plain row-major loops in double
// precision are both fast enough and bit-reproducible, which the gradient
// checks and the determinism contract rely on.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "nf/errors.hpp"

namespace nf {

using Vec = std::vector<double>;

struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* operator[](std::size_t r) { return data.data() + r * cols; }
    const double* operator[](std::size_t r) const { return data.data() + r * cols; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const {
        return {data.data() + r * cols, cols};
    }

    void fill(double v) { data.assign(data.size(), v); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> v) {
    return std::sqrt(dot(v, v));
}

// y = M x (+ y must be sized M.rows)
inline void matvec(const Mat& m, std::span<const double> x, std::span<double> y) {
    for (std::size_t r = 0; r < m.rows; ++r) y[r] = dot(m.row(r), x);
}

// y += M^T x (x has M.rows entries, y has M.cols entries)
inline void matvec_t_add(const Mat& m, std::span<const double> x, std::span<double> y) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double xr = x[r];
        const double* row = m[r];
        for (std::size_t c = 0; c < m.cols; ++c) y[c] += xr * row[c];
    }
}

// M += a * x y^T (outer product accumulate)
inline void outer_add(Mat& m, std::span<const double> x, std::span<const double> y,
                      double a = 1.0) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        double* row = m[r];
        const double xr = a * x[r];
        for (std::size_t c = 0; c < m.cols; ++c) row[c] += xr * y[c];
    }
}

// Numerically safe softmax (max subtraction), in place.
inline void softmax_inplace(std::span<double> v) {
    if (v.empty()) throw argument_error("softmax of empty vector");
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    double z = 0.0;
    for (double& x : v) {
        x = std::exp(x - m);
        z += x;
    }
    for (double& x : v) x /= z;
}

inline Vec softmax(std::span<const double> v) {
    Vec out(v.begin(), v.end());
    softmax_inplace(out);
    return out;
}

inline double logsumexp(std::span<const double> v) {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    double z = 0.0;
    for (double x : v) z += std::exp(x - m);
    return m + std::log(z);
}

// Cross-entropy of softmax(logits) against class index `target`, natural log.
inline double cross_entropy(std::span<const double> logits, std::size_t target) {
    return logsumexp(logits) - logits[target];
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm2(a);
    const double nb = norm2(b);
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    return dot(a, b) / (na * nb);
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace nf

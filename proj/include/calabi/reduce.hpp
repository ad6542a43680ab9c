#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "calabi/field.hpp"

namespace calabi {

// Pairwise (cascade) summation. Order of operations depends only on the
// length, so reductions are bit-reproducible run to run and carry an
// O(log n) rounding error constant instead of O(n).
inline double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 32) {
        double s = 0.0;
        for (double t : x) s += t;
        return s;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

template <class F>
inline double pairwise_map_sum(std::size_t count, F&& term) {
    // Summation tree identical to pairwise_sum without materializing the
    // mapped values.
    struct Rec {
        static double go(std::size_t lo, std::size_t n, F& f) {
            if (n <= 32) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) s += f(lo + i);
                return s;
            }
            const std::size_t half = n / 2;
            return go(lo, half, f) + go(lo + half, n - half, f);
        }
    };
    return Rec::go(0, count, term);
}

inline double integral(const RealField& f) {
    return f.grid.cell_weight() * pairwise_sum(std::span<const double>(f.v));
}

// Integral of f against a density field (both sampled on the same grid).
inline double integral_weighted(const RealField& f, const RealField& density) {
    require_same_grid(f.grid, density.grid, "integral_weighted");
    const double w = f.grid.cell_weight();
    return w * pairwise_map_sum(f.size(), [&](std::size_t i) { return f.v[i] * density.v[i]; });
}

inline double l2_norm(const RealField& f) {
    const double w = f.grid.cell_weight();
    double q = pairwise_map_sum(f.size(), [&](std::size_t i) { return f.v[i] * f.v[i]; });
    return std::sqrt(w * q);
}

inline double l2_norm(const ComplexField& f) {
    const double w = f.grid.cell_weight();
    double q = pairwise_map_sum(f.size(), [&](std::size_t i) { return std::norm(f.v[i]); });
    return std::sqrt(w * q);
}

inline double mean(const RealField& f) {
    return pairwise_sum(std::span<const double>(f.v)) / static_cast<double>(f.size());
}

} // namespace calabi

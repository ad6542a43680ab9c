#pragma once

#include <array>
#include <cstddef>
#include <numbers>
#include <vector>

#include "calabi/errors.hpp"

namespace calabi {

inline constexpr double kPeriod = 2.0 * std::numbers::pi;

// Uniform periodic grid on the torus of complex dimension n (1 or 2), i.e.
// 2n real axes, each of period 2*pi sampled at N equispaced points. Points
// are stored row major over the axis order (x1, y1[, x2, y2]), the last
// axis fastest, matching the transform layout.
class TorusGrid {
public:
    TorusGrid(int n, int N) : n_(n), N_(N) {
        if (n != 1 && n != 2)
            throw ConfigError("complex dimension must be 1 or 2, got " + std::to_string(n));
        if (N < 8 || N % 2 != 0)
            throw ConfigError("axis resolution must be even and >= 8, got " + std::to_string(N));
    }

    int n() const { return n_; }
    int N() const { return N_; }
    int axes() const { return 2 * n_; }

    std::size_t point_count() const {
        std::size_t m = 1;
        for (int a = 0; a < axes(); ++a) m *= static_cast<std::size_t>(N_);
        return m;
    }

    double spacing() const { return kPeriod / N_; }

    // Quadrature weight of one grid point for integrals over [0, 2pi)^{2n}.
    double cell_weight() const {
        double w = 1.0;
        for (int a = 0; a < axes(); ++a) w *= spacing();
        return w;
    }

    double coordinate(int index_along_axis) const { return spacing() * index_along_axis; }

    // Integer wavenumber for a transform index along one axis, folded to
    // the symmetric range {-N/2 + 1, ..., N/2}.
    int wavenumber(int transform_index) const {
        return transform_index <= N_ / 2 ? transform_index : transform_index - N_;
    }

    bool is_nyquist(int transform_index) const { return transform_index == N_ / 2; }

    std::size_t flat_index(const std::array<int, 4>& idx) const {
        std::size_t f = 0;
        for (int a = 0; a < axes(); ++a) f = f * N_ + static_cast<std::size_t>(idx[a]);
        return f;
    }

    std::array<int, 4> multi_index(std::size_t flat) const {
        std::array<int, 4> idx{0, 0, 0, 0};
        for (int a = axes() - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(flat % N_);
            flat /= N_;
        }
        return idx;
    }

    bool operator==(const TorusGrid& o) const { return n_ == o.n_ && N_ == o.N_; }
    bool operator!=(const TorusGrid& o) const { return !(*this == o); }

private:
    int n_;
    int N_;
};

// Per-axis wavenumber lookup shared by all spectral operators.
struct FrequencyTable {
    explicit FrequencyTable(const TorusGrid& grid) : N(grid.N()) {
        k.resize(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) k[static_cast<std::size_t>(i)] = grid.wavenumber(i);
    }

    int N;
    std::vector<int> k;
};

} // namespace calabi

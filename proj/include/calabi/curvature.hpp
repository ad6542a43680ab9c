#pragma once

#include "calabi/metric.hpp"

namespace calabi {

// Ricci data of a metric: components R_{i jbar} = -dd-bar log det(h), the
// contracted scalar curvature, and the log density they derive from.
struct CurvatureBundle {
    RealField log_det;   // F = log det(h)
    RealField ric11;     // R_{1 1bar}
    RealField ric22;     // R_{2 2bar} (n = 2)
    ComplexField ric12;  // R_{1 2bar} (n = 2); R_{2 1bar} = conj
    RealField scalar;    // R = h^{i jbar} R_{i jbar}
};

inline CurvatureBundle ricci(const HermitianMetricField& m) {
    if (!m.admissible) throw NonAdmissibleError(m.lambda_min, m.argmin);
    const TorusGrid& g = m.grid;
    CurvatureBundle c;
    c.log_det = log_ratio_F(m);

    const ComplexField coeff = forward_coefficients(c.log_det);
    auto neg_hessian = [&](int i, int j) {
        ComplexField out(g);
        detail::for_each_mode(g, [&](std::size_t flat, const std::array<int, 4>& idx) {
            Complex s;
            if (i == j) {
                const detail::AxisPairFreq p = detail::pair_freq(g, idx, i);
                s = Complex{-0.25 * (static_cast<double>(p.k) * p.k
                                     + static_cast<double>(p.l) * p.l), 0.0};
            } else {
                s = detail::holo_symbol(detail::pair_freq(g, idx, i))
                  * detail::antiholo_symbol(detail::pair_freq(g, idx, j));
            }
            out.v[flat] = -s * coeff.v[flat];
        });
        return inverse_from_coefficients(out);
    };

    c.ric11 = real_part(neg_hessian(0, 0));
    const std::size_t npts = g.point_count();
    c.scalar = RealField(g);
    if (g.n() == 1) {
        for (std::size_t p = 0; p < npts; ++p)
            c.scalar.v[p] = m.inv11.v[p] * c.ric11.v[p];
    } else {
        c.ric22 = real_part(neg_hessian(1, 1));
        c.ric12 = neg_hessian(0, 1);
        for (std::size_t p = 0; p < npts; ++p) {
            c.scalar.v[p] = m.inv11.v[p] * c.ric11.v[p]
                          + m.inv22.v[p] * c.ric22.v[p]
                          + 2.0 * (m.inv12.v[p] * c.ric12.v[p]).real();
        }
    }
    return c;
}

inline RealField scalar_curvature(const HermitianMetricField& m) {
    return ricci(m).scalar;
}

// Volume, total and quadratic scalar curvature integrals against the
// metric measure det(h) dx. The 2^n n! form-to-measure factor is absorbed
// into this convention; consumers that report these values say so.
struct GlobalIntegrals {
    double V = 0.0;       // volume of the metric measure
    double S = 0.0;       // integral of R
    double Rbar = 0.0;    // S / V
    double Ca = 0.0;      // integral of R^2
    double Ca_mod = 0.0;  // integral of (R - Rbar)^2
};

inline GlobalIntegrals global_integrals(const HermitianMetricField& m,
                                        const RealField& scalar) {
    require_same_grid(m.grid, scalar.grid, "global_integrals");
    const double w = m.grid.cell_weight();
    GlobalIntegrals gi;
    gi.V = w * pairwise_sum(std::span<const double>(m.det.v));
    gi.S = w * pairwise_map_sum(scalar.size(), [&](std::size_t p) {
        return scalar.v[p] * m.det.v[p];
    });
    gi.Rbar = gi.S / gi.V;
    gi.Ca = w * pairwise_map_sum(scalar.size(), [&](std::size_t p) {
        return scalar.v[p] * scalar.v[p] * m.det.v[p];
    });
    const double rb = gi.Rbar;
    gi.Ca_mod = w * pairwise_map_sum(scalar.size(), [&](std::size_t p) {
        const double d = scalar.v[p] - rb;
        return d * d * m.det.v[p];
    });
    return gi;
}

inline GlobalIntegrals global_integrals(const HermitianMetricField& m) {
    return global_integrals(m, scalar_curvature(m));
}

} // namespace calabi

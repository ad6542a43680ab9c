#pragma once

#include <cmath>
#include <cstddef>
#include <utility>

#include "calabi/spectral.hpp"

namespace calabi {

// Admissibility floor for the smallest metric eigenvalue.
inline constexpr double kAdmissibilityFloor = 1e-8;

// Perturbed flat metric h = delta + complex Hessian of phi, with pointwise
// caches (inverse, determinant, eigenvalue range) and the generating
// potential kept for operators that need its third derivatives.
//
// Index convention: entry (i, jbar) of the inverse satisfies
// inv^{i jbar} h_{k jbar} = delta_{ik}; for n = 2 the stored off-diagonal is
// inv12 = -conj(h12)/det and the (2, 1bar) entry is its conjugate.
struct HermitianMetricField {
    TorusGrid grid;
    RealField phi;

    RealField h11, h22;   // diagonal entries (real by Hermitian symmetry)
    ComplexField h12;     // n = 2 only; h21 = conj(h12)
    RealField det;
    RealField inv11, inv22;
    ComplexField inv12;
    RealField eig_min, eig_max;

    double lambda_min = 0.0; // global min eigenvalue over the grid
    double lambda_max = 0.0; // global max eigenvalue over the grid
    std::size_t argmin = 0;
    bool admissible = false;

    HermitianMetricField() : grid(1, 8) {}
};

// Assemble the metric of a potential without throwing; the caller inspects
// the admissible flag. Inverse and determinant caches are only valid when
// the field is admissible.
inline HermitianMetricField try_assemble_metric(const RealField& phi) {
    require_finite(phi, "assemble_metric");
    const TorusGrid& g = phi.grid;
    HermitianMetricField m;
    m.grid = g;
    m.phi = phi;

    // One forward transform shared by all Hessian entries.
    const ComplexField coeff = forward_coefficients(phi);
    auto entry = [&](int i, int j) {
        ComplexField c(g);
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
            c.v[flat] = s * coeff.v[flat];
        });
        return inverse_from_coefficients(c);
    };

    const std::size_t npts = g.point_count();
    m.h11 = RealField(g);
    {
        ComplexField e = entry(0, 0);
        for (std::size_t p = 0; p < npts; ++p) m.h11.v[p] = 1.0 + e.v[p].real();
    }

    if (g.n() == 1) {
        m.det = m.h11;
        m.eig_min = m.h11;
        m.eig_max = m.h11;
    } else {
        m.h22 = RealField(g);
        {
            ComplexField e = entry(1, 1);
            for (std::size_t p = 0; p < npts; ++p) m.h22.v[p] = 1.0 + e.v[p].real();
        }
        m.h12 = entry(0, 1);
        m.det = RealField(g);
        m.eig_min = RealField(g);
        m.eig_max = RealField(g);
        for (std::size_t p = 0; p < npts; ++p) {
            const double a = m.h11.v[p];
            const double d = m.h22.v[p];
            const double cross = std::norm(m.h12.v[p]);
            m.det.v[p] = a * d - cross;
            const double tr = a + d;
            const double disc = std::sqrt(std::max(tr * tr - 4.0 * m.det.v[p], 0.0));
            m.eig_min.v[p] = 0.5 * (tr - disc);
            m.eig_max.v[p] = 0.5 * (tr + disc);
        }
    }

    m.lambda_min = m.eig_min.v[0];
    m.lambda_max = m.eig_max.v[0];
    m.argmin = 0;
    for (std::size_t p = 1; p < npts; ++p) {
        if (m.eig_min.v[p] < m.lambda_min) {
            m.lambda_min = m.eig_min.v[p];
            m.argmin = p;
        }
        m.lambda_max = std::max(m.lambda_max, m.eig_max.v[p]);
    }
    m.admissible = m.lambda_min > kAdmissibilityFloor;

    if (m.admissible) {
        if (g.n() == 1) {
            m.inv11 = RealField(g);
            for (std::size_t p = 0; p < npts; ++p) m.inv11.v[p] = 1.0 / m.h11.v[p];
        } else {
            m.inv11 = RealField(g);
            m.inv22 = RealField(g);
            m.inv12 = ComplexField(g);
            for (std::size_t p = 0; p < npts; ++p) {
                const double id = 1.0 / m.det.v[p];
                m.inv11.v[p] = m.h22.v[p] * id;
                m.inv22.v[p] = m.h11.v[p] * id;
                m.inv12.v[p] = -std::conj(m.h12.v[p]) * id;
            }
        }
    }
    return m;
}

inline HermitianMetricField assemble_metric(const RealField& phi) {
    HermitianMetricField m = try_assemble_metric(phi);
    if (!m.admissible) throw NonAdmissibleError(m.lambda_min, m.argmin);
    return m;
}

// Global metric equivalence constants (min and max eigenvalue of h over
// the grid): c1 |xi|^2 <= h(xi, xi) <= c2 |xi|^2 with (c1, c2) as returned.
inline std::pair<double, double> equivalence_constants(const HermitianMetricField& m) {
    return {m.lambda_min, m.lambda_max};
}

// Log volume ratio F = log det(h) relative to the flat background.
inline RealField log_ratio_F(const HermitianMetricField& m) {
    if (!m.admissible)
        throw NonAdmissibleError(m.lambda_min, m.argmin);
    RealField F(m.grid);
    for (std::size_t p = 0; p < F.size(); ++p) F.v[p] = std::log(m.det.v[p]);
    return F;
}

} // namespace calabi

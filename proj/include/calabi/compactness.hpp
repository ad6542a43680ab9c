#pragma once

#include "calabi/curvature.hpp"

namespace calabi {

// Scalar monitors that witness (or fail to witness) compactness of the
// evolving metric family: uniform potential/curvature bounds, metric
// equivalence constants, and the log density window.
struct CompactnessReport {
    double sup_phi = 0.0;
    double sup_ric = 0.0;     // sup of the h-Frobenius norm of the Ricci form
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double sup_F = 0.0;
    double inf_F = 0.0;
    double mean_F = 0.0;
    double sup_lap_phi = 0.0; // flat Laplacian of the potential
    double sup_lap_F = 0.0;   // flat Laplacian of the log density
    double w2p8 = 0.0;        // discrete W^{2,8} proxy of the potential
};

namespace detail {

// |Ric|_h^2 = tr((h^{-1} Ric)^2) pointwise; real and nonnegative since
// h^{-1} Ric is similar to a Hermitian matrix.
inline RealField ricci_norm_field(const HermitianMetricField& m, const CurvatureBundle& c) {
    RealField out(m.grid);
    if (m.grid.n() == 1) {
        for (std::size_t p = 0; p < out.size(); ++p)
            out.v[p] = std::abs(c.ric11.v[p]) * m.inv11.v[p];
        return out;
    }
    for (std::size_t p = 0; p < out.size(); ++p) {
        const Complex i12 = m.inv12.v[p];
        const double i11 = m.inv11.v[p];
        const double i22 = m.inv22.v[p];
        const double r11 = c.ric11.v[p];
        const double r22 = c.ric22.v[p];
        const Complex r12 = c.ric12.v[p];
        const Complex g00 = i11 * r11 + std::conj(i12) * std::conj(r12);
        const Complex g01 = i11 * r12 + std::conj(i12) * r22;
        const Complex g10 = i12 * r11 + i22 * std::conj(r12);
        const Complex g11 = i12 * r12 + i22 * r22;
        const double tr2 = (g00 * g00 + g11 * g11 + 2.0 * g01 * g10).real();
        out.v[p] = std::sqrt(std::max(tr2, 0.0));
    }
    return out;
}

} // namespace detail

inline CompactnessReport compactness_report(const HermitianMetricField& m,
                                            const CurvatureBundle& curv) {
    CompactnessReport r;
    r.sup_phi = sup_abs(m.phi);
    r.sup_ric = sup_abs(detail::ricci_norm_field(m, curv));
    r.lambda_min = m.lambda_min;
    r.lambda_max = m.lambda_max;

    const RealField& F = curv.log_det;
    r.sup_F = F.v.empty() ? 0.0 : F.v[0];
    r.inf_F = r.sup_F;
    for (double x : F.v) {
        r.sup_F = std::max(r.sup_F, x);
        r.inf_F = std::min(r.inf_F, x);
    }
    r.mean_F = mean(F);
    r.sup_lap_phi = sup_abs(laplace_flat(m.phi));
    r.sup_lap_F = sup_abs(laplace_flat(F));

    // W^{2,8} proxy: L8 norm of the pointwise jet magnitude
    // (phi^2 + |grad phi|^2 + |Hessian phi|^2)^{1/2}, all complex derivatives.
    {
        const TorusGrid& g = m.grid;
        const int n = g.n();
        RealField jet(g);
        for (std::size_t p = 0; p < jet.size(); ++p)
            jet.v[p] = m.phi.v[p] * m.phi.v[p];
        for (int j = 0; j < n; ++j) {
            ComplexField d = d_holo(m.phi, j);
            for (std::size_t p = 0; p < jet.size(); ++p) jet.v[p] += 2.0 * std::norm(d.v[p]);
        }
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                const double mult = (i == j) ? 1.0 : 2.0;
                ComplexField hm = hessian_mixed(m.phi, i, j);
                ComplexField hh = hessian_holo(m.phi, i, j);
                for (std::size_t p = 0; p < jet.size(); ++p)
                    jet.v[p] += mult * (2.0 * std::norm(hm.v[p]) + 2.0 * std::norm(hh.v[p]));
            }
        const double w = g.cell_weight();
        const double q = w * pairwise_map_sum(jet.size(), [&](std::size_t p) {
            const double s = jet.v[p];
            return s * s * s * s;
        });
        r.w2p8 = std::pow(q, 0.125);
    }
    return r;
}

inline CompactnessReport compactness_report(const HermitianMetricField& m) {
    return compactness_report(m, ricci(m));
}

// Jensen gap of the log density against the normalized flat measure:
// exp(mean F) <= mean exp(F) = V_phi / V_0. The margin is the right side
// minus the left and is nonnegative up to quadrature roundoff.
struct JensenResult {
    double lhs = 0.0;    // exp(mean F)
    double rhs = 0.0;    // mean of det(h) = V_phi / V_0
    double margin = 0.0; // rhs - lhs
    bool ok = false;
};

inline JensenResult jensen_check(const HermitianMetricField& m, double tol = 1e-10) {
    if (!m.admissible) throw NonAdmissibleError(m.lambda_min, m.argmin);
    JensenResult j;
    RealField F = log_ratio_F(m);
    j.lhs = std::exp(mean(F));
    j.rhs = mean(m.det);
    j.margin = j.rhs - j.lhs;
    j.ok = j.margin >= -tol;
    return j;
}

} // namespace calabi

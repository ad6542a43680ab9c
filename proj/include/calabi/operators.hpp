#pragma once

#include <array>

#include "calabi/curvature.hpp"
#include "calabi/solver.hpp"

namespace calabi {

// ---------------------------------------------------------------------------
// Metric Laplacian and Green solve
// ---------------------------------------------------------------------------

// Pointwise contraction h^{i jbar} d_i d_jbar f.
inline RealField laplace_phi(const HermitianMetricField& m, const RealField& f) {
    require_same_grid(m.grid, f.grid, "laplace_phi");
    require_finite(f, "laplace_phi");
    if (!m.admissible) throw NonAdmissibleError(m.lambda_min, m.argmin);
    const TorusGrid& g = m.grid;
    RealField out(g);
    if (g.n() == 1) {
        RealField H = real_part(hessian_mixed(f, 0, 0));
        for (std::size_t p = 0; p < out.size(); ++p) out.v[p] = m.inv11.v[p] * H.v[p];
    } else {
        RealField H11 = real_part(hessian_mixed(f, 0, 0));
        RealField H22 = real_part(hessian_mixed(f, 1, 1));
        ComplexField H12 = hessian_mixed(f, 0, 1);
        for (std::size_t p = 0; p < out.size(); ++p)
            out.v[p] = m.inv11.v[p] * H11.v[p] + m.inv22.v[p] * H22.v[p]
                     + 2.0 * (m.inv12.v[p] * H12.v[p]).real();
    }
    return out;
}

struct GreenSolution {
    RealField F;
    double residual = 0.0;
    int iterations = 0;
    double source_mean = 0.0; // metric mean of rho that was subtracted
};

namespace detail {

// Adjugate (cofactor) entries adj^{i jbar} = h^{i jbar} det(h). Polynomial
// in the metric entries, so usable without forming the inverse.
struct Adjugate {
    const HermitianMetricField& m;

    // Multiply the complex gradient vector (g1, g2) by the adjugate:
    // out_j = sum_i adj^{i jbar} g_i for fixed jbar.
    void contract(const std::vector<Complex>& g1, const std::vector<Complex>& g2,
                  std::vector<Complex>& out1, std::vector<Complex>& out2) const {
        const std::size_t n = g1.size();
        if (m.grid.n() == 1) {
            for (std::size_t p = 0; p < n; ++p) out1[p] = g1[p];
            return;
        }
        for (std::size_t p = 0; p < n; ++p) {
            const double a11 = m.h11.v[p];
            const double a22 = m.h22.v[p];
            const Complex a12 = m.h12.v[p];
            // adj^{1 1bar} = h22, adj^{2 1bar} = -h12,
            // adj^{1 2bar} = -conj(h12), adj^{2 2bar} = h11.
            out1[p] = a22 * g1[p] - a12 * g2[p];
            out2[p] = -std::conj(a12) * g1[p] + a11 * g2[p];
        }
    }
};

// Weak-form metric Laplacian scaled by the density:
// L f = sum_j d_jbar ( adj^{i jbar} d_i f ), which equals det(h) * laplace_phi
// up to aliasing and is exactly symmetric under the grid pairing.
inline RealField weak_laplace_scaled(const HermitianMetricField& m, const RealField& f) {
    const TorusGrid& g = m.grid;
    const int n = g.n();
    ComplexField coeff = forward_coefficients(f);

    std::array<ComplexField, 2> grad;
    for (int i = 0; i < n; ++i) {
        ComplexField c(g);
        detail::for_each_mode(g, [&](std::size_t flat, const std::array<int, 4>& idx) {
            c.v[flat] = detail::holo_symbol(detail::pair_freq(g, idx, i)) * coeff.v[flat];
        });
        grad[static_cast<std::size_t>(i)] = inverse_from_coefficients(c);
    }

    std::array<ComplexField, 2> flux;
    flux[0] = ComplexField(g);
    if (n == 2) flux[1] = ComplexField(g);
    Adjugate adj{m};
    adj.contract(grad[0].v, n == 2 ? grad[1].v : grad[0].v, flux[0].v,
                 n == 2 ? flux[1].v : flux[0].v);

    ComplexField acc(g);
    for (int j = 0; j < n; ++j) {
        ComplexField fc = forward_coefficients(flux[static_cast<std::size_t>(j)]);
        detail::for_each_mode(g, [&](std::size_t flat, const std::array<int, 4>& idx) {
            acc.v[flat] += detail::antiholo_symbol(detail::pair_freq(g, idx, j)) * fc.v[flat];
        });
    }
    return real_part(inverse_from_coefficients(acc));
}

inline void remove_mean(RealField& f) {
    const double mu = mean(f);
    for (double& x : f.v) x -= mu;
}

// Kernel test for the weak operators built from first-derivative symbols:
// a mode is invisible to them when every axis pair has a vanishing odd
// symbol (the zero mode, and any pair touching its Nyquist index).
inline bool in_derivative_kernel(const TorusGrid& g, const std::array<int, 4>& idx) {
    for (int j = 0; j < g.n(); ++j) {
        const AxisPairFreq f = pair_freq(g, idx, j);
        if (!f.nyquist && (f.k != 0 || f.l != 0)) return false;
    }
    return true;
}

// Project onto the orthogonal complement of that kernel, which is the range
// of the symmetric weak operators. Subsumes mean removal.
inline void project_to_derivative_range(RealField& f) {
    ComplexField coeff = forward_coefficients(f);
    for_each_mode(f.grid, [&](std::size_t flat, const std::array<int, 4>& idx) {
        if (in_derivative_kernel(f.grid, idx)) coeff.v[flat] = Complex{0.0, 0.0};
    });
    f = real_part(inverse_from_coefficients(coeff));
}

// Inverse of the flat Laplacian on mean-zero fields (zero mode dropped).
inline RealField flat_laplace_inverse(const RealField& r) {
    ComplexField coeff = forward_coefficients(r);
    detail::for_each_mode(r.grid, [&](std::size_t flat, const std::array<int, 4>& idx) {
        const double mu = detail::laplace_symbol(r.grid, idx);
        coeff.v[flat] = (mu == 0.0) ? Complex{0.0, 0.0} : coeff.v[flat] / (-mu);
    });
    return real_part(inverse_from_coefficients(coeff));
}

} // namespace detail

inline double metric_mean(const HermitianMetricField& m, const RealField& f) {
    const double w = m.grid.cell_weight();
    const double v = w * pairwise_sum(std::span<const double>(m.det.v));
    const double s = w * pairwise_map_sum(f.size(), [&](std::size_t p) {
        return f.v[p] * m.det.v[p];
    });
    return s / v;
}

// Solve laplace_phi F = rho - mean_mu(rho) for the potential F that is
// mean-zero with respect to the metric measure. Krylov iteration on the
// density-scaled weak form with the flat inverse Laplacian as preconditioner.
inline GreenSolution green_solve(const HermitianMetricField& m, const RealField& rho,
                                 double rel_tol = 1e-9, int max_iter = 500) {
    require_same_grid(m.grid, rho.grid, "green_solve");
    require_finite(rho, "green_solve");
    if (!m.admissible) throw NonAdmissibleError(m.lambda_min, m.argmin);

    GreenSolution sol;
    sol.source_mean = metric_mean(m, rho);

    RealField b(m.grid);
    for (std::size_t p = 0; p < b.size(); ++p)
        b.v[p] = -m.det.v[p] * (rho.v[p] - sol.source_mean);

    auto apply = [&](const RealField& u) {
        RealField out = detail::weak_laplace_scaled(m, u);
        for (double& x : out.v) x = -x; // positive semidefinite orientation
        return out;
    };
    auto precond = [&](const RealField& r) { return detail::flat_laplace_inverse(r); };
    auto project = [&](RealField& r) { detail::project_to_derivative_range(r); };

    IterativeResult res = pcg(apply, precond, project, b, sol.F, rel_tol, max_iter,
                              "green_solve");
    sol.iterations = res.iterations;
    sol.residual = res.residual * std::sqrt(m.grid.cell_weight());

    // Normalize the additive constant: mean of F against the metric measure.
    const double shift = metric_mean(m, sol.F);
    for (double& x : sol.F.v) x -= shift;
    return sol;
}

// ---------------------------------------------------------------------------
// Lichnerowicz operator
//
// D f = contraction of the second antiholomorphic divergence of the
// covariant Hessian f_{,ab} = d_a d_b f - Gamma^c_{ab} d_c f. The outer
// divergence is discretized in weak form (flux assembled pointwise, then
// differentiated spectrally), which makes the grid pairing
//   sum (D f) g det(h) w  =  sum f_{,ab} conj(g_{,cd}) h^{a cbar} h^{b dbar} det(h) w
// hold exactly; self-adjointness and nonnegativity follow by construction.
// ---------------------------------------------------------------------------

class LichnerowiczOperator {
public:
    explicit LichnerowiczOperator(const HermitianMetricField& m) : m_(m) {
        if (!m.admissible) throw NonAdmissibleError(m.lambda_min, m.argmin);
        const TorusGrid& g = m.grid;
        const int n = g.n();
        // Christoffel symbols Gamma^c_{ab} = h^{c dbar} d_a d_b d_dbar phi,
        // symmetric in (a, b); fixed by the metric, cached once.
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b) {
                std::array<ComplexField, 2> third;
                for (int d = 0; d < n; ++d)
                    third[static_cast<std::size_t>(d)] = third_derivative(m.phi, a, b, d);
                for (int c = 0; c < n; ++c) {
                    ComplexField gam(g);
                    for (std::size_t p = 0; p < gam.size(); ++p) {
                        Complex s{0.0, 0.0};
                        for (int d = 0; d < n; ++d)
                            s += inv(c, d, p) * third[static_cast<std::size_t>(d)].v[p];
                        gam.v[p] = s;
                    }
                    gamma_[sym_index(a, b)][static_cast<std::size_t>(c)] = std::move(gam);
                }
            }
    }

    const HermitianMetricField& metric() const { return m_; }

    // Covariant Hessian entries C_{ab} for a <= b.
    std::array<ComplexField, 3> covariant_hessian(const RealField& f) const {
        const TorusGrid& g = m_.grid;
        const int n = g.n();
        ComplexField coeff = forward_coefficients(f);

        std::array<ComplexField, 2> grad;
        for (int i = 0; i < n; ++i) {
            ComplexField c(g);
            detail::for_each_mode(g, [&](std::size_t flat, const std::array<int, 4>& idx) {
                c.v[flat] = detail::holo_symbol(detail::pair_freq(g, idx, i)) * coeff.v[flat];
            });
            grad[static_cast<std::size_t>(i)] = inverse_from_coefficients(c);
        }

        std::array<ComplexField, 3> C;
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b) {
                ComplexField c(g);
                detail::for_each_mode(g, [&](std::size_t flat, const std::array<int, 4>& idx) {
                    c.v[flat] = detail::holo_symbol(detail::pair_freq(g, idx, a))
                              * detail::holo_symbol(detail::pair_freq(g, idx, b))
                              * coeff.v[flat];
                });
                ComplexField H = inverse_from_coefficients(c);
                const auto& gam = gamma_[sym_index(a, b)];
                for (std::size_t p = 0; p < H.size(); ++p) {
                    Complex s = H.v[p];
                    for (int cidx = 0; cidx < n; ++cidx)
                        s -= gam[static_cast<std::size_t>(cidx)].v[p]
                           * grad[static_cast<std::size_t>(cidx)].v[p];
                    H.v[p] = s;
                }
                C[sym_index(a, b)] = std::move(H);
            }
        return C;
    }

    // Density-scaled application det(h) * D f; symmetric under the plain
    // grid pairing, kernel containing the constants.
    RealField apply_scaled(const RealField& f) const {
        const TorusGrid& g = m_.grid;
        const int n = g.n();
        std::array<ComplexField, 3> C = covariant_hessian(f);
        std::array<ComplexField, 3> M = raise_and_scale(C);

        ComplexField acc(g);
        for (int c = 0; c < n; ++c)
            for (int d = c; d < n; ++d) {
                ComplexField fc = forward_coefficients(M[sym_index(c, d)]);
                const double mult = (c == d) ? 1.0 : 2.0;
                detail::for_each_mode(g, [&](std::size_t flat, const std::array<int, 4>& idx) {
                    acc.v[flat] += mult
                        * detail::antiholo_symbol(detail::pair_freq(g, idx, c))
                        * detail::antiholo_symbol(detail::pair_freq(g, idx, d))
                        * fc.v[flat];
                });
            }

        for (int e = 0; e < n; ++e) {
            ComplexField P(g);
            for (std::size_t p = 0; p < P.size(); ++p) {
                Complex s{0.0, 0.0};
                for (int c = 0; c < n; ++c)
                    for (int d = c; d < n; ++d) {
                        const double mult = (c == d) ? 1.0 : 2.0;
                        s += mult * M[sym_index(c, d)].v[p]
                           * std::conj(gamma_[sym_index(c, d)][static_cast<std::size_t>(e)].v[p]);
                    }
                P.v[p] = s;
            }
            ComplexField fc = forward_coefficients(P);
            detail::for_each_mode(g, [&](std::size_t flat, const std::array<int, 4>& idx) {
                acc.v[flat] += detail::antiholo_symbol(detail::pair_freq(g, idx, e)) * fc.v[flat];
            });
        }
        return real_part(inverse_from_coefficients(acc));
    }

    RealField apply(const RealField& f) const {
        RealField out = apply_scaled(f);
        for (std::size_t p = 0; p < out.size(); ++p) out.v[p] /= m_.det.v[p];
        return out;
    }

    // Quadratic dissipation form: integral of |covariant Hessian|^2 with
    // indices raised by the metric, against the metric measure. Nonnegative
    // by construction.
    double quadratic_form(const RealField& f) const {
        std::array<ComplexField, 3> C = covariant_hessian(f);
        std::array<ComplexField, 3> M = raise_and_scale(C);
        const int n = m_.grid.n();
        const double w = m_.grid.cell_weight();
        return w * pairwise_map_sum(m_.det.size(), [&](std::size_t p) {
            double s = 0.0;
            for (int c = 0; c < n; ++c)
                for (int d = c; d < n; ++d) {
                    const double mult = (c == d) ? 1.0 : 2.0;
                    s += mult * (M[sym_index(c, d)].v[p]
                                 * std::conj(C[sym_index(c, d)].v[p])).real();
                }
            return s;
        });
    }

private:
    static std::size_t sym_index(int a, int b) {
        // (0,0) -> 0, (0,1) -> 1, (1,1) -> 2
        return static_cast<std::size_t>(a + b);
    }

    Complex inv(int i, int j, std::size_t p) const {
        if (m_.grid.n() == 1) return Complex{m_.inv11.v[p], 0.0};
        if (i == 0 && j == 0) return Complex{m_.inv11.v[p], 0.0};
        if (i == 1 && j == 1) return Complex{m_.inv22.v[p], 0.0};
        if (i == 0 && j == 1) return m_.inv12.v[p];
        return std::conj(m_.inv12.v[p]);
    }

    // M^{cd} = det(h) * sum_{ab} C_{ab} h^{a cbar} h^{b dbar}.
    std::array<ComplexField, 3> raise_and_scale(const std::array<ComplexField, 3>& C) const {
        const TorusGrid& g = m_.grid;
        const int n = g.n();
        std::array<ComplexField, 3> M;
        for (int c = 0; c < n; ++c)
            for (int d = c; d < n; ++d) {
                ComplexField out(g);
                for (std::size_t p = 0; p < out.size(); ++p) {
                    Complex s{0.0, 0.0};
                    for (int a = 0; a < n; ++a)
                        for (int b = 0; b < n; ++b) {
                            const Complex cab = (a <= b)
                                ? C[sym_index(a, b)].v[p]
                                : C[sym_index(b, a)].v[p];
                            s += cab * inv(a, c, p) * inv(b, d, p);
                        }
                    out.v[p] = s * m_.det.v[p];
                }
                M[sym_index(c, d)] = std::move(out);
            }
        return M;
    }

    HermitianMetricField m_;
    std::array<std::array<ComplexField, 2>, 3> gamma_;
};

inline RealField lichnerowicz_apply(const HermitianMetricField& m, const RealField& f) {
    require_same_grid(m.grid, f.grid, "lichnerowicz_apply");
    require_finite(f, "lichnerowicz_apply");
    return LichnerowiczOperator(m).apply(f);
}

inline double dissipation(const HermitianMetricField& m, const RealField& f) {
    require_same_grid(m.grid, f.grid, "dissipation");
    require_finite(f, "dissipation");
    return LichnerowiczOperator(m).quadratic_form(f);
}

// ---------------------------------------------------------------------------
// Futaki character and lowest Lichnerowicz eigenvalue
// ---------------------------------------------------------------------------

// Futaki pairing of the coordinate field d/dz_j against the metric:
// -integral of (d_j F) with F the Green potential of the scalar curvature.
inline Complex futaki(const HermitianMetricField& m, const GreenSolution& green, int j) {
    ComplexField dF = d_holo(green.F, j);
    const double w = m.grid.cell_weight();
    const double re = w * pairwise_map_sum(dF.size(), [&](std::size_t p) {
        return dF.v[p].real() * m.det.v[p];
    });
    const double im = w * pairwise_map_sum(dF.size(), [&](std::size_t p) {
        return dF.v[p].imag() * m.det.v[p];
    });
    return Complex{-re, -im};
}

inline Complex futaki(const HermitianMetricField& m, int j) {
    GreenSolution green = green_solve(m, scalar_curvature(m));
    return futaki(m, green, j);
}

struct EigenReport {
    double lambda = 0.0;
    RealField eigenfield;
    double rayleigh_residual = 0.0; // |D u - lambda u| / |u| in the metric L2 norm
    int iterations = 0;
};

// Smallest eigenvalue of D on fields with zero metric mean, by inverse
// iteration; each inverse application solves the density-scaled weak form
// with CG preconditioned by the flat (Id + laplace^2)^{-1}.
inline EigenReport lowest_eigenvalue(const HermitianMetricField& m,
                                     double tol = 1e-6, int max_outer = 100) {
    if (!m.admissible) throw NonAdmissibleError(m.lambda_min, m.argmin);
    const TorusGrid& g = m.grid;
    LichnerowiczOperator D(m);
    const double w = g.cell_weight();

    auto mu_norm = [&](const RealField& f) {
        return std::sqrt(w * pairwise_map_sum(f.size(), [&](std::size_t p) {
            return f.v[p] * f.v[p] * m.det.v[p];
        }));
    };
    auto project_mu = [&](RealField& f) {
        const double mmu = metric_mean(m, f);
        for (double& x : f.v) x -= mmu;
    };

    // Deterministic start: the lowest nonzero real modes on every axis.
    RealField u(g);
    {
        const int N = g.N();
        for (std::size_t p = 0; p < u.size(); ++p) {
            const std::array<int, 4> idx = g.multi_index(p);
            double s = 0.0;
            for (int a = 0; a < g.axes(); ++a) {
                const double x = kPeriod * idx[static_cast<std::size_t>(a)] / N;
                s += std::cos(x) + 0.5 * std::sin(x);
            }
            u.v[p] = s;
        }
        project_mu(u);
        const double nn = mu_norm(u);
        for (double& x : u.v) x /= nn;
    }

    auto apply = [&](const RealField& f) { return D.apply_scaled(f); };
    auto precond = [&](const RealField& r) {
        ComplexField coeff = forward_coefficients(r);
        detail::for_each_mode(g, [&](std::size_t flat, const std::array<int, 4>& idx) {
            const double mu = detail::laplace_symbol(g, idx);
            coeff.v[flat] /= 1.0 + mu * mu;
        });
        return real_part(inverse_from_coefficients(coeff));
    };
    auto project = [&](RealField& r) { detail::project_to_derivative_range(r); };

    double lambda = 0.0;
    for (int outer = 1; outer <= max_outer; ++outer) {
        RealField b(g);
        for (std::size_t p = 0; p < b.size(); ++p) b.v[p] = m.det.v[p] * u.v[p];
        RealField next;
        pcg(apply, precond, project, b, next, 1e-10, 5000, "lowest_eigenvalue inner solve");
        project_mu(next);
        const double nn = mu_norm(next);
        if (!(nn > 0.0))
            throw NoConvergenceError("lowest_eigenvalue", outer, 0.0);
        for (double& x : next.v) x /= nn;
        u = std::move(next);

        lambda = D.quadratic_form(u); // Rayleigh quotient; u has unit metric norm
        RealField Du = D.apply(u);
        RealField res(g);
        for (std::size_t p = 0; p < res.size(); ++p) res.v[p] = Du.v[p] - lambda * u.v[p];
        const double rnorm = mu_norm(res);
        if (rnorm <= tol) {
            EigenReport rep;
            rep.lambda = lambda;
            rep.eigenfield = std::move(u);
            rep.rayleigh_residual = rnorm;
            rep.iterations = outer;
            return rep;
        }
    }
    throw NoConvergenceError("lowest_eigenvalue", max_outer, lambda);
}

} // namespace calabi

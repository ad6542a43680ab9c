#pragma once

#include <functional>

#include "calabi/reduce.hpp"

namespace calabi {

struct IterativeResult {
    int iterations = 0;
    double residual = 0.0; // absolute L2 norm of the final residual
};

namespace detail {

inline double dot(const RealField& a, const RealField& b) {
    return pairwise_map_sum(a.size(), [&](std::size_t i) { return a.v[i] * b.v[i]; });
}

} // namespace detail

// Preconditioned conjugate gradients for a symmetric positive (semi)definite
// operator. `project` removes the known kernel component from residuals; the
// preconditioner must preserve the projected subspace. Convergence is
// declared on the Euclidean residual relative to the right-hand side.
template <class Apply, class Precond, class Project>
inline IterativeResult pcg(Apply&& apply, Precond&& precond, Project&& project,
                           const RealField& b, RealField& x,
                           double rel_tol, int max_iter, const char* label) {
    const double bnorm = std::sqrt(detail::dot(b, b));
    x = RealField(b.grid, 0.0);
    if (bnorm == 0.0) return {0, 0.0};

    RealField r = b;
    project(r);
    RealField z = precond(r);
    project(z);
    RealField p = z;
    double rz = detail::dot(r, z);
    double rnorm = std::sqrt(detail::dot(r, r));
    const double target = rel_tol * bnorm;

    for (int it = 0; it < max_iter; ++it) {
        if (rnorm <= target) return {it, rnorm};
        RealField q = apply(p);
        const double pq = detail::dot(p, q);
        if (!(pq > 0.0))
            throw IndefiniteFormError(std::string(label)
                                      + ": curvature " + std::to_string(pq)
                                      + " not positive in CG");
        const double alpha = rz / pq;
        for (std::size_t i = 0; i < x.size(); ++i) {
            x.v[i] += alpha * p.v[i];
            r.v[i] -= alpha * q.v[i];
        }
        project(r);
        rnorm = std::sqrt(detail::dot(r, r));
        if (rnorm <= target) return {it + 1, rnorm};
        z = precond(r);
        project(z);
        const double rz_new = detail::dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < p.size(); ++i) p.v[i] = z.v[i] + beta * p.v[i];
    }
    throw NoConvergenceError(label, max_iter, rnorm);
}

} // namespace calabi

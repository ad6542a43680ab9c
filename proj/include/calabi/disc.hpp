#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "calabi/errors.hpp"
#include "calabi/field.hpp"
#include "calabi/reduce.hpp"

namespace calabi {

// Masked Cartesian grid on [-1,1]^2 covering the open unit disc, n = 1
// complex variable. Nodes x_i = -1 + i*h with h = 2/(N_d - 1), N_d odd so
// a node sits exactly at the origin. Dirichlet data lives on the band of
// inside nodes that touch the exterior; the optional puncture removes the
// center node and its four incident edges.
class DiscGrid {
public:
    enum class Node : unsigned char { Outside, Band, Interior, Puncture };

    DiscGrid(int node_count, bool punctured = false)
        : Nd_(node_count), punctured_(punctured) {
        if (Nd_ < 5 || Nd_ % 2 == 0)
            throw ConfigError("disc grid needs an odd node count of at least 5");
        h_ = 2.0 / (Nd_ - 1);
        kind_.assign(size(), Node::Outside);
        auto inside0 = [&](int i, int j) {
            const double xi = x(i), yj = x(j);
            return xi * xi + yj * yj < 1.0 - 1e-12;
        };
        for (int j = 0; j < Nd_; ++j)
            for (int i = 0; i < Nd_; ++i) {
                if (!inside0(i, j)) continue;
                const bool rim = !inside0(i - 1, j) || !inside0(i + 1, j) ||
                                 !inside0(i, j - 1) || !inside0(i, j + 1);
                kind_[at(i, j)] = rim ? Node::Band : Node::Interior;
            }
        const int c = (Nd_ - 1) / 2;
        center_ = at(c, c);
        if (punctured_) {
            if (kind_[center_] != Node::Interior)
                throw ConfigError("disc grid too coarse to puncture");
            kind_[center_] = Node::Puncture;
        }
        unknown_.assign(size(), -1);
        unknown_count_ = 0;
        for (std::size_t p = 0; p < size(); ++p)
            if (kind_[p] == Node::Interior) unknown_[p] = unknown_count_++;
    }

    int Nd() const { return Nd_; }
    bool punctured() const { return punctured_; }
    double h() const { return h_; }
    std::size_t size() const { return static_cast<std::size_t>(Nd_) * Nd_; }
    std::size_t at(int i, int j) const { return static_cast<std::size_t>(j) * Nd_ + i; }
    double x(int i) const { return -1.0 + h_ * i; }
    double radius(std::size_t p) const {
        const int i = static_cast<int>(p) % Nd_, j = static_cast<int>(p) / Nd_;
        return std::hypot(x(i), x(j));
    }
    Node kind(std::size_t p) const { return kind_[p]; }
    Node kind(int i, int j) const { return kind_[at(i, j)]; }
    bool inside(std::size_t p) const {
        return kind_[p] == Node::Band || kind_[p] == Node::Interior;
    }
    std::size_t center() const { return center_; }
    int unknown_count() const { return unknown_count_; }
    int unknown_index(std::size_t p) const { return unknown_[p]; }

    // every interior node keeps its neighbors inside (or at the puncture)
    bool neighbors_consistent() const {
        for (int j = 1; j + 1 < Nd_; ++j)
            for (int i = 1; i + 1 < Nd_; ++i) {
                if (kind(i, j) != Node::Interior) continue;
                const std::size_t nb[4] = {at(i - 1, j), at(i + 1, j), at(i, j - 1),
                                           at(i, j + 1)};
                for (std::size_t q : nb)
                    if (kind_[q] == Node::Outside) return false;
            }
        return true;
    }

private:
    int Nd_;
    bool punctured_;
    double h_ = 0.0;
    std::vector<Node> kind_;
    std::vector<int> unknown_;
    int unknown_count_ = 0;
    std::size_t center_ = 0;
};

// Dirichlet problem data on the disc. For one complex variable the inverse
// coefficient times the density is identically one, so the quadratic form
// reduces to the plain Dirichlet integral and only the linear term sees the
// density det_a. The optional extra source joins Rbar * det_a as a nodal
// density (used by manufactured-solution tests).
struct DiscProblem {
    DiscGrid grid;
    std::vector<double> det_a;       // coefficient density, read on inside nodes
    double Rbar = 0.0;
    std::vector<double> boundary;    // Dirichlet values, read on band nodes
    std::vector<double> extra_source; // optional, full array when present

    double source_density(std::size_t p) const {
        double s = Rbar * det_a[p];
        if (!extra_source.empty()) s += extra_source[p];
        return s;
    }
};

struct EllipticityWitness {
    double lambda_e = 0.0;
    double Lambda_e = 0.0;
};

inline EllipticityWitness check_ellipticity(const DiscProblem& p) {
    EllipticityWitness w;
    bool first = true;
    std::size_t argmin = 0;
    for (std::size_t q = 0; q < p.grid.size(); ++q) {
        if (!p.grid.inside(q)) continue;
        const double a = p.det_a[q];
        if (first || a < w.lambda_e) { w.lambda_e = a; argmin = q; }
        w.Lambda_e = first ? a : std::max(w.Lambda_e, a);
        first = false;
    }
    if (first || !(w.lambda_e > 0.0)) throw EllipticityLostError(w.lambda_e, argmin);
    return w;
}

namespace detail {

// sum of 1/4 (u_a - u_b)^2 over inside-inside edges not touching the
// puncture, each edge counted once
template <class Value>
inline double disc_edge_energy(const DiscGrid& g, Value&& u) {
    std::vector<double> terms;
    const int N = g.Nd();
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
            const std::size_t p = g.at(i, j);
            if (!g.inside(p)) continue;
            const double up = u(p);
            if (i + 1 < N && g.inside(g.at(i + 1, j))) {
                const double d = up - u(g.at(i + 1, j));
                terms.push_back(0.25 * d * d);
            }
            if (j + 1 < N && g.inside(g.at(i, j + 1))) {
                const double d = up - u(g.at(i, j + 1));
                terms.push_back(0.25 * d * d);
            }
        }
    return pairwise_sum(terms);
}

} // namespace detail

// Discrete value of I(u): edge-based Dirichlet quadratic term plus the
// nodal quadrature of the source density against u over the inside nodes.
inline double dirichlet_energy(const DiscProblem& p, const std::vector<double>& u) {
    if (u.size() != p.grid.size() || p.det_a.size() != p.grid.size())
        throw ConfigError("disc field size mismatch");
    check_ellipticity(p);
    const double quad = detail::disc_edge_energy(p.grid, [&](std::size_t q) { return u[q]; });
    const double h2 = p.grid.h() * p.grid.h();
    std::vector<double> lin;
    for (std::size_t q = 0; q < p.grid.size(); ++q)
        if (p.grid.inside(q)) lin.push_back(p.source_density(q) * u[q]);
    return quad + h2 * pairwise_sum(lin);
}

struct WeakSolution {
    std::vector<double> u0;      // full array: band = data, interior = solution
    double energy = 0.0;
    double residual = 0.0;       // |A u0 - b|, absolute
    double residual_rel = 0.0;
    int iterations = 0;
    EllipticityWitness witness;
};

// Minimizes I over the interior values with the band pinned to the Dirichlet
// data. The stationarity condition is the 5-point form
//   (1/2) (deg(p) u_p - sum_nb u_nb) + h^2 * source(p) = 0,
// a symmetric positive definite system solved by conjugate gradients.
inline WeakSolution minimize_dirichlet(const DiscProblem& p, double rel_tol = 1e-10,
                                       int max_iter = 50000) {
    if (p.det_a.size() != p.grid.size() || p.boundary.size() != p.grid.size())
        throw ConfigError("disc field size mismatch");
    if (!p.extra_source.empty() && p.extra_source.size() != p.grid.size())
        throw ConfigError("disc field size mismatch");
    WeakSolution sol;
    sol.witness = check_ellipticity(p);

    const DiscGrid& g = p.grid;
    const int N = g.Nd();
    const int m = g.unknown_count();
    using K = DiscGrid::Node;

    // per-unknown stencil: neighbor unknown indices (interior) and the
    // constant contribution of band neighbors
    std::vector<std::array<int, 4>> nbr(m, {-1, -1, -1, -1});
    std::vector<double> diag(m, 0.0), b(m, 0.0);
    const double h2 = g.h() * g.h();
    for (int j = 1; j + 1 < N; ++j)
        for (int i = 1; i + 1 < N; ++i) {
            const std::size_t q = g.at(i, j);
            if (g.kind(q) != K::Interior) continue;
            const int k = g.unknown_index(q);
            const std::size_t nb[4] = {g.at(i - 1, j), g.at(i + 1, j), g.at(i, j - 1),
                                       g.at(i, j + 1)};
            double deg = 0.0, bk = 0.0;
            for (int e = 0; e < 4; ++e) {
                const K kk = g.kind(nb[e]);
                if (kk == K::Puncture) continue;
                deg += 1.0;
                if (kk == K::Interior)
                    nbr[k][e] = g.unknown_index(nb[e]);
                else
                    bk += 0.5 * p.boundary[nb[e]];
            }
            diag[k] = 0.5 * deg;
            b[k] = bk - h2 * p.source_density(q);
        }

    auto apply = [&](const std::vector<double>& u, std::vector<double>& out) {
        for (int k = 0; k < m; ++k) {
            double s = diag[k] * u[k];
            for (int e = 0; e < 4; ++e)
                if (nbr[k][e] >= 0) s -= 0.5 * u[nbr[k][e]];
            out[k] = s;
        }
    };
    auto dot = [&](const std::vector<double>& a, const std::vector<double>& c) {
        return pairwise_map_sum(a.size(), [&](std::size_t i) { return a[i] * c[i]; });
    };

    std::vector<double> u(m, 0.0), r = b, z(m), q(m);
    const double bnorm = std::sqrt(dot(b, b));
    double rnorm = bnorm;
    int it = 0;
    if (bnorm > 0.0) {
        std::vector<double> d = r;
        double rr = dot(r, r);
        for (;;) {
            if (std::sqrt(rr) <= rel_tol * bnorm) break;
            if (it >= max_iter)
                throw NoConvergenceError("minimize_dirichlet", it, std::sqrt(rr) / bnorm);
            apply(d, q);
            const double dq = dot(d, q);
            if (!(dq > 0.0))
                throw IndefiniteFormError("disc Dirichlet form is not positive definite");
            const double alpha = rr / dq;
            for (int k = 0; k < m; ++k) {
                u[k] += alpha * d[k];
                r[k] -= alpha * q[k];
            }
            const double rr_new = dot(r, r);
            const double beta = rr_new / rr;
            rr = rr_new;
            for (int k = 0; k < m; ++k) d[k] = r[k] + beta * d[k];
            ++it;
        }
        rnorm = std::sqrt(rr);
    } else {
        rnorm = 0.0;
    }
    sol.iterations = it;
    sol.residual = rnorm;
    sol.residual_rel = bnorm > 0.0 ? rnorm / bnorm : 0.0;

    sol.u0.assign(g.size(), 0.0);
    for (std::size_t pq = 0; pq < g.size(); ++pq) {
        if (g.kind(pq) == K::Band) sol.u0[pq] = p.boundary[pq];
        else if (g.kind(pq) == K::Interior) sol.u0[pq] = u[g.unknown_index(pq)];
    }
    sol.energy = dirichlet_energy(p, sol.u0);
    return sol;
}

namespace detail {

// flat Laplacian of phi at an inside node; the axis stepping through the
// puncture switches to the one-sided second difference (2,-5,4,-1)/h^2
// pointing away from it
inline double disc_laplacian(const DiscGrid& g, const std::vector<double>& phi, int i, int j) {
    const int N = g.Nd();
    const double h2 = g.h() * g.h();
    using K = DiscGrid::Node;
    auto axis = [&](int di, int dj) {
        const std::size_t prev = g.at(i - di, j - dj), next = g.at(i + di, j + dj);
        if (g.kind(prev) == K::Puncture)
            return (2.0 * phi[g.at(i, j)] - 5.0 * phi[next] + 4.0 * phi[g.at(i + 2 * di, j + 2 * dj)] -
                    phi[g.at(i + 3 * di, j + 3 * dj)]) / h2;
        if (g.kind(next) == K::Puncture)
            return (2.0 * phi[g.at(i, j)] - 5.0 * phi[prev] + 4.0 * phi[g.at(i - 2 * di, j - 2 * dj)] -
                    phi[g.at(i - 3 * di, j - 3 * dj)]) / h2;
        return (phi[prev] + phi[next] - 2.0 * phi[g.at(i, j)]) / h2;
    };
    (void)N;
    return axis(1, 0) + axis(0, 1);
}

} // namespace detail

struct DesingResult {
    std::vector<double> det_a; // reconstructed coefficient density
    WeakSolution solution;
    std::vector<double> v;     // log det_a - u0 on inside nodes, 0 elsewhere
    double sup_v = 0.0;        // over inside nodes with |z| > 2h
    double threshold = 0.0;    // 10 * (solver tolerance + h)
    EllipticityWitness witness;
};

// Reconstructs the coefficient density a = 1 + (1/4) lap(phi) from a
// potential sampled on the full [-1,1]^2 node array, solves the Dirichlet
// problem with data log a on the band, and measures v = log a - u0. A
// vanishing v extends the metric across the puncture.
inline DesingResult desingularize(const DiscGrid& g, const std::vector<double>& phi,
                                  double Rbar, double rel_tol = 1e-10) {
    if (phi.size() != g.size()) throw ConfigError("disc field size mismatch");
    const int N = g.Nd();
    DiscProblem prob{g};
    prob.Rbar = Rbar;
    prob.det_a.assign(g.size(), 1.0);
    prob.boundary.assign(g.size(), 0.0);
    using K = DiscGrid::Node;
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
            const std::size_t p = g.at(i, j);
            if (!g.inside(p)) continue;
            const double a = 1.0 + 0.25 * detail::disc_laplacian(g, phi, i, j);
            if (!(a > 1e-10)) throw EllipticityLostError(a, p);
            prob.det_a[p] = a;
            if (g.kind(p) == K::Band) prob.boundary[p] = std::log(a);
        }

    DesingResult res;
    res.witness = check_ellipticity(prob);
    res.solution = minimize_dirichlet(prob, rel_tol);
    res.det_a = prob.det_a;
    res.v.assign(g.size(), 0.0);
    const double guard = 2.0 * g.h() + 1e-12;
    for (std::size_t p = 0; p < g.size(); ++p) {
        if (!g.inside(p)) continue;
        res.v[p] = std::log(prob.det_a[p]) - res.solution.u0[p];
        if (g.radius(p) > guard) res.sup_v = std::max(res.sup_v, std::abs(res.v[p]));
    }
    res.threshold = 10.0 * (rel_tol + g.h());
    return res;
}

// Maximum-principle bracket |z|^2 sum_i a^{ii} + ((q-2)/2) a^{ij} zbar_i z_j
// (real part) for an inverse coefficient matrix at one point; q < 0.
inline double barrier_bracket_value(int n, const std::array<Complex, 2>& z,
                                    const std::array<std::array<Complex, 2>, 2>& a_inv,
                                    double q) {
    if (q >= 0.0) throw ConfigError("barrier bracket needs q < 0");
    if (n != 1 && n != 2) throw ConfigError("barrier bracket: n must be 1 or 2");
    double z2 = 0.0;
    Complex trace = 0.0, quad = 0.0;
    for (int i = 0; i < n; ++i) {
        z2 += std::norm(z[i]);
        trace += a_inv[i][i];
        for (int j = 0; j < n; ++j) quad += a_inv[i][j] * std::conj(z[i]) * z[j];
    }
    return z2 * trace.real() + 0.5 * (q - 2.0) * quad.real();
}

struct BarrierResult {
    std::vector<double> value; // bracket per node, 0 where not evaluated
    double min_value = 0.0;    // over inside nodes with |z| > h
};

// Grid evaluation for one complex variable, where the inverse coefficient
// is the scalar 1/det_a.
inline BarrierResult barrier_bracket(const DiscGrid& g, const std::vector<double>& det_a,
                                     double q) {
    if (q >= 0.0) throw ConfigError("barrier bracket needs q < 0");
    if (det_a.size() != g.size()) throw ConfigError("disc field size mismatch");
    BarrierResult r;
    r.value.assign(g.size(), 0.0);
    bool first = true;
    const int N = g.Nd();
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
            const std::size_t p = g.at(i, j);
            if (!g.inside(p) || g.radius(p) <= g.h()) continue;
            if (!(det_a[p] > 0.0)) throw EllipticityLostError(det_a[p], p);
            std::array<Complex, 2> z{Complex{g.x(i), g.x(j)}, Complex{0.0, 0.0}};
            std::array<std::array<Complex, 2>, 2> ai{};
            ai[0][0] = 1.0 / det_a[p];
            r.value[p] = barrier_bracket_value(1, z, ai, q);
            if (first || r.value[p] < r.min_value) r.min_value = r.value[p];
            first = false;
        }
    return r;
}

} // namespace calabi

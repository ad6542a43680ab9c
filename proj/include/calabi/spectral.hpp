#pragma once

#include <fftw3.h>

#include <array>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "calabi/field.hpp"
#include "calabi/reduce.hpp"

namespace calabi {

// ---------------------------------------------------------------------------
// Transform engine
//
// Complex-to-complex FFTW plans of rank 2n, cached per grid shape. Plans are
// created once under a lock with FFTW_ESTIMATE (deterministic plan choice)
// and FFTW_UNALIGNED (so they may execute on any caller buffer); execution
// itself is thread-safe. Forward coefficients are normalized by 1/M so the
// sample at x is exactly sum_k c_k exp(i k . x).
// ---------------------------------------------------------------------------

namespace detail {

class FftEngine {
public:
    explicit FftEngine(const TorusGrid& grid) {
        const int rank = grid.axes();
        std::array<int, 4> dims{};
        for (int a = 0; a < rank; ++a) dims[static_cast<std::size_t>(a)] = grid.N();
        const std::size_t m = grid.point_count();
        std::vector<Complex> a(m), b(m);
        fwd_ = fftw_plan_dft(rank, dims.data(),
                             reinterpret_cast<fftw_complex*>(a.data()),
                             reinterpret_cast<fftw_complex*>(b.data()),
                             FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        bwd_ = fftw_plan_dft(rank, dims.data(),
                             reinterpret_cast<fftw_complex*>(a.data()),
                             reinterpret_cast<fftw_complex*>(b.data()),
                             FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    }

    ~FftEngine() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }

    FftEngine(const FftEngine&) = delete;
    FftEngine& operator=(const FftEngine&) = delete;

    void forward(const Complex* in, Complex* out) const {
        fftw_execute_dft(fwd_,
                         reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                         reinterpret_cast<fftw_complex*>(out));
    }

    void backward(const Complex* in, Complex* out) const {
        fftw_execute_dft(bwd_,
                         reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                         reinterpret_cast<fftw_complex*>(out));
    }

private:
    fftw_plan fwd_;
    fftw_plan bwd_;
};

inline const FftEngine& engine_for(const TorusGrid& grid) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<FftEngine>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(grid.n(), grid.N());
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, std::make_unique<FftEngine>(grid)).first;
    return *it->second;
}

// Visit every mode of the coefficient array: fn(flat, idx) where idx holds
// the per-axis transform indices in axis order.
template <class F>
inline void for_each_mode(const TorusGrid& grid, F&& fn) {
    const int rank = grid.axes();
    const int N = grid.N();
    std::array<int, 4> idx{0, 0, 0, 0};
    const std::size_t m = grid.point_count();
    for (std::size_t flat = 0; flat < m; ++flat) {
        fn(flat, idx);
        for (int a = rank - 1; a >= 0; --a) {
            if (++idx[static_cast<std::size_t>(a)] < N) break;
            idx[static_cast<std::size_t>(a)] = 0;
        }
    }
}

} // namespace detail

// Normalized Fourier coefficients of a field.
inline ComplexField forward_coefficients(const ComplexField& f) {
    ComplexField out(f.grid);
    detail::engine_for(f.grid).forward(f.v.data(), out.v.data());
    const double inv = 1.0 / static_cast<double>(f.size());
    for (Complex& c : out.v) c *= inv;
    return out;
}

inline ComplexField forward_coefficients(const RealField& f) {
    return forward_coefficients(to_complex(f));
}

inline ComplexField inverse_from_coefficients(const ComplexField& coeff) {
    ComplexField out(coeff.grid);
    detail::engine_for(coeff.grid).backward(coeff.v.data(), out.v.data());
    return out;
}

// ---------------------------------------------------------------------------
// Derivative symbols
//
// Axis pair j carries coordinates (x_j, y_j) with integer wavenumbers
// (k_j, l_j). On the mode exp(i(k x + l y)):
//   holomorphic derivative        : (i k_j + l_j) / 2
//   antiholomorphic derivative    : (i k_j - l_j) / 2
//   flat complex Laplacian        : -sum_j (k_j^2 + l_j^2) / 4
// Symbols with an odd per-axis order vanish at the Nyquist frequency of the
// axes they touch; the fully even Laplacian symbol keeps its Nyquist
// contribution, so the trace of the mixed Hessian reproduces laplace_flat
// exactly on every representable field.
// ---------------------------------------------------------------------------

namespace detail {

struct AxisPairFreq {
    int k;        // wavenumber on the x axis of the pair
    int l;        // wavenumber on the y axis of the pair
    bool nyquist; // either axis of the pair sits at the Nyquist index
};

inline AxisPairFreq pair_freq(const TorusGrid& grid, const std::array<int, 4>& idx, int j) {
    const int ix = idx[static_cast<std::size_t>(2 * j)];
    const int iy = idx[static_cast<std::size_t>(2 * j + 1)];
    return AxisPairFreq{grid.wavenumber(ix), grid.wavenumber(iy),
                        grid.is_nyquist(ix) || grid.is_nyquist(iy)};
}

inline Complex holo_symbol(const AxisPairFreq& f) {
    if (f.nyquist) return Complex{0.0, 0.0};
    return Complex{0.5 * f.l, 0.5 * f.k};
}

inline Complex antiholo_symbol(const AxisPairFreq& f) {
    if (f.nyquist) return Complex{0.0, 0.0};
    return Complex{-0.5 * f.l, 0.5 * f.k};
}

// Apply a per-mode multiplier provided as fn(grid, idx) -> Complex.
template <class Symbol>
inline ComplexField apply_symbol(const ComplexField& f, Symbol&& sym) {
    ComplexField coeff = forward_coefficients(f);
    detail::for_each_mode(f.grid, [&](std::size_t flat, const std::array<int, 4>& idx) {
        coeff.v[flat] *= sym(f.grid, idx);
    });
    return inverse_from_coefficients(coeff);
}

template <class Symbol>
inline ComplexField apply_symbol(const RealField& f, Symbol&& sym) {
    return apply_symbol(to_complex(f), std::forward<Symbol>(sym));
}

inline double laplace_symbol(const TorusGrid& grid, const std::array<int, 4>& idx) {
    double s = 0.0;
    for (int j = 0; j < grid.n(); ++j) {
        const AxisPairFreq f = pair_freq(grid, idx, j);
        s += static_cast<double>(f.k) * f.k + static_cast<double>(f.l) * f.l;
    }
    return -0.25 * s;
}

} // namespace detail

// d/dz_j of a sample field.
inline ComplexField d_holo(const RealField& f, int j) {
    require_finite(f, "d_holo");
    return detail::apply_symbol(f, [j](const TorusGrid& g, const std::array<int, 4>& idx) {
        return detail::holo_symbol(detail::pair_freq(g, idx, j));
    });
}

inline ComplexField d_holo(const ComplexField& f, int j) {
    require_finite(f, "d_holo");
    return detail::apply_symbol(f, [j](const TorusGrid& g, const std::array<int, 4>& idx) {
        return detail::holo_symbol(detail::pair_freq(g, idx, j));
    });
}

// d/dzbar_j of a sample field.
inline ComplexField d_antiholo(const RealField& f, int j) {
    require_finite(f, "d_antiholo");
    return detail::apply_symbol(f, [j](const TorusGrid& g, const std::array<int, 4>& idx) {
        return detail::antiholo_symbol(detail::pair_freq(g, idx, j));
    });
}

inline ComplexField d_antiholo(const ComplexField& f, int j) {
    require_finite(f, "d_antiholo");
    return detail::apply_symbol(f, [j](const TorusGrid& g, const std::array<int, 4>& idx) {
        return detail::antiholo_symbol(detail::pair_freq(g, idx, j));
    });
}

// Flat complex Laplacian (one quarter of the real Laplacian).
inline RealField laplace_flat(const RealField& f) {
    require_finite(f, "laplace_flat");
    ComplexField out = detail::apply_symbol(f, [](const TorusGrid& g, const std::array<int, 4>& idx) {
        return Complex{detail::laplace_symbol(g, idx), 0.0};
    });
    return real_part(out);
}

// Mixed complex Hessian entry d^2 f / dz_i dzbar_j. The diagonal uses the
// even per-pair symbol -(k^2 + l^2)/4 directly so that summing over j equals
// laplace_flat exactly; off-diagonal entries are products of two odd
// first-order symbols and vanish at the Nyquist frequency.
inline ComplexField hessian_mixed(const RealField& f, int i, int j) {
    require_finite(f, "hessian_mixed");
    return detail::apply_symbol(f, [i, j](const TorusGrid& g, const std::array<int, 4>& idx) {
        if (i == j) {
            const detail::AxisPairFreq p = detail::pair_freq(g, idx, i);
            return Complex{-0.25 * (static_cast<double>(p.k) * p.k
                                    + static_cast<double>(p.l) * p.l), 0.0};
        }
        return detail::holo_symbol(detail::pair_freq(g, idx, i))
             * detail::antiholo_symbol(detail::pair_freq(g, idx, j));
    });
}

// Unbarred Hessian entry d^2 f / dz_i dz_j (needed by covariant Hessians).
inline ComplexField hessian_holo(const RealField& f, int i, int j) {
    require_finite(f, "hessian_holo");
    return detail::apply_symbol(f, [i, j](const TorusGrid& g, const std::array<int, 4>& idx) {
        return detail::holo_symbol(detail::pair_freq(g, idx, i))
             * detail::holo_symbol(detail::pair_freq(g, idx, j));
    });
}

// Third derivative d^3 f / dz_a dz_b dzbar_c.
inline ComplexField third_derivative(const RealField& f, int a, int b, int c) {
    require_finite(f, "third_derivative");
    return detail::apply_symbol(f, [a, b, c](const TorusGrid& g, const std::array<int, 4>& idx) {
        return detail::holo_symbol(detail::pair_freq(g, idx, a))
             * detail::holo_symbol(detail::pair_freq(g, idx, b))
             * detail::antiholo_symbol(detail::pair_freq(g, idx, c));
    });
}

// Solve (Id + sigma * laplace_flat^2) u = f mode by mode. sigma must be
// positive; the operator is then uniformly invertible.
inline RealField biharmonic_shift_solve(const RealField& f, double sigma) {
    require_finite(f, "biharmonic_shift_solve");
    if (!(sigma > 0.0))
        throw ConfigError("biharmonic_shift_solve: shift must be positive, got "
                          + std::to_string(sigma));
    ComplexField out = detail::apply_symbol(f, [sigma](const TorusGrid& g,
                                                       const std::array<int, 4>& idx) {
        const double mu = detail::laplace_symbol(g, idx);
        return Complex{1.0 / (1.0 + sigma * mu * mu), 0.0};
    });
    return real_part(out);
}

// L2 norm of the part of f living on modes whose largest per-axis
// wavenumber magnitude exceeds k_cut.
inline double spectral_tail_norm(const RealField& f, int k_cut) {
    require_finite(f, "spectral_tail_norm");
    if (k_cut <= 0 || k_cut >= f.grid.N() / 2)
        throw ConfigError("spectral_tail_norm: cutoff must lie in (0, N/2), got "
                          + std::to_string(k_cut));
    ComplexField coeff = forward_coefficients(f);
    std::vector<double> tail_power;
    tail_power.reserve(coeff.size());
    detail::for_each_mode(f.grid, [&](std::size_t flat, const std::array<int, 4>& idx) {
        int kmax = 0;
        for (int a = 0; a < f.grid.axes(); ++a)
            kmax = std::max(kmax, std::abs(f.grid.wavenumber(idx[static_cast<std::size_t>(a)])));
        if (kmax > k_cut) tail_power.push_back(std::norm(coeff.v[flat]));
    });
    double volume = 1.0;
    for (int a = 0; a < f.grid.axes(); ++a) volume *= kPeriod;
    return std::sqrt(volume * pairwise_sum(std::span<const double>(tail_power)));
}

} // namespace calabi

#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "calabi/grid.hpp"

namespace calabi {

using Complex = std::complex<double>;

// Real scalar sample field over a TorusGrid. Value semantics throughout;
// operators treat fields as immutable inputs and return fresh fields.
struct RealField {
    RealField() : grid(1, 8) {}
    explicit RealField(const TorusGrid& g, double fill = 0.0)
        : grid(g), v(g.point_count(), fill) {}

    TorusGrid grid;
    std::vector<double> v;

    std::size_t size() const { return v.size(); }
    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }
};

// Complex-valued companion used for derivative fields and spectra.
struct ComplexField {
    ComplexField() : grid(1, 8) {}
    explicit ComplexField(const TorusGrid& g, Complex fill = Complex{0.0, 0.0})
        : grid(g), v(g.point_count(), fill) {}

    TorusGrid grid;
    std::vector<Complex> v;

    std::size_t size() const { return v.size(); }
    Complex& operator[](std::size_t i) { return v[i]; }
    Complex operator[](std::size_t i) const { return v[i]; }
};

inline bool all_finite(const RealField& f) {
    for (double x : f.v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const ComplexField& f) {
    for (const Complex& x : f.v)
        if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
    return true;
}

inline void require_finite(const RealField& f, const char* where) {
    if (!all_finite(f))
        throw InvalidFieldError(std::string(where) + ": field contains non-finite values");
}

inline void require_finite(const ComplexField& f, const char* where) {
    if (!all_finite(f))
        throw InvalidFieldError(std::string(where) + ": field contains non-finite values");
}

inline void require_same_grid(const TorusGrid& a, const TorusGrid& b, const char* where) {
    if (a != b)
        throw InvalidFieldError(std::string(where) + ": fields live on different grids");
}

inline RealField real_part(const ComplexField& f) {
    RealField out(f.grid);
    for (std::size_t i = 0; i < f.size(); ++i) out.v[i] = f.v[i].real();
    return out;
}

inline ComplexField to_complex(const RealField& f) {
    ComplexField out(f.grid);
    for (std::size_t i = 0; i < f.size(); ++i) out.v[i] = Complex{f.v[i], 0.0};
    return out;
}

inline ComplexField conjugate(const ComplexField& f) {
    ComplexField out(f.grid);
    for (std::size_t i = 0; i < f.size(); ++i) out.v[i] = std::conj(f.v[i]);
    return out;
}

inline double sup_abs(const RealField& f) {
    double m = 0.0;
    for (double x : f.v) m = std::max(m, std::abs(x));
    return m;
}

inline double sup_abs(const ComplexField& f) {
    double m = 0.0;
    for (const Complex& x : f.v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace calabi

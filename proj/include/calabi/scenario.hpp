#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "calabi/disc.hpp"
#include "calabi/io.hpp"
#include "calabi/spectral.hpp"

namespace calabi {

using Json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const Json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* a : allowed)
            if (item.key() == a) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// phase in [0, 2pi) from a seed and a mode index, independent of traversal
inline double mode_phase(std::uint64_t seed, std::uint64_t mode) {
    std::uint64_t s = seed ^ (0x8676E2A47CD6A9B1ull * (mode + 1));
    splitmix64(s);
    const std::uint64_t r = splitmix64(s);
    return 2.0 * std::numbers::pi * (static_cast<double>(r >> 11) * 0x1.0p-53);
}

} // namespace detail

struct ModeSpec {
    std::array<int, 4> k{0, 0, 0, 0}; // one wavenumber per real axis
    double amplitude = 0.0;
    double phase = 0.0;
};

struct RandomSpectrumSpec {
    double amplitude = 0.0;
    double decay = 4.0;
    std::uint64_t seed = 0;
};

struct InitialSpec {
    enum class Kind { Zero, Modes, RandomSpectrum, Snapshot };
    Kind kind = Kind::Zero;
    std::vector<ModeSpec> modes;
    RandomSpectrumSpec random;
    std::string snapshot_path;
};

struct OutputSpec {
    std::string series = "series.csv";
    std::string report; // empty: subcommand default (report.json for run)
    std::string final_snapshot; // empty: skip
};

struct CheckSpec {
    std::optional<double> decay_rate;
    double decay_rel_tol = 0.02;
    double fit_t0 = 0.0;
    double fit_t1 = 0.0; // 0,0: whole run
};

struct Scenario {
    int n = 1;
    int N = 64;
    InitialSpec initial;
    IntegratorConfig integrator;
    OutputSpec output;
    CheckSpec check;

    TorusGrid grid() const { return TorusGrid(n, N); }
};

inline IntegratorConfig parse_integrator(const Json& j) {
    detail::reject_unknown_keys(j,
                                {"scheme", "t_end", "dt_init", "dt_min", "dt_max", "tolerance",
                                 "cadence", "c_fixed", "halt_on_stationary", "tail_cut"},
                                "integrator");
    IntegratorConfig cfg;
    if (j.contains("scheme")) cfg.scheme = parse_scheme(j.at("scheme").get<std::string>());
    if (j.contains("t_end")) cfg.t_end = j.at("t_end").get<double>();
    if (j.contains("dt_init")) cfg.dt_init = j.at("dt_init").get<double>();
    if (j.contains("dt_min")) cfg.dt_min = j.at("dt_min").get<double>();
    if (j.contains("dt_max")) cfg.dt_max = j.at("dt_max").get<double>();
    if (j.contains("tolerance")) cfg.tolerance = j.at("tolerance").get<double>();
    if (j.contains("cadence")) cfg.cadence = j.at("cadence").get<int>();
    if (j.contains("c_fixed")) cfg.c_fixed = j.at("c_fixed").get<double>();
    if (j.contains("halt_on_stationary"))
        cfg.halt_on_stationary = j.at("halt_on_stationary").get<bool>();
    if (j.contains("tail_cut")) cfg.tail_cut = j.at("tail_cut").get<int>();
    return cfg;
}

inline InitialSpec parse_initial(const Json& j, int n) {
    InitialSpec spec;
    const std::string type = j.at("type").get<std::string>();
    if (type == "zero") {
        detail::reject_unknown_keys(j, {"type"}, "initial");
        spec.kind = InitialSpec::Kind::Zero;
    } else if (type == "modes") {
        detail::reject_unknown_keys(j, {"type", "modes"}, "initial");
        spec.kind = InitialSpec::Kind::Modes;
        for (const Json& m : j.at("modes")) {
            detail::reject_unknown_keys(m, {"k", "amplitude", "phase"}, "initial.modes");
            ModeSpec ms;
            const auto kv = m.at("k").get<std::vector<int>>();
            if (static_cast<int>(kv.size()) != 2 * n)
                throw ConfigError("mode wavenumber needs one entry per real axis");
            for (std::size_t a = 0; a < kv.size(); ++a) ms.k[a] = kv[a];
            ms.amplitude = m.at("amplitude").get<double>();
            if (m.contains("phase")) ms.phase = m.at("phase").get<double>();
            spec.modes.push_back(ms);
        }
    } else if (type == "random-spectrum") {
        detail::reject_unknown_keys(j, {"type", "amplitude", "decay", "seed"}, "initial");
        spec.kind = InitialSpec::Kind::RandomSpectrum;
        spec.random.amplitude = j.at("amplitude").get<double>();
        spec.random.decay = j.at("decay").get<double>();
        spec.random.seed = j.at("seed").get<std::uint64_t>();
    } else if (type == "snapshot") {
        detail::reject_unknown_keys(j, {"type", "path"}, "initial");
        spec.kind = InitialSpec::Kind::Snapshot;
        spec.snapshot_path = j.at("path").get<std::string>();
    } else {
        throw ConfigError("unknown initial type '" + type + "'");
    }
    return spec;
}

inline Scenario parse_scenario(const Json& j) {
    detail::reject_unknown_keys(j, {"grid", "initial", "integrator", "output", "check"},
                                "scenario");
    Scenario sc;
    const Json& g = j.at("grid");
    detail::reject_unknown_keys(g, {"n", "N"}, "grid");
    sc.n = g.at("n").get<int>();
    sc.N = g.at("N").get<int>();
    TorusGrid grid(sc.n, sc.N); // validates

    sc.initial = parse_initial(j.at("initial"), sc.n);
    if (j.contains("integrator")) sc.integrator = parse_integrator(j.at("integrator"));
    sc.integrator.validate(grid);

    if (j.contains("output")) {
        const Json& o = j.at("output");
        detail::reject_unknown_keys(o, {"series", "report", "final_snapshot"}, "output");
        if (o.contains("series")) sc.output.series = o.at("series").get<std::string>();
        if (o.contains("report")) sc.output.report = o.at("report").get<std::string>();
        if (o.contains("final_snapshot"))
            sc.output.final_snapshot = o.at("final_snapshot").get<std::string>();
    }
    if (j.contains("check")) {
        const Json& c = j.at("check");
        detail::reject_unknown_keys(c, {"decay_rate", "decay_rel_tol", "fit_window"}, "check");
        if (c.contains("decay_rate")) sc.check.decay_rate = c.at("decay_rate").get<double>();
        if (c.contains("decay_rel_tol"))
            sc.check.decay_rel_tol = c.at("decay_rel_tol").get<double>();
        if (c.contains("fit_window")) {
            const auto w = c.at("fit_window").get<std::vector<double>>();
            if (w.size() != 2 || !(w[0] < w[1]))
                throw ConfigError("fit_window must be [t0, t1] with t0 < t1");
            sc.check.fit_t0 = w[0];
            sc.check.fit_t1 = w[1];
        }
    }
    return sc;
}

inline Scenario parse_scenario_text(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config parse failure: ") + e.what());
    }
    try {
        return parse_scenario(j);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config field failure: ") + e.what());
    }
}

// Superposition of plane-wave modes, amplitude * cos(k.x + phase).
inline RealField build_modes(const TorusGrid& g, const std::vector<ModeSpec>& modes) {
    RealField phi(g);
    const int axes = g.axes();
    for (std::size_t p = 0; p < phi.size(); ++p) {
        const auto idx = g.multi_index(p);
        double value = 0.0;
        for (const ModeSpec& m : modes) {
            double dot = m.phase;
            for (int a = 0; a < axes; ++a) dot += m.k[a] * g.coordinate(idx[a]);
            value += m.amplitude * std::cos(dot);
        }
        phi.v[p] = value;
    }
    return phi;
}

// Random real field with power-law spectrum: every non-Nyquist mode pair
// {k, -k} carries amplitude * |k|^(-decay) * cos(k.x + theta_k) with a
// hash-derived phase, so the result is fully determined by the seed.
inline RealField build_random_spectrum(const TorusGrid& g, const RandomSpectrumSpec& spec) {
    ComplexField coeff(g);
    const int axes = g.axes();
    detail::for_each_mode(g, [&](std::size_t p, const std::array<int, 4>& idx) {
        double k2 = 0.0;
        bool zero = true, nyquist = false, canonical = false, decided = false;
        std::array<int, 4> conj_idx{0, 0, 0, 0};
        for (int a = 0; a < axes; ++a) {
            const int k = g.wavenumber(idx[a]);
            if (g.is_nyquist(idx[a])) nyquist = true;
            if (k != 0) zero = false;
            if (!decided && k != 0) {
                canonical = k > 0;
                decided = true;
            }
            k2 += static_cast<double>(k) * k;
            conj_idx[a] = (g.N() - idx[a]) % g.N();
        }
        if (zero || nyquist || !canonical) return;
        const double theta = detail::mode_phase(spec.seed, p);
        const double mag = 0.5 * spec.amplitude * std::pow(k2, -0.5 * spec.decay);
        const Complex c = mag * Complex{std::cos(theta), std::sin(theta)};
        coeff.v[p] = c;
        coeff.v[g.flat_index(conj_idx)] = std::conj(c);
    });
    return real_part(inverse_from_coefficients(coeff));
}

inline RealField build_initial(const TorusGrid& g, const InitialSpec& spec) {
    switch (spec.kind) {
        case InitialSpec::Kind::Zero: return RealField(g);
        case InitialSpec::Kind::Modes: return build_modes(g, spec.modes);
        case InitialSpec::Kind::RandomSpectrum: return build_random_spectrum(g, spec.random);
        case InitialSpec::Kind::Snapshot: {
            RealField phi = load_torus_snapshot(spec.snapshot_path);
            if (phi.grid != g)
                throw ConfigError("snapshot grid does not match scenario grid");
            return phi;
        }
    }
    throw ConfigError("unknown initial kind");
}

// Configuration of the disc pipeline.
struct DesingConfig {
    int Nd = 129;
    bool punctured = true;
    double Rbar = 0.0;
    double cg_tol = 1e-10;
    enum class Potential { Zero, Radial, TorusSnapshot, DiscSnapshot };
    Potential potential = Potential::Zero;
    double radial_coefficient = 0.0;
    double radial_power = 4.0;
    std::string snapshot_path;
    std::array<double, 2> chart_center{std::numbers::pi, std::numbers::pi};
    double chart_scale = 1.0;
    std::string report = "desing.json";
    std::string u0_out;
    std::string v_out;
};

inline DesingConfig parse_desing_config_text(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config parse failure: ") + e.what());
    }
    try {
        detail::reject_unknown_keys(j, {"disc", "Rbar", "cg_tol", "potential", "output"},
                                    "desing config");
        DesingConfig cfg;
        const Json& d = j.at("disc");
        detail::reject_unknown_keys(d, {"Nd", "punctured"}, "disc");
        cfg.Nd = d.at("Nd").get<int>();
        if (d.contains("punctured")) cfg.punctured = d.at("punctured").get<bool>();
        if (j.contains("Rbar")) cfg.Rbar = j.at("Rbar").get<double>();
        if (j.contains("cg_tol")) cfg.cg_tol = j.at("cg_tol").get<double>();

        const Json& p = j.at("potential");
        const std::string type = p.at("type").get<std::string>();
        if (type == "zero") {
            detail::reject_unknown_keys(p, {"type"}, "potential");
            cfg.potential = DesingConfig::Potential::Zero;
        } else if (type == "radial") {
            detail::reject_unknown_keys(p, {"type", "coefficient", "power"}, "potential");
            cfg.potential = DesingConfig::Potential::Radial;
            cfg.radial_coefficient = p.at("coefficient").get<double>();
            cfg.radial_power = p.at("power").get<double>();
            if (!(cfg.radial_power >= 2.0))
                throw ConfigError("radial power must be at least 2");
        } else if (type == "torus-snapshot") {
            detail::reject_unknown_keys(p, {"type", "path", "center", "scale"}, "potential");
            cfg.potential = DesingConfig::Potential::TorusSnapshot;
            cfg.snapshot_path = p.at("path").get<std::string>();
            if (p.contains("center")) {
                const auto c = p.at("center").get<std::vector<double>>();
                if (c.size() != 2) throw ConfigError("chart center needs two coordinates");
                cfg.chart_center = {c[0], c[1]};
            }
            if (p.contains("scale")) cfg.chart_scale = p.at("scale").get<double>();
            if (!(cfg.chart_scale > 0.0)) throw ConfigError("chart scale must be positive");
        } else if (type == "disc-snapshot") {
            detail::reject_unknown_keys(p, {"type", "path"}, "potential");
            cfg.potential = DesingConfig::Potential::DiscSnapshot;
            cfg.snapshot_path = p.at("path").get<std::string>();
        } else {
            throw ConfigError("unknown potential type '" + type + "'");
        }

        if (j.contains("output")) {
            const Json& o = j.at("output");
            detail::reject_unknown_keys(o, {"report", "u0", "v"}, "output");
            if (o.contains("report")) cfg.report = o.at("report").get<std::string>();
            if (o.contains("u0")) cfg.u0_out = o.at("u0").get<std::string>();
            if (o.contains("v")) cfg.v_out = o.at("v").get<std::string>();
        }
        return cfg;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config field failure: ") + e.what());
    }
}

// Evaluates an n = 1 torus potential's Fourier series on the disc nodes of
// a chart x = center + scale * (u, v), separably in the two axes.
inline std::vector<double> restrict_torus_potential(const RealField& phi, const DiscGrid& disc,
                                                    const std::array<double, 2>& center,
                                                    double scale) {
    if (phi.grid.n() != 1) throw ConfigError("chart restriction needs a 1-variable potential");
    const TorusGrid& g = phi.grid;
    const int N = g.N();
    ComplexField coeff = forward_coefficients(phi);
    const int Nd = disc.Nd();
    // partial[l][i] = sum_k coeff(k, l) exp(i k x_i)
    std::vector<Complex> partial(static_cast<std::size_t>(N) * Nd);
    for (int l = 0; l < N; ++l)
        for (int i = 0; i < Nd; ++i) {
            const double x = center[0] + scale * disc.x(i);
            Complex s = 0.0;
            for (int k = 0; k < N; ++k) {
                const double w = g.wavenumber(k) * x;
                s += coeff.v[g.flat_index({k, l, 0, 0})] * Complex{std::cos(w), std::sin(w)};
            }
            partial[static_cast<std::size_t>(l) * Nd + i] = s;
        }
    std::vector<double> out(disc.size(), 0.0);
    for (int j = 0; j < Nd; ++j) {
        const double y = center[1] + scale * disc.x(j);
        for (int i = 0; i < Nd; ++i) {
            Complex s = 0.0;
            for (int l = 0; l < N; ++l) {
                const double w = g.wavenumber(l) * y;
                s += partial[static_cast<std::size_t>(l) * Nd + i] * Complex{std::cos(w), std::sin(w)};
            }
            out[disc.at(i, j)] = s.real();
        }
    }
    return out;
}

inline std::vector<double> build_disc_potential(const DiscGrid& disc, const DesingConfig& cfg) {
    switch (cfg.potential) {
        case DesingConfig::Potential::Zero: return std::vector<double>(disc.size(), 0.0);
        case DesingConfig::Potential::Radial: {
            std::vector<double> phi(disc.size(), 0.0);
            for (int j = 0; j < disc.Nd(); ++j)
                for (int i = 0; i < disc.Nd(); ++i) {
                    const double r = std::hypot(disc.x(i), disc.x(j));
                    phi[disc.at(i, j)] = cfg.radial_coefficient * std::pow(r, cfg.radial_power);
                }
            return phi;
        }
        case DesingConfig::Potential::TorusSnapshot: {
            RealField phi = load_torus_snapshot(cfg.snapshot_path);
            return restrict_torus_potential(phi, disc, cfg.chart_center, cfg.chart_scale);
        }
        case DesingConfig::Potential::DiscSnapshot: {
            SnapshotData s = read_snapshot(cfg.snapshot_path);
            if (s.n != 1 || static_cast<int>(s.N) != disc.Nd())
                throw ConfigError("disc snapshot does not match the disc grid");
            return s.values;
        }
    }
    throw ConfigError("unknown potential kind");
}

} // namespace calabi

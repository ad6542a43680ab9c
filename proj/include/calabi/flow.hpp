#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "calabi/compactness.hpp"
#include "calabi/operators.hpp"

namespace calabi {

enum class Scheme { ExplicitRk4, ImexBe, ImexCn };

inline const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::ExplicitRk4: return "explicit-rk4";
        case Scheme::ImexBe: return "imex-be";
        case Scheme::ImexCn: return "imex-cn";
    }
    return "?";
}

inline Scheme parse_scheme(const std::string& s) {
    if (s == "explicit-rk4") return Scheme::ExplicitRk4;
    if (s == "imex-be") return Scheme::ImexBe;
    if (s == "imex-cn") return Scheme::ImexCn;
    throw ConfigError("unknown scheme '" + s + "'");
}

struct IntegratorConfig {
    Scheme scheme = Scheme::ImexBe;
    double t_end = 1.0;
    double dt_init = 1e-3;
    double dt_min = 1e-9;
    double dt_max = 1.0;
    double tolerance = 1e-8;     // step-doubling error target, relative
    int cadence = 1;             // record every cadence-th accepted step
    std::optional<double> c_fixed; // overrides the adaptive stabilization constant
    bool halt_on_stationary = true;
    int tail_cut = 0;            // 0 selects N/4

    void validate(const TorusGrid& g) const {
        if (!(t_end >= 0.0)) throw ConfigError("t_end must be nonnegative");
        if (!(dt_min > 0.0) || !(dt_max >= dt_min))
            throw ConfigError("need 0 < dt_min <= dt_max");
        if (!(dt_init >= dt_min) || !(dt_init <= dt_max))
            throw ConfigError("dt_init must lie in [dt_min, dt_max]");
        if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
        if (cadence < 1) throw ConfigError("cadence must be at least 1");
        if (c_fixed && !(*c_fixed > 0.0))
            throw ConfigError("stabilization constant must be positive");
        if (tail_cut != 0 && (tail_cut <= 0 || tail_cut >= g.N() / 2))
            throw ConfigError("tail_cut must lie strictly between 0 and N/2");
    }
};

// Metric, curvature and integrals of one potential, shared by the stepper
// and the diagnostics so nothing is assembled twice.
struct StateEval {
    HermitianMetricField m;
    CurvatureBundle curv;
    GlobalIntegrals gi;
};

inline StateEval evaluate_state(const RealField& phi) {
    StateEval e;
    e.m = assemble_metric(phi);
    e.curv = ricci(e.m);
    e.gi = global_integrals(e.m, e.curv.scalar);
    return e;
}

struct DiagnosticsRecord {
    double t = 0.0;
    double Ca = 0.0;
    double Ca_mod = 0.0;
    double V = 0.0;
    double S = 0.0;
    double dissip = 0.0;
    double lam = 0.0;
    double Lam = 0.0;
    double sup_phi = 0.0;
    double sup_ric = 0.0;
    double sup_F = 0.0;
    double tail = 0.0;
    double dt = 0.0;
    // extra monitors, not part of the CSV row
    double mean_phi = 0.0;
    double mean_source = 0.0; // (S - Rbar V) / V, vanishes identically on tori
    double jensen_margin = 0.0;
    double inf_F = 0.0;
    double mean_F = 0.0;
    double sup_lap_phi = 0.0;
    double sup_lap_F = 0.0;
    double w2p8 = 0.0;
};

enum class HaltCause { TEndReached, Stationary, StepFailureHalt, NonAdmissibleHalt };

inline const char* halt_cause_name(HaltCause c) {
    switch (c) {
        case HaltCause::TEndReached: return "t_end_reached";
        case HaltCause::Stationary: return "stationary";
        case HaltCause::StepFailureHalt: return "step_failure";
        case HaltCause::NonAdmissibleHalt: return "non_admissible";
    }
    return "?";
}

struct RunResult {
    std::vector<DiagnosticsRecord> records;
    RealField phi_final;
    double t_final = 0.0;
    HaltCause cause = HaltCause::TEndReached;
    std::string cause_detail;
    double Ca_mod_initial = 0.0;
    double max_energy_increase = 0.0; // largest Ca_mod gain over an accepted step
    bool monotone = true;             // gains stay within 1e-10 * Ca_mod_initial
    long steps_accepted = 0;
    long steps_rejected = 0;
};

class FlowEngine {
public:
    FlowEngine(const TorusGrid& grid, const IntegratorConfig& cfg)
        : grid_(grid), cfg_(cfg) {
        cfg_.validate(grid_);
        fixed_dt_ = cfg_.dt_min == cfg_.dt_max;
    }

    const IntegratorConfig& config() const { return cfg_; }

    // The stabilization constant actually in use (valid after run() started).
    double stabilization() const { return c_; }

    RunResult run(const RealField& phi0) {
        require_same_grid(phi0.grid, grid_, "flow run");
        RunResult res;
        res.phi_final = phi0;
        double t = 0.0;

        StateEval eval;
        try {
            eval = evaluate_state(phi0);
        } catch (const NonAdmissibleError& e) {
            res.cause = HaltCause::NonAdmissibleHalt;
            res.cause_detail = e.what();
            return res;
        }
        refresh_stabilization(eval, true);
        res.Ca_mod_initial = eval.gi.Ca_mod;
        double prev_ca_mod = eval.gi.Ca_mod;

        double dt_next = cfg_.dt_init;
        double last_dt = 0.0;
        err_ratio_prev_ = 1.0;
        res.records.push_back(make_record(t, eval, 0.0));

        const double t_slack = 1e-12 * std::max(1.0, cfg_.t_end);
        for (;;) {
            if (t >= cfg_.t_end - t_slack) {
                res.cause = HaltCause::TEndReached;
                break;
            }
            if (cfg_.halt_on_stationary && eval.gi.Ca_mod < 1e-16 * eval.gi.V) {
                res.cause = HaltCause::Stationary;
                res.cause_detail = "reduced energy below 1e-16 * V";
                break;
            }
            double dt = std::min(dt_next, cfg_.t_end - t);
            StepOutcome out;
            try {
                out = step(t, res.phi_final, eval, dt, res.steps_rejected);
            } catch (const StepFailureError& e) {
                res.cause = HaltCause::StepFailureHalt;
                res.cause_detail = e.what();
                break;
            }
            t += out.dt_used;
            last_dt = out.dt_used;
            res.phi_final = std::move(out.phi);
            eval = std::move(out.eval);
            dt_next = out.dt_next;
            ++res.steps_accepted;

            const double gain = eval.gi.Ca_mod - prev_ca_mod;
            res.max_energy_increase = std::max(res.max_energy_increase, gain);
            prev_ca_mod = eval.gi.Ca_mod;

            refresh_stabilization(eval, false);
            if (res.steps_accepted % cfg_.cadence == 0)
                res.records.push_back(make_record(t, eval, out.dt_used));
        }

        if (res.records.empty() || res.records.back().t != t)
            res.records.push_back(make_record(t, eval, last_dt));
        res.t_final = t;
        res.monotone = res.max_energy_increase <= 1e-10 * std::max(res.Ca_mod_initial, 0.0) +
                       std::numeric_limits<double>::min();
        return res;
    }

    DiagnosticsRecord make_record(double t, const StateEval& eval, double dt_used) const {
        DiagnosticsRecord r;
        r.t = t;
        r.Ca = eval.gi.Ca;
        r.Ca_mod = eval.gi.Ca_mod;
        r.V = eval.gi.V;
        r.S = eval.gi.S;
        r.dissip = dissipation(eval.m, eval.curv.scalar);
        CompactnessReport cr = compactness_report(eval.m, eval.curv);
        r.lam = cr.lambda_min;
        r.Lam = cr.lambda_max;
        r.sup_phi = cr.sup_phi;
        r.sup_ric = cr.sup_ric;
        r.sup_F = cr.sup_F;
        r.inf_F = cr.inf_F;
        r.mean_F = cr.mean_F;
        r.sup_lap_phi = cr.sup_lap_phi;
        r.sup_lap_F = cr.sup_lap_F;
        r.w2p8 = cr.w2p8;
        r.tail = spectral_tail_norm(eval.m.phi, tail_cut());
        r.dt = dt_used;
        r.mean_phi = mean(eval.m.phi);
        r.mean_source = (eval.gi.S - eval.gi.Rbar * eval.gi.V) / eval.gi.V;
        r.jensen_margin = jensen_check(eval.m).margin;
        return r;
    }

    int tail_cut() const { return cfg_.tail_cut > 0 ? cfg_.tail_cut : grid_.N() / 4; }

private:
    struct StepOutcome {
        RealField phi;
        StateEval eval;
        double dt_used = 0.0;
        double dt_next = 0.0;
    };

    TorusGrid grid_;
    IntegratorConfig cfg_;
    bool fixed_dt_ = false;
    double c_ = 0.0;
    double lambda_max_ref_ = 0.0;
    double err_ratio_prev_ = 1.0;

    void refresh_stabilization(const StateEval& eval, bool force) {
        if (cfg_.c_fixed) {
            c_ = *cfg_.c_fixed;
            return;
        }
        const double lam_max = eval.m.lambda_max;
        if (force || std::abs(lam_max - lambda_max_ref_) > 0.1 * lambda_max_ref_) {
            c_ = 1.1 * lam_max * lam_max;
            lambda_max_ref_ = lam_max;
        }
    }

    static int order(Scheme s) {
        switch (s) {
            case Scheme::ExplicitRk4: return 4;
            case Scheme::ImexBe: return 1;
            case Scheme::ImexCn: return 2;
        }
        return 1;
    }

    // R - Rbar of an evaluated state.
    RealField source_field(const StateEval& e) const {
        RealField s = e.curv.scalar;
        const double rbar = e.gi.Rbar;
        for (double& x : s.v) x -= rbar;
        return s;
    }

    RealField biharmonic_flat(const RealField& f) const {
        ComplexField c = forward_coefficients(f);
        const TorusGrid& g = f.grid;
        detail::for_each_mode(g, [&](std::size_t p, const std::array<int, 4>& idx) {
            const double mu = detail::laplace_symbol(g, idx);
            c.v[p] *= mu * mu;
        });
        return real_part(inverse_from_coefficients(c));
    }

    // One application of the chosen scheme over dt. Evaluates intermediate
    // states as needed; NonAdmissibleError from those propagates to step().
    RealField substep(const RealField& phi, const StateEval& head, double dt) const {
        switch (cfg_.scheme) {
            case Scheme::ImexBe: {
                RealField b = biharmonic_flat(phi);
                RealField g = source_field(head);
                RealField rhs = phi;
                for (std::size_t p = 0; p < rhs.size(); ++p)
                    rhs.v[p] += dt * (g.v[p] + c_ * b.v[p]);
                return biharmonic_shift_solve(rhs, dt * c_);
            }
            case Scheme::ImexCn: {
                // midpoint predictor by a stabilized half step, then a
                // trapezoidal correction sharing the same implicit shift
                RealField b0 = biharmonic_flat(phi);
                RealField g0 = source_field(head);
                const double h = 0.5 * dt;
                RealField rhs = phi;
                for (std::size_t p = 0; p < rhs.size(); ++p)
                    rhs.v[p] += h * (g0.v[p] + c_ * b0.v[p]);
                RealField mid = biharmonic_shift_solve(rhs, h * c_);
                StateEval em = evaluate_state(mid);
                RealField bm = biharmonic_flat(mid);
                RealField gm = source_field(em);
                // trapezoid on the shift, midpoint on the remainder:
                // (1 + h c B) phi1 = phi - h c B phi + dt (g(mid) + c B mid)
                RealField rhs2 = phi;
                for (std::size_t p = 0; p < rhs2.size(); ++p)
                    rhs2.v[p] += dt * (gm.v[p] + c_ * bm.v[p]) - h * c_ * b0.v[p];
                return biharmonic_shift_solve(rhs2, h * c_);
            }
            case Scheme::ExplicitRk4: {
                RealField k1 = source_field(head);
                RealField y = phi;
                auto advance = [&](const RealField& k, double w) {
                    RealField z = phi;
                    for (std::size_t p = 0; p < z.size(); ++p) z.v[p] += w * k.v[p];
                    return z;
                };
                RealField k2 = source_field(evaluate_state(advance(k1, 0.5 * dt)));
                RealField k3 = source_field(evaluate_state(advance(k2, 0.5 * dt)));
                RealField k4 = source_field(evaluate_state(advance(k3, dt)));
                for (std::size_t p = 0; p < y.size(); ++p)
                    y.v[p] += dt / 6.0 * (k1.v[p] + 2.0 * k2.v[p] + 2.0 * k3.v[p] + k4.v[p]);
                return y;
            }
        }
        throw ConfigError("unknown scheme");
    }

    StepOutcome step(double t, const RealField& phi, const StateEval& eval, double dt_start,
                     long& rejected) {
        // dt_start may undershoot dt_min only to land exactly on t_end
        double dt = std::min(dt_start, cfg_.dt_max);
        const double scale = 1.0 + sup_abs(phi);
        for (;;) {
            bool admissible = true;
            std::string fail_detail;
            StepOutcome out;
            double err = 0.0;
            try {
                if (fixed_dt_) {
                    out.phi = substep(phi, eval, dt);
                } else {
                    RealField coarse = substep(phi, eval, dt);
                    RealField half = substep(phi, eval, 0.5 * dt);
                    StateEval eh = evaluate_state(half);
                    out.phi = substep(half, eh, 0.5 * dt);
                    double m = 0.0;
                    for (std::size_t p = 0; p < coarse.size(); ++p)
                        m = std::max(m, std::abs(coarse.v[p] - out.phi.v[p]));
                    err = m;
                }
                out.eval = evaluate_state(out.phi);
            } catch (const NonAdmissibleError& e) {
                admissible = false;
                fail_detail = e.what();
            }

            const double tol = cfg_.tolerance * scale;
            if (admissible && (fixed_dt_ || err <= tol)) {
                out.dt_used = dt;
                out.dt_next = fixed_dt_ ? dt : next_dt(dt, err, tol);
                return out;
            }

            ++rejected;
            dt *= 0.5;
            if (dt < cfg_.dt_min * (1.0 - 1e-12)) {
                std::string why = admissible
                    ? "error estimate " + std::to_string(err) + " above tolerance at dt_min"
                    : "inadmissible metric during step: " + fail_detail;
                throw StepFailureError(t, dt, why);
            }
        }
    }

    double next_dt(double dt, double err, double tol) {
        const int p = order(cfg_.scheme);
        const double r = std::max(err / tol, 1e-10);
        const double ki = 0.7 / (p + 1);
        const double kp = 0.4 / (p + 1);
        double fac = 0.9 * std::pow(r, -ki) * std::pow(err_ratio_prev_ / r, kp);
        fac = std::min(std::max(fac, 0.2), 5.0);
        err_ratio_prev_ = r;
        return std::min(std::max(dt * fac, cfg_.dt_min), cfg_.dt_max);
    }
};

// Least-squares exponential decay rate of Ca over the records with
// t0 <= t <= t1: fits log Ca = a - delta * t.
struct DecayFit {
    double delta = 0.0;
    double residual = 0.0; // rms misfit of log Ca
    int count = 0;
};

inline DecayFit decay_rate_fit(const std::vector<DiagnosticsRecord>& records, double t0,
                               double t1) {
    std::vector<double> ts, ys;
    for (const auto& r : records) {
        if (r.t < t0 || r.t > t1) continue;
        if (!(r.Ca > 0.0))
            throw NonPositiveEnergyError("energy not positive at t = " + std::to_string(r.t));
        ts.push_back(r.t);
        ys.push_back(std::log(r.Ca));
    }
    if (ts.size() < 10)
        throw InsufficientDataError("decay fit needs at least 10 records in the window, got " +
                                    std::to_string(ts.size()));
    const double n = static_cast<double>(ts.size());
    double tm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) { tm += ts[i]; ym += ys[i]; }
    tm /= n; ym /= n;
    double stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        stt += (ts[i] - tm) * (ts[i] - tm);
        sty += (ts[i] - tm) * (ys[i] - ym);
    }
    if (!(stt > 0.0)) throw InsufficientDataError("decay fit window has no time spread");
    DecayFit f;
    f.delta = -sty / stt;
    f.count = static_cast<int>(ts.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double fit = ym + (sty / stt) * (ts[i] - tm);
        ss += (ys[i] - fit) * (ys[i] - fit);
    }
    f.residual = std::sqrt(ss / n);
    return f;
}

// Defect of the energy dissipation identity over uniformly spaced records:
// centered time differences of Ca_mod against -2 * dissip, normalized.
struct IdentityCheck {
    double defect = 0.0;
    bool flat = false; // both sides vanished; nothing to compare
};

inline IdentityCheck dissipation_identity_check(const std::vector<DiagnosticsRecord>& records) {
    if (records.size() < 3)
        throw InsufficientDataError("identity check needs at least 3 records");
    const double h = records[1].t - records[0].t;
    if (!(h > 0.0)) throw InsufficientDataError("records not increasing in time");
    for (std::size_t i = 1; i + 1 < records.size(); ++i) {
        const double hi = records[i + 1].t - records[i].t;
        if (std::abs(hi - h) > 1e-9 * h)
            throw InsufficientDataError("identity check needs uniformly spaced records");
    }
    double amax = 0.0;
    for (const auto& r : records)
        amax = std::max(amax, std::max(std::abs(r.Ca_mod), std::abs(r.dissip)));
    IdentityCheck c;
    if (amax < 1e-30) {
        c.flat = true;
        return c;
    }
    for (std::size_t i = 1; i + 1 < records.size(); ++i) {
        const double rate = (records[i + 1].Ca_mod - records[i - 1].Ca_mod) / (2.0 * h);
        const double expect = -2.0 * records[i].dissip;
        const double d = std::abs(rate - expect) / (1.0 + 2.0 * records[i].dissip);
        c.defect = std::max(c.defect, d);
    }
    return c;
}

} // namespace calabi

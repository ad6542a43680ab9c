#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <calabi/calabi.hpp>

namespace fs = std::filesystem;

namespace {

using calabi::Json;

struct CommonOpts {
    std::string config;
    std::string out = ".";
    int threads = 0; // 0: take CALABI_THREADS or 1
};

std::string read_text_file(const std::string& path) {
    calabi::detail::FileHandle f(path, "rb");
    std::string text;
    char buf[65536];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof(buf), f.get())) > 0) text.append(buf, got);
    return text;
}

void write_text_file(const std::string& path, const std::string& text) {
    calabi::detail::FileHandle f(path, "wb");
    if (std::fwrite(text.data(), 1, text.size(), f.get()) != text.size())
        throw calabi::ConfigError("short write to '" + path + "'");
}

int resolve_threads(const CommonOpts& o) {
    int t = o.threads;
    if (t == 0)
        if (const char* env = std::getenv("CALABI_THREADS"); env && *env) t = std::atoi(env);
    if (t == 0) t = 1;
    if (t < 1) throw calabi::ConfigError("thread count must be at least 1");
    return t;
}

std::string out_path(const CommonOpts& o, const std::string& rel) {
    fs::path p(rel);
    if (p.is_absolute()) return rel;
    return (fs::path(o.out) / p).string();
}

void ensure_out_dir(const CommonOpts& o) {
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) throw calabi::ConfigError("cannot create output directory '" + o.out + "'");
}

void write_report(const CommonOpts& o, const std::string& rel, const Json& report) {
    write_text_file(out_path(o, rel), report.dump(2) + "\n");
}

std::string report_name(const calabi::Scenario& sc, const char* fallback) {
    return sc.output.report.empty() ? std::string(fallback) : sc.output.report;
}

calabi::Scenario load_scenario(const CommonOpts& o) {
    return calabi::parse_scenario_text(read_text_file(o.config));
}

int halt_exit_code(calabi::HaltCause cause) {
    switch (cause) {
        case calabi::HaltCause::TEndReached:
        case calabi::HaltCause::Stationary: return 0;
        case calabi::HaltCause::StepFailureHalt:
        case calabi::HaltCause::NonAdmissibleHalt: return 3;
    }
    return 1;
}

Json run_report(const calabi::RunResult& res, int threads) {
    Json report{{"cause", calabi::halt_cause_name(res.cause)},
                {"cause_detail", res.cause_detail},
                {"t_final", res.t_final},
                {"steps_accepted", res.steps_accepted},
                {"steps_rejected", res.steps_rejected},
                {"records", res.records.size()},
                {"Ca_mod_initial", res.Ca_mod_initial},
                {"monotone", res.monotone},
                {"max_energy_increase", res.max_energy_increase},
                {"threads", threads},
                {"execution", "serial"}};
    if (!res.records.empty()) {
        const auto& last = res.records.back();
        report["Ca_final"] = last.Ca;
        report["Ca_mod_final"] = last.Ca_mod;
        report["V_final"] = last.V;
        report["sup_ric_final"] = last.sup_ric;
    }
    return report;
}

int cmd_run(const CommonOpts& o) {
    const int threads = resolve_threads(o);
    calabi::Scenario sc = load_scenario(o);
    ensure_out_dir(o);
    calabi::TorusGrid grid = sc.grid();
    calabi::RealField phi0 = calabi::build_initial(grid, sc.initial);
    calabi::FlowEngine engine(grid, sc.integrator);
    calabi::RunResult res = engine.run(phi0);

    calabi::write_csv(out_path(o, sc.output.series), res.records);
    if (!sc.output.final_snapshot.empty())
        calabi::write_snapshot(out_path(o, sc.output.final_snapshot), res.phi_final);
    Json report = run_report(res, threads);
    report["command"] = "run";
    write_report(o, report_name(sc, "report.json"), report);
    return halt_exit_code(res.cause);
}

int cmd_curvature(const CommonOpts& o) {
    const int threads = resolve_threads(o);
    calabi::Scenario sc = load_scenario(o);
    ensure_out_dir(o);
    calabi::TorusGrid grid = sc.grid();
    calabi::RealField phi = calabi::build_initial(grid, sc.initial);
    calabi::StateEval eval = calabi::evaluate_state(phi);
    calabi::CompactnessReport cr = calabi::compactness_report(eval.m, eval.curv);
    calabi::JensenResult jr = calabi::jensen_check(eval.m);
    Json report{{"command", "curvature"},
                {"threads", threads},
                {"V", eval.gi.V},
                {"S", eval.gi.S},
                {"Rbar", eval.gi.Rbar},
                {"Ca", eval.gi.Ca},
                {"Ca_mod", eval.gi.Ca_mod},
                {"sup_R", calabi::sup_abs(eval.curv.scalar)},
                {"sup_ric", cr.sup_ric},
                {"sup_phi", cr.sup_phi},
                {"lambda_min", cr.lambda_min},
                {"lambda_max", cr.lambda_max},
                {"sup_F", cr.sup_F},
                {"inf_F", cr.inf_F},
                {"mean_F", cr.mean_F},
                {"sup_lap_phi", cr.sup_lap_phi},
                {"sup_lap_F", cr.sup_lap_F},
                {"w2p8", cr.w2p8},
                {"jensen_lhs", jr.lhs},
                {"jensen_rhs", jr.rhs},
                {"jensen_margin", jr.margin},
                {"dissipation", calabi::dissipation(eval.m, eval.curv.scalar)}};
    write_report(o, report_name(sc, "curvature.json"), report);
    return 0;
}

int cmd_spectrum(const CommonOpts& o) {
    const int threads = resolve_threads(o);
    calabi::Scenario sc = load_scenario(o);
    ensure_out_dir(o);
    calabi::TorusGrid grid = sc.grid();
    calabi::RealField phi = calabi::build_initial(grid, sc.initial);
    calabi::HermitianMetricField m = calabi::assemble_metric(phi);
    calabi::EigenReport er = calabi::lowest_eigenvalue(m);
    Json report{{"command", "spectrum"},
                {"threads", threads},
                {"lambda1", er.lambda},
                {"rayleigh_residual", er.rayleigh_residual},
                {"iterations", er.iterations}};
    write_report(o, report_name(sc, "spectrum.json"), report);
    return 0;
}

int cmd_futaki(const CommonOpts& o) {
    const int threads = resolve_threads(o);
    calabi::Scenario sc = load_scenario(o);
    ensure_out_dir(o);
    calabi::TorusGrid grid = sc.grid();
    calabi::RealField phi = calabi::build_initial(grid, sc.initial);
    calabi::StateEval eval = calabi::evaluate_state(phi);
    calabi::RealField rho = eval.curv.scalar;
    for (double& x : rho.v) x -= eval.gi.Rbar;
    calabi::GreenSolution green = calabi::green_solve(eval.m, rho);
    Json values = Json::array();
    for (int j = 0; j < grid.n(); ++j) {
        const calabi::Complex f = calabi::futaki(eval.m, green, j);
        values.push_back(Json::array({f.real(), f.imag()}));
    }
    Json report{{"command", "futaki"},
                {"threads", threads},
                {"f", values},
                {"green_residual", green.residual},
                {"green_iterations", green.iterations},
                {"scale", std::sqrt(std::max(eval.gi.Ca, 0.0) * eval.gi.V)}};
    write_report(o, report_name(sc, "futaki.json"), report);
    return 0;
}

int cmd_desing(const CommonOpts& o) {
    const int threads = resolve_threads(o);
    calabi::DesingConfig cfg = calabi::parse_desing_config_text(read_text_file(o.config));
    ensure_out_dir(o);
    calabi::DiscGrid disc(cfg.Nd, cfg.punctured);
    std::vector<double> phi = calabi::build_disc_potential(disc, cfg);
    calabi::DesingResult res = calabi::desingularize(disc, phi, cfg.Rbar, cfg.cg_tol);
    Json report{{"command", "desing"},
                {"threads", threads},
                {"Nd", cfg.Nd},
                {"h", disc.h()},
                {"punctured", cfg.punctured},
                {"energy", res.solution.energy},
                {"residual", res.solution.residual},
                {"residual_rel", res.solution.residual_rel},
                {"iterations", res.solution.iterations},
                {"lambda_e", res.witness.lambda_e},
                {"Lambda_e", res.witness.Lambda_e},
                {"sup_v", res.sup_v},
                {"threshold", res.threshold},
                {"pass", res.sup_v <= res.threshold}};
    if (!cfg.u0_out.empty()) {
        calabi::SnapshotData s{1, static_cast<std::uint32_t>(cfg.Nd), res.solution.u0};
        calabi::write_snapshot(out_path(o, cfg.u0_out), s);
    }
    if (!cfg.v_out.empty()) {
        calabi::SnapshotData s{1, static_cast<std::uint32_t>(cfg.Nd), res.v};
        calabi::write_snapshot(out_path(o, cfg.v_out), s);
    }
    write_report(o, cfg.report, report);
    std::cout << "sup_v " << calabi::format_g17(res.sup_v) << " threshold "
              << calabi::format_g17(res.threshold) << (res.sup_v <= res.threshold ? " ok" : " high")
              << "\n";
    return 0;
}

int cmd_check(const CommonOpts& o) {
    const int threads = resolve_threads(o);
    calabi::Scenario sc = load_scenario(o);
    ensure_out_dir(o);
    calabi::TorusGrid grid = sc.grid();
    calabi::RealField phi0 = calabi::build_initial(grid, sc.initial);
    calabi::FlowEngine engine(grid, sc.integrator);
    calabi::RunResult res = engine.run(phi0);
    calabi::write_csv(out_path(o, sc.output.series), res.records);

    Json checks = Json::array();
    bool all_ok = true;
    auto add = [&](const std::string& name, bool ok, double value, double bound) {
        checks.push_back(
            Json{{"name", name}, {"ok", ok}, {"value", value}, {"bound", bound}});
        all_ok = all_ok && ok;
        std::cout << (ok ? "PASS " : "FAIL ") << name << " value "
                  << calabi::format_g17(value) << " bound " << calabi::format_g17(bound)
                  << "\n";
    };

    if (res.records.empty()) {
        add("records_present", false, 0.0, 1.0);
    } else {
        const double V0 = res.records.front().V;
        double v_drift = 0.0, s_drift = 0.0, jensen_min = 0.0, source_max = 0.0;
        for (const auto& r : res.records) {
            v_drift = std::max(v_drift, std::abs(r.V - V0) / V0);
            s_drift = std::max(s_drift, std::abs(r.S) / V0);
            jensen_min = std::min(jensen_min, r.jensen_margin);
            source_max = std::max(source_max, std::abs(r.mean_source));
        }
        add("volume_conserved", v_drift <= 1e-10, v_drift, 1e-10);
        add("mean_curvature_zero", s_drift <= 1e-10, s_drift, 1e-10);
        add("energy_monotone", res.monotone, res.max_energy_increase,
            1e-10 * res.Ca_mod_initial);
        add("jensen_margin", jensen_min >= -1e-10, jensen_min, -1e-10);
        add("mean_source_drift", source_max <= 1e-10, source_max, 1e-10);
        add("run_completed", res.cause == calabi::HaltCause::TEndReached ||
                                 res.cause == calabi::HaltCause::Stationary,
            static_cast<double>(halt_exit_code(res.cause)), 0.0);
        if (sc.check.decay_rate) {
            const double t1 = sc.check.fit_t1 > 0.0 ? sc.check.fit_t1 : res.t_final;
            try {
                calabi::DecayFit fit = calabi::decay_rate_fit(res.records, sc.check.fit_t0, t1);
                const double rel = std::abs(fit.delta - *sc.check.decay_rate) /
                                   std::abs(*sc.check.decay_rate);
                add("decay_rate", rel <= sc.check.decay_rel_tol, fit.delta,
                    *sc.check.decay_rate);
            } catch (const std::exception& e) {
                std::cout << "FAIL decay_rate " << e.what() << "\n";
                checks.push_back(Json{{"name", "decay_rate"}, {"ok", false}, {"error", e.what()}});
                all_ok = false;
            }
        }
    }

    Json report = run_report(res, threads);
    report["command"] = "check";
    report["checks"] = checks;
    report["all_ok"] = all_ok;
    write_report(o, report_name(sc, "check.json"), report);
    return all_ok ? 0 : 1;
}

int dispatch(const std::function<int()>& body) {
    try {
        return body();
    } catch (const calabi::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const calabi::InvalidFieldError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const calabi::NonAdmissibleError& e) {
        std::cerr << "halt: " << e.what() << "\n";
        return 3;
    } catch (const calabi::StepFailureError& e) {
        std::cerr << "halt: " << e.what() << "\n";
        return 3;
    } catch (const calabi::EllipticityLostError& e) {
        std::cerr << "halt: " << e.what() << "\n";
        return 3;
    } catch (const calabi::NoConvergenceError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 4;
    } catch (const calabi::IndefiniteFormError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config, "scenario file (JSON)")->required();
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--threads", o.threads, "worker threads (accepted; execution is serial)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for a fourth-order curvature flow on flat tori"};
    app.require_subcommand(1);
    CommonOpts opts;

    CLI::App* c_run = app.add_subcommand("run", "integrate a flow scenario");
    CLI::App* c_curv = app.add_subcommand("curvature", "one-shot geometry report");
    CLI::App* c_spec = app.add_subcommand("spectrum", "lowest stability eigenvalue");
    CLI::App* c_futaki = app.add_subcommand("futaki", "holomorphic character of the scenario");
    CLI::App* c_desing = app.add_subcommand("desing", "disc singularity-removal pipeline");
    CLI::App* c_check = app.add_subcommand("check", "run a scenario and verify invariants");
    for (CLI::App* c : {c_run, c_curv, c_spec, c_futaki, c_desing, c_check})
        add_common(c, opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return 2;
    }

    if (c_run->parsed()) return dispatch([&] { return cmd_run(opts); });
    if (c_curv->parsed()) return dispatch([&] { return cmd_curvature(opts); });
    if (c_spec->parsed()) return dispatch([&] { return cmd_spectrum(opts); });
    if (c_futaki->parsed()) return dispatch([&] { return cmd_futaki(opts); });
    if (c_desing->parsed()) return dispatch([&] { return cmd_desing(opts); });
    if (c_check->parsed()) return dispatch([&] { return cmd_check(opts); });
    std::cerr << app.help() << "\n";
    return 2;
}

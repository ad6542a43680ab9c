#include <catch2/catch_amalgamated.hpp>

#include <calabi/calabi.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace calabi;
namespace fs = std::filesystem;

namespace {

struct CommandResult {
    int exit_code = -1;
    std::string output; // stdout and stderr interleaved
};

CommandResult run_command(const std::string& cmd) {
    CommandResult res;
    std::string full = cmd + " 2>&1";
    FILE* pipe = popen(full.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf;
    while (std::size_t got = std::fread(buf.data(), 1, buf.size(), pipe))
        res.output.append(buf.data(), got);
    int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::string cli() { return std::string(CALABI_CLI_PATH); }

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("calabi_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    REQUIRE(out.good());
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kFlatRun = R"({
  "grid": {"n": 1, "N": 16},
  "initial": {"type": "zero"},
  "integrator": {"t_end": 0.05, "dt_init": 0.01, "halt_on_stationary": false},
  "output": {"series": "series.csv", "report": "report.json"}
})";

} // namespace

TEST_CASE("g17 formatting round-trips doubles", "[cli]") {
    for (double x : {0.1, 1.0 / 3.0, 1e-17, 12345.6789, -2.5e300}) {
        std::string s = format_g17(x);
        CHECK(std::stod(s) == x);
    }
}

TEST_CASE("csv lines carry thirteen columns in header order", "[cli]") {
    DiagnosticsRecord r;
    r.t = 0.5;
    r.Ca = 1.25;
    r.dt = 0.125;
    std::string line = csv_line(r);
    int commas = 0;
    for (char c : line) commas += c == ',';
    CHECK(commas == 12);
    CHECK(line.substr(0, 4) == "0.5,");
    CHECK(line.find("1.25") != std::string::npos);
    std::string header(kCsvHeader);
    CHECK(header == "t,Ca,Cam,V,S,dissip,lam,Lam,sup_phi,sup_ric,sup_F,tail,dt");
}

TEST_CASE("snapshot files round-trip bit-exactly", "[cli]") {
    fs::path dir = fresh_dir("snap");
    TorusGrid g(1, 16);
    RealField f(g);
    for (std::size_t p = 0; p < f.size(); ++p)
        f.v[p] = std::sin(0.37 * static_cast<double>(p)) * 1.0e-3 + 1.0 / 3.0;
    std::string path = (dir / "field.snap").string();
    write_snapshot(path, f);
    RealField back = load_torus_snapshot(path);
    REQUIRE(back.size() == f.size());
    for (std::size_t p = 0; p < f.size(); ++p) CHECK(back.v[p] == f.v[p]);
    // writing again yields identical bytes
    std::string path2 = (dir / "field2.snap").string();
    write_snapshot(path2, f);
    CHECK(read_text(path) == read_text(path2));
}

TEST_CASE("snapshot reader rejects corrupted headers", "[cli]") {
    fs::path dir = fresh_dir("snapbad");
    TorusGrid g(1, 16);
    std::string path = (dir / "field.snap").string();
    write_snapshot(path, RealField(g));
    std::string bytes = read_text(path);
    // wrong magic
    std::string bad = bytes;
    bad[0] = 'X';
    write_text(dir / "bad1.snap", bad);
    CHECK_THROWS_AS(read_snapshot((dir / "bad1.snap").string()), ConfigError);
    // truncated payload
    write_text(dir / "bad2.snap", bytes.substr(0, bytes.size() - 9));
    CHECK_THROWS_AS(read_snapshot((dir / "bad2.snap").string()), ConfigError);
    // missing file
    CHECK_THROWS_AS(read_snapshot((dir / "absent.snap").string()), ConfigError);
}

TEST_CASE("scenario parser rejects unknown keys and bad values", "[cli]") {
    CHECK_THROWS_AS(parse_scenario_text("{\"grid\": {\"n\": 1, \"N\": 16}, \"boost\": 2}"),
                    ConfigError);
    CHECK_THROWS_AS(parse_scenario_text("{\"grid\": {\"n\": 3, \"N\": 16}}"), ConfigError);
    CHECK_THROWS_AS(parse_scenario_text("not json at all"), ConfigError);
    CHECK_THROWS_AS(parse_scenario_text(
                        "{\"grid\": {\"n\": 1, \"N\": 16}, "
                        "\"initial\": {\"type\": \"zero\"}, "
                        "\"integrator\": {\"dt_minn\": 1}}"),
                    ConfigError);
    CHECK_THROWS_AS(parse_scenario_text(
                        "{\"grid\": {\"n\": 1, \"N\": 16}, "
                        "\"initial\": {\"type\": \"warp\"}}"),
                    ConfigError);
    Scenario s = parse_scenario_text(kFlatRun);
    CHECK(s.n == 1);
    CHECK(s.N == 16);
    CHECK(s.integrator.t_end == 0.05);
    CHECK_FALSE(s.integrator.halt_on_stationary);
}

TEST_CASE("mode initial data places single fourier modes", "[cli]") {
    Scenario s = parse_scenario_text(R"({
      "grid": {"n": 1, "N": 16},
      "initial": {"type": "modes", "modes": [{"k": [1, 0], "amplitude": 0.25}]}
    })");
    RealField phi = build_initial(s.grid(), s.initial);
    TorusGrid g = s.grid();
    for (std::size_t p = 0; p < phi.size(); ++p) {
        double x = g.coordinate(g.multi_index(p)[0]);
        CHECK_THAT(phi.v[p], Catch::Matchers::WithinAbs(0.25 * std::cos(x), 1e-13));
    }
    // wrong k length is a config error
    CHECK_THROWS_AS(parse_scenario_text(R"({
      "grid": {"n": 1, "N": 16},
      "initial": {"type": "modes", "modes": [{"k": [1, 0, 0, 0], "amplitude": 0.25}]}
    })"),
                    ConfigError);
}

TEST_CASE("random spectrum construction is deterministic and mean-free", "[cli]") {
    TorusGrid g(2, 8);
    RandomSpectrumSpec spec;
    spec.amplitude = 0.3;
    spec.decay = 3.0;
    spec.seed = 99;
    RealField a = build_random_spectrum(g, spec);
    RealField b = build_random_spectrum(g, spec);
    for (std::size_t p = 0; p < a.size(); ++p) CHECK(a.v[p] == b.v[p]);
    CHECK(std::abs(mean(a)) < 1e-13);
    spec.seed = 100;
    RealField c = build_random_spectrum(g, spec);
    double diff = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p)
        diff = std::max(diff, std::abs(a.v[p] - c.v[p]));
    CHECK(diff > 1e-3);
}

TEST_CASE("cli rejects unknown flags with usage on exit 2", "[cli]") {
    CommandResult r = run_command(cli() + " run --config x.json --frobnicate");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("Usage") != std::string::npos);
    CommandResult r2 = run_command(cli() + " warp");
    CHECK(r2.exit_code == 2);
}

TEST_CASE("cli run completes a flat scenario and writes outputs", "[cli]") {
    fs::path dir = fresh_dir("flatrun");
    write_text(dir / "run.json", kFlatRun);
    CommandResult r = run_command(cli() + " run --config " + (dir / "run.json").string() +
                                  " --out " + dir.string());
    INFO(r.output);
    CHECK(r.exit_code == 0);
    std::string csv = read_text(dir / "series.csv");
    CHECK(csv.rfind("t,Ca,Cam,V,S,dissip,lam,Lam,sup_phi,sup_ric,sup_F,tail,dt\n", 0) == 0);
    std::string rep = read_text(dir / "report.json");
    CHECK(rep.find("\"cause\"") != std::string::npos);
    CHECK(rep.find("t_end_reached") != std::string::npos);
}

TEST_CASE("cli run is byte-deterministic across repeats", "[cli]") {
    fs::path a = fresh_dir("det_a");
    fs::path b = fresh_dir("det_b");
    std::string cfg = R"({
      "grid": {"n": 1, "N": 16},
      "initial": {"type": "random-spectrum", "amplitude": 0.2, "decay": 3.5, "seed": 7},
      "integrator": {"t_end": 0.02, "dt_init": 0.005}
    })";
    write_text(a / "run.json", cfg);
    write_text(b / "run.json", cfg);
    CommandResult ra = run_command(cli() + " run --config " + (a / "run.json").string() +
                                   " --out " + a.string());
    CommandResult rb = run_command(cli() + " run --config " + (b / "run.json").string() +
                                   " --out " + b.string());
    INFO(ra.output);
    CHECK(ra.exit_code == 0);
    CHECK(rb.exit_code == 0);
    CHECK(read_text(a / "series.csv") == read_text(b / "series.csv"));
}

TEST_CASE("cli reports config errors with exit 2", "[cli]") {
    fs::path dir = fresh_dir("badcfg");
    write_text(dir / "bad.json", "{\"grid\": {\"n\": 7, \"N\": 16}}");
    CommandResult r = run_command(cli() + " run --config " + (dir / "bad.json").string() +
                                  " --out " + dir.string());
    CHECK(r.exit_code == 2);
    write_text(dir / "bad2.json", "{\"grid\": {\"n\": 1, \"N\": 16}, \"volume\": 3}");
    CommandResult r2 = run_command(cli() + " run --config " + (dir / "bad2.json").string() +
                                   " --out " + dir.string());
    CHECK(r2.exit_code == 2);
    CommandResult r3 = run_command(cli() + " run --config " + (dir / "absent.json").string());
    CHECK(r3.exit_code == 2);
}

TEST_CASE("cli halts with exit 3 on non-admissible initial data", "[cli]") {
    fs::path dir = fresh_dir("nonadm");
    write_text(dir / "run.json", R"({
      "grid": {"n": 1, "N": 16},
      "initial": {"type": "modes", "modes": [{"k": [1, 0], "amplitude": 5.0}]},
      "integrator": {"t_end": 0.1, "dt_init": 0.01}
    })");
    CommandResult r = run_command(cli() + " run --config " + (dir / "run.json").string() +
                                  " --out " + dir.string());
    INFO(r.output);
    CHECK(r.exit_code == 3);
    // partial outputs are still written
    CHECK(fs::exists(dir / "report.json"));
    std::string rep = read_text(dir / "report.json");
    CHECK(rep.find("non_admissible") != std::string::npos);
}

TEST_CASE("cli curvature summarizes a potential", "[cli]") {
    fs::path dir = fresh_dir("curv");
    write_text(dir / "cfg.json", R"({
      "grid": {"n": 1, "N": 32},
      "initial": {"type": "modes", "modes": [{"k": [1, 0], "amplitude": 1.0}]}
    })");
    CommandResult r = run_command(cli() + " curvature --config " + (dir / "cfg.json").string() +
                                  " --out " + dir.string());
    INFO(r.output);
    CHECK(r.exit_code == 0);
    std::string rep = read_text(dir / "curvature.json");
    CHECK(rep.find("\"Ca\"") != std::string::npos);
    CHECK(rep.find("\"lambda_min\"") != std::string::npos);
}

TEST_CASE("cli spectrum reports the flat eigenvalue", "[cli]") {
    fs::path dir = fresh_dir("spectrum");
    write_text(dir / "cfg.json", R"({
      "grid": {"n": 1, "N": 16},
      "initial": {"type": "zero"}
    })");
    CommandResult r = run_command(cli() + " spectrum --config " + (dir / "cfg.json").string() +
                                  " --out " + dir.string());
    INFO(r.output);
    CHECK(r.exit_code == 0);
    std::string rep = read_text(dir / "spectrum.json");
    CHECK(rep.find("\"lambda1\"") != std::string::npos);
    CHECK(rep.find("0.0625") != std::string::npos);
}

TEST_CASE("cli desing accepts the flat disc and writes its report", "[cli]") {
    fs::path dir = fresh_dir("desing");
    write_text(dir / "cfg.json", R"({
      "disc": {"Nd": 65, "punctured": true},
      "potential": {"type": "zero"}
    })");
    CommandResult r = run_command(cli() + " desing --config " + (dir / "cfg.json").string() +
                                  " --out " + dir.string());
    INFO(r.output);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("ok") != std::string::npos);
    std::string rep = read_text(dir / "desing.json");
    CHECK(rep.find("\"sup_v\"") != std::string::npos);
    CHECK(rep.find("\"pass\": true") != std::string::npos);
}

TEST_CASE("cli check passes the flat invariant battery", "[cli]") {
    fs::path dir = fresh_dir("check");
    write_text(dir / "cfg.json", R"({
      "grid": {"n": 1, "N": 16},
      "initial": {"type": "random-spectrum", "amplitude": 0.15, "decay": 3.5, "seed": 3},
      "integrator": {"t_end": 0.05, "dt_init": 0.005}
    })");
    CommandResult r = run_command(cli() + " check --config " + (dir / "cfg.json").string() +
                                  " --out " + dir.string());
    INFO(r.output);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("PASS") != std::string::npos);
    CHECK(r.output.find("FAIL") == std::string::npos);
    std::string rep = read_text(dir / "check.json");
    CHECK(rep.find("\"all_ok\": true") != std::string::npos);
}

TEST_CASE("cli futaki stays at rounding level for torus metrics", "[cli]") {
    fs::path dir = fresh_dir("futaki");
    write_text(dir / "cfg.json", R"({
      "grid": {"n": 1, "N": 32},
      "initial": {"type": "random-spectrum", "amplitude": 0.3, "decay": 3.0, "seed": 12}
    })");
    CommandResult r = run_command(cli() + " futaki --config " + (dir / "cfg.json").string() +
                                  " --out " + dir.string());
    INFO(r.output);
    CHECK(r.exit_code == 0);
    std::string rep = read_text(dir / "futaki.json");
    CHECK(rep.find("\"futaki\"") != std::string::npos);
}

TEST_CASE("snapshot initial data feeds a run through the cli", "[cli]") {
    fs::path dir = fresh_dir("snapinit");
    TorusGrid g(1, 16);
    RealField phi(g);
    for (std::size_t p = 0; p < phi.size(); ++p)
        phi.v[p] = 0.2 * std::cos(g.coordinate(g.multi_index(p)[0]));
    write_snapshot((dir / "init.snap").string(), phi);
    write_text(dir / "run.json", std::string(R"({
      "grid": {"n": 1, "N": 16},
      "initial": {"type": "snapshot", "path": ")") +
                                     (dir / "init.snap").string() + R"("},
      "integrator": {"t_end": 0.02, "dt_init": 0.005},
      "output": {"series": "series.csv", "report": "report.json",
                 "final_snapshot": "final.snap"}
    })");
    CommandResult r = run_command(cli() + " run --config " + (dir / "run.json").string() +
                                  " --out " + dir.string());
    INFO(r.output);
    CHECK(r.exit_code == 0);
    RealField fin = load_torus_snapshot((dir / "final.snap").string());
    CHECK(fin.size() == phi.size());
    CHECK(sup_abs(fin) < sup_abs(phi)); // the flow contracts the amplitude
}

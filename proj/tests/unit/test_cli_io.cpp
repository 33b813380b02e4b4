#include "stifflab/cli_io.hpp"
#include "stifflab/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace stifflab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    fs::path p = fs::temp_directory_path() / ("stifflab_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir, const Json& j)
{
    fs::path p = dir / "config.json";
    std::ofstream(p) << j.dump(2);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string validation_key(const Json& j)
{
    try {
        parse_scenario(j);
    } catch (const ValidationError& e) {
        return e.key();
    }
    return "";
}

Json brownian(const Json& phase)
{
    return Json{{"box_half_width", 2}, {"grid", {{"h", 0.05}}}, {"phase", phase}};
}

} // namespace

TEST_CASE("fnv1a reference values")
{
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("scenario parsing")
{
    Scenario s = parse_scenario(brownian({{"kind", "snapping"}, {"gamma_bar", 4}}));
    REQUIRE(std::holds_alternative<phase::Snapping>(s.phase));
    CHECK(std::get<phase::Snapping>(s.phase).kappa == doctest::Approx(0.5));
    CHECK(s.box_half_width == 2.0);
    CHECK(s.grid.h == 0.05);

    Scenario k = parse_scenario(brownian({{"kind", "snapping"}, {"kappa", 3}}));
    CHECK(std::get<phase::Snapping>(k.phase).kappa == 3.0);

    Scenario e = parse_scenario(brownian({{"kind", "eps_barrier"}, {"epsilon", 0.1},
                                          {"barrier", {{"family", "lejay"}, {"kappa", 1}, {"alpha_exponent", -1}}}}));
    REQUIRE(std::holds_alternative<phase::EpsBarrier>(e.phase));
    CHECK(std::get<phase::EpsBarrier>(e.phase).barrier.total_resistance() == doctest::Approx(2.0));

    Json cusp = brownian("separate");
    cusp["conductivity"] = {{"kind", "power_cusp"}, {"beta", 0.5}};
    CHECK(parse_scenario(cusp).resistance.kind == MeasureSpec::Kind::Conductivity);
}

TEST_CASE("validation errors name the key")
{
    CHECK(validation_key(brownian({{"kind", "snapping"}})) == "scenario.phase");
    CHECK(validation_key(brownian({{"kind", "snapping"}, {"kappa", 1}, {"gamma_bar", 2}})) == "scenario.phase");
    CHECK(validation_key(brownian({{"kind", "snapping"}, {"kappa", -1}})) == "scenario.phase.kappa");
    CHECK(validation_key(brownian({{"kind", "warp"}})) == "scenario.phase.kind");
    CHECK(validation_key(brownian({{"kind", "skew"}, {"kappa", 1}, {"alpha_skew", 1.5}})) == "scenario.phase.alpha_skew");
    CHECK(validation_key(brownian({{"kind", "eps_barrier"}, {"epsilon", 3}})) == "scenario.phase.epsilon");

    Json cusp = brownian("separate");
    cusp["conductivity"] = {{"kind", "power_cusp"}, {"beta", 1.2}};
    CHECK(validation_key(cusp) == "scenario.conductivity.beta");

    Json tab = brownian("separate");
    tab["speed"] = {{"kind", "tabulated"}, {"x", {-2, 0, 2}}, {"cdf", {0, 1, 1}}};
    CHECK(validation_key(tab) == "scenario.speed.cdf");

    Json grid = brownian("separate");
    grid["grid"]["h"] = "fine";
    CHECK(validation_key(grid) == "scenario.grid.h");

    try {
        parse_scenario(brownian({{"kind", "eps_barrier"}, {"epsilon", 3}}));
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("L=2") != std::string::npos);
    }
}

TEST_CASE("tabulated measure from CSV")
{
    fs::path dir = scratch("tab");
    std::ofstream(dir / "m.csv") << "x,cdf\n-3,0\n0,1.5\n3,3\n";
    Json j = brownian("separate");
    j["speed"] = {{"kind", "tabulated"}, {"csv", "m.csv"}};
    Scenario s = parse_scenario(j, dir);
    CHECK(s.speed.x.size() == 3);
    MonotoneMeasure m = s.speed.build(-2.0, 2.0);
    CHECK(m.mass(0.0, 2.0) == doctest::Approx(1.0));

    std::ofstream(dir / "bad.csv") << "x,cdf\n-3,0\n0,1.5\n-1,3\n";
    j["speed"]["csv"] = "bad.csv";
    CHECK_THROWS_AS(parse_scenario(j, dir), ValidationError);
}

TEST_CASE("CSV writer round trip and append mode")
{
    fs::path dir = scratch("csv");
    {
        CsvWriter w(dir / "a.csv", {"name", "value", "count"});
        w.field(std::string("plain")).field(0.1).field(std::size_t{3});
        w.end_row();
        w.field(std::string("with,comma \"q\"")).field(-1e-300).field(-7);
        w.end_row();
    }
    {
        CsvWriter w(dir / "a.csv", {"name", "value", "count"}, true);
        w.field(std::string("more")).field(2.5).field(1);
        w.end_row();
    }
    CsvTable t = read_csv(dir / "a.csv");
    CHECK(t.header == std::vector<std::string>{"name", "value", "count"});
    REQUIRE(t.rows.size() == 3);
    CHECK(std::stod(t.rows[0][1]) == 0.1);
    CHECK(t.rows[1][0] == "with,comma \"q\"");
    CHECK(std::stod(t.rows[1][1]) == -1e-300);
    CHECK(t.rows[2][0] == "more");
}

TEST_CASE("solve commands write artifacts and a manifest")
{
    fs::path dir = scratch("solve");
    Json cfg{{"seed", 3}, {"scenario", brownian("continuous")}, {"solve", {{"alpha", 1}, {"f", "gauss"}}}};
    CliFlags flags;
    flags.config = write_config(dir, cfg);
    flags.out_dir = dir / "out";
    std::ostringstream out;
    CHECK(cmd_solve(flags, "resolvent", out) == 0);
    CsvTable sol = read_csv(flags.out_dir / "solution.csv");
    CHECK(sol.header == std::vector<std::string>{"index", "x", "side", "f", "u"});
    CHECK(sol.rows.size() == 81);
    Json man = load_config(flags.out_dir / "manifest.json");
    CHECK(man["command"] == "solve-resolvent");
    CHECK(man["seeds"][0] == 3);
    for (const auto& o : man["outputs"])
        CHECK(fs::exists(o.get<std::string>()));

    Json heat{{"scenario", brownian({{"kind", "snapping"}, {"kappa", 2}})},
              {"heat", {{"dt", 1e-3}, {"t_end", 0.5}, {"snapshots", {0, 0.25, 0.5}}, {"u0", "indicator:0.5:1.5"}}}};
    flags.config = write_config(dir, heat);
    CHECK(cmd_solve(flags, "heat", out) == 0);
    CsvTable rep = read_csv(flags.out_dir / "report.csv");
    REQUIRE(rep.rows.size() == 3);
    double m0 = std::stod(rep.rows[0][2]);
    for (const auto& r : rep.rows) {
        CHECK(std::stod(r[2]) == doctest::Approx(m0).epsilon(1e-10));
        CHECK(std::stod(r[3]) + std::stod(r[4]) == doctest::Approx(m0).epsilon(1e-10));
    }
    CHECK(std::stod(rep.rows[2][3]) > 0.0);
    CsvTable snaps = read_csv(flags.out_dir / "snapshots.csv");
    CHECK(snaps.rows.size() == 3 * 82);
}

TEST_CASE("barrier wider than the box is a validation error citing L")
{
    fs::path dir = scratch("wide");
    Json cfg{{"scenario", {{"box_half_width", 1}, {"phase", {{"kind", "eps_barrier"}, {"epsilon", 2}}}}}};
    CliFlags flags;
    flags.config = write_config(dir, cfg);
    flags.out_dir = dir / "out";
    std::ostringstream out;
    try {
        cmd_solve(flags, "resolvent", out);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(exit_code_for(e) == 2);
        CHECK(std::string(e.what()).find("L=1") != std::string::npos);
    }
}

TEST_CASE("exit codes")
{
    CHECK(exit_code_for(ValidationError("k", "x")) == 2);
    CHECK(exit_code_for(DomainError("x")) == 2);
    CHECK(exit_code_for(ParameterError("x")) == 2);
    CHECK(exit_code_for(ResourceError("x")) == 2);
    CHECK(exit_code_for(NumericalError("x")) == 3);
    CHECK(exit_code_for(AssemblyError("x", 4)) == 3);
    CHECK(exit_code_for(InvariantViolation("x")) == 3);
}

TEST_CASE("sweep CSV is append-only per run id")
{
    fs::path dir = scratch("sweep");
    Json cfg{{"run_id", "r1"},
             {"scenario", {{"box_half_width", 3}, {"grid", {{"h", 0.02}}}}},
             {"sweep", {{"barrier", {{"family", "lejay"}, {"kappa", 1}, {"alpha_exponent", -1}}}, {"n_max", 3}, {"probes", {"gauss"}}, {"alphas", {1}}, {"tolerance", 1}}}};
    CliFlags flags;
    flags.config = write_config(dir, cfg);
    flags.out_dir = dir / "out";
    std::ostringstream out;
    CHECK(cmd_sweep(flags, out) == 0);
    CHECK(cmd_sweep(flags, out) == 0);
    CsvTable t = read_csv(flags.out_dir / "sweep_r1.csv");
    CHECK(t.header.size() == 13);
    CHECK(t.header[4] == "hypothesis_qty");
    CHECK(t.rows.size() == 8);
    CHECK(out.str().find("verdict r1 target=snapping") != std::string::npos);
}

TEST_CASE("mc: seed repeat is byte-identical; separate CTMC has no crossings")
{
    fs::path dir = scratch("mc");
    Json cfg{{"seed", 5},
             {"scenario", brownian({{"kind", "snapping"}, {"kappa", 2}})},
             {"mc", {{"engine", "snob"}, {"T", 0.2}, {"h", 1e-3}, {"n_paths", 300}, {"snapshots", {0.1, 0.2}},
                     {"cross_check", {{"f", "minus_side"}, {"t", 0.2}}}}}};
    CliFlags flags;
    flags.config = write_config(dir, cfg);
    std::ostringstream out;
    flags.out_dir = dir / "a";
    cmd_mc(flags, out);
    flags.out_dir = dir / "b";
    cmd_mc(flags, out);
    for (const char* f : {"events.csv", "snapshots.csv", "crosscheck.csv"})
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    CsvTable cc = read_csv(dir / "a" / "crosscheck.csv");
    CHECK(cc.header == std::vector<std::string>{"functional", "t", "mc_mean", "std_err", "pde_value", "z_score"});

    flags.seed = 6;
    flags.out_dir = dir / "c";
    cmd_mc(flags, out);
    CHECK(slurp(dir / "a" / "snapshots.csv") != slurp(dir / "c" / "snapshots.csv"));

    Json sep{{"scenario", brownian("separate")},
             {"mc", {{"engine", "ctmc"}, {"T", 1}, {"n_paths", 500}, {"x0", {{"side", "+"}, {"coord", 0}}}}}};
    flags.config = write_config(dir, sep);
    flags.out_dir = dir / "d";
    cmd_mc(flags, out);
    CsvTable ev = read_csv(dir / "d" / "events.csv");
    for (const auto& r : ev.rows)
        CHECK(r[2] != "crossing");
}

TEST_CASE("check battery passes on the Brownian scenario")
{
    fs::path dir = scratch("check");
    Json cfg{{"scenario", {{"box_half_width", 5}, {"grid", {{"nodes", 400}}}, {"phase", "separate"}}}};
    CliFlags flags;
    flags.config = write_config(dir, cfg);
    flags.out_dir = dir / "out";
    std::ostringstream out;
    CHECK(cmd_check(flags, out) == 0);
    CsvTable t = read_csv(flags.out_dir / "check.csv");
    for (const auto& r : t.rows)
        CHECK(r[3] == "true");
}

TEST_CASE("shipped sweep presets keep the hypothesis quantity decreasing")
{
    for (const char* name : {"lejay-semi", "lejay-impermeable", "lejay-permeable", "cantor-permeable", "power-cusp-semi"}) {
        fs::path p = fs::path(STIFFLAB_PRESET_DIR) / (std::string(name) + ".json");
        SweepSpec spec = parse_sweep(load_config(p), p.parent_path());
        SweepReport r = run_phase_sweep(spec);
        INFO(name);
        CHECK(r.hypothesis_decreasing);
        CHECK(r.pass());
    }
}

TEST_CASE("malformed JSON is a validation error")
{
    fs::path dir = scratch("bad");
    std::ofstream(dir / "x.json") << "{ \"scenario\": ";
    CHECK_THROWS_AS(load_config(dir / "x.json"), ValidationError);
}

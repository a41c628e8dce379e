// Key-value configuration parsing (comments, overrides, typed accessors,
// error reporting with line numbers, order-independent hashing against an
// independent FNV-1a oracle), experiment-config defaults and overrides,
// round-trip-exact CSV emission, and the closed-loop comparison metrics in
// cases with closed-form values.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <smpc/config.hpp>
#include <smpc/csv.hpp>
#include <smpc/experiments.hpp>
#include <smpc/norms.hpp>

#include "helpers.hpp"

#include <cstdint>
#include <cstdio>
#include <random>
#include <string>

using namespace smpc;
using namespace smpc_tests;

namespace {

// Straight FNV-1a over a byte string, written independently of the library.
std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const char c : s) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 1099511628211ULL;
    }
    return h;
}

bool throws_containing(const std::function<void()>& fn, const std::string& needle) {
    try {
        fn();
    } catch (const std::exception& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

}  // namespace

TEST_CASE("key-value lines parse with comments, whitespace, and overrides") {
    const auto kv = KeyValueConfig::from_string(
        "# full-line comment\n"
        "  mesh.h = 0.25   # trailing comment\n"
        "\n"
        "a.b=x\n"
        "a.b = y\n"
        "flag = true\n"
        "ranks = 1, 2,3\n");
    CHECK(kv.has("mesh.h"));
    CHECK(kv.get_double("mesh.h", -1.0) == 0.25);
    CHECK(kv.get_string("a.b", "") == "y"); // later assignment wins
    CHECK(kv.get_bool("flag", false));
    const auto ranks = kv.get_int_list("ranks", {});
    REQUIRE(ranks.size() == 3);
    CHECK(ranks[0] == 1);
    CHECK(ranks[1] == 2);
    CHECK(ranks[2] == 3);
    CHECK(kv.entries().size() == 4);

    // fallbacks for absent keys
    CHECK(kv.get_string("nope", "dflt") == "dflt");
    CHECK(kv.get_double("nope", 2.5) == 2.5);
    CHECK(kv.get_int("nope", -3) == -3);
    CHECK(kv.get_bool("nope", true));
    CHECK(kv.get_int_list("nope", {7}).at(0) == 7);

    // boolean spellings
    const auto bools = KeyValueConfig::from_string(
        "a=1\nb=yes\nc=on\nd=0\ne=no\nf=off\ng=false\n");
    CHECK(bools.get_bool("a", false));
    CHECK(bools.get_bool("b", false));
    CHECK(bools.get_bool("c", false));
    CHECK_FALSE(bools.get_bool("d", true));
    CHECK_FALSE(bools.get_bool("e", true));
    CHECK_FALSE(bools.get_bool("f", true));
    CHECK_FALSE(bools.get_bool("g", true));
}

TEST_CASE("malformed input reports its origin and line number") {
    CHECK(throws_containing([] { KeyValueConfig::from_string("ok = 1\nbroken line\n"); },
                            "<string>:2"));
    CHECK(throws_containing([] { KeyValueConfig::from_string(" = value\n"); },
                            "empty key"));
    CHECK(throws_containing([] { KeyValueConfig::from_file("/nonexistent/path.cfg"); },
                            "cannot open"));

    const auto kv = KeyValueConfig::from_string("x = abc\nb = maybe\nl = 1,zz\n");
    CHECK(throws_containing([&] { kv.get_double("x", 0.0); }, "not a number"));
    CHECK(throws_containing([&] { kv.get_int("x", 0); }, "not an integer"));
    CHECK(throws_containing([&] { kv.get_bool("b", false); }, "not a boolean"));
    CHECK(throws_containing([&] { kv.get_int_list("l", {}); }, "not an integer list"));
}

TEST_CASE("config hash matches an independent FNV-1a of the sorted serialization") {
    const auto kv = KeyValueConfig::from_string("c = x\na.b = 1\n");
    CHECK(kv.hash() == fnv1a("a.b=1\nc=x\n")); // entries sorted by key

    // insertion order does not matter
    const auto swapped = KeyValueConfig::from_string("a.b = 1\nc = x\n");
    CHECK(swapped.hash() == kv.hash());

    // any changed value changes the hash
    auto other = kv;
    other.set("c", "y");
    CHECK(other.hash() != kv.hash());
    auto extra = kv;
    extra.set("d", "");
    CHECK(extra.hash() != kv.hash());
}

TEST_CASE("experiment config keeps benchmark defaults and applies overrides") {
    const ExperimentConfig dflt = ExperimentConfig::from_config(KeyValueConfig::from_string(""));
    CHECK(dflt.benchmark.target_h == 0.2);
    CHECK(dflt.tau == 0.05);
    CHECK(dflt.t_end == 10.0);
    CHECK(dflt.switch_period == 1.25);
    CHECK(dflt.first_mode == 1);
    CHECK(dflt.num_nodes() == 201);
    CHECK(dflt.estimator_fom_rom == ControlEstimator::DeltaA);
    CHECK(dflt.estimator_rom_rom == ControlEstimator::TildeDeltaB);
    REQUIRE(dflt.tolerances.size() == 2);
    CHECK(dflt.tolerances[0] == 1e-2);
    CHECK(dflt.tolerances[1] == 1e-3);
    CHECK(dflt.openloop_ranks.front() == 5);
    CHECK(dflt.openloop_ranks.back() == 60);

    const ExperimentConfig ec = ExperimentConfig::from_config(KeyValueConfig::from_string(
        "mesh.h = 0.5\n"
        "time.tau = 0.1\n"
        "time.t_end = 2.0\n"
        "switching.period = 0.4\n"
        "cost.lambda = 0.3\n"
        "cost.c_l1 = 0.0\n"
        "mpc.horizon_steps = 6\n"
        "mpc.tol_control.base = 5e-3\n"
        "mpc.tol_control.decay = 0.9\n"
        "mpc.estimator.fom_rom = tilde_delta_b\n"
        "mpc.estimator.rom_rom = delta_b\n"
        "mpc.tolerances = 1e-1, 1e-4\n"
        "mpc.certify = true\n"
        "optimizer.max_iterations = 123\n"
        "openloop.ranks = 2,4\n"
        "seed = 7\n"
        "out_dir = results\n"));
    CHECK(ec.benchmark.target_h == 0.5);
    CHECK(ec.tau == 0.1);
    CHECK(ec.num_nodes() == 21); // 2.0 / 0.1 + 1, robust to FP division noise
    CHECK(ec.switch_period == 0.4);
    CHECK(ec.cost_template.lambda == 0.3);
    CHECK(ec.cost_template.c_l1 == 0.0);
    CHECK(ec.mpc.horizon_steps == 6);
    CHECK(ec.mpc.tol_control.base == 5e-3);
    CHECK(ec.mpc.tol_control.decay == 0.9);
    CHECK(ec.estimator_fom_rom == ControlEstimator::TildeDeltaB);
    CHECK(ec.estimator_rom_rom == ControlEstimator::DeltaB);
    REQUIRE(ec.tolerances.size() == 2);
    CHECK(ec.tolerances[0] == 1e-1);
    CHECK(ec.tolerances[1] == 1e-4);
    CHECK(ec.mpc.certify);
    CHECK(ec.mpc.optimizer.max_iterations == 123);
    REQUIRE(ec.openloop_ranks.size() == 2);
    CHECK(ec.openloop_ranks[1] == 4);
    CHECK(ec.seed == 7u);
    CHECK(ec.out_dir == "results");
}

TEST_CASE("estimator names round trip and unknown names are rejected") {
    for (const auto est :
         {ControlEstimator::DeltaA, ControlEstimator::DeltaB, ControlEstimator::TildeDeltaB})
        CHECK(parse_estimator(estimator_name(est)) == est);
    CHECK(throws_containing([] { parse_estimator("nonsense"); }, "unknown estimator"));
}

TEST_CASE("double formatting reproduces the exact binary value") {
    // strtod (unlike std::stod) also accepts correctly rounded subnormals
    const auto reparse = [](const std::string& s) { return std::strtod(s.c_str(), nullptr); };
    std::mt19937_64 gen(4711);
    std::uniform_real_distribution<double> mant(-1.0, 1.0);
    std::uniform_int_distribution<int> expo(-300, 300);
    for (int i = 0; i < 200; ++i) {
        const double v = std::ldexp(mant(gen), expo(gen));
        CHECK(reparse(format_double(v)) == v);
    }
    for (const double v : {0.0, 1.0 / 3.0, 0.1, -2.5e17, 5e-324})
        CHECK(reparse(format_double(v)) == v);
}

TEST_CASE("csv writer and reader round trip rows and columns") {
    const std::string path = "test_config_tmp.csv";
    {
        CsvWriter w(path, {"a", "b", "c"});
        w.write_row(std::vector<std::string>{"1", "two", "3"});
        w.write_row(std::vector<double>{0.5, 1.0 / 3.0, -7.0});
        CHECK(throws_containing([&] { w.write_row(std::vector<std::string>{"x"}); },
                                "width mismatch"));
    }
    const CsvTable table = read_csv(path);
    REQUIRE(table.header.size() == 3);
    CHECK(table.column("a") == 0);
    CHECK(table.column("b") == 1);
    CHECK(table.column("zzz") == -1);
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0][1] == "two");
    CHECK(std::stod(table.rows[1][1]) == 1.0 / 3.0);
    std::remove(path.c_str());
}

TEST_CASE("trajectory csv round trip is bitwise exact") {
    TimeGrid grid(0.0, 1.3, 7);
    std::mt19937 gen(99);
    const Trajectory traj = random_trajectory(grid, 4, gen);
    const std::string path = "test_config_traj.csv";
    write_trajectory_csv(path, traj, 0x1234abcdULL, 42u);

    const Trajectory back = read_trajectory_csv(path);
    CHECK(back.grid.t_start == grid.t_start);
    CHECK(back.grid.t_end == grid.t_end);
    REQUIRE(back.num_nodes() == grid.num_nodes);
    REQUIRE(back.dim() == 4);
    for (int k = 0; k < grid.num_nodes; ++k)
        for (int j = 0; j < 4; ++j) CHECK(back[k](j) == traj[k](j));

    const CsvTable raw = read_csv(path);
    CHECK(raw.column("config_hash") >= 0);
    CHECK(raw.rows[0][static_cast<std::size_t>(raw.column("seed"))] == "42");
    std::remove(path.c_str());
}

TEST_CASE("closed-loop metrics match closed-form values") {
    auto ops = make_random_system(6, 2, 2, 2, 77);
    TimeGrid grid(0.0, 1.0, 5);
    std::mt19937 gen(78);

    MPCResult fom;
    fom.state = random_trajectory(grid, 6, gen);
    fom.output = random_trajectory(grid, 2, gen);
    fom.control = random_trajectory(grid, 2, gen, /*zero_node0=*/true);
    fom.cost = 2.0;

    // scaled copies have scale-free relative errors
    MPCResult red;
    red.state = Trajectory(grid, 6);
    red.output = Trajectory(grid, 2);
    red.control = Trajectory(grid, 2);
    for (int k = 0; k < grid.num_nodes; ++k) {
        red.state[k] = 2.0 * fom.state[k];
        red.output[k] = 3.0 * fom.output[k];
        red.control[k] = 1.5 * fom.control[k];
    }
    red.cost = 1.2 * fom.cost;

    const SchemeMetrics m = compute_metrics(ops, fom, red);
    CHECK(m.e_theta == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.e_y == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(m.e_u == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m.e_J == doctest::Approx(0.2).epsilon(1e-12));

    // constant trajectories collapse the quadrature: the state metric becomes
    // the ratio of two energy norms computed directly from the matrix
    const Vec e1 = Vec::Unit(6, 0), e2 = Vec::Unit(6, 1);
    MPCResult cf = fom, cr = red;
    for (int k = 0; k < grid.num_nodes; ++k) {
        cf.state[k] = e1;
        cr.state[k] = e1 + 0.7 * e2;
    }
    const SchemeMetrics mc = compute_metrics(ops, cf, cr);
    const double expected =
        std::sqrt(energy_norm_sq(Vec(0.7 * e2), ops.v_inner) / energy_norm_sq(e1, ops.v_inner));
    CHECK(mc.e_theta == doctest::Approx(expected).epsilon(1e-12));

    // mismatched grids and zero references are rejected
    MPCResult shorter = red;
    shorter.state = Trajectory(TimeGrid(0.0, 1.0, 4), 6);
    CHECK_THROWS_AS((void)compute_metrics(ops, fom, shorter), std::invalid_argument);
    MPCResult zero = fom;
    for (int k = 0; k < grid.num_nodes; ++k) zero.control[k].setZero();
    CHECK_THROWS_AS((void)compute_metrics(ops, zero, red), std::runtime_error);
}

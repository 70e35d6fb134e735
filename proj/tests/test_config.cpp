#include "ckh/config.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace ckh;

TEST_CASE("empty config resolves to the defaults") {
    const auto c = parse_config("");
    CHECK(c.dim == 2);
    CHECK(c.n == 64);
    CHECK(c.kappa == 1.0);
    CHECK(c.lambda_coeff == -2.0 / 3.0);
    CHECK(c.gamma == 1.4);
    CHECK(c.diagnostics.k_lo == 4);
    CHECK(c.diagnostics.k_star == 4);
    CHECK(c.diagnostics.k_hi == 21);
    CHECK(c.diagnostics.q1 == doctest::Approx(1.68));
    CHECK(c.p1 == 1.4);
    const auto f = c.fluid();
    CHECK(f.lambda == doctest::Approx(-2.0 / 3.0 * c.mu));
    CHECK(f.mu == c.mu);
}

TEST_CASE("config values are parsed") {
    const auto c = parse_config(R"(
; comment
[grid]
dim = 3
n = 32
period = 1.0
[fluid]
gamma = 1.6667
mu = 0.02
[forcing]
mode = trig_sum
envelope = ramp
ramp_time = 0.5
terms = 1 0 0 0 0.1 0 0.0; 0 2 0 0.2 0 0 1.5
[initial]
preset = random-band
seed = 42
[run]
horizon = 0.5
dt = 0.01
[diagnostics]
space_shifts = 1, 3
time_lags = 2
[sweep]
mu_list = 0.01, 0.005
reference_mu = 0.001
[output]
dir = results
)");
    CHECK(c.dim == 3);
    CHECK(c.period == 1.0);
    CHECK(c.gamma == 1.6667);
    CHECK(c.forcing.mode == ForcingSpec::Mode::trig_sum);
    CHECK(c.forcing.envelope == ForcingSpec::Envelope::ramp);
    REQUIRE(c.forcing.terms.size() == 2);
    CHECK(c.forcing.terms[1].wavevector[1] == 2);
    CHECK(c.forcing.terms[1].amplitude[0] == 0.2);
    CHECK(c.forcing.terms[1].phase == 1.5);
    CHECK(c.ic.preset == "random-band");
    CHECK(c.ic.seed == 42);
    REQUIRE(c.dt.has_value());
    CHECK(*c.dt == 0.01);
    CHECK(c.diagnostics.space_shifts == std::vector<int>{1, 3});
    CHECK(c.diagnostics.time_lags == std::vector<int>{2});
    CHECK(c.output_dir == "results");
    const auto plan = c.sweep_plan();
    CHECK(plan.mu == std::vector<double>{0.01, 0.005});
    REQUIRE(plan.reference_mu.has_value());
    CHECK(*plan.reference_mu == 0.001);
}

TEST_CASE("emitted config round trips") {
    const auto c = parse_config("[fluid]\nmu = 0.1\n[sweep]\nmu0 = 0.3\nratio = 0.25\nlength = 3\n[initial]\nseed = 9\n");
    const auto text = emit_config(c);
    const auto back = parse_config(text);
    CHECK(back == c);
    CHECK(emit_config(back) == text);
    CHECK(back.mu == 0.1);
    CHECK(back.ic.seed == 9);
    CHECK_FALSE(parse_config("[fluid]\nmu = 0.2\n") == c);
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse_config("[fluid]\ngamma = 1.0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[fluid]\ngamma = 0.8\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[fluid]\nviscosity = 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[colour]\nred = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("mu = 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[grid]\nn = sixty\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[grid]\nn = 33\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[grid]\ndim = 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[fluid]\nmu = 0\n"), ConfigError);
    CHECK_NOTHROW(parse_config("[fluid]\nmu = 0\n[run]\neuler_reference = true\n"));
    CHECK_THROWS_AS(parse_config("[fluid]\nmu = 0.1\nlambda_coeff = -2.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[initial]\npreset = vortex-street\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[diagnostics]\nk_star = 40\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[diagnostics]\nk_lo = 5\nk_hi = 6\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[diagnostics]\nq2 = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[sweep]\nratio = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[sweep]\nmu_list = 0.01, 0.02\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[run]\neuler_reference = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[forcing]\nmode = trig_sum\nterms = 1 0 0\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/ckh.ini"), std::runtime_error);
}

TEST_CASE("config files") {
    const auto path = std::filesystem::temp_directory_path() / "ckh_config_test.ini";
    {
        std::ofstream out(path);
        out << "[grid]\nn = 16\n";
    }
    CHECK(load_config(path.string()).n == 16);
    std::filesystem::remove(path);
}

TEST_CASE("shipped configs are valid") {
    int seen = 0;
    for (const auto& e : std::filesystem::directory_iterator(std::filesystem::path(CKH_SOURCE_DIR) / "configs")) {
        if (e.path().extension() != ".ini") continue;
        CAPTURE(e.path().string());
        CHECK_NOTHROW(load_config(e.path().string()));
        ++seen;
    }
    CHECK(seen >= 2);
}

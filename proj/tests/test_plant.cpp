#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "tankdiag/errors.hpp"
#include "tankdiag/plant.hpp"

using namespace tankdiag;

namespace {

PlantParams noiseless() {
  PlantParams p;
  p.noise_std = {0, 0, 0, 0};
  return p;
}

// Classical RK4 on the nominal tank ODEs with a fine step; test-only reference.
std::array<double, 2> rk4_reference(const PlantParams& p, std::array<double, 2> x, double u, double horizon,
                                    double h) {
  auto f = [&](const std::array<double, 2>& s) {
    const double a = std::sqrt(std::max(s[0], 0.0));
    const double b = std::sqrt(std::max(s[1], 0.0));
    return std::array<double, 2>{-p.d1 * a + p.d2 * u, p.d3 * a - p.d4 * b};
  };
  const auto steps = static_cast<std::size_t>(std::llround(horizon / h));
  for (std::size_t i = 0; i < steps; ++i) {
    const auto k1 = f(x);
    const auto k2 = f({x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]});
    const auto k3 = f({x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]});
    const auto k4 = f({x[0] + h * k3[0], x[1] + h * k3[1]});
    for (int j = 0; j < 2; ++j) x[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return x;
}

}  // namespace

TEST_CASE("empty system stays empty") {
  auto p = noiseless();
  p.x0 = std::array<double, 2>{0.0, 0.0};
  const auto ts = simulate(p, std::vector<double>(200, 0.0), {}, 200, 1);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    CHECK(ts.u[i] == 0.0);
    CHECK(ts.y1[i] == 0.0);
    CHECK(ts.y2[i] == 0.0);
    CHECK(ts.y3[i] == 0.0);
    CHECK(ts.y4[i] == 0.0);
  }
}

TEST_CASE("constant input converges to the inflow/outflow balance") {
  auto p = noiseless();
  p.x0 = std::array<double, 2>{0.5, 0.2};
  const double u0 = 1.0;
  const std::size_t n = 3000;
  const auto ts = simulate(p, std::vector<double>(n, u0), {}, n, 1);
  const double x1_star = std::pow(p.d2 * u0 / p.d1, 2);
  const double x2_star = std::pow(p.d3 * std::sqrt(x1_star) / p.d4, 2);
  const auto ref = rk4_reference(p, *p.x0, u0, static_cast<double>(n - 1), 0.01);
  CHECK(ref[0] == doctest::Approx(x1_star).epsilon(1e-6));
  CHECK(ts.x1.back() == doctest::Approx(x1_star).epsilon(1e-6));
  CHECK(ts.x2.back() == doctest::Approx(x2_star).epsilon(1e-6));
  CHECK(equilibrium(p, u0)[0] == doctest::Approx(x1_star));
}

TEST_CASE("Euler step converges towards the RK reference when dt halves") {
  auto coarse = noiseless();
  coarse.x0 = std::array<double, 2>{0.3, 0.1};
  auto fine = coarse;
  fine.dt = coarse.dt / 2;
  const double u0 = 1.2, horizon = 60.0;
  const auto n_coarse = static_cast<std::size_t>(horizon / coarse.dt) + 1;
  const auto n_fine = static_cast<std::size_t>(horizon / fine.dt) + 1;
  const auto a = simulate(coarse, std::vector<double>(n_coarse, u0), {}, n_coarse, 1);
  const auto b = simulate(fine, std::vector<double>(n_fine, u0), {}, n_fine, 1);
  const auto ref = rk4_reference(coarse, *coarse.x0, u0, horizon - coarse.dt, 1e-3);
  const auto ref_fine = rk4_reference(coarse, *coarse.x0, u0, horizon - fine.dt, 1e-3);
  const double err_coarse = std::abs(a.x1.back() - ref[0]);
  const double err_fine = std::abs(b.x1.back() - ref_fine[0]);
  CHECK(err_fine < err_coarse);
  CHECK(std::abs(a.x1.back() - b.x1.back()) < 0.05);  // discretization tolerance
}

TEST_CASE("leak lowers tank one after onset") {
  const auto p = PlantParams{};
  const std::size_t n = 3000;
  const auto u = input_profile({}, n, 11);
  const auto nominal = simulate(p, u, {}, n, 5);
  const auto leak = simulate(p, u, {FaultKind::leak_tank1, 0.05, 1000, 1}, n, 5);
  for (std::size_t t = 0; t <= 1000; ++t) CHECK(leak.x1[t] == nominal.x1[t]);
  for (std::size_t t = 1001; t < n; ++t) CHECK(leak.x1[t] < nominal.x1[t]);
}

TEST_CASE("inject_fault") {
  const PlantParams p;
  const PlantRates rates{0.3, -0.1};
  const SensorValues y{1.0, 2.0, 0.1, 0.2};
  SUBCASE("identity before onset") {
    for (auto kind : {FaultKind::leak_tank1, FaultKind::clog_outflow2, FaultKind::sensor_bias}) {
      const FaultScenario f{kind, 0.5, 10, 2};
      const auto r = inject_fault(rates, p, 1.0, 1.0, f, 9);
      CHECK(r.dx1 == rates.dx1);
      CHECK(r.dx2 == rates.dx2);
      CHECK(inject_fault(y, f, 9) == y);
    }
  }
  SUBCASE("full clog stops the tank-2 outflow") {
    const FaultScenario f{FaultKind::clog_outflow2, 1.0, 0, 1};
    const double x1 = 2.0, x2 = 3.0;
    const auto r = inject_fault(nominal_rates(p, x1, x2, 0.5), p, x1, x2, f, 0);
    CHECK(r.dx2 == doctest::Approx(p.d3 * std::sqrt(x1)));
    CHECK(inject_fault(nominal_sensors(p, x1, x2), f, 0)[3] == 0.0);
  }
  SUBCASE("leak decreases dx1") {
    const FaultScenario f{FaultKind::leak_tank1, 0.05, 0, 1};
    CHECK(inject_fault(rates, p, 2.0, 1.0, f, 5).dx1 < rates.dx1);
  }
  SUBCASE("sensor bias hits only the chosen channel") {
    const FaultScenario f{FaultKind::sensor_bias, 0.25, 0, 3};
    const auto out = inject_fault(y, f, 0);
    CHECK(out[0] == y[0]);
    CHECK(out[1] == y[1]);
    CHECK(out[2] == y[2] + 0.25);
    CHECK(out[3] == y[3]);
  }
}

TEST_CASE("noise-free sensors satisfy the outflow relations") {
  const auto p = noiseless();
  const std::size_t n = 1500;
  const auto ts = simulate(p, input_profile({}, n, 3), {}, n, 9);
  for (std::size_t t = 0; t < n; ++t) {
    CHECK(ts.y3[t] == doctest::Approx(p.d5 * std::sqrt(ts.y1[t])).epsilon(1e-12));
    CHECK(ts.y4[t] == doctest::Approx(p.d6 * std::sqrt(ts.y2[t])).epsilon(1e-12));
  }
}

TEST_CASE("levels stay non-negative for all seeds and fault sizes") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (double m : {0.0, 0.05, 0.5, 2.0}) {
      for (auto kind : {FaultKind::leak_tank1, FaultKind::clog_outflow2}) {
        PlantParams p;
        p.x0 = std::array<double, 2>{0.0, 0.0};
        ProfileOptions opts;
        opts.kind = ProfileKind::filtered_random;
        opts.low = 0.0;
        const auto ts = simulate(p, input_profile(opts, 800, seed), {kind, std::min(m, 1.0), 100, 1}, 800, seed);
        for (std::size_t t = 0; t < ts.size(); ++t) {
          CHECK(ts.x1[t] >= 0.0);
          CHECK(ts.x2[t] >= 0.0);
        }
      }
    }
  }
}

TEST_CASE("simulate is deterministic and guards against blow-up") {
  const PlantParams p;
  const auto u = input_profile({}, 500, 2);
  const auto a = simulate(p, u, {}, 500, 42);
  const auto b = simulate(p, u, {}, 500, 42);
  CHECK(a.y1 == b.y1);
  CHECK(a.y4 == b.y4);

  PlantParams wild = p;
  wild.d2 = 1e5;
  wild.state_bound = 1e3;
  CHECK_THROWS_AS(simulate(wild, std::vector<double>(100, 1.0), {}, 100, 1), NumericalBlowup);

  PlantParams bad = p;
  bad.d3 = 0.0;
  CHECK_THROWS_AS(simulate(bad, u, {}, 10, 1), std::invalid_argument);
}

TEST_CASE("input profiles") {
  SUBCASE("constant") {
    ProfileOptions o;
    o.kind = ProfileKind::constant;
    o.level = 1.0;
    CHECK(input_profile(o, 5, 0) == std::vector<double>{1, 1, 1, 1, 1});
  }
  SUBCASE("steps respect the minimum dwell") {
    ProfileOptions o;
    o.min_dwell = 40;
    o.max_dwell = 90;
    const auto u = input_profile(o, 5000, 17);
    std::size_t run = 1;
    std::vector<std::size_t> runs;
    for (std::size_t i = 1; i < u.size(); ++i) {
      if (u[i] == u[i - 1]) {
        ++run;
      } else {
        runs.push_back(run);
        run = 1;
      }
    }
    REQUIRE(runs.size() > 10);
    for (auto r : runs) CHECK(r >= o.min_dwell);
    for (double v : u) CHECK((v >= o.low && v <= o.high));
  }
  SUBCASE("filtered random is strongly autocorrelated") {
    ProfileOptions o;
    o.kind = ProfileKind::filtered_random;
    o.smoothing = 0.99;
    const auto u = input_profile(o, 4000, 5);
    double mean = 0;
    for (double v : u) mean += v;
    mean /= static_cast<double>(u.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      den += (u[i] - mean) * (u[i] - mean);
      if (i > 0) num += (u[i] - mean) * (u[i - 1] - mean);
    }
    CHECK(num / den > 0.9);
    for (double v : u) CHECK(v >= 0.0);
  }
  SUBCASE("same seed, same sequence") {
    CHECK(input_profile({}, 700, 9) == input_profile({}, 700, 9));
  }
}

TEST_CASE("CSV round trip is bit-exact and errors name the column") {
  const PlantParams p;
  const auto ts = simulate(p, input_profile({}, 300, 1), {}, 300, 8);
  std::stringstream buf;
  write_csv(buf, ts);
  const auto back = read_csv(buf);
  CHECK(back.t == ts.t);
  CHECK(back.u == ts.u);
  CHECK(back.y1 == ts.y1);
  CHECK(back.y3 == ts.y3);
  CHECK(back.x2 == ts.x2);

  std::stringstream missing("t,u,y1,y2,y4\n0,1,1,1,1\n");
  try {
    read_csv(missing, "data.csv");
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("y3") != std::string::npos);
  }
  std::stringstream garbage("t,u,y1,y2,y3,y4\n0,1,1,x,1,1\n");
  CHECK_THROWS_AS(read_csv(garbage), ParseError);
}

TEST_CASE("scenario and plant configs") {
  const auto cfg = Config::parse_string(
      "[plant]\nd1 = 0.2\nnoise_std = 0.02\n[scenario]\nkind = sensor_bias\nsensor = y3\nmagnitude = 0.1\nonset = 50\n");
  const auto p = PlantParams::from_config(cfg);
  CHECK(p.d1 == 0.2);
  CHECK(p.noise_std[2] == 0.02);
  const auto f = FaultScenario::from_config(cfg);
  CHECK(f.kind == FaultKind::sensor_bias);
  CHECK(f.sensor == 3);
  CHECK(f.onset_sample == 50);
  CHECK_THROWS_AS(PlantParams::from_config(Config::parse_string("[plant]\nd7 = 1\n")), ParseError);
  CHECK_THROWS_AS(FaultScenario::from_config(Config::parse_string("[scenario]\nkind = flood\n")), ParseError);
}

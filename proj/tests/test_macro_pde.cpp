#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "spinscale/fourier.hpp"
#include "spinscale/free_energy.hpp"
#include "spinscale/macro_pde.hpp"
#include "spinscale/model.hpp"

namespace {

using namespace spinscale;

constexpr double pi = 3.14159265358979324;

MacroFlux linear_flux() {
  MacroFlux f;
  f.w = [](double z) { return z; };
  f.dw = [](double) { return 1.0; };
  return f;
}

MacroFlux double_well_flux() {
  static const MacroFlux cached = [] {
    Model m;
    m.n_sites = 8;  // placeholder size; the limit curve ignores it
    m.potential = SitePotential{PotentialKind::cosine, 1.0, 1.2};
    m.kernel.range = 1;
    m.kernel.h = {0.2};
    m.kernel.margin = 0.1;
    const auto curve = tabulate_free_energy(FreeEnergyFunction::limit(m));
    return flux_from_limit(build_legendre_table(curve));
  }();
  return cached;
}

std::vector<double> cosine_profile(int n, double mean, double amp, int k) {
  std::vector<double> z(std::size_t(n), 0.0);
  for (int j = 0; j < n; ++j)
    z[std::size_t(j)] = mean + amp * std::cos(2.0 * pi * k * (j + 0.5) / n);
  return z;
}

double mode_amplitude(const std::vector<double>& z, int k) {
  const int n = int(z.size());
  double acc = 0.0;
  for (int j = 0; j < n; ++j)
    acc += z[std::size_t(j)] * std::cos(2.0 * pi * k * (j + 0.5) / n);
  return 2.0 * acc / n;
}

}  // namespace

TEST_CASE("linear flux reproduces the discrete implicit heat factor exactly",
          "[macro_pde]") {
  const int n = 32;
  MacroConfig cfg;
  cfg.dt = 2e-4;
  const double horizon = 0.01;
  const auto run =
      solve_macro_pde(linear_flux(), cosine_profile(n, 0.3, 0.2, 1), horizon,
                      cfg, {0.0, horizon});
  REQUIRE(run.states.size() == 2);
  REQUIRE(run.steps == 50);
  REQUIRE(run.halvings == 0);

  // Backward steps divide each mode by (1 + dt lambda); with the flux
  // identity the whole run is that scalar recursion, so agreement is
  // limited only by the Newton residual target.
  const double lambda = SecondDifference(n).eigenvalue(1);
  const double expected =
      0.2 / std::pow(1.0 + cfg.dt * lambda, double(run.steps));
  const double a1 = mode_amplitude(run.states.back().zeta, 1);
  REQUIRE(a1 == Catch::Approx(expected).margin(1e-9));
  REQUIRE(cell_mean(run.states.back().zeta) ==
          Catch::Approx(0.3).margin(1e-13));
}

TEST_CASE("grid refinement converges to the continuum decay at second order",
          "[macro_pde]") {
  // Tiny steps isolate the spatial error; doubling the grid must shrink
  // the defect against the continuum amplitude by about a factor of four.
  MacroConfig cfg;
  cfg.dt = 5e-6;
  const double horizon = 0.01;
  const double exact = 0.2 * std::exp(-4.0 * pi * pi * horizon);
  double defect[2] = {0.0, 0.0};
  const int grids[2] = {16, 32};
  for (int i = 0; i < 2; ++i) {
    const auto run = solve_macro_pde(
        linear_flux(), cosine_profile(grids[i], 0.0, 0.2, 1), horizon, cfg);
    defect[i] = std::abs(mode_amplitude(run.states.back().zeta, 1) - exact);
  }
  REQUIRE(defect[1] < defect[0]);
  const double ratio = defect[0] / defect[1];
  REQUIRE(ratio > 3.5);
  REQUIRE(ratio < 4.5);
}

TEST_CASE("constant data is a fixed point of the nonlinear solver",
          "[macro_pde]") {
  const auto flux = double_well_flux();
  MacroConfig cfg;
  cfg.dt = 1e-3;
  const std::vector<double> z0(48, 0.4);
  const auto run = solve_macro_pde(flux, z0, 0.05, cfg, {0.0, 0.02, 0.05});
  for (const auto& s : run.states)
    for (double v : s.zeta) REQUIRE(v == Catch::Approx(0.4).margin(1e-12));
}

TEST_CASE("nonlinear run conserves mass and flattens the profile",
          "[macro_pde]") {
  const auto flux = double_well_flux();
  const int n = 64;
  std::vector<double> z0(std::size_t(n), 0.0);
  for (int j = 0; j < n; ++j)
    z0[std::size_t(j)] = 0.1 + 0.5 * std::cos(2.0 * pi * (j + 0.5) / n) +
                         0.2 * std::sin(4.0 * pi * (j + 0.5) / n);
  const double mass0 = cell_mean(z0);
  MacroConfig cfg;
  cfg.dt = 2e-4;
  const auto run = solve_macro_pde(flux, z0, 0.2, cfg, {0.0, 0.01, 0.05, 0.2});
  REQUIRE(run.states.size() == 4);
  for (const auto& s : run.states) {
    REQUIRE(cell_mean(s.zeta) == Catch::Approx(mass0).margin(1e-13));
    for (double v : s.zeta) REQUIRE(std::isfinite(v));
  }
  double dev0 = 0.0, dev1 = 0.0;
  for (int j = 0; j < n; ++j) {
    dev0 = std::max(dev0, std::abs(run.states.front().zeta[std::size_t(j)] - mass0));
    dev1 = std::max(dev1, std::abs(run.states.back().zeta[std::size_t(j)] - mass0));
  }
  REQUIRE(dev1 < 0.5 * dev0);
}

TEST_CASE("time stepping is first order accurate against itself",
          "[macro_pde]") {
  const auto flux = double_well_flux();
  const int n = 64;
  const double horizon = 0.02;
  std::vector<double> z0(std::size_t(n), 0.0);
  for (int j = 0; j < n; ++j)
    z0[std::size_t(j)] = 0.2 + 0.4 * std::cos(2.0 * pi * (j + 0.5) / n);

  auto final_state = [&](double dt) {
    MacroConfig cfg;
    cfg.dt = dt;
    return solve_macro_pde(flux, z0, horizon, cfg).states.back().zeta;
  };
  const auto ref = final_state(5e-5);
  const auto coarse = final_state(4e-4);
  const auto fine = final_state(2e-4);
  double ec = 0.0, ef = 0.0;
  for (int j = 0; j < n; ++j) {
    ec = std::max(ec, std::abs(coarse[std::size_t(j)] - ref[std::size_t(j)]));
    ef = std::max(ef, std::abs(fine[std::size_t(j)] - ref[std::size_t(j)]));
  }
  REQUIRE(ef > 0.0);
  const double rate = std::log2(ec / ef);
  REQUIRE(rate > 0.95);
  REQUIRE(rate < 1.8);
}

TEST_CASE("ordered initial data stay ordered", "[macro_pde]") {
  const auto flux = double_well_flux();
  const int n = 48;
  std::vector<double> lo(std::size_t(n), 0.0), hi(std::size_t(n), 0.0);
  for (int j = 0; j < n; ++j) {
    const double th = (j + 0.5) / n;
    lo[std::size_t(j)] = 0.2 + 0.3 * std::cos(2.0 * pi * th);
    hi[std::size_t(j)] = lo[std::size_t(j)] + 0.15 + 0.05 * std::sin(2.0 * pi * th);
  }
  MacroConfig cfg;
  cfg.dt = 5e-4;
  const std::vector<double> times = {0.0, 0.005, 0.02, 0.08};
  const auto ra = solve_macro_pde(flux, lo, 0.08, cfg, times);
  const auto rb = solve_macro_pde(flux, hi, 0.08, cfg, times);
  REQUIRE(ra.states.size() == rb.states.size());
  for (std::size_t s = 0; s < ra.states.size(); ++s)
    for (int j = 0; j < n; ++j)
      REQUIRE(ra.states[s].zeta[std::size_t(j)] <=
              rb.states[s].zeta[std::size_t(j)] + 1e-12);
}

TEST_CASE("persistent Newton failure is reported", "[macro_pde]") {
  MacroFlux bad;
  bad.w = [](double z) { return std::sqrt(z - 0.5); };  // NaN below 0.5
  bad.dw = [](double z) { return 0.5 / std::sqrt(z - 0.5); };
  MacroConfig cfg;
  cfg.dt = 1e-3;
  cfg.max_halvings = 8;
  const std::vector<double> z0(16, 0.0);
  REQUIRE_THROWS_WITH(solve_macro_pde(bad, z0, 0.01, cfg),
                      Catch::Matchers::ContainsSubstring("Newton"));
}

TEST_CASE("macro solver input validation", "[macro_pde]") {
  const auto flux = linear_flux();
  const std::vector<double> ok(16, 0.0);
  REQUIRE_THROWS_AS(solve_macro_pde(flux, {0.0, 0.0}, 1.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(solve_macro_pde(flux, ok, -1.0), std::invalid_argument);
  MacroConfig bad;
  bad.dt = 0.0;
  REQUIRE_THROWS_AS(solve_macro_pde(flux, ok, 1.0, bad),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(solve_macro_pde(flux, ok, 1.0, {}, {0.5, 0.2}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(solve_macro_pde(flux, ok, 1.0, {}, {2.0}),
                    std::invalid_argument);
}

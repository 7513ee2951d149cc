#include <catch2/catch_amalgamated.hpp>

#include "spinscale/kawasaki.hpp"
#include "spinscale/stats.hpp"
#include "oracles/nested_quadrature.hpp"

#include <cmath>
#include <vector>

using namespace spinscale;

namespace {

Model gaussian_chain(int n, double h1 = 0.0) {
  Model m;
  m.n_sites = n;
  if (h1 != 0.0) {
    m.kernel.range = 1;
    m.kernel.h = {h1};
    m.kernel.margin = 1.0 - 2.0 * std::abs(h1);
  }
  return m;
}

Model double_well_chain(int n, double h1 = 0.2) {
  Model m;
  m.n_sites = n;
  m.potential.kind = PotentialKind::cosine;
  m.potential.p1 = 1.0;
  m.potential.p2 = 1.2;
  m.kernel.range = 1;
  m.kernel.h = {h1};
  m.kernel.margin = 0.1;
  return m;
}

}  // namespace

TEST_CASE("zero time step is the identity", "[kawasaki]") {
  const Model m = double_well_chain(8);
  RngStream rng(3, 0);
  std::vector<double> x = {0.3, -0.2, 0.5, 0.1, -0.4, 0.2, 0.0, 0.6};
  const auto before = x;
  kawasaki_step(m, x, 0.0, rng);
  CHECK(x == before);
}

TEST_CASE("mean spin is a pathwise invariant", "[kawasaki]") {
  const Model m = double_well_chain(32);
  RngStream rng(7, 0);
  std::vector<double> x(32);
  for (int i = 0; i < 32; ++i) x[i] = 0.3 + 0.5 * std::cos(2.0 * 3.14159265358979324 * (i + 0.5) / 32.0);
  const double m0 = mean(x);
  const double dt = max_stable_dt(32);
  double worst = 0.0;
  for (int s = 0; s < 500; ++s) {
    const double before = mean(x);
    kawasaki_step(m, x, dt, rng);
    worst = std::max(worst, std::abs(mean(x) - before));
  }
  CHECK(worst <= 1e-12);
  CHECK(std::abs(mean(x) - m0) <= 1e-12);
}

TEST_CASE("stability bound and blow-up are enforced", "[kawasaki]") {
  const Model m = gaussian_chain(16);
  RngStream rng(9, 0);
  std::vector<double> x(16, 0.0);
  CHECK_THROWS(kawasaki_step(m, x, 2.0 * max_stable_dt(16), rng));

  std::vector<double> bad(16, 0.0);
  bad[0] = 1e308;  // drift overflows, the finiteness check must fire
  CHECK_THROWS(kawasaki_step(m, bad, max_stable_dt(16), rng));
}

TEST_CASE("stationary mode variance matches the quadratic closed form",
          "[kawasaki]") {
  // Independent Gaussian sites: the conserved dynamics keeps the standard
  // Gaussian conditioned on the mean invariant, so every mean-zero unit
  // direction has stationary variance 1.  Tracked on the k = 2 discrete
  // cosine direction over a long run.
  const int n = 32, k = 2;
  const Model m = gaussian_chain(n);
  const double dt = max_stable_dt(n);
  RngStream rng(11, 0);
  std::vector<double> x(n, 0.0);

  std::vector<double> v(n);
  const double pi = 3.14159265358979323846;
  for (int j = 0; j < n; ++j)
    v[j] = std::sqrt(2.0 / n) * std::cos(2.0 * pi * k * (j + 0.5) / n);

  const int burn = 20000, keep = 800000;
  for (int s = 0; s < burn; ++s) kawasaki_step(m, x, dt, rng);
  double acc = 0.0, acc2 = 0.0;
  for (int s = 0; s < keep; ++s) {
    kawasaki_step(m, x, dt, rng);
    double u = 0.0;
    for (int j = 0; j < n; ++j) u += v[j] * x[j];
    acc += u;
    acc2 += u * u;
  }
  const double var = acc2 / keep - (acc / keep) * (acc / keep);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("time averages match the constrained quadrature oracle",
          "[kawasaki]") {
  // Four double-well sites at mean 0.25: long-run time averages of the
  // first site against brute-force quadrature on the constraint plane.
  // A reduced step keeps the discretization bias below the error bars.
  const Model m = double_well_chain(4);
  const double mbar = 0.25;
  const double dt = max_stable_dt(4, 0.1);
  RngStream rng(13, 0);
  std::vector<double> x(4, mbar);

  const int burn = 20000, keep = 1000000, thin = 8;
  for (int s = 0; s < burn; ++s) kawasaki_step(m, x, dt, rng);
  std::vector<double> x1, x1sq;
  x1.reserve(keep / thin);
  x1sq.reserve(keep / thin);
  for (int s = 0; s < keep; ++s) {
    kawasaki_step(m, x, dt, rng);
    if (s % thin == 0) {
      x1.push_back(x[1]);
      x1sq.push_back(x[1] * x[1]);
    }
  }
  const auto r1 = batch_means(x1);
  const auto r2 = batch_means(x1sq);

  const double e1 = oracles::hyperplane_expectation(
      m, mbar, [](const std::vector<double>& z) { return z[1]; });
  const double e2 = oracles::hyperplane_expectation(
      m, mbar, [](const std::vector<double>& z) { return z[1] * z[1]; });
  CHECK(std::abs(r1.estimate - e1) <= 3.0 * r1.se + 0.01);
  CHECK(std::abs(r2.estimate - e2) <= 3.0 * r2.se + 0.01);
}

TEST_CASE("ensemble runs replay from the seed", "[kawasaki]") {
  const Model m = double_well_chain(16);
  const auto lifted = lift_profile(
      [](double th) { return 0.2 + 0.3 * std::cos(2.0 * 3.14159265358979324 * th); },
      16);
  SdeConfig cfg;
  cfg.dt = max_stable_dt(16);
  cfg.seed = 71;
  const std::vector<double> times = {0.0, 0.01, 0.02};

  const auto law = InitialLaw::deterministic_lift(lifted);
  const auto a = simulate_ensemble(m, law, cfg, 3, times);
  const auto b = simulate_ensemble(m, law, cfg, 3, times);
  for (int tr = 0; tr < 3; ++tr)
    for (std::size_t c = 0; c < times.size(); ++c)
      CHECK(a.trajectories[tr].points[c].x == b.trajectories[tr].points[c].x);
  CHECK(a.trajectories[0].points[2].x != a.trajectories[1].points[2].x);
}

TEST_CASE("local equilibrium start anchors the block means", "[kawasaki]") {
  const Model m = double_well_chain(16);
  const auto scheme = BlockScheme::balanced(16, 4);
  const auto lifted = lift_profile(
      [](double th) { return 0.1 + 0.4 * std::cos(2.0 * 3.14159265358979324 * th); },
      16);
  ChainConfig chain;
  chain.step = 0.15;
  chain.burn_in = 1500;
  SdeConfig cfg;
  cfg.dt = max_stable_dt(16);
  cfg.seed = 73;
  const auto ens = simulate_ensemble(
      m, InitialLaw::local_equilibrium_around(lifted, scheme, chain), cfg, 4,
      {0.0, 0.02});

  const auto y = project_blocks(scheme, lifted);
  for (const auto& tr : ens.trajectories) {
    CHECK(constraint_violation(ConstraintSpec::fixed_blocks(scheme, y),
                               tr.points[0].x) <= 1e-12);
    // Later the blocks drift but the global mean cannot.
    CHECK(std::abs(mean(tr.points[1].x) - mean(lifted)) <= 1e-12);
    CHECK(tr.points[0].x != tr.points[1].x);
  }
  // Distinct trajectories draw distinct starts.
  CHECK(ens.trajectories[0].points[0].x != ens.trajectories[1].points[0].x);
}

TEST_CASE("ensemble mean follows the discrete heat decay", "[kawasaki]") {
  // Quadratic sites: the expectation evolves by the deterministic linear
  // flow, so the cosine amplitude decays at the operator's own modal rate.
  const int n = 32;
  const Model m = gaussian_chain(n);
  const double pi = 3.14159265358979323846;
  const double mbar = 0.2, a0 = 0.5;
  const auto lifted = lift_profile(
      [&](double th) { return mbar + a0 * std::cos(2.0 * pi * th); }, n);

  SdeConfig cfg;
  cfg.dt = max_stable_dt(n);
  cfg.seed = 79;
  const std::vector<double> times = {0.01, 0.05};
  const auto ens = simulate_ensemble(m, InitialLaw::deterministic_lift(lifted),
                                     cfg, 64, times);

  const double rate = SecondDifference(n).eigenvalue(1);
  for (std::size_t c = 0; c < times.size(); ++c) {
    std::vector<double> amps;
    for (const auto& tr : ens.trajectories) {
      double amp = 0.0;
      for (int j = 0; j < n; ++j)
        amp += tr.points[c].x[j] * std::cos(2.0 * pi * (j + 0.5) / n);
      amps.push_back(2.0 * amp / n);
    }
    const auto r = batch_means(amps);
    const double expect = a0 * std::exp(-rate * times[c]);
    CHECK(std::abs(r.estimate - expect) <= 3.0 * r.se);
  }
}

TEST_CASE("ensemble input validation", "[kawasaki]") {
  const Model m = gaussian_chain(8);
  SdeConfig cfg;
  cfg.dt = max_stable_dt(8);
  CHECK_THROWS(simulate_ensemble(
      m, InitialLaw::deterministic_lift({0.1, 0.2}), cfg, 1, {0.0}));
  SdeConfig bad = cfg;
  bad.dt = 0.0;
  CHECK_THROWS(simulate_ensemble(
      m, InitialLaw::deterministic_lift(std::vector<double>(8, 0.0)), bad, 1,
      {0.0}));
  CHECK_THROWS(simulate_ensemble(
      m, InitialLaw::deterministic_lift(std::vector<double>(8, 0.0)), cfg, 1,
      {0.02, 0.01}));
}

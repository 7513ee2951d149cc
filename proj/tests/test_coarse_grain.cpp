#include <catch2/catch_amalgamated.hpp>

#include "spinscale/coarse_grain.hpp"
#include "spinscale/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <utility>
#include <vector>

using namespace spinscale;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

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

ChainConfig quick_config(std::uint64_t seed, double step, int thinning,
                         int burn_in = 2000) {
  ChainConfig c;
  c.seed = seed;
  c.step = step;
  c.thinning = thinning;
  c.burn_in = burn_in;
  return c;
}

}  // namespace

TEST_CASE("decoupled surrogate: Gaussian closed form", "[coarse_grain]") {
  // Independent sites: each block curve is y^2/2 - ((K-1)/2K) log 2 pi, so
  // the weighted sum and its derivatives are explicit.
  const auto a =
      make_aux_free_energy(gaussian_chain(16), BlockScheme::balanced(16, 4));
  CHECK(a.curves.size() == 1);  // equal blocks share one curve

  const std::vector<double> y = {0.5, -0.25, 0.0, 1.0};
  double quad = 0.0;
  for (double v : y) quad += v * v;
  const double expect = quad / 8.0 - (3.0 / 8.0) * kLog2Pi;
  CHECK(a.value(y) == Catch::Approx(expect).margin(1e-6));

  const auto g = a.gradient(y);
  const auto c = a.curvature(y);
  for (int l = 0; l < 4; ++l) {
    CHECK(g[std::size_t(l)] == Catch::Approx(y[std::size_t(l)]).margin(1e-5));
    CHECK(c[std::size_t(l)] == Catch::Approx(1.0).margin(2e-3));
  }
}

TEST_CASE("decoupled surrogate: weights for unequal blocks", "[coarse_grain]") {
  const Model m = double_well_chain(11);
  const auto scheme = BlockScheme::from_sizes(11, {4, 3, 4});
  const auto a = make_aux_free_energy(m, scheme);
  CHECK(a.curves.size() == 2);  // one curve per distinct block size

  const std::vector<double> y = {0.3, -0.2, 0.5};
  double expect = 0.0;
  for (int l = 0; l < 3; ++l) {
    const SumDensity sd(m.block_model(scheme, l), scheme.sizes[std::size_t(l)]);
    expect += double(scheme.sizes[std::size_t(l)]) / 11.0 *
              sd.hbar(y[std::size_t(l)]);
  }
  CHECK(a.value(y) == Catch::Approx(expect).margin(1e-9));
}

TEST_CASE("sampled coarse gradient: independent sites are exact",
          "[coarse_grain]") {
  // No bounded part and no couplings: the fluctuating force vanishes, so
  // the estimator collapses to alpha_l y_l with zero error bar.
  const std::vector<double> y = {0.5, -0.25, 0.0, 0.75};
  const auto g =
      meso_gradient_sampled(gaussian_chain(16), BlockScheme::balanced(16, 4),
                            y, quick_config(31, 0.2, 2, 200), 200);
  for (int l = 0; l < 4; ++l) {
    CHECK(g.estimate[std::size_t(l)] ==
          Catch::Approx(y[std::size_t(l)]).margin(1e-14));
    CHECK(g.se[std::size_t(l)] == 0.0);
  }
}

TEST_CASE("sampled coarse gradient tracks the decoupled surrogate",
          "[coarse_grain]") {
  const Model m = double_well_chain(16);
  const auto scheme = BlockScheme::balanced(16, 4);
  const std::vector<double> y = {0.4, 0.1, -0.3, 0.2};
  const auto aux = make_aux_free_energy(m, scheme);
  const auto want = aux.gradient(y);
  const auto got =
      meso_gradient_sampled(m, scheme, y, quick_config(37, 0.15, 4), 4000);
  for (int l = 0; l < 4; ++l)
    CHECK(std::abs(got.estimate[std::size_t(l)] - want[std::size_t(l)]) <=
          2.0 * got.se[std::size_t(l)] + 0.1);
}

TEST_CASE("sampled coarse Hessian: Gaussian dense oracle", "[coarse_grain]") {
  // Quadratic chain: the constrained free energy is quadratic and the
  // Hessian operator equals (1/K) times the inverse of the projected
  // covariance P A^{-1} P', independently of y.
  const int n = 16, nb = 4, k = 4;
  const double h1 = 0.2;
  const Model m = gaussian_chain(n, h1);
  const auto scheme = BlockScheme::balanced(n, nb);

  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i + 1 < n; ++i) a(i, i + 1) = a(i + 1, i) = h1;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(nb, n);
  for (int l = 0; l < nb; ++l)
    for (int i = 0; i < k; ++i) p(l, l * k + i) = 1.0 / k;
  const Eigen::MatrixXd exact =
      (p * a.inverse() * p.transpose()).inverse() / double(k);

  const std::vector<double> y = {0.2, -0.1, 0.3, 0.0};
  const std::vector<std::pair<int, int>> which = {
      {0, 0}, {1, 1}, {1, 2}, {0, 3}};
  const auto entries = meso_hessian_sampled(m, scheme, y, which,
                                            quick_config(41, 0.15, 4), 8000);
  for (const auto& e : entries) {
    CHECK(std::abs(e.value - exact(e.l, e.n)) <= 3.0 * e.se + 0.05);
  }
  // Distant blocks barely interact through the chain.
  CHECK(std::abs(exact(0, 3)) < 0.01);
}

TEST_CASE("sampled coarse Hessian: nonlinear diagonal and reach",
          "[coarse_grain]") {
  const std::vector<double> y2 = {0.2, -0.2};
  const std::vector<std::pair<int, int>> which = {{0, 0}, {0, 1}};

  const auto small = meso_hessian_sampled(
      double_well_chain(8), BlockScheme::balanced(8, 2), y2, which,
      quick_config(43, 0.2, 4), 8000);
  const auto large = meso_hessian_sampled(
      double_well_chain(16), BlockScheme::balanced(16, 2), y2, which,
      quick_config(47, 0.15, 4), 8000);

  // Diagonal entries sit in the uniform convexity window and approach the
  // per-block curvature of the decoupled surrogate.
  for (const auto& s : {small, large}) {
    CHECK(s[0].value > 0.1);
    CHECK(s[0].value < 10.0);
  }
  const auto aux = make_aux_free_energy(double_well_chain(16),
                                        BlockScheme::balanced(16, 2));
  CHECK(std::abs(large[0].value - aux.curvature(y2)[0]) <=
        2.0 * large[0].se + 0.3);

  // The cross entry shrinks as the blocks grow: doubling K should roughly
  // halve it.
  const double r_small = std::abs(small[1].value);
  const double r_large = std::abs(large[1].value);
  CHECK(r_small > r_large);
  CHECK(r_small / r_large > 1.1);
  CHECK(r_small / r_large < 4.5);
}

TEST_CASE("surrogate gap against two-dimensional quadrature",
          "[coarse_grain]") {
  // Four sites, two blocks of two: on the constraint set only the single
  // straddling bond distinguishes the exact energy from the decoupled one,
  // and both partition integrals reduce to a plane quadrature in the two
  // free coordinates.
  const Model m = double_well_chain(4);
  const auto scheme = BlockScheme::balanced(4, 2);
  const std::vector<double> y = {0.3, -0.2};

  const int g = 401;
  const double lo = -6.0, hi = 6.0, du = (hi - lo) / (g - 1);
  double z_full = 0.0, z_aux = 0.0;
  for (int a = 0; a < g; ++a) {
    const double u = lo + a * du;
    const double wa = (a == 0 || a == g - 1) ? 0.5 : 1.0;
    for (int b = 0; b < g; ++b) {
      const double v = lo + b * du;
      const double wb = (b == 0 || b == g - 1) ? 0.5 : 1.0;
      const std::vector<double> x = {y[0] + u, y[0] - u, y[1] + v, y[1] - v};
      z_full += wa * wb * std::exp(-m.energy(x));
      z_aux += wa * wb * std::exp(-m.aux_energy(scheme, x));
    }
  }
  const double exact_gap = -(std::log(z_full) - std::log(z_aux)) / 4.0;

  const auto gap =
      aux_gap_sampled(m, scheme, y, quick_config(53, 0.3, 2, 800), 6, 3000);
  CHECK(gap.se < 0.01);
  CHECK(std::abs(gap.log_ratio - exact_gap) <= 3.0 * gap.se + 0.01);
}

TEST_CASE("surrogate stays uniformly convex in every direction",
          "[coarse_grain]") {
  const Model m = double_well_chain(32);
  const auto scheme = BlockScheme::balanced(32, 4);
  const auto aux = make_aux_free_energy(m, scheme);
  const std::vector<double> y = {0.2, -0.4, 0.5, 0.0};

  RngStream rng(97, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> d(4);
    for (double& v : d) v = rng.gaussian();
    CHECK(aux.directional_second_difference(y, d, 0.05) >= 0.05);
  }

  const auto scan = scan_curvature(aux.curve(0), -2.0, 2.0);
  CHECK(scan.min_d2 > 0.05);
  CHECK(scan.max_d2 < 20.0);
}

TEST_CASE("block projection round trip is exact", "[coarse_grain]") {
  const auto scheme = BlockScheme::balanced(17, 4);
  const std::vector<double> y = {0.3, -1.2, 0.7, 0.05};
  const auto x = embed_blocks(scheme, y);
  const auto back = project_blocks(scheme, x);
  for (int l = 0; l < 4; ++l)
    CHECK(back[std::size_t(l)] ==
          Catch::Approx(y[std::size_t(l)]).margin(1e-14));
}

TEST_CASE("coarse module input validation", "[coarse_grain]") {
  const Model m = double_well_chain(16);
  const auto scheme = BlockScheme::balanced(16, 4);
  CHECK_THROWS(make_aux_free_energy(m, BlockScheme::balanced(12, 3)));

  const auto aux = make_aux_free_energy(m, scheme);
  CHECK_THROWS(aux.value({0.1, 0.2}));
  CHECK_THROWS(
      aux.directional_second_difference({0, 0, 0, 0}, {0, 0, 0, 0}, 0.05));

  CHECK_THROWS(meso_hessian_sampled(m, scheme, {0, 0, 0, 0}, {{0, 4}},
                                    quick_config(1, 0.1, 1), 10));
}

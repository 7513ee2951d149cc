#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "spinscale/grid.hpp"
#include "spinscale/model.hpp"

namespace spinscale {

// Transfer-operator evaluation of chain partition integrals.
//
// log_partition_chain computes
//   log integral exp( sigma sum x_i - H(x) ) dx
// by integrating out sites left to right.  For range 1 the state is the last
// coordinate; for range 2 it is the last pair.
//
// Factor split: the bond between sites at distance r absorbs
// |h_r|(x^2+y^2)/2 from the adjacent site Gaussians, so its exponent
// -( |h_r|(x^2+y^2)/2 + h_r x y ) is negative semidefinite and every bond
// matrix entry lies in (0, 1].  Diagonal dominance guarantees each site
// keeps at least margin/2 * x^2 of its own decay.  Site factors enter with
// their grid maximum moved into the running log scale, so no intermediate
// quantity overflows at any tilt the window adaptation can produce.

// Widen the integration window so the tilted measure keeps negligible tail
// mass.  The tilted energy minimizer sits within about |sigma| + O(1) of the
// origin divided by the worst-case curvature 1 - 2 sum_r |h_r|, which
// diagonal dominance keeps positive.  Node spacing is preserved.
inline QuadratureGrid adapt_to_tilt(const QuadratureGrid& base, const Model& m,
                                    double sigma) {
  const double curv = std::max(0.05, 1.0 - 2.0 * m.kernel.abs_sum());
  const double need = (std::abs(sigma) + 8.0) / curv;
  if (need <= base.half_width) return base;
  const double dx = 2.0 * base.half_width / (base.points - 1);
  QuadratureGrid g = base;
  g.half_width = need;
  g.points = int(std::ceil(2.0 * need / dx)) + 1;
  return g;
}

namespace detail {

inline double site_log_factor(const Model& m, double sigma, int i, double z) {
  return sigma * z - m.potential.value(z) - m.field_at(i) * z;
}

// Gaussian coefficient site i keeps after its bonds took their shares.
inline double gaussian_keep(const Model& m, int i) {
  double k = 0.5;
  for (int r = 1; r <= m.kernel.range; ++r) {
    const double a = 0.5 * std::abs(m.kernel.coupling(r));
    if (i - r >= 0) k -= a;
    if (i + r <= m.n_sites - 1) k -= a;
  }
  return k;
}

// Nonnegative bond exponent: |h|(x^2+y^2)/2 + h x y >= 0.
inline double bond_form(double h, double x, double y) {
  return 0.5 * std::abs(h) * (x * x + y * y) + h * x * y;
}

// Fill out(a) = exp(g_i(x_a) - c) with g_i the split site log factor and
// c its maximum over the grid; returns c.
inline double offset_site_factors(const Model& m, double sigma, int i,
                                  const QuadRule& q, Eigen::VectorXd& out) {
  const double keep = gaussian_keep(m, i);
  const double si = m.field_at(i);
  const int g = int(q.size());
  out.resize(g);
  double c = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < g; ++a) {
    const double z = q.x[a];
    out(a) = sigma * z - keep * z * z - m.potential.bounded(z) - si * z;
    c = std::max(c, out(a));
  }
  for (int a = 0; a < g; ++a) out(a) = std::exp(out(a) - c);
  return c;
}

}  // namespace detail

// a_N(sigma) = log Z_N for range <= 2 models.  Deterministic quadrature; the
// result is grid-converged when doubling `grid.points` moves it below 1e-8.
inline double log_partition_chain(const Model& m, double sigma,
                                  const QuadratureGrid& grid) {
  const int n = m.n_sites;
  const QuadRule q = make_rule(adapt_to_tilt(grid, m, sigma));
  const int g = int(q.size());

  if (m.kernel.range == 0) {
    // Product measure: sum of independent site integrals.
    double acc = 0.0;
    Eigen::VectorXd f;
    for (int i = 0; i < n; ++i) {
      const double c = detail::offset_site_factors(m, sigma, i, q, f);
      double zi = 0.0;
      for (int a = 0; a < g; ++a) zi += q.w[a] * f(a);
      acc += std::log(zi) + c;
    }
    return acc;
  }

  if (m.kernel.range == 1) {
    const double h1 = m.kernel.coupling(1);
    // K(a,b) = exp(-bond(x_a, x_b)) w_b; v_{k+1} = F_k .* (K v_k).
    Eigen::MatrixXd K(g, g);
    for (int a = 0; a < g; ++a)
      for (int b = 0; b < g; ++b)
        K(a, b) = std::exp(-detail::bond_form(h1, q.x[a], q.x[b])) * q.w[b];

    Eigen::VectorXd v;
    double log_scale = detail::offset_site_factors(m, sigma, 0, q, v);
    Eigen::VectorXd f;
    for (int i = 1; i < n; ++i) {
      Eigen::VectorXd u = K * v;
      const double c = detail::offset_site_factors(m, sigma, i, q, f);
      u.array() *= f.array();
      const double s = u.maxCoeff();
      if (!(s > 0.0)) throw std::runtime_error("transfer recursion underflow");
      log_scale += std::log(s) + c;
      v = u / s;
    }
    double z = 0.0;
    for (int a = 0; a < g; ++a) z += q.w[a] * v(a);
    return log_scale + std::log(z);
  }

  if (m.kernel.range == 2) {
    const double h1 = m.kernel.coupling(1);
    const double h2 = m.kernel.coupling(2);
    if (n < 2) throw std::invalid_argument("range-2 chain needs >= 2 sites");
    // State after site k: function of (x_{k-1}, x_k), stored as g x g.
    Eigen::VectorXd f0, f1;
    double log_scale = detail::offset_site_factors(m, sigma, 0, q, f0) +
                       detail::offset_site_factors(m, sigma, 1, q, f1);
    Eigen::MatrixXd v(g, g);
    for (int a = 0; a < g; ++a)
      for (int b = 0; b < g; ++b)
        v(a, b) = f0(a) * f1(b) *
                  std::exp(-detail::bond_form(h1, q.x[a], q.x[b]));
    // E2(a,c) = exp(-bond2(x_a, x_c)) w_a for the integrated-out site;
    // K1(b,c) = exp(-bond1(x_b, x_c)) for the new nearest-neighbor bond.
    Eigen::MatrixXd E2(g, g), K1(g, g);
    for (int a = 0; a < g; ++a)
      for (int c = 0; c < g; ++c) {
        E2(a, c) = std::exp(-detail::bond_form(h2, q.x[a], q.x[c])) * q.w[a];
        K1(a, c) = std::exp(-detail::bond_form(h1, q.x[a], q.x[c]));
      }
    Eigen::VectorXd fi;
    for (int i = 2; i < n; ++i) {
      const double ci = detail::offset_site_factors(m, sigma, i, q, fi);
      // u(b,c) = f_i(c) K1(b,c) sum_a E2(a,c) v(a,b)
      Eigen::MatrixXd t = v.transpose() * E2;  // t(b,c) = sum_a v(a,b) E2(a,c)
      Eigen::MatrixXd u(g, g);
      for (int b = 0; b < g; ++b)
        for (int c = 0; c < g; ++c) u(b, c) = t(b, c) * K1(b, c) * fi(c);
      const double s = u.maxCoeff();
      if (!(s > 0.0)) throw std::runtime_error("transfer recursion underflow");
      log_scale += std::log(s) + ci;
      v = u / s;
    }
    double z = 0.0;
    for (int a = 0; a < g; ++a)
      for (int b = 0; b < g; ++b) z += q.w[a] * q.w[b] * v(a, b);
    return log_scale + std::log(z);
  }

  throw std::invalid_argument("chain recursion supports range <= 2 only");
}

struct EigenvalueResult {
  double log_value = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Free-energy density in the infinite-chain limit, range 1, no site field:
// log of the top eigenvalue of the symmetrized transfer kernel.  Each site
// keeps 1/2 - |h1| of its Gaussian (both adjacent bonds take a share), split
// evenly across the kernel's two argument slots so the matrix is symmetric;
// the grid maximum of the site exponent is pulled out front.  Power
// iteration from the all-ones vector: the kernel is strictly positive, so
// the top eigenpair is simple (Perron-Frobenius) and iteration converges.
inline EigenvalueResult free_energy_density_limit(const Model& m, double sigma,
                                                  const QuadratureGrid& grid) {
  if (m.kernel.range > 1)
    throw std::invalid_argument("eigenvalue route supports range <= 1");
  if (!m.field.empty())
    for (double s : m.field)
      if (s != 0.0)
        throw std::invalid_argument("eigenvalue route needs a homogeneous chain");

  const QuadRule q = make_rule(adapt_to_tilt(grid, m, sigma));
  const int g = int(q.size());
  const double h1 = m.kernel.range >= 1 ? m.kernel.coupling(1) : 0.0;
  const double keep = 0.5 - std::abs(h1);

  std::vector<double> gs(q.size());
  double c = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < g; ++a) {
    const double z = q.x[a];
    gs[a] = sigma * z - keep * z * z - m.potential.bounded(z);
    c = std::max(c, gs[a]);
  }

  Eigen::MatrixXd B(g, g);
  for (int a = 0; a < g; ++a)
    for (int b = 0; b <= a; ++b) {
      const double val =
          std::sqrt(q.w[a] * q.w[b]) *
          std::exp(0.5 * (gs[a] + gs[b]) -
                   detail::bond_form(h1, q.x[a], q.x[b]) - c);
      B(a, b) = val;
      B(b, a) = val;
    }

  EigenvalueResult r;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(g);
  v.normalize();
  double lambda = 0.0;
  const int max_iter = 50000;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = B * v;
    const double new_lambda = v.dot(w);  // Rayleigh quotient, |v| = 1
    const double nl = w.norm();
    if (!(nl > 0.0)) throw std::runtime_error("eigenvalue iteration collapsed");
    r.iterations = it + 1;
    if (it > 0 && std::abs(new_lambda - lambda) <= 1e-12 * std::abs(new_lambda)) {
      lambda = new_lambda;
      r.converged = true;
      break;
    }
    lambda = new_lambda;
    v = w / nl;
  }
  r.log_value = std::log(lambda) + c;
  return r;
}

}  // namespace spinscale

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spinscale/blocks.hpp"
#include "spinscale/coarse_grain.hpp"
#include "spinscale/fourier.hpp"
#include "spinscale/free_energy.hpp"

namespace spinscale {

// Block-level gradient flow d eta/dt = -(coarse operator) grad(eta): the
// middle of the three dynamical scales.  The coarse operator is defined
// through its inverse, block-average of fine pseudo-inverse of block-lift;
// its kernel is the constants and its compatible right-hand sides are the
// weighted-mean-zero coarse vectors, mirroring the fine operator exactly.

class CoarseOperator {
 public:
  explicit CoarseOperator(const BlockScheme& scheme) : scheme_(scheme) {
    const int m = scheme.blocks();
    if (m < 2) throw std::invalid_argument("need >= 2 blocks");
    const int n = scheme.n_sites;
    inv_ = Eigen::MatrixXd(m, m);
    // Column l: block averages of the fine pseudo-inverse applied to the
    // (mean-removed) indicator lift of block l.
    for (int l = 0; l < m; ++l) {
      std::vector<double> lift(std::size_t(n), 0.0);
      for (int i = 0; i < scheme.sizes[std::size_t(l)]; ++i)
        lift[std::size_t(scheme.offsets[std::size_t(l)] + i)] = 1.0;
      const double mu = double(scheme.sizes[std::size_t(l)]) / n;
      for (double& v : lift) v -= mu;
      const auto u = second_difference_pinv(lift);
      const auto y = project_blocks(scheme, u);
      for (int k = 0; k < m; ++k) inv_(k, l) = y[std::size_t(k)];
    }
    // Bordered system pins the weighted mean of the solution, making the
    // factorization nonsingular despite the constant kernel.
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(m + 1, m + 1);
    sys.topLeftCorner(m, m) = inv_;
    for (int l = 0; l < m; ++l) {
      sys(l, m) = double(scheme.sizes[std::size_t(l)]);
      sys(m, l) = double(scheme.sizes[std::size_t(l)]);
    }
    lu_.compute(sys);
  }

  int blocks() const { return scheme_.blocks(); }
  const BlockScheme& scheme() const { return scheme_; }

  // Inverse-operator action on a weighted-mean-zero coarse vector.
  std::vector<double> apply_inverse(const std::vector<double>& u) const {
    check_compatible(u);
    const int m = blocks();
    Eigen::VectorXd v(m);
    for (int l = 0; l < m; ++l) v(l) = u[std::size_t(l)];
    const Eigen::VectorXd w = inv_ * v;
    return std::vector<double>(w.data(), w.data() + m);
  }

  // Forward action: the u with (inverse op) u = g, weighted mean zero.
  std::vector<double> solve(const std::vector<double>& g) const {
    check_compatible(g);
    const int m = blocks();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
    for (int l = 0; l < m; ++l) rhs(l) = g[std::size_t(l)];
    const Eigen::VectorXd sol = lu_.solve(rhs);
    std::vector<double> u(std::size_t(m), 0.0);
    for (int l = 0; l < m; ++l) u[std::size_t(l)] = sol(l);

    double gmax = 0.0;
    for (int l = 0; l < m; ++l) gmax = std::max(gmax, std::abs(rhs(l)));
    const Eigen::VectorXd back = inv_ * sol.head(m);
    for (int l = 0; l < m; ++l)
      if (std::abs(back(l) - rhs(l)) > 1e-10 * (1.0 + gmax))
        throw std::runtime_error("coarse operator solve residual too large");
    return u;
  }

 private:
  void check_compatible(const std::vector<double>& g) const {
    if (int(g.size()) != blocks())
      throw std::invalid_argument("coarse vector size mismatch");
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    if (std::abs(weighted_mean(scheme_, g)) > 1e-8 * (1.0 + gmax))
      throw std::invalid_argument("input must have weighted mean zero");
  }

  BlockScheme scheme_;
  Eigen::MatrixXd inv_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

inline std::vector<double> coarse_operator_solve(const BlockScheme& scheme,
                                                 const std::vector<double>& g) {
  return CoarseOperator(scheme).solve(g);
}

// Driving functional for the flow: a value (for dissipation reporting) and
// its gradient in the weighted coarse metric.
struct MesoForce {
  std::function<double(const std::vector<double>&)> value;
  std::function<std::vector<double>(const std::vector<double>&)> gradient;
};

inline MesoForce meso_force_from_aux(AuxFreeEnergy aux) {
  auto shared = std::make_shared<AuxFreeEnergy>(std::move(aux));
  MesoForce f;
  f.value = [shared](const std::vector<double>& y) { return shared->value(y); };
  f.gradient = [shared](const std::vector<double>& y) {
    return shared->gradient(y);
  };
  return f;
}

// Large-block surrogate: every block uses the limiting conjugate curve.
inline MesoForce meso_force_from_limit(const LegendreTable& table,
                                       const BlockScheme& scheme) {
  auto shared = std::make_shared<LegendreTable>(table);
  MesoForce f;
  f.value = [shared, scheme](const std::vector<double>& y) {
    double acc = 0.0;
    for (int l = 0; l < scheme.blocks(); ++l)
      acc += double(scheme.sizes[std::size_t(l)]) / scheme.n_sites *
             shared->value(y[std::size_t(l)]);
    return acc;
  };
  f.gradient = [shared, scheme](const std::vector<double>& y) {
    std::vector<double> g(y.size());
    for (int l = 0; l < scheme.blocks(); ++l)
      g[std::size_t(l)] = scheme.weight(l) * shared->slope(y[std::size_t(l)]);
    return g;
  };
  return f;
}

struct MesoConfig {
  double tol = 1e-6;      // local error control, absolute and relative
  double dt_init = 1e-5;
  double dt_min = 1e-13;  // below this the problem is reported as stiff
};

struct MesoState {
  double t = 0.0;
  std::vector<double> eta;
  double energy = 0.0;
};

// Embedded third/second order pair with adaptive steps.  The constant part
// of the gradient is annihilated by the operator, so it is projected out
// before each solve; every derivative is then weighted-mean-zero and the
// coarse mass is conserved to solver rounding.
inline std::vector<MesoState> integrate_meso(
    const BlockScheme& scheme, const MesoForce& force, std::vector<double> eta,
    double horizon, const MesoConfig& cfg = {},
    std::vector<double> checkpoint_times = {}) {
  if (int(eta.size()) != scheme.blocks())
    throw std::invalid_argument("initial state size mismatch");
  if (!(horizon >= 0.0)) throw std::invalid_argument("negative horizon");
  double prev = 0.0;
  for (double t : checkpoint_times) {
    if (t < prev || t > horizon + 1e-12)
      throw std::invalid_argument("checkpoints must increase and stay within the horizon");
    prev = t;
  }
  if (checkpoint_times.empty() || checkpoint_times.back() < horizon)
    checkpoint_times.push_back(horizon);

  const CoarseOperator op(scheme);
  const int m = scheme.blocks();
  auto deriv = [&](const std::vector<double>& y) {
    std::vector<double> g = force.gradient(y);
    const double c = weighted_mean(scheme, g);
    for (double& v : g) v -= c;
    std::vector<double> u = op.solve(g);
    for (double& v : u) v = -v;
    return u;
  };

  std::vector<MesoState> out;
  std::size_t next_cp = 0;
  double t = 0.0, dt = cfg.dt_init;
  std::vector<double> k1 = deriv(eta);
  auto record = [&](double at) { out.push_back({at, eta, force.value(eta)}); };
  if (!checkpoint_times.empty() && checkpoint_times[0] == 0.0) {
    record(0.0);
    ++next_cp;
  }

  std::vector<double> y2(std::size_t(m), 0.0), y3(std::size_t(m), 0.0);
  std::vector<double> ynew(std::size_t(m), 0.0);
  while (next_cp < checkpoint_times.size()) {
    const double target = checkpoint_times[next_cp];
    double h = std::min(dt, target - t);
    if (!(h > 0.0)) {
      record(t);
      ++next_cp;
      continue;
    }

    for (int i = 0; i < m; ++i)
      y2[std::size_t(i)] = eta[std::size_t(i)] + 0.5 * h * k1[std::size_t(i)];
    const auto k2 = deriv(y2);
    for (int i = 0; i < m; ++i)
      y3[std::size_t(i)] = eta[std::size_t(i)] + 0.75 * h * k2[std::size_t(i)];
    const auto k3 = deriv(y3);
    for (int i = 0; i < m; ++i)
      ynew[std::size_t(i)] =
          eta[std::size_t(i)] + h * (2.0 / 9.0 * k1[std::size_t(i)] +
                                     1.0 / 3.0 * k2[std::size_t(i)] +
                                     4.0 / 9.0 * k3[std::size_t(i)]);
    const auto k4 = deriv(ynew);
    double err = 0.0;
    for (int i = 0; i < m; ++i) {
      const double lo = eta[std::size_t(i)] +
                        h * (7.0 / 24.0 * k1[std::size_t(i)] +
                             0.25 * k2[std::size_t(i)] +
                             1.0 / 3.0 * k3[std::size_t(i)] +
                             0.125 * k4[std::size_t(i)]);
      const double scale =
          cfg.tol + cfg.tol * std::max(std::abs(eta[std::size_t(i)]),
                                       std::abs(ynew[std::size_t(i)]));
      const double r = (ynew[std::size_t(i)] - lo) / scale;
      err += r * r;
    }
    err = std::sqrt(err / m);

    if (err <= 1.0) {
      t += h;
      eta.swap(ynew);
      k1 = k4;  // first-same-as-last
      if (t >= target - 1e-15 * (1.0 + std::abs(target))) {
        record(target);
        t = target;
        ++next_cp;
      }
    }
    const double grow = 0.9 * std::pow(std::max(err, 1e-10), -1.0 / 3.0);
    dt = h * std::min(5.0, std::max(0.2, grow));
    if (dt < cfg.dt_min)
      throw std::runtime_error(
          "step size underflow: flow too stiff; coarsen the blocks or switch "
          "to the limiting force");
  }
  return out;
}

}  // namespace spinscale

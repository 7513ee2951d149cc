#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "spinscale/blocks.hpp"
#include "spinscale/fourier.hpp"
#include "spinscale/kawasaki.hpp"

namespace spinscale {

// Error metrics tying the three scales together: the dual Sobolev norm on
// the circle for step functions, the lattice quadratic form (1/N)<x, A+ x>,
// the two-scale functional, and ensemble error statistics.

// Piecewise-constant function on a uniform periodic grid; cell j covers
// [j/n, (j+1)/n).  The mean is stored explicitly so that consumers can
// state mean-compatibility preconditions against a declared quantity.
struct TorusFunction {
  std::vector<double> v;
  double mean = 0.0;

  int cells() const { return int(v.size()); }
};

inline TorusFunction make_torus_function(std::vector<double> values) {
  if (values.size() < 8) throw std::invalid_argument("need >= 8 cells");
  TorusFunction f;
  f.v = std::move(values);
  double acc = 0.0;
  for (double x : f.v) acc += x;
  f.mean = acc / double(f.v.size());
  return f;
}

inline void check_torus(const TorusFunction& f) {
  if (f.cells() < 8) throw std::invalid_argument("need >= 8 cells");
  double acc = 0.0, scale = 1.0;
  for (double x : f.v) {
    acc += x;
    scale = std::max(scale, std::abs(x));
  }
  if (std::abs(acc / double(f.cells()) - f.mean) > 1e-12 * scale)
    throw std::invalid_argument("declared mean disagrees with samples");
}

// Pointwise difference on the common uniform refinement of the two grids.
inline TorusFunction torus_difference(const TorusFunction& a,
                                      const TorusFunction& b) {
  const int na = a.cells(), nb = b.cells();
  const long n = std::lcm(long(na), long(nb));
  if (n > (1L << 20))
    throw std::invalid_argument("common refinement too fine");
  std::vector<double> d(std::size_t(n), 0.0);
  for (long j = 0; j < n; ++j)
    d[std::size_t(j)] = a.v[std::size_t(j / (n / na))] -
                        b.v[std::size_t(j / (n / nb))];
  TorusFunction f;
  f.v = std::move(d);
  f.mean = a.mean - b.mean;
  return f;
}

// Dual Sobolev norm of a mean-zero step function: the L2 norm of the
// mean-centered primitive.  The primitive is piecewise linear, so each
// cell's contribution to the integral is evaluated in closed form; this is
// the refinement-stable limit of trapezoid sums on ever finer grids.
inline double h_minus1_norm(const TorusFunction& f) {
  check_torus(f);
  const int n = f.cells();
  double scale = 1.0;
  for (double x : f.v) scale = std::max(scale, std::abs(x));
  if (std::abs(f.mean) > 1e-10 * scale)
    throw std::invalid_argument("dual norm needs a mean-zero function");

  std::vector<double> omega(std::size_t(n) + 1, 0.0);
  for (int j = 0; j < n; ++j)
    omega[std::size_t(j) + 1] =
        omega[std::size_t(j)] + (f.v[std::size_t(j)] - f.mean) / double(n);
  double center = 0.0;
  for (int j = 0; j < n; ++j)
    center += 0.5 * (omega[std::size_t(j)] + omega[std::size_t(j) + 1]);
  center /= double(n);

  double acc = 0.0;
  for (int j = 0; j < n; ++j) {
    const double lo = omega[std::size_t(j)] - center;
    const double hi = omega[std::size_t(j) + 1] - center;
    acc += (lo * lo + lo * hi + hi * hi) / 3.0;
  }
  return std::sqrt(acc / double(n));
}

// Constants appearing in the two-scale convergence criterion.
struct TwoScaleConstants {
  double kappa = 0.0;   // cross-scale coupling, nonnegative
  double lambda = 0.0;  // macroscopic convexity floor, nonnegative
  double rho = 0.0;     // relaxation rate, positive
  double alpha = 0.0;   // fine-scale convexity, positive
  double beta = 0.0;    // coarse-scale convexity, positive
  double gamma = 0.0;   // operator comparison constant, positive
  double c1 = 0.0;      // norm equivalence lower constant, positive
  double c2 = 0.0;      // norm equivalence upper constant, positive

  void validate() const {
    if (kappa < 0.0 || lambda < 0.0 || !(rho > 0.0) || !(alpha > 0.0) ||
        !(beta > 0.0) || !(gamma > 0.0) || !(c1 > 0.0) || !(c2 > 0.0))
      throw std::invalid_argument("two-scale constants out of range");
  }
};

struct EnsembleMetric {
  double value = 0.0;
  double se = 0.0;
};

namespace detail {

inline EnsembleMetric reduce_iid(const std::vector<double>& vals) {
  EnsembleMetric r;
  const std::size_t s = vals.size();
  for (double v : vals) r.value += v;
  r.value /= double(s);
  if (s >= 2) {
    double ss = 0.0;
    for (double v : vals) ss += (v - r.value) * (v - r.value);
    r.se = std::sqrt(ss / (double(s) * double(s - 1)));
  }
  return r;
}

inline const Checkpoint& ensemble_point(const TrajectoryEnsemble& ens,
                                        int checkpoint, double expected_time) {
  if (ens.trajectories.empty())
    throw std::invalid_argument("empty ensemble");
  const auto& pts = ens.trajectories[0].points;
  if (checkpoint < 0 || checkpoint >= int(pts.size()))
    throw std::invalid_argument("checkpoint index out of range");
  const Checkpoint& c = pts[std::size_t(checkpoint)];
  if (std::abs(c.t - expected_time) > 1e-9 * (1.0 + std::abs(c.t)))
    throw std::invalid_argument("checkpoint time mismatch");
  return c;
}

}  // namespace detail

// Half the lattice dual form of one state's fluctuation around a lifted
// coarse profile.
inline double theta_of_state(const std::vector<double>& x,
                             const std::vector<double>& lifted) {
  if (x.size() != lifted.size())
    throw std::invalid_argument("state size mismatch");
  std::vector<double> d(x.size(), 0.0);
  double dm = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    d[i] = x[i] - lifted[i];
    dm += d[i];
  }
  dm /= double(x.size());
  for (double& w : d) w -= dm;  // guard the pseudo-inverse's gauge
  return 0.5 * discrete_dual_form(d);
}

// Two-scale functional at one checkpoint: half the ensemble average of the
// lattice dual form of the fluctuation around the lifted coarse profile.
inline EnsembleMetric theta_functional(const TrajectoryEnsemble& ens,
                                       int checkpoint,
                                       const BlockScheme& scheme,
                                       const std::vector<double>& eta,
                                       double eta_time) {
  detail::ensemble_point(ens, checkpoint, eta_time);
  const auto lifted = embed_blocks(scheme, eta);
  std::vector<double> vals;
  vals.reserve(ens.trajectories.size());
  for (const auto& tr : ens.trajectories) {
    const auto& x = tr.points[std::size_t(checkpoint)].x;
    if (int(x.size()) != scheme.n_sites)
      throw std::invalid_argument("state size mismatch");
    vals.push_back(theta_of_state(x, lifted));
  }
  return detail::reduce_iid(vals);
}

// Squared dual-norm gap between two step functions carrying the same mass.
inline double torus_gap_sq(const TorusFunction& a, const TorusFunction& b) {
  TorusFunction d = torus_difference(a, b);
  double scale = 1.0;
  for (double x : d.v) scale = std::max(scale, std::abs(x));
  if (std::abs(d.mean) > 1e-10 * scale)
    throw std::invalid_argument("profiles carry different masses");
  double dm = 0.0;
  for (double x : d.v) dm += x;
  dm /= double(d.v.size());
  for (double& x : d.v) x -= dm;  // centered below the precondition threshold
  d = make_torus_function(std::move(d.v));
  const double norm = h_minus1_norm(d);
  return norm * norm;
}

// Squared dual-norm gap between the step function of each micro state and
// the macroscopic profile, averaged over the ensemble.
inline EnsembleMetric micro_macro_error(const TrajectoryEnsemble& ens,
                                        int checkpoint, double expected_time,
                                        const TorusFunction& zeta) {
  detail::ensemble_point(ens, checkpoint, expected_time);
  std::vector<double> vals;
  vals.reserve(ens.trajectories.size());
  for (const auto& tr : ens.trajectories)
    vals.push_back(torus_gap_sq(
        make_torus_function(tr.points[std::size_t(checkpoint)].x), zeta));
  return detail::reduce_iid(vals);
}

// Same gap against the lifted coarse profile.
inline EnsembleMetric micro_meso_error(const TrajectoryEnsemble& ens,
                                       int checkpoint, double expected_time,
                                       const BlockScheme& scheme,
                                       const std::vector<double>& eta) {
  detail::ensemble_point(ens, checkpoint, expected_time);
  const auto lifted = make_torus_function(embed_blocks(scheme, eta));
  std::vector<double> vals;
  vals.reserve(ens.trajectories.size());
  for (const auto& tr : ens.trajectories)
    vals.push_back(torus_gap_sq(
        make_torus_function(tr.points[std::size_t(checkpoint)].x), lifted));
  return detail::reduce_iid(vals);
}

// Deterministic gap between the coarse and macroscopic profiles.
inline double meso_macro_error(const BlockScheme& scheme,
                               const std::vector<double>& eta,
                               const TorusFunction& zeta) {
  return torus_gap_sq(make_torus_function(embed_blocks(scheme, eta)), zeta);
}

}  // namespace spinscale

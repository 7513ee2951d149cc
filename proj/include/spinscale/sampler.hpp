#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spinscale/blocks.hpp"
#include "spinscale/free_energy.hpp"
#include "spinscale/model.hpp"
#include "spinscale/rng.hpp"
#include "spinscale/stats.hpp"

namespace spinscale {

// Markov-chain sampling of the chain measures: the tilted free measure
// exp(sigma sum x_i - H(x)), its restriction to a fixed global mean, and the
// restriction to fixed block means.  Constrained chains move inside the
// affine constraint set: drift and noise are orthogonally projected onto the
// tangent space, so every emitted state satisfies its constraint exactly.

struct ConstraintSpec {
  enum class Kind { none, global_mean, block_means };
  Kind kind = Kind::none;
  double sigma = 0.0;  // tilt; constant on constrained sets, active when free
  double m = 0.0;
  BlockScheme scheme;
  std::vector<double> y;

  static ConstraintSpec free_tilted(double sigma) {
    ConstraintSpec c;
    c.sigma = sigma;
    return c;
  }
  static ConstraintSpec fixed_mean(double m) {
    ConstraintSpec c;
    c.kind = Kind::global_mean;
    c.m = m;
    return c;
  }
  static ConstraintSpec fixed_blocks(const BlockScheme& s,
                                     std::vector<double> y) {
    if (int(y.size()) != s.blocks())
      throw std::invalid_argument("block means inconsistent with scheme");
    ConstraintSpec c;
    c.kind = Kind::block_means;
    c.scheme = s;
    c.y = std::move(y);
    c.m = weighted_mean(s, c.y);
    return c;
  }
};

// Orthogonal projection of a direction onto the constraint tangent space.
inline void project_constraint(const ConstraintSpec& c,
                               std::vector<double>& v) {
  switch (c.kind) {
    case ConstraintSpec::Kind::none:
      return;
    case ConstraintSpec::Kind::global_mean: {
      const double mu = mean(v);
      for (double& vi : v) vi -= mu;
      return;
    }
    case ConstraintSpec::Kind::block_means: {
      for (int l = 0; l < c.scheme.blocks(); ++l) {
        const int o = c.scheme.offsets[l], k = c.scheme.sizes[l];
        double mu = 0.0;
        for (int i = 0; i < k; ++i) mu += v[std::size_t(o + i)];
        mu /= double(k);
        for (int i = 0; i < k; ++i) v[std::size_t(o + i)] -= mu;
      }
      return;
    }
  }
}

// Shift the state back onto the constraint set exactly, removing the
// floating-point drift a long trajectory accumulates.
inline void restore_constraint(const ConstraintSpec& c,
                               std::vector<double>& x) {
  switch (c.kind) {
    case ConstraintSpec::Kind::none:
      return;
    case ConstraintSpec::Kind::global_mean: {
      const double d = c.m - mean(x);
      for (double& xi : x) xi += d;
      return;
    }
    case ConstraintSpec::Kind::block_means: {
      for (int l = 0; l < c.scheme.blocks(); ++l) {
        const int o = c.scheme.offsets[l], k = c.scheme.sizes[l];
        double mu = 0.0;
        for (int i = 0; i < k; ++i) mu += x[std::size_t(o + i)];
        mu /= double(k);
        const double d = c.y[std::size_t(l)] - mu;
        for (int i = 0; i < k; ++i) x[std::size_t(o + i)] += d;
      }
      return;
    }
  }
}

inline double constraint_violation(const ConstraintSpec& c,
                                   const std::vector<double>& x) {
  switch (c.kind) {
    case ConstraintSpec::Kind::none:
      return 0.0;
    case ConstraintSpec::Kind::global_mean:
      return std::abs(mean(x) - c.m);
    case ConstraintSpec::Kind::block_means: {
      double worst = 0.0;
      for (int l = 0; l < c.scheme.blocks(); ++l) {
        const int o = c.scheme.offsets[l], k = c.scheme.sizes[l];
        double mu = 0.0;
        for (int i = 0; i < k; ++i) mu += x[std::size_t(o + i)];
        worst = std::max(worst, std::abs(mu / double(k) - c.y[std::size_t(l)]));
      }
      return worst;
    }
  }
  return 0.0;
}

inline std::vector<double> constraint_start(const ConstraintSpec& c, int n) {
  switch (c.kind) {
    case ConstraintSpec::Kind::none:
      return std::vector<double>(std::size_t(n), c.sigma);
    case ConstraintSpec::Kind::global_mean:
      return std::vector<double>(std::size_t(n), c.m);
    case ConstraintSpec::Kind::block_means:
      c.scheme.check_sites(std::size_t(n));
      return embed_blocks(c.scheme, c.y);
  }
  return std::vector<double>(std::size_t(n), 0.0);
}

// Log-density (up to an additive constant) with its gradient; the sampler
// works against this interface so interpolated and decoupled-block energies
// plug in alongside the plain tilted one.
struct Target {
  int dim = 0;
  std::function<double(const std::vector<double>&)> log_density;
  std::function<std::vector<double>(const std::vector<double>&)> gradient;
};

inline Target make_tilted_target(const Model& model, double sigma) {
  Target t;
  t.dim = model.n_sites;
  t.log_density = [model, sigma](const std::vector<double>& x) {
    double s = 0.0;
    for (double xi : x) s += xi;
    return sigma * s - model.energy(x);
  };
  t.gradient = [model, sigma](const std::vector<double>& x) {
    std::vector<double> g = model.grad_energy(x);
    for (double& gi : g) gi = sigma - gi;
    return g;
  };
  return t;
}

// Target with cross-block pair terms removed (blocks decouple).
inline Target make_decoupled_target(const Model& model,
                                    const BlockScheme& scheme) {
  Target t;
  t.dim = model.n_sites;
  t.log_density = [model, scheme](const std::vector<double>& x) {
    return -model.aux_energy(scheme, x);
  };
  t.gradient = [model, scheme](const std::vector<double>& x) {
    std::vector<double> g = model.aux_grad_energy(scheme, x);
    for (double& gi : g) gi = -gi;
    return g;
  };
  return t;
}

struct ChainConfig {
  enum class Proposal { ula, mala };
  double step = 0.05;  // proposal time step; must lie in (0, 1]
  int burn_in = 2000;  // proposals discarded before the first kept sample
  int thinning = 1;    // proposals per kept sample
  Proposal proposal = Proposal::mala;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;  // chain index; distinct streams are independent
};

// One Langevin chain.  Proposal: x' = x + step * Pg(x) + sqrt(2 step) * P xi
// with P the constraint projection and g the target gradient.  "mala" adds
// the reversibility correction computed in the constrained subspace (the
// forward/backward proposal normalizations agree there and cancel), making
// the kept chain exact in law for the target; "ula" accepts every proposal
// and carries the usual O(step) discretization bias.
//
// Each step consumes dim gaussians plus (mala only) one uniform, in that
// order, so streams replay identically across runs and platforms.
class EnsembleSampler {
 public:
  EnsembleSampler(Target target, ConstraintSpec constraint, ChainConfig cfg)
      : target_(std::move(target)),
        c_(std::move(constraint)),
        cfg_(cfg),
        rng_(cfg.seed, cfg.stream) {
    if (!(cfg_.step > 0.0 && cfg_.step <= 1.0))
      throw std::invalid_argument("step size outside (0, 1]");
    if (cfg_.thinning < 1)
      throw std::invalid_argument("thinning must be >= 1");
    if (c_.kind == ConstraintSpec::Kind::block_means &&
        c_.scheme.n_sites != target_.dim)
      throw std::invalid_argument("constraint scheme size mismatch");
    x_ = constraint_start(c_, target_.dim);
    logp_ = target_.log_density(x_);
    drift_ = target_.gradient(x_);
    project_constraint(c_, drift_);
  }

  const std::vector<double>& state() const { return x_; }
  const ConstraintSpec& constraint() const { return c_; }
  double acceptance_rate() const {
    return proposals_ == 0 ? 1.0 : double(accepts_) / double(proposals_);
  }

  void step() {
    const int n = target_.dim;
    const double eps = cfg_.step;
    noise_.resize(std::size_t(n));
    for (double& z : noise_) z = rng_.gaussian();
    const bool mala = cfg_.proposal == ChainConfig::Proposal::mala;
    const double u = mala ? rng_.uniform() : 1.0;
    project_constraint(c_, noise_);
    prop_.resize(std::size_t(n));
    const double sn = std::sqrt(2.0 * eps);
    for (int i = 0; i < n; ++i)
      prop_[std::size_t(i)] =
          x_[std::size_t(i)] + eps * drift_[std::size_t(i)] + sn * noise_[std::size_t(i)];
    ++proposals_;

    if (!mala) {
      x_.swap(prop_);
      restore_constraint(c_, x_);
      logp_ = target_.log_density(x_);
      drift_ = target_.gradient(x_);
      project_constraint(c_, drift_);
      ++accepts_;
      return;
    }

    const double logp_new = target_.log_density(prop_);
    std::vector<double> drift_new = target_.gradient(prop_);
    project_constraint(c_, drift_new);
    double fwd = 0.0, bwd = 0.0;
    for (int i = 0; i < n; ++i) {
      const double df =
          prop_[std::size_t(i)] - x_[std::size_t(i)] - eps * drift_[std::size_t(i)];
      const double db =
          x_[std::size_t(i)] - prop_[std::size_t(i)] - eps * drift_new[std::size_t(i)];
      fwd += df * df;
      bwd += db * db;
    }
    // log of pi(x') q(x'->x) / (pi(x) q(x->x')); a NaN log-density at the
    // proposal compares false and rejects.
    const double log_alpha = logp_new - logp_ + (fwd - bwd) / (4.0 * eps);
    if (std::log(u) <= log_alpha) {
      x_.swap(prop_);
      logp_ = logp_new;
      drift_.swap(drift_new);
      restore_constraint(c_, x_);
      ++accepts_;
    }
  }

  void run(int steps) {
    for (int i = 0; i < steps; ++i) step();
  }

 private:
  Target target_;
  ConstraintSpec c_;
  ChainConfig cfg_;
  RngStream rng_;
  std::vector<double> x_, drift_, noise_, prop_;
  double logp_ = 0.0;
  std::uint64_t proposals_ = 0, accepts_ = 0;
};

struct DrawResult {
  std::vector<std::vector<double>> samples;
  double acceptance_rate = 0.0;
  double tau = 1.0;  // integrated autocorrelation of site 0, kept samples
  int burn_in = 0;
};

// Burn in, then keep `count` states `thinning` proposals apart.  The
// autocorrelation time of the kept series is always reported so an
// undersized burn-in is visible rather than silent.
inline DrawResult draw_samples(const Model& model, const ConstraintSpec& c,
                               const ChainConfig& cfg, int count) {
  const auto report = validate_model(model);
  if (!report.ok()) throw std::invalid_argument("model failed validation");
  EnsembleSampler s(make_tilted_target(model, c.sigma), c, cfg);
  s.run(cfg.burn_in);
  DrawResult r;
  r.burn_in = cfg.burn_in;
  r.samples.reserve(std::size_t(count));
  std::vector<double> site0;
  site0.reserve(std::size_t(count));
  for (int k = 0; k < count; ++k) {
    s.run(cfg.thinning);
    r.samples.push_back(s.state());
    site0.push_back(s.state()[0]);
  }
  r.acceptance_rate = s.acceptance_rate();
  if (site0.size() >= 16) r.tau = autocorrelation_time(site0);
  return r;
}

inline MomentReport estimate_moment(
    const std::vector<std::vector<double>>& samples, int site, int power) {
  if (samples.empty()) throw std::invalid_argument("empty sample stream");
  if (power < 1 || power > 2)
    throw std::invalid_argument("moment power must be 1 or 2");
  std::vector<double> v(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double z = samples[i][std::size_t(site)];
    v[i] = power == 1 ? z : z * z;
  }
  return batch_means(v);
}

// Affine envelope for tilted-measure moments: |E X| <= c1 |sigma| + c2 for
// the first moment, E X^2 <= c1 sigma^2 + c2 for the second.
inline bool moment_within_envelope(const MomentReport& r, int power,
                                   double sigma, double c1, double c2) {
  const double bound =
      power == 1 ? c1 * std::abs(sigma) + c2 : c1 * sigma * sigma + c2;
  return std::abs(r.estimate) <= bound;
}

// Covariance of the two support sums f = sum_{i in sf} x_i and
// g = sum_{j in sg} x_j (a single coordinate for singleton supports); the
// standard error comes from batch means of the centered product series.
inline MomentReport estimate_covariance(
    const std::vector<std::vector<double>>& samples,
    const std::vector<int>& support_f, const std::vector<int>& support_g) {
  if (samples.size() < 2) throw std::invalid_argument("need >= 2 samples");
  const std::size_t n = samples.size();
  std::vector<double> f(n), g(n);
  for (std::size_t t = 0; t < n; ++t) {
    double af = 0.0, ag = 0.0;
    for (int i : support_f) af += samples[t][std::size_t(i)];
    for (int j : support_g) ag += samples[t][std::size_t(j)];
    f[t] = af;
    g[t] = ag;
  }
  const double fb = sample_mean(f), gb = sample_mean(g);
  std::vector<double> w(n);
  for (std::size_t t = 0; t < n; ++t) w[t] = (f[t] - fb) * (g[t] - gb);
  return batch_means(w);
}

struct DecayFit {
  double rate = 0.0;           // c in |cov| ~ prefactor * exp(-c * distance)
  double log_prefactor = 0.0;
  double floor = 0.0;          // additive far-distance plateau (fixed-mean case)
  bool pure_floor = false;     // nothing resolved above floor and noise
  double residual_rms = 0.0;
  int points_used = 0;
};

// Fit log|cov| against distance.  With `with_floor`, the far-distance
// plateau (mean magnitude over the largest quarter of the distances) is
// subtracted first; points not resolved at 3 standard errors above the
// remainder are excluded.  Fewer than two usable points means the table is
// all floor.
inline DecayFit fit_correlation_decay(const std::vector<double>& distance,
                                      const std::vector<double>& cov,
                                      const std::vector<double>& se,
                                      bool with_floor) {
  const std::size_t n = distance.size();
  if (cov.size() != n || (!se.empty() && se.size() != n))
    throw std::invalid_argument("decay table columns disagree");
  if (n < 4) throw std::invalid_argument("need >= 4 distances");
  double vmax = 0.0;
  for (double v : cov) vmax = std::max(vmax, std::abs(v));
  if (vmax == 0.0)
    throw std::invalid_argument("degenerate all-zero covariance table");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return distance[a] < distance[b];
  });

  DecayFit fit;
  if (with_floor) {
    const std::size_t k = std::max<std::size_t>(2, n / 4);
    double acc = 0.0;
    for (std::size_t i = n - k; i < n; ++i) acc += std::abs(cov[order[i]]);
    fit.floor = acc / double(k);
  }

  std::vector<double> xs, ys;
  for (std::size_t p = 0; p < n; ++p) {
    const double r = std::abs(cov[p]) - fit.floor;
    const double noise = se.empty() ? 0.0 : 3.0 * se[p];
    if (r > noise && r > 1e-12 * vmax) {
      xs.push_back(distance[p]);
      ys.push_back(std::log(r));
    }
  }
  fit.points_used = int(xs.size());
  if (xs.size() < 2) {
    fit.pure_floor = true;
    return fit;
  }
  const LineFit lf = fit_line(xs, ys);
  fit.rate = -lf.slope;
  fit.log_prefactor = lf.intercept;
  fit.residual_rms = lf.residual_rms;
  return fit;
}

struct EquivalenceReport {
  double sigma_star = 0.0;
  double fixed_mean_estimate = 0.0, fixed_mean_se = 0.0;
  double tilted_estimate = 0.0, tilted_se = 0.0;
  double gap = 0.0;
  double combined_se = 0.0;
};

// E[x_site] under the fixed-mean measure at mean m versus the free measure
// at the conjugate tilt solving A_N'(sigma) = m.  The gap is expected to
// scale like C |support| / N.  Uses streams cfg.stream (tilted chain) and
// cfg.stream + 1 (fixed-mean chain).
inline EquivalenceReport equivalence_of_observables_check(
    const Model& model, double m, int site, const ChainConfig& cfg, int count,
    const QuadratureGrid& grid = {}) {
  EquivalenceReport rep;
  const auto f = FreeEnergyFunction::finite_n(model, model.n_sites, grid);
  const auto lr = legendre_point(f, m);
  if (lr.clamped || lr.residual > 1e-8)
    throw std::runtime_error("conjugate tilt solve failed");
  rep.sigma_star = lr.sigma_star;
  ChainConfig tilted_cfg = cfg;
  ChainConfig fixed_cfg = cfg;
  fixed_cfg.stream = cfg.stream + 1;
  const auto tilted = draw_samples(
      model, ConstraintSpec::free_tilted(lr.sigma_star), tilted_cfg, count);
  const auto fixed =
      draw_samples(model, ConstraintSpec::fixed_mean(m), fixed_cfg, count);
  const auto mt = estimate_moment(tilted.samples, site, 1);
  const auto mf = estimate_moment(fixed.samples, site, 1);
  rep.tilted_estimate = mt.estimate;
  rep.tilted_se = mt.se;
  rep.fixed_mean_estimate = mf.estimate;
  rep.fixed_mean_se = mf.se;
  rep.gap = std::abs(mf.estimate - mt.estimate);
  rep.combined_se = std::hypot(mf.se, mt.se);
  return rep;
}

struct ThermoResult {
  double log_ratio = 0.0;
  double se = 0.0;
};

// log(Z1/Z0) for the linear family exp((1-t) U0 + t U1) on the constraint
// set: d/dt log Z_t = E_t[U1 - U0], integrated over t in [0,1] by
// Gauss-Legendre quadrature, one independent chain per node (stream
// (cfg.stream << 8) + node).
inline ThermoResult thermo_log_ratio(const Target& u0, const Target& u1,
                                     const ConstraintSpec& c,
                                     const ChainConfig& cfg, int t_nodes,
                                     int samples_per_node) {
  if (u0.dim != u1.dim) throw std::invalid_argument("target dimension mismatch");
  std::vector<double> gx, gw;
  gauss_legendre_unit(t_nodes, gx, gw);
  ThermoResult res;
  double var = 0.0;
  for (int qn = 0; qn < t_nodes; ++qn) {
    const double t = 0.5 * (gx[std::size_t(qn)] + 1.0);
    const double w = 0.5 * gw[std::size_t(qn)];
    Target mix;
    mix.dim = u0.dim;
    mix.log_density = [f0 = u0.log_density, f1 = u1.log_density,
                       t](const std::vector<double>& x) {
      return (1.0 - t) * f0(x) + t * f1(x);
    };
    mix.gradient = [g0 = u0.gradient, g1 = u1.gradient,
                    t](const std::vector<double>& x) {
      std::vector<double> a = g0(x);
      const std::vector<double> b = g1(x);
      for (std::size_t i = 0; i < a.size(); ++i)
        a[i] = (1.0 - t) * a[i] + t * b[i];
      return a;
    };
    ChainConfig node_cfg = cfg;
    node_cfg.stream = (cfg.stream << 8) + std::uint64_t(qn);
    EnsembleSampler s(mix, c, node_cfg);
    s.run(cfg.burn_in);
    std::vector<double> obs(std::size_t(samples_per_node), 0.0);
    for (int k = 0; k < samples_per_node; ++k) {
      s.run(cfg.thinning);
      obs[std::size_t(k)] =
          u1.log_density(s.state()) - u0.log_density(s.state());
    }
    const auto r = batch_means(obs);
    res.log_ratio += w * r.estimate;
    var += w * w * r.se * r.se;
  }
  res.se = std::sqrt(var);
  return res;
}

// Monte Carlo route to log Z_N(sigma) for kernels beyond the transfer
// recursions' reach: thermodynamic integration from the standard Gaussian
// product reference, whose log partition is (N/2) log 2 pi.
inline ThermoResult log_partition_mc(const Model& model, double sigma,
                                     const ChainConfig& cfg, int t_nodes = 16,
                                     int samples_per_node = 20000) {
  Target ref;
  ref.dim = model.n_sites;
  ref.log_density = [](const std::vector<double>& x) {
    double acc = 0.0;
    for (double z : x) acc += z * z;
    return -0.5 * acc;
  };
  ref.gradient = [](const std::vector<double>& x) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = -x[i];
    return g;
  };
  ThermoResult r =
      thermo_log_ratio(ref, make_tilted_target(model, sigma),
                       ConstraintSpec::free_tilted(sigma), cfg, t_nodes,
                       samples_per_node);
  r.log_ratio += 0.5 * model.n_sites * kLogTwoPi;
  return r;
}

}  // namespace spinscale

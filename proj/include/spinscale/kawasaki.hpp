#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "spinscale/blocks.hpp"
#include "spinscale/fourier.hpp"
#include "spinscale/model.hpp"
#include "spinscale/rng.hpp"
#include "spinscale/sampler.hpp"

namespace spinscale {

// Conservative spin-exchange diffusion on the discrete circle, diffusively
// sped up: dX = -A grad H(X) dt + sqrt(2A) dB with A the periodic second
// difference scaled by N^2.  The noise is realized as sqrt(2) N D' dW with
// D the forward difference, so (sqrt(2) N D')(sqrt(2) N D')' = 2A holds as
// an identity and each increment sums to zero exactly: the mean spin is a
// pathwise invariant, not an approximate one.

struct SdeConfig {
  double dt = 0.0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  double stability_factor = 1.0;  // in (0, 1]; dt must stay below sf/(8 N^2)
};

inline double max_stable_dt(int n, double stability_factor = 1.0) {
  return stability_factor / (8.0 * double(n) * double(n));
}

// One explicit update.  Consumes exactly n gaussians from the stream.
inline void kawasaki_step(const Model& model, std::vector<double>& x,
                          double dt, RngStream& rng) {
  const int n = model.n_sites;
  model.check_size(x.size());
  if (dt < 0.0 || dt > max_stable_dt(n) * (1.0 + 1e-12))
    throw std::invalid_argument("time step violates the stability bound");

  const std::vector<double> g = model.grad_energy(x);
  const SecondDifference a(n);
  const std::vector<double> ag = a.apply(g);

  std::vector<double> xi(std::size_t(n), 0.0);
  for (double& z : xi) z = rng.gaussian();

  const double amp = std::sqrt(2.0 * dt) * double(n);
  for (int i = 0; i < n; ++i) {
    const int im = (i + n - 1) % n;
    x[std::size_t(i)] += -dt * ag[std::size_t(i)] +
                         amp * (xi[std::size_t(im)] - xi[std::size_t(i)]);
  }
  for (double v : x)
    if (!std::isfinite(v))
      throw std::runtime_error("spin configuration left the finite range");
}

// Evaluate a profile on the torus at the N cell centers (i + 1/2) / N.
inline std::vector<double> lift_profile(
    const std::function<double(double)>& zeta0, int n) {
  std::vector<double> x(std::size_t(n), 0.0);
  for (int i = 0; i < n; ++i) x[std::size_t(i)] = zeta0((i + 0.5) / n);
  return x;
}

// How trajectory starting points are drawn around a profile.
struct InitialLaw {
  enum class Kind {
    deterministic,       // exact lift, no randomness
    local_equilibrium,   // constrained measure given the block means of the lift
  };
  Kind kind = Kind::deterministic;
  std::vector<double> profile;  // lifted zeta_0, one value per site
  BlockScheme scheme;           // local_equilibrium only
  ChainConfig chain;            // local_equilibrium sampler settings

  static InitialLaw deterministic_lift(std::vector<double> lifted) {
    InitialLaw law;
    law.profile = std::move(lifted);
    return law;
  }

  static InitialLaw local_equilibrium_around(std::vector<double> lifted,
                                             const BlockScheme& scheme,
                                             const ChainConfig& chain) {
    InitialLaw law;
    law.kind = Kind::local_equilibrium;
    law.profile = std::move(lifted);
    law.scheme = scheme;
    law.chain = chain;
    return law;
  }
};

struct Checkpoint {
  double t = 0.0;
  std::vector<double> x;
};

struct Trajectory {
  int index = 0;
  std::vector<Checkpoint> points;
};

struct TrajectoryEnsemble {
  std::vector<Trajectory> trajectories;
};

// Independent trajectories from (seed, index): SDE noise uses stream
// 2*index, the initial-law sampler stream 2*index + 1.  Checkpoint times
// are hit exactly by subdividing each interval into equal steps no larger
// than cfg.dt, so refining dt never moves the observation times.
// first_traj offsets the index so a caller can split one ensemble across
// workers without changing any stream assignment.
inline TrajectoryEnsemble simulate_ensemble(
    const Model& model, const InitialLaw& init, const SdeConfig& cfg,
    int n_traj, const std::vector<double>& checkpoint_times,
    int first_traj = 0) {
  const int n = model.n_sites;
  if (int(init.profile.size()) != n)
    throw std::invalid_argument("initial profile size mismatch");
  if (!(cfg.dt > 0.0))
    throw std::invalid_argument("time step must be positive");
  if (cfg.dt > max_stable_dt(n, cfg.stability_factor) * (1.0 + 1e-12))
    throw std::invalid_argument("time step violates the stability bound");
  double prev = 0.0;
  for (double t : checkpoint_times) {
    if (t < prev) throw std::invalid_argument("checkpoint times must increase");
    prev = t;
  }

  TrajectoryEnsemble ens;
  ens.trajectories.resize(std::size_t(n_traj));
  for (int slot = 0; slot < n_traj; ++slot) {
    auto& out = ens.trajectories[std::size_t(slot)];
    const int traj = first_traj + slot;
    out.index = traj;
    RngStream noise(cfg.seed, 2 * std::uint64_t(traj));

    std::vector<double> x;
    if (init.kind == InitialLaw::Kind::deterministic) {
      x = init.profile;
    } else {
      const auto y = project_blocks(init.scheme, init.profile);
      ChainConfig chain = init.chain;
      chain.seed = cfg.seed;
      chain.stream = 2 * std::uint64_t(traj) + 1;
      EnsembleSampler s(make_tilted_target(model, 0.0),
                        ConstraintSpec::fixed_blocks(init.scheme, y), chain);
      s.run(chain.burn_in);
      x = s.state();
    }

    double t = 0.0;
    for (double target : checkpoint_times) {
      const double span = target - t;
      if (span > 0.0) {
        const int steps = std::max(1, int(std::ceil(span / cfg.dt - 1e-12)));
        const double dt = span / steps;
        for (int s = 0; s < steps; ++s) kawasaki_step(model, x, dt, noise);
      }
      t = target;
      out.points.push_back({t, x});
    }
  }
  return ens;
}

// Ensemble mean configuration at checkpoint index c.
inline std::vector<double> ensemble_mean_profile(const TrajectoryEnsemble& ens,
                                                 std::size_t c) {
  if (ens.trajectories.empty()) throw std::invalid_argument("empty ensemble");
  const std::size_t n = ens.trajectories[0].points.at(c).x.size();
  std::vector<double> mu(n, 0.0);
  for (const auto& tr : ens.trajectories)
    for (std::size_t i = 0; i < n; ++i) mu[i] += tr.points.at(c).x[i];
  for (double& v : mu) v /= double(ens.trajectories.size());
  return mu;
}

}  // namespace spinscale

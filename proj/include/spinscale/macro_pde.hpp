#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "spinscale/free_energy.hpp"

namespace spinscale {

// Limiting nonlinear diffusion on the unit circle: d zeta/dt equals the
// second derivative of w(zeta), with w the slope of the limiting free
// energy.  Cell-centered grid, conservative flux form, fully implicit
// first-order steps solved by Newton on a periodic tridiagonal Jacobian.

struct MacroFlux {
  std::function<double(double)> w;   // monotone flux potential
  std::function<double(double)> dw;  // its derivative, positive
};

inline MacroFlux flux_from_limit(const LegendreTable& table) {
  auto shared = std::make_shared<LegendreTable>(table);
  MacroFlux f;
  f.w = [shared](double z) { return shared->slope(z); };
  f.dw = [shared](double z) { return shared->slope.derivative(z); };
  return f;
}

struct MacroConfig {
  double dt = 1e-4;
  double newton_tol = 1e-10;  // relative residual per step
  int max_newton = 25;
  int max_halvings = 40;      // per base step before giving up
};

struct MacroState {
  double t = 0.0;
  std::vector<double> zeta;
};

struct MacroRun {
  std::vector<MacroState> states;
  long steps = 0;     // accepted implicit steps
  long halvings = 0;  // Newton rescues across the whole run
};

namespace detail {

// Periodic tridiagonal solve by rank-one correction of a plain tridiagonal
// factorization.  The system here is strictly diagonally dominant by
// columns (identity plus a nonnegative-weighted difference stencil), so
// elimination without pivoting is stable.  Returns false on a vanishing
// pivot so the caller can treat the step as failed.
inline bool cyclic_tridiagonal_solve(std::vector<double> diag,
                                     const std::vector<double>& lower,
                                     const std::vector<double>& upper,
                                     std::vector<double> rhs,
                                     std::vector<double>& out) {
  const int n = int(diag.size());
  const double corner_up = upper[std::size_t(n - 1)];  // (n-1, 0) entry
  const double corner_lo = lower[0];                   // (0, n-1) entry
  const double gamma = -diag[0];
  diag[0] -= gamma;
  diag[std::size_t(n - 1)] -= corner_up * corner_lo / gamma;

  auto thomas = [&](std::vector<double> d, std::vector<double> r,
                    std::vector<double>& x) {
    for (int i = 1; i < n; ++i) {
      if (std::abs(d[std::size_t(i - 1)]) < 1e-300) return false;
      const double m = lower[std::size_t(i)] / d[std::size_t(i - 1)];
      d[std::size_t(i)] -= m * upper[std::size_t(i - 1)];
      r[std::size_t(i)] -= m * r[std::size_t(i - 1)];
    }
    if (std::abs(d[std::size_t(n - 1)]) < 1e-300) return false;
    x.assign(std::size_t(n), 0.0);
    x[std::size_t(n - 1)] = r[std::size_t(n - 1)] / d[std::size_t(n - 1)];
    for (int i = n - 2; i >= 0; --i)
      x[std::size_t(i)] = (r[std::size_t(i)] -
                           upper[std::size_t(i)] * x[std::size_t(i + 1)]) /
                          d[std::size_t(i)];
    return true;
  };

  std::vector<double> u(std::size_t(n), 0.0);
  u[0] = gamma;
  u[std::size_t(n - 1)] = corner_up;
  std::vector<double> y, z;
  if (!thomas(diag, std::move(rhs), y)) return false;
  if (!thomas(diag, std::move(u), z)) return false;
  const double vy = y[0] + corner_lo / gamma * y[std::size_t(n - 1)];
  const double vz = z[0] + corner_lo / gamma * z[std::size_t(n - 1)];
  const double denom = 1.0 + vz;
  if (std::abs(denom) < 1e-300) return false;
  out.assign(std::size_t(n), 0.0);
  for (int i = 0; i < n; ++i)
    out[std::size_t(i)] = y[std::size_t(i)] - vy / denom * z[std::size_t(i)];
  return true;
}

}  // namespace detail

// One implicit step of size dt from state zc; returns false when Newton
// fails to reach the residual target.
inline bool macro_implicit_step(const MacroFlux& flux,
                                const std::vector<double>& zc, double dt,
                                const MacroConfig& cfg,
                                std::vector<double>& out) {
  const int n = int(zc.size());
  const double s = dt * double(n) * double(n);
  double scale = 1.0;
  for (double v : zc) scale = std::max(scale, std::abs(v));

  std::vector<double> z = zc;  // Newton iterate
  std::vector<double> wv(std::size_t(n), 0.0), g(std::size_t(n), 0.0);
  std::vector<double> dv(std::size_t(n), 0.0);
  std::vector<double> diag(std::size_t(n), 0.0), lower(std::size_t(n), 0.0),
      upper(std::size_t(n), 0.0), delta(std::size_t(n), 0.0);
  for (int it = 0; it < cfg.max_newton; ++it) {
    for (int j = 0; j < n; ++j) wv[std::size_t(j)] = flux.w(z[std::size_t(j)]);
    double res = 0.0;
    for (int j = 0; j < n; ++j) {
      const int jm = (j + n - 1) % n, jp = (j + 1) % n;
      g[std::size_t(j)] = z[std::size_t(j)] - zc[std::size_t(j)] -
                          s * (wv[std::size_t(jm)] - 2.0 * wv[std::size_t(j)] +
                               wv[std::size_t(jp)]);
      if (!std::isfinite(g[std::size_t(j)])) return false;
      res = std::max(res, std::abs(g[std::size_t(j)]));
    }
    if (res <= cfg.newton_tol * scale) {
      // Re-anchor the cell mean: Newton stops at a small but nonzero
      // residual, and without this the conserved mass would random-walk
      // across long runs.
      double drift = 0.0;
      for (int j = 0; j < n; ++j)
        drift += z[std::size_t(j)] - zc[std::size_t(j)];
      drift /= double(n);
      for (int j = 0; j < n; ++j) z[std::size_t(j)] -= drift;
      out = z;
      return true;
    }
    for (int j = 0; j < n; ++j) {
      const double d = flux.dw(z[std::size_t(j)]);
      if (!std::isfinite(d) || d < 0.0) return false;
      dv[std::size_t(j)] = d;
      diag[std::size_t(j)] = 1.0 + 2.0 * s * d;
    }
    for (int j = 0; j < n; ++j) {
      const int jm = (j + n - 1) % n, jp = (j + 1) % n;
      lower[std::size_t(j)] = -s * dv[std::size_t(jm)];  // column j-1 in row j
      upper[std::size_t(j)] = -s * dv[std::size_t(jp)];
    }
    if (!detail::cyclic_tridiagonal_solve(diag, lower, upper, g, delta))
      return false;
    for (int j = 0; j < n; ++j) z[std::size_t(j)] -= delta[std::size_t(j)];
  }
  return false;
}

inline MacroRun solve_macro_pde(const MacroFlux& flux,
                                std::vector<double> zeta, double horizon,
                                const MacroConfig& cfg = {},
                                std::vector<double> checkpoint_times = {}) {
  if (zeta.size() < 3) throw std::invalid_argument("need >= 3 cells");
  if (!(horizon >= 0.0)) throw std::invalid_argument("negative horizon");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("step must be positive");
  double prev = 0.0;
  for (double t : checkpoint_times) {
    if (t < prev || t > horizon + 1e-12)
      throw std::invalid_argument("checkpoints must increase and stay within the horizon");
    prev = t;
  }
  if (checkpoint_times.empty() || checkpoint_times.back() < horizon)
    checkpoint_times.push_back(horizon);

  MacroRun run;
  double t = 0.0;
  std::size_t next_cp = 0;
  auto record = [&](double at) { run.states.push_back({at, zeta}); };
  if (checkpoint_times[0] == 0.0) {
    record(0.0);
    ++next_cp;
  }

  std::vector<double> znext;
  while (next_cp < checkpoint_times.size()) {
    const double target = checkpoint_times[next_cp];
    if (target - t <= 1e-13 * (1.0 + std::abs(target))) {
      t = target;
      record(target);
      ++next_cp;
      continue;
    }
    double h = std::min(cfg.dt, target - t);
    int halved = 0;
    while (!macro_implicit_step(flux, zeta, h, cfg, znext)) {
      if (++halved > cfg.max_halvings)
        throw std::runtime_error(
            "Newton failed to converge after repeated step halving");
      h *= 0.5;
      ++run.halvings;
    }
    zeta.swap(znext);
    t += h;
    ++run.steps;
  }
  return run;
}

inline double cell_mean(const std::vector<double>& zeta) {
  double acc = 0.0;
  for (double v : zeta) acc += v;
  return acc / double(zeta.size());
}

}  // namespace spinscale

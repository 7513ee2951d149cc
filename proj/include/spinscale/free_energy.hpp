#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "spinscale/grid.hpp"
#include "spinscale/model.hpp"
#include "spinscale/pchip.hpp"
#include "spinscale/transfer.hpp"

namespace spinscale {

inline Model with_sites(const Model& m, int n) {
  Model r = m;
  r.n_sites = n;
  if (!r.field.empty()) r.field.resize(std::size_t(n), 0.0);
  return r;
}

// sigma -> free-energy density, either at finite chain length (a_N / N) or in
// the infinite-chain limit (top transfer eigenvalue).  Evaluations are
// memoized; derivatives use centered differences with one Richardson step,
// which is exact for quadratic profiles and O(delta^4) in general.
class FreeEnergyFunction {
 public:
  static FreeEnergyFunction finite_n(const Model& m, int n,
                                     QuadratureGrid grid = {}) {
    FreeEnergyFunction f;
    f.model_ = with_sites(m, n);
    f.n_ = n;
    f.grid_ = grid;
    return f;
  }

  static FreeEnergyFunction limit(const Model& m, QuadratureGrid grid = {}) {
    FreeEnergyFunction f;
    f.model_ = m;
    f.n_ = 0;
    f.grid_ = grid;
    return f;
  }

  int chain_length() const { return n_; }  // 0 means the limit object

  double value(double sigma) const {
    auto it = cache_.find(sigma);
    if (it != cache_.end()) return it->second;
    double v;
    // Both routes widen their window to the tilt internally.
    if (n_ > 0) {
      v = log_partition_chain(model_, sigma, grid_) / double(n_);
    } else {
      const auto r = free_energy_density_limit(model_, sigma, grid_);
      if (!r.converged) throw std::runtime_error("eigenvalue iteration did not converge");
      v = r.log_value;
    }
    cache_.emplace(sigma, v);
    return v;
  }

  double derivative(double sigma, double delta = 0.02) const {
    const double d1 = (value(sigma + delta) - value(sigma - delta)) / (2.0 * delta);
    const double d2 =
        (value(sigma + delta / 2) - value(sigma - delta / 2)) / delta;
    return (4.0 * d2 - d1) / 3.0;
  }

  double second_derivative(double sigma, double delta = 0.05) const {
    const double s1 = (value(sigma + delta) - 2.0 * value(sigma) +
                       value(sigma - delta)) / (delta * delta);
    const double s2 = (value(sigma + delta / 2) - 2.0 * value(sigma) +
                       value(sigma - delta / 2)) / (delta * delta / 4.0);
    return (4.0 * s2 - s1) / 3.0;
  }

 private:
  Model model_;
  int n_ = 0;
  QuadratureGrid grid_;
  mutable std::map<double, double> cache_;
};

// Tabulated free-energy curve on a sigma grid with grid-difference
// derivatives (centered + Richardson on the tabulated values).
struct FreeEnergyCurve {
  std::vector<double> sigma, A, A1, A2;
  int n = 0;  // 0 = limit curve

  Pchip interp_value() const { return Pchip(sigma, A); }
  Pchip interp_derivative() const { return Pchip(sigma, A1); }
};

inline FreeEnergyCurve tabulate_free_energy(const FreeEnergyFunction& f,
                                            double lo = -6.0, double hi = 6.0,
                                            double step = 0.05) {
  FreeEnergyCurve c;
  c.n = f.chain_length();
  const int count = int(std::lround((hi - lo) / step)) + 1;
  c.sigma.resize(count);
  c.A.resize(count);
  for (int i = 0; i < count; ++i) {
    c.sigma[i] = lo + i * step;
    c.A[i] = f.value(c.sigma[i]);
  }
  c.A1.resize(count);
  c.A2.resize(count);
  const double h = step;
  for (int i = 0; i < count; ++i) {
    if (i >= 2 && i + 2 < count) {
      const double dh = (c.A[i + 1] - c.A[i - 1]) / (2.0 * h);
      const double d2h = (c.A[i + 2] - c.A[i - 2]) / (4.0 * h);
      c.A1[i] = (4.0 * dh - d2h) / 3.0;
      const double sh = (c.A[i + 1] - 2.0 * c.A[i] + c.A[i - 1]) / (h * h);
      const double s2h = (c.A[i + 2] - 2.0 * c.A[i] + c.A[i - 2]) / (4.0 * h * h);
      c.A2[i] = (4.0 * sh - s2h) / 3.0;
    } else {
      // Near the edges fall back to direct evaluation off the grid.
      c.A1[i] = f.derivative(c.sigma[i]);
      c.A2[i] = f.second_derivative(c.sigma[i]);
    }
  }
  return c;
}

struct LegendreResult {
  double m = 0.0;
  double sigma_star = 0.0;  // maximizer; also the derivative of the transform
  double value = 0.0;       // sup_sigma (sigma m - A(sigma))
  double residual = 0.0;    // |A'(sigma_star) - m|
  int iterations = 0;
  bool clamped = false;     // m outside the solver bracket's derivative range
};

// Convex conjugate at a single point by Newton on A'(sigma) = m with a
// bisection safeguard; A'' is uniformly positive, so the root is unique.
// The bracket grows geometrically from the quadratic-case guess, so the
// common path never evaluates the curve far beyond the root.
inline LegendreResult legendre_point(const FreeEnergyFunction& f, double m,
                                     double bracket_cap = 48.0) {
  LegendreResult r;
  r.m = m;
  double hi = 1.0 + 2.0 * std::max(0.0, m);
  double lo = -1.0 - 2.0 * std::max(0.0, -m);
  while (f.derivative(hi) < m && hi < bracket_cap)
    hi = std::min(bracket_cap, 2.0 * hi);
  while (f.derivative(lo) > m && lo > -bracket_cap)
    lo = std::max(-bracket_cap, 2.0 * lo);
  const double flo = f.derivative(lo) - m;
  const double fhi = f.derivative(hi) - m;
  if (flo > 0.0 || fhi < 0.0) {
    // Derivative range does not cover m; report a clamped result.
    r.clamped = true;
    r.sigma_star = flo > 0.0 ? lo : hi;
    r.value = r.sigma_star * m - f.value(r.sigma_star);
    r.residual = std::abs(f.derivative(r.sigma_star) - m);
    return r;
  }
  double sigma = std::min(hi, std::max(lo, m));  // quadratic-case guess
  for (int it = 0; it < 100; ++it) {
    const double g = f.derivative(sigma) - m;
    r.iterations = it + 1;
    if (std::abs(g) <= 1e-10) {
      r.residual = std::abs(g);
      break;
    }
    if (g > 0.0)
      hi = sigma;
    else
      lo = sigma;
    const double slope = f.second_derivative(sigma);
    double next = sigma - g / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    sigma = next;
    r.residual = std::abs(g);
  }
  r.sigma_star = sigma;
  r.value = sigma * m - f.value(sigma);
  return r;
}

// Parametric conjugate table from a tabulated curve: each sigma node
// contributes (m_i, phi_i, sigma_i) = (A'(sigma_i), sigma_i m_i - A_i,
// sigma_i).  The slope function m -> sigma_star(m) is the derivative of the
// transform; both interpolants inherit monotonicity from convexity.
struct LegendreTable {
  Pchip value;       // m -> conjugate value
  Pchip slope;       // m -> sigma_star = derivative of the conjugate
  double m_lo = 0.0;
  double m_hi = 0.0;
};

inline LegendreTable build_legendre_table(const FreeEnergyCurve& c) {
  std::vector<double> ms, vals, sigs;
  double last_m = -1e300;
  for (std::size_t i = 0; i < c.sigma.size(); ++i) {
    const double m = c.A1[i];
    if (!(m > last_m + 1e-12)) continue;  // enforce strict monotonicity
    last_m = m;
    ms.push_back(m);
    vals.push_back(c.sigma[i] * m - c.A[i]);
    sigs.push_back(c.sigma[i]);
  }
  if (ms.size() < 4) throw std::runtime_error("conjugate table degenerate");
  LegendreTable t;
  t.value = Pchip(ms, vals);
  t.slope = Pchip(ms, sigs);
  t.m_lo = ms.front();
  t.m_hi = ms.back();
  return t;
}

// Joint transfer recursion over (last coordinate, running sum): computes the
// unnormalized density of sum x_i at every node of an aligned sum grid in a
// single sweep.  Range <= 1.  The per-layer rescaling keeps values bounded;
// log scales accumulate.
class SumDensity {
 public:
  SumDensity(const Model& model, int n, QuadratureGrid grid = {8.0, 161, QuadKind::trapezoid}) {
    if (model.kernel.range > 1)
      throw std::invalid_argument("sum-density recursion supports range <= 1");
    n_ = n;
    const Model m = with_sites(model, n);
    const QuadRule q = make_rule(grid);
    const int g = int(q.size());
    dx_ = (2.0 * grid.half_width) / (grid.points - 1);
    const double h1 = m.kernel.coupling(1);

    // Site factors exp(-psi(x) - s_i x); the tilt plays no role under the
    // sum constraint.
    auto site_f = [&](int i, double z) {
      return std::exp(-m.potential.value(z) - m.field_at(i) * z);
    };

    // M(b,a) = exp(-h1 x_a x_b) w_a: integrates out the previous coordinate.
    Eigen::MatrixXd M(g, g);
    for (int b = 0; b < g; ++b)
      for (int a = 0; a < g; ++a)
        M(b, a) = std::exp(-h1 * q.x[a] * q.x[b]) * q.w[a];

    // Layer 1: D(a, j) = f_1(x_a) [j == a] / dx  (sum grid = x grid).
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(g, g);
    for (int a = 0; a < g; ++a) D(a, a) = site_f(0, q.x[a]) / dx_;
    double log_scale = 0.0;

    for (int k = 1; k < n; ++k) {
      const int scols = int(D.cols());
      Eigen::MatrixXd C = M * D;  // C(b, i) = sum_a M(b,a) D(a,i)
      Eigen::MatrixXd Dn = Eigen::MatrixXd::Zero(g, scols + g - 1);
      for (int b = 0; b < g; ++b) {
        const double fb = site_f(k, q.x[b]);
        for (int i = 0; i < scols; ++i) Dn(b, b + i) = fb * C(b, i);
      }
      const double s = Dn.maxCoeff();
      if (!(s > 0.0)) throw std::runtime_error("sum-density recursion underflow");
      log_scale += std::log(s);
      D = Dn / s;
    }

    // Integrate out the last coordinate; sum node j corresponds to
    // S_j = -n L + j dx.
    const int scols = int(D.cols());
    s_lo_ = -double(n) * grid.half_width;
    log_density_.assign(scols, -std::numeric_limits<double>::infinity());
    for (int j = 0; j < scols; ++j) {
      double acc = 0.0;
      for (int b = 0; b < g; ++b) acc += q.w[b] * D(b, j);
      if (acc > 0.0) log_density_[j] = std::log(acc) + log_scale;
    }
  }

  // log of the sum density at S, cubic interpolation between nodes.
  double log_density(double S) const {
    const double t = (S - s_lo_) / dx_;
    const int j = int(std::floor(t));
    const int count = int(log_density_.size());
    if (j < 2 || j + 2 >= count)
      throw std::invalid_argument("sum outside representable range");
    for (int i = j - 1; i <= j + 2; ++i)
      if (!std::isfinite(log_density_[i]))
        throw std::invalid_argument("sum density vanishes at requested point");
    const double u = t - j;  // in [0,1)
    // 4-point Lagrange on nodes j-1 .. j+2.
    const double ym1 = log_density_[j - 1], y0 = log_density_[j];
    const double y1 = log_density_[j + 1], y2 = log_density_[j + 2];
    const double c_m1 = -u * (u - 1.0) * (u - 2.0) / 6.0;
    const double c_0 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
    const double c_1 = -(u + 1.0) * u * (u - 2.0) / 2.0;
    const double c_2 = (u + 1.0) * u * (u - 1.0) / 6.0;
    return c_m1 * ym1 + c_0 * y0 + c_1 * y1 + c_2 * y2;
  }

  // Constrained free energy per site at mean m, with the measure on the
  // constraint hyperplane normalized as surface measure (the sqrt(N) factor
  // relative to coordinate Lebesgue measure is included here and pinned by
  // the Gaussian closed form).
  double hbar(double m) const {
    return -(0.5 * std::log(double(n_)) + log_density(double(n_) * m)) / double(n_);
  }

  int chain_length() const { return n_; }

 private:
  int n_ = 0;
  double dx_ = 0.0;
  double s_lo_ = 0.0;
  std::vector<double> log_density_;
};

// Tabulated one-constraint coarse-grained curve with interpolated first and
// second derivatives.  The derivative nodes come from Richardson-extrapolated
// centered differences of the recursion values; convexity makes them
// increasing, so the interpolant is monotone.
struct CoarseGrainedCurve {
  int k = 0;  // chain length the curve was computed at
  std::vector<double> m, value;
  Pchip interp;    // m -> value
  Pchip d_interp;  // m -> first derivative

  double operator()(double mm) const { return interp(mm); }
  double d1(double mm) const { return d_interp(mm); }
  double d2(double mm) const { return d_interp.derivative(mm); }
};

inline CoarseGrainedCurve tabulate_hbar(const Model& model, int k,
                                        double m_lo = -2.5, double m_hi = 2.5,
                                        double step = 0.05,
                                        QuadratureGrid grid = {8.0, 161,
                                                               QuadKind::trapezoid}) {
  const SumDensity sd(model, k, grid);
  CoarseGrainedCurve c;
  c.k = k;
  const int count = int(std::lround((m_hi - m_lo) / step)) + 1;
  c.m.resize(count);
  c.value.resize(count);
  for (int i = 0; i < count; ++i) {
    c.m[i] = m_lo + i * step;
    c.value[i] = sd.hbar(c.m[i]);
  }
  std::vector<double> d1(count);
  for (int i = 0; i < count; ++i) {
    const double h = step;
    auto val = [&](double mm) { return sd.hbar(mm); };
    const double mm = c.m[i];
    const double dh = (val(mm + h) - val(mm - h)) / (2.0 * h);
    const double dh2 = (val(mm + h / 2) - val(mm - h / 2)) / h;
    d1[i] = (4.0 * dh2 - dh) / 3.0;
  }
  c.interp = Pchip(c.m, c.value);
  c.d_interp = Pchip(c.m, d1);
  return c;
}

struct CramerGapResult {
  double hbar = 0.0;      // constrained free energy at (N, m)
  double finite_conjugate = 0.0;  // conjugate of the finite-N curve
  double limit_conjugate = 0.0;   // conjugate of the limit curve (flux potential)
  double gap_finite = 0.0;        // hbar - finite conjugate
  double gap_limit = 0.0;         // hbar - limit conjugate
};

inline CramerGapResult cramer_gap(const Model& model, double m, int n,
                                  const QuadratureGrid& sum_grid = {8.0, 161,
                                                                    QuadKind::trapezoid},
                                  const QuadratureGrid& sigma_grid = {}) {
  CramerGapResult r;
  const SumDensity sd(model, n, sum_grid);
  r.hbar = sd.hbar(m);
  const auto fn = FreeEnergyFunction::finite_n(model, n, sigma_grid);
  const auto fl = FreeEnergyFunction::limit(model, sigma_grid);
  r.finite_conjugate = legendre_point(fn, m).value;
  r.limit_conjugate = legendre_point(fl, m).value;
  r.gap_finite = r.hbar - r.finite_conjugate;
  r.gap_limit = r.hbar - r.limit_conjugate;
  return r;
}

inline double subadditivity_defect(const Model& model, double sigma, int n1,
                                   int n2, const QuadratureGrid& grid = {}) {
  const double a12 = log_partition_chain(with_sites(model, n1 + n2), sigma, grid);
  const double a1 = log_partition_chain(with_sites(model, n1), sigma, grid);
  const double a2 = log_partition_chain(with_sites(model, n2), sigma, grid);
  return a12 - a1 - a2;
}

}  // namespace spinscale

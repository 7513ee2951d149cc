#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spinscale/blocks.hpp"
#include "spinscale/free_energy.hpp"
#include "spinscale/model.hpp"
#include "spinscale/sampler.hpp"
#include "spinscale/stats.hpp"

namespace spinscale {

// Coarse description of the chain at the block level.  Two routes to the
// block-constrained free energy live here: the decoupled-block surrogate
// built from per-block constrained recursions (fast, deterministic), and
// Monte Carlo estimators of the exact quantity's derivatives under the
// full measure conditioned on all block means.
//
// Conventions: values are per lattice site; gradients and Hessians are
// taken with respect to the weighted coarse inner product
// <u, v> = (1/M) sum_l u_l v_l, so for equal blocks the gradient component
// at block l is the per-block derivative d/dy_l of the block's own curve
// and both objects stay order one as M grows.

// Per-block constrained curves summed with weights K_l / N.  Blocks of
// equal size share one tabulated curve when the pinned field is absent.
struct AuxFreeEnergy {
  BlockScheme scheme;
  std::vector<int> curve_of;             // block -> index into curves
  std::vector<CoarseGrainedCurve> curves;

  const CoarseGrainedCurve& curve(int l) const {
    return curves[std::size_t(curve_of[std::size_t(l)])];
  }

  double value(const std::vector<double>& y) const {
    check(y);
    double acc = 0.0;
    for (int l = 0; l < scheme.blocks(); ++l)
      acc += double(scheme.sizes[std::size_t(l)]) / scheme.n_sites *
             curve(l)(y[std::size_t(l)]);
    return acc;
  }

  std::vector<double> gradient(const std::vector<double>& y) const {
    check(y);
    std::vector<double> g(y.size());
    for (int l = 0; l < scheme.blocks(); ++l)
      g[std::size_t(l)] = scheme.weight(l) * curve(l).d1(y[std::size_t(l)]);
    return g;
  }

  // Diagonal of the Hessian operator; the surrogate has no off-diagonal
  // part because the blocks decouple.
  std::vector<double> curvature(const std::vector<double>& y) const {
    check(y);
    std::vector<double> c(y.size());
    for (int l = 0; l < scheme.blocks(); ++l)
      c[std::size_t(l)] = scheme.weight(l) * curve(l).d2(y[std::size_t(l)]);
    return c;
  }

  // Second difference of value along direction d, normalized by the
  // weighted squared norm of d: a Rayleigh quotient of the Hessian, so
  // uniform convexity shows up as a positive lower bound over directions.
  double directional_second_difference(const std::vector<double>& y,
                                       const std::vector<double>& d,
                                       double delta) const {
    check(y);
    check(d);
    double norm2 = 0.0;
    for (double v : d) norm2 += v * v;
    norm2 /= double(scheme.blocks());
    if (!(norm2 > 0.0)) throw std::invalid_argument("zero direction");
    std::vector<double> yp = y, ym = y;
    for (std::size_t l = 0; l < y.size(); ++l) {
      yp[l] += delta * d[l];
      ym[l] -= delta * d[l];
    }
    return (value(yp) - 2.0 * value(y) + value(ym)) / (delta * delta * norm2);
  }

 private:
  void check(const std::vector<double>& y) const {
    if (int(y.size()) != scheme.blocks())
      throw std::invalid_argument("coarse vector size mismatch");
  }
};

inline AuxFreeEnergy make_aux_free_energy(
    const Model& model, const BlockScheme& scheme, double m_lo = -2.5,
    double m_hi = 2.5, double step = 0.05,
    QuadratureGrid grid = {8.0, 161, QuadKind::trapezoid}) {
  scheme.check_sites(std::size_t(model.n_sites));
  AuxFreeEnergy a;
  a.scheme = scheme;
  a.curve_of.resize(std::size_t(scheme.blocks()));
  std::map<int, int> by_size;  // valid only when every block sees the same model
  for (int l = 0; l < scheme.blocks(); ++l) {
    if (model.field.empty()) {
      const auto it = by_size.find(scheme.sizes[std::size_t(l)]);
      if (it != by_size.end()) {
        a.curve_of[std::size_t(l)] = it->second;
        continue;
      }
    }
    a.curves.push_back(tabulate_hbar(model.block_model(scheme, l),
                                     scheme.sizes[std::size_t(l)], m_lo, m_hi,
                                     step, grid));
    a.curve_of[std::size_t(l)] = int(a.curves.size()) - 1;
    if (model.field.empty())
      by_size[scheme.sizes[std::size_t(l)]] = a.curve_of[std::size_t(l)];
  }
  return a;
}

namespace detail {

// Per-block sums of the fluctuating force psi_b'(x_i) + sum_j M_ij x_j;
// the linear part of the site potential contributes K_l y_l exactly under
// the constraint and is handled in closed form by the callers.
inline std::vector<double> block_force_sums(const Model& m,
                                            const BlockScheme& s,
                                            const std::vector<double>& x) {
  std::vector<double> g(std::size_t(s.blocks()), 0.0);
  for (int l = 0; l < s.blocks(); ++l) {
    double acc = 0.0;
    for (int i = 0; i < s.sizes[std::size_t(l)]; ++i) {
      const int site = s.offsets[std::size_t(l)] + i;
      acc += m.potential.bounded_d1(x[std::size_t(site)]) +
             m.interaction_at(x, site);
    }
    g[std::size_t(l)] = acc;
  }
  return g;
}

// Sum of couplings over ordered site pairs (i, j) with i in block l, j in
// block n, i != j: the (l, n) block sum of the interaction matrix.
inline double block_pair_coupling_sum(const Model& m, const BlockScheme& s,
                                      int l, int n) {
  double acc = 0.0;
  const int lo = s.offsets[std::size_t(n)];
  const int hi = lo + s.sizes[std::size_t(n)];
  for (int i = 0; i < s.sizes[std::size_t(l)]; ++i) {
    const int site = s.offsets[std::size_t(l)] + i;
    for (int r = 1; r <= m.kernel.range; ++r) {
      const double c = m.kernel.coupling(r);
      if (site - r >= lo && site - r < hi) acc += c;
      if (site + r >= lo && site + r < hi) acc += c;
    }
  }
  return acc;
}

}  // namespace detail

struct MesoGradient {
  std::vector<double> estimate, se;
};

// Gradient of the exact block-constrained free energy in the weighted
// coarse metric, estimated under the full measure conditioned on the block
// means: component l is
//   alpha_l y_l + (M/N) sum_{i in B(l)} s_i + (M/N) E[ G_l ],
// with G_l the block sum of psi_b'(x_i) + sum_j M_ij x_j.  Only the last
// term carries Monte Carlo error.
inline MesoGradient meso_gradient_sampled(const Model& model,
                                          const BlockScheme& scheme,
                                          const std::vector<double>& y,
                                          const ChainConfig& cfg, int count) {
  const auto run =
      draw_samples(model, ConstraintSpec::fixed_blocks(scheme, y), cfg, count);
  const int nb = scheme.blocks();
  const double mn = double(nb) / model.n_sites;
  MesoGradient out;
  out.estimate.resize(std::size_t(nb));
  out.se.resize(std::size_t(nb));
  std::vector<std::vector<double>> series(
      std::size_t(nb), std::vector<double>(run.samples.size()));
  for (std::size_t t = 0; t < run.samples.size(); ++t) {
    const auto g = detail::block_force_sums(model, scheme, run.samples[t]);
    for (int l = 0; l < nb; ++l) series[std::size_t(l)][t] = g[std::size_t(l)];
  }
  for (int l = 0; l < nb; ++l) {
    double fld = 0.0;
    for (int i = 0; i < scheme.sizes[std::size_t(l)]; ++i)
      fld += model.field_at(scheme.offsets[std::size_t(l)] + i);
    const auto bm = batch_means(series[std::size_t(l)]);
    out.estimate[std::size_t(l)] =
        scheme.weight(l) * y[std::size_t(l)] + mn * fld + mn * bm.estimate;
    out.se[std::size_t(l)] = mn * bm.se;
  }
  return out;
}

struct HessianEntry {
  int l = 0, n = 0;
  double value = 0.0;
  double se = 0.0;
};

// Entries of the Hessian operator of the exact block-constrained free
// energy in the weighted coarse metric:
//   S_ln = (M/N) [ delta_ln ( K_l + E[ sum_{B(l)} psi_b''(x_i) ] )
//                  + sum_{i in B(l), j in B(n)} M_ij - cov(G_l, G_n) ].
// The identity is exact for every model; for the pure quadratic chain it
// reduces to (1/K) of the inverse projected covariance, which the tests
// pin against dense linear algebra.  All requested entries share one
// sample set.
inline std::vector<HessianEntry> meso_hessian_sampled(
    const Model& model, const BlockScheme& scheme, const std::vector<double>& y,
    const std::vector<std::pair<int, int>>& which, const ChainConfig& cfg,
    int count) {
  for (const auto& [l, n] : which)
    if (l < 0 || n < 0 || l >= scheme.blocks() || n >= scheme.blocks())
      throw std::invalid_argument("hessian entry index out of range");
  const auto run =
      draw_samples(model, ConstraintSpec::fixed_blocks(scheme, y), cfg, count);
  const std::size_t steps = run.samples.size();
  const int nb = scheme.blocks();
  const double mn = double(nb) / model.n_sites;

  std::vector<std::vector<double>> G(std::size_t(nb),
                                     std::vector<double>(steps, 0.0));
  std::vector<std::vector<double>> psi2(std::size_t(nb),
                                        std::vector<double>(steps, 0.0));
  for (std::size_t t = 0; t < steps; ++t) {
    const auto& x = run.samples[t];
    const auto g = detail::block_force_sums(model, scheme, x);
    for (int l = 0; l < nb; ++l) {
      G[std::size_t(l)][t] = g[std::size_t(l)];
      double acc = 0.0;
      for (int i = 0; i < scheme.sizes[std::size_t(l)]; ++i)
        acc += model.potential.bounded_d2(
            x[std::size_t(scheme.offsets[std::size_t(l)] + i)]);
      psi2[std::size_t(l)][t] = acc;
    }
  }
  std::vector<double> gbar(std::size_t(nb), 0.0);
  for (int l = 0; l < nb; ++l) gbar[std::size_t(l)] = sample_mean(G[std::size_t(l)]);

  std::vector<HessianEntry> out;
  out.reserve(which.size());
  std::vector<double> z(steps, 0.0);
  for (const auto& [l, n] : which) {
    const double det =
        mn * ((l == n ? double(scheme.sizes[std::size_t(l)]) : 0.0) +
              detail::block_pair_coupling_sum(model, scheme, l, n));
    for (std::size_t t = 0; t < steps; ++t) {
      const double centered = (G[std::size_t(l)][t] - gbar[std::size_t(l)]) *
                              (G[std::size_t(n)][t] - gbar[std::size_t(n)]);
      z[t] = mn * ((l == n ? psi2[std::size_t(l)][t] : 0.0) - centered);
    }
    const auto bm = batch_means(z);
    HessianEntry e;
    e.l = l;
    e.n = n;
    e.value = det + bm.estimate;
    e.se = bm.se;
    out.push_back(e);
  }
  return out;
}

// Per-site free energy gap between the exact block-constrained measure and
// its decoupled surrogate: the surface normalizations agree, so the gap is
// -(1/N) log of the partition ratio, reached by integrating the straddling
// pair terms back in.
inline ThermoResult aux_gap_sampled(const Model& model,
                                    const BlockScheme& scheme,
                                    const std::vector<double>& y,
                                    const ChainConfig& cfg, int t_nodes,
                                    int samples_per_node) {
  const auto r = thermo_log_ratio(
      make_decoupled_target(model, scheme), make_tilted_target(model, 0.0),
      ConstraintSpec::fixed_blocks(scheme, y), cfg, t_nodes, samples_per_node);
  ThermoResult gap;
  gap.log_ratio = -r.log_ratio / model.n_sites;
  gap.se = r.se / model.n_sites;
  return gap;
}

struct CurvatureScan {
  double min_d2 = std::numeric_limits<double>::infinity();
  double max_d2 = -std::numeric_limits<double>::infinity();
  double arg_min = 0.0, arg_max = 0.0;
};

inline CurvatureScan scan_curvature(const CoarseGrainedCurve& c, double m_lo,
                                    double m_hi, int n_pts = 201) {
  if (n_pts < 2) throw std::invalid_argument("need >= 2 scan points");
  CurvatureScan s;
  for (int i = 0; i < n_pts; ++i) {
    const double m = m_lo + (m_hi - m_lo) * i / (n_pts - 1);
    const double d2 = c.d2(m);
    if (d2 < s.min_d2) {
      s.min_d2 = d2;
      s.arg_min = m;
    }
    if (d2 > s.max_d2) {
      s.max_d2 = d2;
      s.arg_max = m;
    }
  }
  return s;
}

}  // namespace spinscale

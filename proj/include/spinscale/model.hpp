#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "spinscale/blocks.hpp"
#include "spinscale/potential.hpp"

namespace spinscale {

// Finite-range pair couplings, homogeneous in the site distance:
// interaction coefficient between sites i != j is coupling(|i-j|), zero
// beyond the range.  The diagonal of the full quadratic form is 1 (it comes
// from the z^2/2 part of the site potential), and strict diagonal dominance
// 2*sum_r |h(r)| + margin <= 1 keeps the quadratic part uniformly positive.
struct InteractionKernel {
  int range = 0;             // R
  std::vector<double> h;     // h[r-1] = coupling at distance r, r = 1..R
  double margin = 1.0;       // dominance slack delta

  double coupling(int dist) const {
    const int d = dist < 0 ? -dist : dist;
    if (d < 1 || d > range) return 0.0;
    return h[std::size_t(d - 1)];
  }

  double abs_sum() const {
    double acc = 0.0;
    for (double v : h) acc += std::abs(v);
    return acc;
  }
};

// The lattice model: N sites carrying real spins, single-site potential,
// finite-range couplings, optional per-site field, and the tilt parameter
// sigma of the grand canonical measure exp(sigma*sum x_i - H(x)) dx.
// Sites outside [0, N) are pinned to zero (free boundary).
struct Model {
  int n_sites = 0;
  SitePotential potential;
  InteractionKernel kernel;
  std::vector<double> field;  // s; empty means all zero
  double tilt = 0.0;          // sigma

  double field_at(int i) const {
    return field.empty() ? 0.0 : field[std::size_t(i)];
  }

  void check_size(std::size_t n) const {
    if (int(n) != n_sites) throw std::invalid_argument("configuration size mismatch");
  }

  // H(x) = sum_i [ psi(x_i) + s_i x_i ] + (1/2) sum_{1<=|i-j|<=R} h(|i-j|) x_i x_j.
  double energy(const std::vector<double>& x) const {
    check_size(x.size());
    double acc = 0.0;
    for (int i = 0; i < n_sites; ++i) {
      acc += potential.value(x[i]) + field_at(i) * x[i];
      for (int r = 1; r <= kernel.range; ++r) {
        if (i + r < n_sites) acc += kernel.coupling(r) * x[i] * x[i + r];
      }
    }
    return acc;
  }

  // Component i: psi'(x_i) + s_i + sum_{1<=|j-i|<=R} h(|i-j|) x_j.
  std::vector<double> grad_energy(const std::vector<double>& x) const {
    check_size(x.size());
    std::vector<double> g(x.size());
    for (int i = 0; i < n_sites; ++i) {
      double acc = potential.d1(x[i]) + field_at(i);
      for (int r = 1; r <= kernel.range; ++r) {
        const double c = kernel.coupling(r);
        if (i - r >= 0) acc += c * x[i - r];
        if (i + r < n_sites) acc += c * x[i + r];
      }
      g[i] = acc;
    }
    return g;
  }

  // Interaction part of gradient component j only (no psi', no field):
  // sum_{i != j} h(|i-j|) x_i.  Used by coarse-level derivative estimators.
  double interaction_at(const std::vector<double>& x, int j) const {
    double acc = 0.0;
    for (int r = 1; r <= kernel.range; ++r) {
      const double c = kernel.coupling(r);
      if (j - r >= 0) acc += c * x[j - r];
      if (j + r < int(x.size())) acc += c * x[j + r];
    }
    return acc;
  }

  // Energy with every pair term that straddles a block boundary removed;
  // the blocks then decouple, so the value equals the sum of the blocks'
  // own free-boundary energies.
  double aux_energy(const BlockScheme& scheme, const std::vector<double>& x) const {
    check_size(x.size());
    scheme.check_sites(x.size());
    std::vector<int> block_of(x.size());
    for (int l = 0; l < scheme.blocks(); ++l)
      for (int i = 0; i < scheme.sizes[l]; ++i)
        block_of[scheme.offsets[l] + i] = l;
    double acc = energy(x);
    for (int i = 0; i < n_sites; ++i) {
      for (int r = 1; r <= kernel.range; ++r) {
        const int j = i + r;
        if (j < n_sites && block_of[i] != block_of[j])
          acc -= kernel.coupling(r) * x[i] * x[j];
      }
    }
    return acc;
  }

  // Gradient of aux_energy: like grad_energy but neighbor sums stay inside
  // the site's own block.
  std::vector<double> aux_grad_energy(const BlockScheme& scheme,
                                      const std::vector<double>& x) const {
    check_size(x.size());
    scheme.check_sites(x.size());
    std::vector<int> block_of(x.size());
    for (int l = 0; l < scheme.blocks(); ++l)
      for (int i = 0; i < scheme.sizes[l]; ++i)
        block_of[scheme.offsets[l] + i] = l;
    std::vector<double> g(x.size());
    for (int i = 0; i < n_sites; ++i) {
      double acc = potential.d1(x[i]) + field_at(i);
      for (int r = 1; r <= kernel.range; ++r) {
        const double c = kernel.coupling(r);
        if (i - r >= 0 && block_of[i - r] == block_of[i]) acc += c * x[i - r];
        if (i + r < n_sites && block_of[i + r] == block_of[i]) acc += c * x[i + r];
      }
      g[i] = acc;
    }
    return g;
  }

  // Restriction of the model to one block with zero boundary outside it.
  Model block_model(const BlockScheme& scheme, int l) const {
    Model m;
    m.n_sites = scheme.sizes[l];
    m.potential = potential;
    m.kernel = kernel;
    m.tilt = tilt;
    if (!field.empty()) {
      m.field.assign(field.begin() + scheme.offsets[l],
                     field.begin() + scheme.offsets[l] + scheme.sizes[l]);
    }
    return m;
  }
};

struct ValidationCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool ok() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

inline ValidationReport validate_model(const Model& m) {
  ValidationReport rep;
  auto add = [&rep](const std::string& name, bool pass, std::string detail) {
    rep.checks.push_back({name, pass, std::move(detail)});
  };

  add("positive size", m.n_sites >= 2, "N = " + std::to_string(m.n_sites));
  add("size admits blocks", m.n_sites >= 2 * m.kernel.range + 2,
      "N >= 2R+2 required for block computations");
  add("kernel coefficient count", int(m.kernel.h.size()) == m.kernel.range,
      std::to_string(m.kernel.h.size()) + " coefficients for range " +
          std::to_string(m.kernel.range));

  bool coeffs_in_range = true;
  for (double v : m.kernel.h)
    if (!(v > -1.0 && v < 1.0)) coeffs_in_range = false;
  add("couplings in (-1,1)", coeffs_in_range, "");

  const double dom = 2.0 * m.kernel.abs_sum() + m.kernel.margin;
  add("diagonal dominance", m.kernel.margin > 0.0 && dom <= 1.0 + 1e-12,
      "2*sum|h| + margin = " + std::to_string(dom));

  const auto b = m.potential.bounded_part_bounds();
  const bool bounded = std::isfinite(b.sup_value) && std::isfinite(b.sup_d1) &&
                       std::isfinite(b.sup_d2);
  add("bounded perturbation", bounded,
      "sup|b| = " + std::to_string(b.sup_value) +
          ", sup|b'| = " + std::to_string(b.sup_d1) +
          ", sup|b''| = " + std::to_string(b.sup_d2));

  add("field length", m.field.empty() || int(m.field.size()) == m.n_sites, "");
  return rep;
}

}  // namespace spinscale

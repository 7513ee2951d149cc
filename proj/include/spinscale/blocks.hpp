#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace spinscale {

// Partition of the N lattice sites into M contiguous blocks B(l).
//
// Block means live in the coarse space Y with the weighted inner product
// <u, v>_Y = (1/M) sum_l u_l v_l.  The per-block weights alpha_l = M K_l / N
// average to 1 and enter the conserved quantity: (1/M) sum_l alpha_l y_l
// equals the fine-scale mean spin.
struct BlockScheme {
  int n_sites = 0;
  std::vector<int> sizes;    // K_l
  std::vector<int> offsets;  // first site of each block

  int blocks() const { return int(sizes.size()); }

  double weight(int l) const {
    return double(blocks()) * sizes[l] / double(n_sites);
  }

  // Balanced contiguous partition: sizes differ by at most one, so every
  // weight lies in [1/2, 2].
  static BlockScheme balanced(int n, int m) {
    if (m < 1 || n < m) throw std::invalid_argument("bad block count");
    BlockScheme s;
    s.n_sites = n;
    s.sizes.resize(m);
    s.offsets.resize(m);
    const int base = n / m;
    const int extra = n % m;
    int pos = 0;
    for (int l = 0; l < m; ++l) {
      s.sizes[l] = base + (l < extra ? 1 : 0);
      s.offsets[l] = pos;
      pos += s.sizes[l];
    }
    return s;
  }

  static BlockScheme from_sizes(int n, std::vector<int> sizes) {
    BlockScheme s;
    s.n_sites = n;
    s.sizes = std::move(sizes);
    s.offsets.resize(s.sizes.size());
    int pos = 0;
    for (std::size_t l = 0; l < s.sizes.size(); ++l) {
      if (s.sizes[l] < 1) throw std::invalid_argument("empty block");
      s.offsets[l] = pos;
      pos += s.sizes[l];
    }
    if (pos != n) throw std::invalid_argument("block sizes must sum to N");
    return s;
  }

  void check_sites(std::size_t n) const {
    if (int(n) != n_sites) throw std::invalid_argument("scheme/vector size mismatch");
  }
};

// y_l = (1/K_l) sum_{i in B(l)} x_i.
inline std::vector<double> project_blocks(const BlockScheme& s,
                                          const std::vector<double>& x) {
  s.check_sites(x.size());
  std::vector<double> y(s.blocks());
  for (int l = 0; l < s.blocks(); ++l) {
    double acc = 0.0;
    for (int i = 0; i < s.sizes[l]; ++i) acc += x[s.offsets[l] + i];
    y[l] = acc / s.sizes[l];
  }
  return y;
}

// Block-constant lift: the unique block-wise constant configuration whose
// block means are y.  Projecting the result returns y exactly.
inline std::vector<double> embed_blocks(const BlockScheme& s,
                                        const std::vector<double>& y) {
  if (int(y.size()) != s.blocks()) throw std::invalid_argument("bad meso size");
  std::vector<double> x(s.n_sites);
  for (int l = 0; l < s.blocks(); ++l)
    for (int i = 0; i < s.sizes[l]; ++i) x[s.offsets[l] + i] = y[l];
  return x;
}

// Conserved coarse quantity (1/M) sum_l alpha_l y_l = fine-scale mean.
inline double weighted_mean(const BlockScheme& s, const std::vector<double>& y) {
  double acc = 0.0;
  for (int l = 0; l < s.blocks(); ++l) acc += s.sizes[l] * y[l];
  return acc / s.n_sites;
}

inline double mean(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v;
  return x.empty() ? 0.0 : acc / double(x.size());
}

}  // namespace spinscale

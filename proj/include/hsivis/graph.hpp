#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hsivis/cube.hpp"
#include "hsivis/rng.hpp"
#include "hsivis/text_format.hpp"

namespace hsivis {

struct KernelParams {
  double mu = 0.5;
  double delta_s = 1.0;
  double delta_w = 1.0;
  std::size_t k = 10;
  std::size_t spatial_radius = 2;
  double spatial_sigma = 1.0;

  void validate() const {
    if (!(mu >= 0.0 && mu <= 1.0)) {
      throw std::invalid_argument("mu must lie in [0,1]");
    }
    if (!(delta_s > 0.0)) throw std::invalid_argument("delta_s must be > 0");
    if (!(delta_w > 0.0)) throw std::invalid_argument("delta_w must be > 0");
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (!(spatial_sigma > 0.0)) {
      throw std::invalid_argument("spatial_sigma must be > 0");
    }
  }
};

// Symmetric weighted adjacency over pixel nodes. Each unordered pair is
// stored once with i < j. finalize() builds the neighbor lists (sorted by
// neighbor index) and the degree vector; degree sums run in the same
// ascending-index order a dense row sum would.
struct SparseGraph {
  struct Edge {
    std::size_t i;
    std::size_t j;
    double w;
  };

  std::size_t n = 0;
  std::vector<Edge> edges;
  std::vector<double> degree;

  std::vector<std::size_t> adj_offsets;  // n + 1
  std::vector<std::size_t> adj_index;
  std::vector<double> adj_weight;

  void finalize() {
    for (const Edge& e : edges) {
      if (e.i >= e.j || e.j >= n) {
        throw std::invalid_argument("graph edge indices must satisfy i < j < n");
      }
      if (!std::isfinite(e.w) || e.w <= 0.0) {
        throw std::invalid_argument("graph edge weights must be finite and positive");
      }
    }

    std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
    for (const Edge& e : edges) {
      adj[e.i].emplace_back(e.j, e.w);
      adj[e.j].emplace_back(e.i, e.w);
    }
    adj_offsets.assign(n + 1, 0);
    adj_index.clear();
    adj_weight.clear();
    adj_index.reserve(2 * edges.size());
    adj_weight.reserve(2 * edges.size());
    degree.assign(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      std::sort(adj[v].begin(), adj[v].end());
      adj_offsets[v + 1] = adj_offsets[v] + adj[v].size();
      double d = 0.0;
      for (const auto& [u, w] : adj[v]) {
        adj_index.push_back(u);
        adj_weight.push_back(w);
        d += w;
      }
      degree[v] = d;
    }
  }
};

// Per band, Gaussian-weighted average over the (2r+1)^2 window centered at
// each pixel. Taps falling off the image are dropped and the remaining
// weights renormalized.
inline SpectralCube spatial_features(const SpectralCube& cube,
                                     std::size_t radius, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");

  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(radius);
  const std::size_t side = 2 * radius + 1;
  std::vector<double> window(side * side);
  for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
    for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
      const double d2 = static_cast<double>(dy * dy + dx * dx);
      window[static_cast<std::size_t>(dy + r) * side +
             static_cast<std::size_t>(dx + r)] =
          std::exp(-d2 / (2.0 * sigma * sigma));
    }
  }

  SpectralCube out = cube;
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(cube.height);
  const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(cube.width);
  for (std::size_t b = 0; b < cube.bands; ++b) {
    for (std::ptrdiff_t row = 0; row < h; ++row) {
      for (std::ptrdiff_t col = 0; col < w; ++col) {
        double num = 0.0;
        double den = 0.0;
        for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
          const std::ptrdiff_t rr = row + dy;
          if (rr < 0 || rr >= h) continue;
          for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
            const std::ptrdiff_t cc = col + dx;
            if (cc < 0 || cc >= w) continue;
            const double wt = window[static_cast<std::size_t>(dy + r) * side +
                                     static_cast<std::size_t>(dx + r)];
            num += wt * cube.at(b, cube.pixel_index(static_cast<std::size_t>(rr),
                                                    static_cast<std::size_t>(cc)));
            den += wt;
          }
        }
        out.at(b, cube.pixel_index(static_cast<std::size_t>(row),
                                   static_cast<std::size_t>(col))) = num / den;
      }
    }
  }
  return out;
}

inline double rbf_kernel(std::span<const double> x, std::span<const double> y,
                         double delta) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("rbf_kernel: vector lengths differ");
  }
  if (!(delta > 0.0)) throw std::invalid_argument("rbf_kernel: delta must be > 0");
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    d2 += d * d;
  }
  return std::exp(-d2 / (2.0 * delta * delta));
}

inline double composite_kernel(std::span<const double> xs_i,
                               std::span<const double> xs_j,
                               std::span<const double> xw_i,
                               std::span<const double> xw_j,
                               const KernelParams& params) {
  params.validate();
  return params.mu * rbf_kernel(xs_i, xs_j, params.delta_s) +
         (1.0 - params.mu) * rbf_kernel(xw_i, xw_j, params.delta_w);
}

// Union kNN graph: edge (i,j) exists iff j is among i's k nearest or i is
// among j's k nearest, measured by Euclidean distance between spectral
// signatures (ties broken toward the smaller pixel index). Weights come from
// the composite kernel over spectral and Gaussian-window spatial features.
inline SparseGraph knn_graph(const SpectralCube& cube,
                             const KernelParams& params) {
  params.validate();
  cube.validate();

  const std::size_t n = cube.pixels();
  const std::size_t p = cube.bands;

  SparseGraph g;
  g.n = n;
  if (n == 1) {
    // lone pixel: nothing to connect
    g.finalize();
    return g;
  }
  if (params.k >= n) {
    throw std::invalid_argument("knn_graph: k must be < pixel count");
  }

  const SpectralCube spatial =
      spatial_features(cube, params.spatial_radius, params.spatial_sigma);
  const std::vector<double> xs = detail::pixel_signatures(cube);
  const std::vector<double> xw = detail::pixel_signatures(spatial);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * params.k);
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      cand.emplace_back(
          detail::squared_distance(&xs[i * p], &xs[j * p], p), j);
    }
    std::nth_element(cand.begin(),
                     cand.begin() + static_cast<std::ptrdiff_t>(params.k - 1),
                     cand.end());
    for (std::size_t t = 0; t < params.k; ++t) {
      const std::size_t j = cand[t].second;
      pairs.emplace_back(std::min(i, j), std::max(i, j));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  g.edges.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    const double w = composite_kernel(
        std::span<const double>(&xs[a * p], p),
        std::span<const double>(&xs[b * p], p),
        std::span<const double>(&xw[a * p], p),
        std::span<const double>(&xw[b * p], p), params);
    g.edges.push_back({a, b, w});
  }
  g.finalize();
  return g;
}

// V * L for a channels-by-n matrix V, done edge-wise so L is never formed:
// column j gets degree[j] * V_j minus the weighted sum of its neighbors,
// accumulated in ascending neighbor order.
inline Eigen::MatrixXd laplacian_apply(const SparseGraph& g,
                                       const Eigen::MatrixXd& V) {
  if (static_cast<std::size_t>(V.cols()) != g.n) {
    throw std::invalid_argument("laplacian_apply: column count must equal n");
  }
  Eigen::MatrixXd out(V.rows(), V.cols());
  for (std::size_t j = 0; j < g.n; ++j) {
    Eigen::VectorXd acc = g.degree[j] * V.col(static_cast<Eigen::Index>(j));
    for (std::size_t t = g.adj_offsets[j]; t < g.adj_offsets[j + 1]; ++t) {
      acc -= g.adj_weight[t] * V.col(static_cast<Eigen::Index>(g.adj_index[t]));
    }
    out.col(static_cast<Eigen::Index>(j)) = acc;
  }
  return out;
}

struct Bandwidths {
  double delta_s;
  double delta_w;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  if (m % 2 == 1) return v[m / 2];
  return 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace detail

// Bandwidth heuristic: median spectral and spatial-feature distance over
// seeded sample pairs. Falls back to 1.0 when the median is zero (constant
// image), since a bandwidth must be positive.
inline Bandwidths median_bandwidths(const SpectralCube& cube,
                                    std::size_t spatial_radius,
                                    double spatial_sigma,
                                    std::size_t pair_count,
                                    std::uint64_t seed) {
  cube.validate();
  if (pair_count < 1) throw std::invalid_argument("pair_count must be >= 1");
  const std::size_t n = cube.pixels();
  if (n < 2) return {1.0, 1.0};

  const SpectralCube spatial =
      spatial_features(cube, spatial_radius, spatial_sigma);
  const std::vector<double> xs = detail::pixel_signatures(cube);
  const std::vector<double> xw = detail::pixel_signatures(spatial);
  const std::size_t p = cube.bands;

  Rng rng(seed);
  std::vector<double> ds;
  std::vector<double> dw;
  ds.reserve(pair_count);
  dw.reserve(pair_count);
  for (std::size_t t = 0; t < pair_count; ++t) {
    const std::size_t i = rng.next_below(n);
    std::size_t j = rng.next_below(n - 1);
    if (j >= i) ++j;
    ds.push_back(
        std::sqrt(detail::squared_distance(&xs[i * p], &xs[j * p], p)));
    dw.push_back(
        std::sqrt(detail::squared_distance(&xw[i * p], &xw[j * p], p)));
  }

  Bandwidths bw;
  bw.delta_s = detail::median_of(std::move(ds));
  bw.delta_w = detail::median_of(std::move(dw));
  if (!(bw.delta_s > 0.0)) bw.delta_s = 1.0;
  if (!(bw.delta_w > 0.0)) bw.delta_w = 1.0;
  return bw;
}

// Debug dump: `n e` then one `i j w` line per edge, i < j.
inline void write_graph(const SparseGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write graph dump: " + path);
  out << g.n << " " << g.edges.size() << "\n";
  for (const auto& e : g.edges) {
    out << e.i << " " << e.j << " " << format_sig17(e.w) << "\n";
  }
  out.flush();
  if (!out) throw std::runtime_error("failed writing graph dump: " + path);
}

}  // namespace hsivis

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsivis/color.hpp"
#include "hsivis/cube.hpp"
#include "hsivis/rng.hpp"

namespace hsivis {

struct SyntheticParams {
  std::size_t width = 16;
  std::size_t height = 16;
  std::size_t bands = 8;
  std::size_t clusters = 4;
  double noise = 0.01;
  std::uint64_t seed = 1;
  // Sensor model seed; defaults to `seed`. Two cubes generated with the same
  // model seed share the spectral signature map, so a projection trained on
  // one transfers to the other.
  std::optional<std::uint64_t> model_seed;
};

struct SyntheticData {
  SpectralCube cube;
  ColorImage reference;  // RGB
  std::vector<std::size_t> labels;
};

namespace detail {

// Display-friendly ground-cover colors, exact byte values.
inline constexpr std::array<std::array<int, 3>, 16> kPalette = {{
    {34, 139, 34},    // forest
    {70, 130, 180},   // water
    {210, 180, 140},  // sand
    {178, 34, 34},    // brick
    {105, 105, 105},  // asphalt
    {139, 90, 43},    // soil
    {85, 107, 47},    // scrub
    {245, 245, 220},  // chalk
    {47, 79, 79},     // slate
    {218, 165, 32},   // dry grass
    {176, 196, 222},  // haze
    {128, 0, 0},      // rust
    {189, 183, 107},  // stubble
    {46, 139, 87},    // meadow
    {112, 128, 144},  // gravel
    {222, 184, 135},  // adobe
}};

// Gram-Schmidt over seeded Gaussian columns: a p x 3 map with orthonormal
// columns (columns past the rank come out zero), so Lab offsets between
// cluster colors carry into spectral space with distances intact.
inline std::vector<double> orthonormal_columns(std::size_t p, Rng& rng) {
  std::vector<double> A(p * 3, 0.0);  // A[b*3 + c]
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> v(p);
    for (std::size_t b = 0; b < p; ++b) v[b] = rng.normal();
    for (std::size_t prev = 0; prev < c; ++prev) {
      double dot = 0.0;
      for (std::size_t b = 0; b < p; ++b) dot += v[b] * A[b * 3 + prev];
      for (std::size_t b = 0; b < p; ++b) v[b] -= dot * A[b * 3 + prev];
    }
    double norm2 = 0.0;
    for (std::size_t b = 0; b < p; ++b) norm2 += v[b] * v[b];
    const double norm = std::sqrt(norm2);
    if (norm > 1e-9) {
      for (std::size_t b = 0; b < p; ++b) A[b * 3 + c] = v[b] / norm;
    }
  }
  return A;
}

}  // namespace detail

// Voronoi cluster layout with per-cluster spectral signatures that are an
// isometric embedding of the palette's Lab colors, plus optional Gaussian
// noise. The reference image paints each cluster with its palette color.
inline SyntheticData make_synthetic(const SyntheticParams& prm) {
  if (prm.width < 1 || prm.height < 1) {
    throw std::invalid_argument("synthetic image needs a nonempty grid");
  }
  if (prm.bands < 1) {
    throw std::invalid_argument("synthetic cube needs at least one band");
  }
  const std::size_t n = prm.width * prm.height;
  if (prm.clusters < 1 || prm.clusters > detail::kPalette.size()) {
    throw std::invalid_argument("cluster count must lie in [1, " +
                                std::to_string(detail::kPalette.size()) + "]");
  }
  if (prm.clusters > n) {
    throw std::invalid_argument("more clusters than pixels");
  }
  if (!(prm.noise >= 0.0)) {
    throw std::invalid_argument("noise level must be >= 0");
  }

  // Palette colors in Lab, via the same conversion the pipeline uses.
  ColorImage palette_rgb;
  palette_rgb.space = ColorSpace::RGB;
  palette_rgb.height = 1;
  palette_rgb.width = prm.clusters;
  palette_rgb.data.resize(3 * prm.clusters);
  for (std::size_t k = 0; k < prm.clusters; ++k) {
    for (std::size_t c = 0; c < 3; ++c) {
      palette_rgb.data[c * prm.clusters + k] =
          static_cast<double>(detail::kPalette[k][c]) / 255.0;
    }
  }
  const ColorImage palette_lab = rgb_to_lab(palette_rgb);

  Rng model_rng(prm.model_seed ? *prm.model_seed : prm.seed);
  const std::vector<double> A = detail::orthonormal_columns(prm.bands, model_rng);

  // signatures[k*p + b] = sum_c A[b][c] * lab_k[c] + 0.5
  std::vector<double> signatures(prm.clusters * prm.bands);
  for (std::size_t k = 0; k < prm.clusters; ++k) {
    for (std::size_t b = 0; b < prm.bands; ++b) {
      double v = 0.5;
      for (std::size_t c = 0; c < 3; ++c) {
        v += A[b * 3 + c] * palette_lab.data[c * prm.clusters + k];
      }
      signatures[k * prm.bands + b] = v;
    }
  }

  Rng rng(prm.seed);
  const std::vector<std::size_t> centers =
      rng.sample_without_replacement(n, prm.clusters);

  SyntheticData out;
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double row = static_cast<double>(i / prm.width);
    const double col = static_cast<double>(i % prm.width);
    std::size_t best = 0;
    double best_d2 = 0.0;
    for (std::size_t k = 0; k < prm.clusters; ++k) {
      const double dr = row - static_cast<double>(centers[k] / prm.width);
      const double dc = col - static_cast<double>(centers[k] % prm.width);
      const double d2 = dr * dr + dc * dc;
      if (k == 0 || d2 < best_d2) {
        best = k;
        best_d2 = d2;
      }
    }
    out.labels[i] = best;
  }

  out.cube.bands = prm.bands;
  out.cube.height = prm.height;
  out.cube.width = prm.width;
  out.cube.data.resize(prm.bands * n);
  for (std::size_t b = 0; b < prm.bands; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      out.cube.data[b * n + i] =
          signatures[out.labels[i] * prm.bands + b] + prm.noise * rng.normal();
    }
  }

  out.reference.space = ColorSpace::RGB;
  out.reference.height = prm.height;
  out.reference.width = prm.width;
  out.reference.data.resize(3 * n);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      out.reference.data[c * n + i] =
          static_cast<double>(detail::kPalette[out.labels[i]][c]) / 255.0;
    }
  }
  return out;
}

inline void write_labels(const std::vector<std::size_t>& labels,
                         const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write labels file: " + path);
  for (std::size_t v : labels) out << v << "\n";
  out.flush();
  if (!out) throw std::runtime_error("failed writing labels file: " + path);
}

}  // namespace hsivis

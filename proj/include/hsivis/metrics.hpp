#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hsivis/color.hpp"
#include "hsivis/cube.hpp"
#include "hsivis/rng.hpp"

namespace hsivis {

inline constexpr std::size_t kAllPairs = static_cast<std::size_t>(-1);

// Raw material behind the distance-preservation score: per sampled pixel
// pair, the spectral-space distance (x) and the color-space distance (y).
struct DistanceSample {
  std::size_t pair_count = 0;
  std::vector<double> x;
  std::vector<double> y;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::uint64_t pair_offset(std::uint64_t i, std::uint64_t n) {
  return i * (n - 1) - i * (i - 1) / 2;
}

// Inverse of the (i,j) -> flat enumeration of unordered pairs with i < j:
// pairs (0,1)..(0,n-1), then (1,2).. and so on.
inline std::pair<std::size_t, std::size_t> pair_from_index(std::uint64_t t,
                                                           std::uint64_t n) {
  const double nd = static_cast<double>(n);
  double disc = (2.0 * nd - 1.0) * (2.0 * nd - 1.0) - 8.0 * static_cast<double>(t);
  if (disc < 0.0) disc = 0.0;
  double guess = std::floor(((2.0 * nd - 1.0) - std::sqrt(disc)) / 2.0);
  if (guess < 0.0) guess = 0.0;
  std::uint64_t i = static_cast<std::uint64_t>(guess);
  if (i > n - 2) i = n - 2;
  while (i > 0 && pair_offset(i, n) > t) --i;
  while (i < n - 2 && pair_offset(i + 1, n) <= t) ++i;
  const std::uint64_t j = i + 1 + (t - pair_offset(i, n));
  return {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
}

}  // namespace detail

inline DistanceSample distance_sample(const SpectralCube& cube,
                                      const ColorImage& Y_lab,
                                      std::size_t pair_budget,
                                      std::uint64_t seed) {
  cube.validate();
  if (Y_lab.space != ColorSpace::Lab) {
    throw std::invalid_argument("distance_sample needs Lab color coordinates");
  }
  if (Y_lab.pixels() != cube.pixels()) {
    throw std::invalid_argument("cube and color image pixel counts differ");
  }
  const std::size_t n = cube.pixels();
  if (n < 2) throw std::invalid_argument("need at least 2 pixels");

  const std::uint64_t total =
      static_cast<std::uint64_t>(n) * (static_cast<std::uint64_t>(n) - 1) / 2;
  const bool all =
      pair_budget == kAllPairs || static_cast<std::uint64_t>(pair_budget) >= total;
  if (!all && pair_budget < 2) {
    throw std::invalid_argument("pair budget must be at least 2");
  }
  if (total < 2) {
    throw std::invalid_argument("need at least 2 distinct pixel pairs");
  }
  const std::uint64_t kPairLimit = 500'000'000;
  if ((all && total > kPairLimit) || (!all && pair_budget > kPairLimit)) {
    throw std::runtime_error("pair enumeration would need " +
                             std::to_string(total) +
                             " pairs; set a smaller pair budget");
  }

  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  if (all) {
    chosen.reserve(static_cast<std::size_t>(total));
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        chosen.emplace_back(i, j);
      }
    }
  } else if (total <= 8 * static_cast<std::uint64_t>(pair_budget)) {
    Rng rng(seed);
    const std::vector<std::size_t> idx = rng.sample_without_replacement(
        static_cast<std::size_t>(total), pair_budget);
    chosen.reserve(pair_budget);
    for (std::size_t t : idx) {
      chosen.push_back(detail::pair_from_index(t, n));
    }
  } else {
    Rng rng(seed);
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(2 * pair_budget);
    chosen.reserve(pair_budget);
    while (chosen.size() < pair_budget) {
      const std::uint64_t t = rng.next_below(total);
      if (seen.insert(t).second) {
        chosen.push_back(detail::pair_from_index(t, n));
      }
    }
  }

  const std::vector<double> sig = detail::pixel_signatures(cube);
  const std::size_t p = cube.bands;
  const std::size_t m = Y_lab.pixels();

  DistanceSample out;
  out.pair_count = chosen.size();
  out.seed = seed;
  out.x.reserve(chosen.size());
  out.y.reserve(chosen.size());
  for (const auto& [a, b] : chosen) {
    out.x.push_back(
        std::sqrt(detail::squared_distance(&sig[a * p], &sig[b * p], p)));
    double d2 = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = Y_lab.data[c * m + a] - Y_lab.data[c * m + b];
      d2 += d * d;
    }
    out.y.push_back(std::sqrt(d2));
  }
  return out;
}

// Pearson correlation between the two distance vectors, population
// normalization. Computed in centered two-pass form, which equals the
// mean/std expression algebraically.
inline double gamma_of(const DistanceSample& s) {
  const std::size_t count = s.x.size();
  if (count != s.y.size() || count < 2) {
    throw std::invalid_argument("distance sample needs at least 2 pairs");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t t = 0; t < count; ++t) {
    mx += s.x[t];
    my += s.y[t];
  }
  mx /= static_cast<double>(count);
  my /= static_cast<double>(count);

  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t t = 0; t < count; ++t) {
    const double dx = s.x[t] - mx;
    const double dy = s.y[t] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw std::runtime_error(
        "distance correlation is undefined: " +
        std::string(!(sxx > 0.0) ? "spectral" : "color") +
        " distances have zero variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double preservation_of_distance(const SpectralCube& cube,
                                       const ColorImage& Y_lab,
                                       std::size_t pair_budget,
                                       std::uint64_t seed) {
  return gamma_of(distance_sample(cube, Y_lab, pair_budget, seed));
}

}  // namespace hsivis

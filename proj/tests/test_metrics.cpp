#include "catch2/catch_amalgamated.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hsivis/metrics.hpp"
#include "hsivis/rng.hpp"
#include "oracles.hpp"

using Catch::Matchers::ContainsSubstring;

namespace {

// Lab image whose channels are an affine map of the cube's three bands.
hsivis::ColorImage lab_from_cube(const hsivis::SpectralCube& cube,
                                 double scale, double shift) {
  REQUIRE(cube.bands == 3);
  hsivis::ColorImage img;
  img.space = hsivis::ColorSpace::Lab;
  img.height = cube.height;
  img.width = cube.width;
  img.data.resize(cube.data.size());
  for (std::size_t i = 0; i < cube.data.size(); ++i) {
    img.data[i] = scale * cube.data[i] + shift;
  }
  return img;
}

// Straight re-evaluation over every unordered pair, own distance code.
double gamma_brute(const hsivis::SpectralCube& cube,
                   const hsivis::ColorImage& img) {
  const std::size_t n = cube.pixels();
  std::vector<double> x, y;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dx2 = 0.0;
      for (std::size_t b = 0; b < cube.bands; ++b) {
        const double d = cube.at(b, i) - cube.at(b, j);
        dx2 += d * d;
      }
      double dy2 = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double d = img.at(c, i) - img.at(c, j);
        dy2 += d * d;
      }
      x.push_back(std::sqrt(dx2));
      y.push_back(std::sqrt(dy2));
    }
  }
  return oracle::gamma_literal(x, y);
}

}  // namespace

TEST_CASE("proportional color distances give perfect correlation") {
  hsivis::Rng rng(301);
  const hsivis::SpectralCube cube = oracle::random_cube(4, 5, 3, rng);
  const hsivis::ColorImage img = lab_from_cube(cube, 2.0, 0.0);
  const double g =
      hsivis::preservation_of_distance(cube, img, hsivis::kAllPairs, 1);
  CHECK(g == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("antitone distance vectors give perfect anticorrelation") {
  hsivis::Rng rng(302);
  const hsivis::SpectralCube cube = oracle::random_cube(2, 5, 4, rng);
  const hsivis::ColorImage img = oracle::random_lab_image(2, 5, rng);
  hsivis::DistanceSample s =
      hsivis::distance_sample(cube, img, hsivis::kAllPairs, 1);

  const double top = *std::max_element(s.x.begin(), s.x.end());
  for (std::size_t t = 0; t < s.x.size(); ++t) s.y[t] = top - s.x[t];

  const double g = hsivis::gamma_of(s);
  CHECK(g == Catch::Approx(-1.0).margin(1e-9));
  CHECK(g == Catch::Approx(oracle::gamma_literal(s.x, s.y)).margin(1e-12));
}

TEST_CASE("full-pair correlation matches a brute-force rebuild") {
  hsivis::Rng rng(303);
  const hsivis::SpectralCube cube = oracle::random_cube(2, 4, 5, rng);
  const hsivis::ColorImage img = oracle::random_lab_image(2, 4, rng);
  const double lib =
      hsivis::preservation_of_distance(cube, img, hsivis::kAllPairs, 9);
  CHECK(lib == Catch::Approx(gamma_brute(cube, img)).margin(1e-12));
}

TEST_CASE("pair budgets cap at the full pair count") {
  hsivis::Rng rng(304);
  const hsivis::SpectralCube cube = oracle::random_cube(1, 3, 2, rng);
  const hsivis::ColorImage img = oracle::random_lab_image(1, 3, rng);

  const hsivis::DistanceSample all =
      hsivis::distance_sample(cube, img, hsivis::kAllPairs, 1);
  CHECK(all.pair_count == 3);

  const hsivis::DistanceSample capped =
      hsivis::distance_sample(cube, img, 1000, 1);
  CHECK(capped.pair_count == 3);
  CHECK(capped.x == all.x);
}

TEST_CASE("sampling is deterministic per seed") {
  hsivis::Rng rng(305);
  const hsivis::SpectralCube cube = oracle::random_cube(12, 12, 4, rng);
  const hsivis::ColorImage img = oracle::random_lab_image(12, 12, rng);

  const hsivis::DistanceSample a = hsivis::distance_sample(cube, img, 64, 7);
  const hsivis::DistanceSample b = hsivis::distance_sample(cube, img, 64, 7);
  REQUIRE(a.pair_count == 64);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.seed == 7);

  const hsivis::DistanceSample c = hsivis::distance_sample(cube, img, 64, 8);
  CHECK(a.x != c.x);
}

TEST_CASE("both sampling paths draw distinct pairs") {
  hsivis::Rng rng(306);
  const hsivis::SpectralCube cube = oracle::random_cube(10, 10, 3, rng);
  const hsivis::ColorImage img = oracle::random_lab_image(10, 10, rng);

  // n = 100, total = 4950; budget 1000 -> dense path, budget 100 -> sparse
  for (std::size_t budget : {std::size_t{1000}, std::size_t{100}}) {
    const hsivis::DistanceSample s =
        hsivis::distance_sample(cube, img, budget, 3);
    REQUIRE(s.pair_count == budget);
    std::vector<double> sorted = s.x;
    std::sort(sorted.begin(), sorted.end());
    // distinct pairs of distinct random pixels: no repeated distances
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  }
}

TEST_CASE("correlation ignores affine recoloring") {
  hsivis::Rng rng(307);
  const hsivis::SpectralCube cube = oracle::random_cube(6, 6, 3, rng);
  const hsivis::ColorImage img = lab_from_cube(cube, 1.0, 0.0);
  hsivis::ColorImage scaled = img;
  for (double& v : scaled.data) v = 3.0 * v + 5.0;

  const double g0 = hsivis::preservation_of_distance(cube, img, 300, 2);
  const double g1 = hsivis::preservation_of_distance(cube, scaled, 300, 2);
  CHECK(g0 == Catch::Approx(g1).margin(1e-10));
}

TEST_CASE("sampled correlation tracks the full one") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    hsivis::Rng rng(9000 + seed);
    const hsivis::SpectralCube cube = oracle::random_cube(30, 40, 3, rng);
    hsivis::ColorImage img = lab_from_cube(cube, 2.0, 0.0);
    for (double& v : img.data) v += 0.3 * rng.normal();

    const double all =
        hsivis::preservation_of_distance(cube, img, hsivis::kAllPairs, seed);
    const double sampled =
        hsivis::preservation_of_distance(cube, img, 100000, seed);
    CHECK(std::abs(all - sampled) <= 0.02);
  }
}

TEST_CASE("degenerate metric inputs are rejected") {
  hsivis::Rng rng(308);
  const hsivis::SpectralCube cube = oracle::random_cube(2, 3, 3, rng);
  hsivis::ColorImage flat;
  flat.space = hsivis::ColorSpace::Lab;
  flat.height = 2;
  flat.width = 3;
  flat.data.assign(18, -1.0);
  REQUIRE_THROWS_WITH(
      hsivis::preservation_of_distance(cube, flat, hsivis::kAllPairs, 1),
      ContainsSubstring("undefined"));

  hsivis::SpectralCube constant = cube;
  constant.data.assign(constant.data.size(), 0.5);
  const hsivis::ColorImage img = oracle::random_lab_image(2, 3, rng);
  REQUIRE_THROWS_WITH(
      hsivis::preservation_of_distance(constant, img, hsivis::kAllPairs, 1),
      ContainsSubstring("spectral"));

  REQUIRE_THROWS(hsivis::distance_sample(cube, img, 1, 1));

  hsivis::ColorImage rgb = img;
  rgb.space = hsivis::ColorSpace::RGB;
  REQUIRE_THROWS(hsivis::distance_sample(cube, rgb, 10, 1));

  hsivis::SpectralCube lone;
  lone.bands = 1;
  lone.height = 1;
  lone.width = 1;
  lone.data = {1.0};
  hsivis::ColorImage one;
  one.space = hsivis::ColorSpace::Lab;
  one.height = 1;
  one.width = 1;
  one.data = {0.0, 0.0, 0.0};
  REQUIRE_THROWS(hsivis::distance_sample(lone, one, hsivis::kAllPairs, 1));
}

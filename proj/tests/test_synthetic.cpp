#include "catch2/catch_amalgamated.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <vector>

#include "cli_runner.hpp"
#include "hsivis/synthetic.hpp"

TEST_CASE("synthetic generation is deterministic") {
  hsivis::SyntheticParams prm;
  prm.seed = 12;
  const hsivis::SyntheticData a = hsivis::make_synthetic(prm);
  const hsivis::SyntheticData b = hsivis::make_synthetic(prm);
  CHECK(a.cube.data == b.cube.data);
  CHECK(a.reference.data == b.reference.data);
  CHECK(a.labels == b.labels);

  prm.seed = 13;
  const hsivis::SyntheticData c = hsivis::make_synthetic(prm);
  CHECK(a.cube.data != c.cube.data);
}

TEST_CASE("noiseless clusters are spectrally constant") {
  hsivis::SyntheticParams prm;
  prm.noise = 0.0;
  prm.seed = 4;
  const hsivis::SyntheticData d = hsivis::make_synthetic(prm);
  const std::size_t n = d.cube.pixels();

  // pick a representative pixel per label
  std::vector<std::size_t> rep(prm.clusters, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rep[d.labels[i]] == n) rep[d.labels[i]] = i;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = rep[d.labels[i]];
    for (std::size_t b = 0; b < d.cube.bands; ++b) {
      CHECK(d.cube.at(b, i) == d.cube.at(b, r));
    }
  }

  // distinct labels sit at distinct signatures
  for (std::size_t k = 0; k < prm.clusters; ++k) {
    for (std::size_t l = k + 1; l < prm.clusters; ++l) {
      double d2 = 0.0;
      for (std::size_t b = 0; b < d.cube.bands; ++b) {
        const double diff = d.cube.at(b, rep[k]) - d.cube.at(b, rep[l]);
        d2 += diff * diff;
      }
      CHECK(d2 > 1e-4);
    }
  }
}

TEST_CASE("labels cover every cluster and match the reference colors") {
  hsivis::SyntheticParams prm;
  prm.seed = 21;
  prm.clusters = 5;
  const hsivis::SyntheticData d = hsivis::make_synthetic(prm);
  const std::size_t n = d.cube.pixels();
  REQUIRE(d.labels.size() == n);

  std::set<std::size_t> seen(d.labels.begin(), d.labels.end());
  CHECK(seen.size() == prm.clusters);
  for (std::size_t v : seen) CHECK(v < prm.clusters);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(d.reference.at(c, i) ==
            double(hsivis::detail::kPalette[d.labels[i]][c]) / 255.0);
    }
  }
}

TEST_CASE("shared sensor model gives shared signatures across layouts") {
  hsivis::SyntheticParams a;
  a.noise = 0.0;
  a.seed = 31;
  a.model_seed = 777;
  hsivis::SyntheticParams b = a;
  b.seed = 32;

  const hsivis::SyntheticData da = hsivis::make_synthetic(a);
  const hsivis::SyntheticData db = hsivis::make_synthetic(b);
  CHECK(da.labels != db.labels);  // layouts differ

  const std::size_t n = da.cube.pixels();
  std::vector<std::size_t> rep_a(a.clusters, n), rep_b(a.clusters, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rep_a[da.labels[i]] == n) rep_a[da.labels[i]] = i;
    if (rep_b[db.labels[i]] == n) rep_b[db.labels[i]] = i;
  }
  for (std::size_t k = 0; k < a.clusters; ++k) {
    REQUIRE(rep_a[k] != n);
    REQUIRE(rep_b[k] != n);
    for (std::size_t band = 0; band < da.cube.bands; ++band) {
      CHECK(da.cube.at(band, rep_a[k]) == db.cube.at(band, rep_b[k]));
    }
  }
}

TEST_CASE("spectral distances mirror reference color distances") {
  // the signature map is an isometry on Lab colors, so with zero noise the
  // cube's cluster distances equal the palette's Lab distances
  hsivis::SyntheticParams prm;
  prm.noise = 0.0;
  prm.seed = 8;
  prm.bands = 6;
  const hsivis::SyntheticData d = hsivis::make_synthetic(prm);

  hsivis::ColorImage pal;
  pal.space = hsivis::ColorSpace::RGB;
  pal.height = 1;
  pal.width = prm.clusters;
  pal.data.resize(3 * prm.clusters);
  for (std::size_t k = 0; k < prm.clusters; ++k) {
    for (std::size_t c = 0; c < 3; ++c) {
      pal.data[c * prm.clusters + k] =
          double(hsivis::detail::kPalette[k][c]) / 255.0;
    }
  }
  const hsivis::ColorImage lab = hsivis::rgb_to_lab(pal);

  const std::size_t n = d.cube.pixels();
  std::vector<std::size_t> rep(prm.clusters, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rep[d.labels[i]] == n) rep[d.labels[i]] = i;
  }
  for (std::size_t k = 0; k < prm.clusters; ++k) {
    for (std::size_t l = k + 1; l < prm.clusters; ++l) {
      double spec2 = 0.0;
      for (std::size_t b = 0; b < d.cube.bands; ++b) {
        const double diff = d.cube.at(b, rep[k]) - d.cube.at(b, rep[l]);
        spec2 += diff * diff;
      }
      double lab2 = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double diff =
            lab.at(c, k) - lab.at(c, l);
        lab2 += diff * diff;
      }
      CHECK(std::sqrt(spec2) == Catch::Approx(std::sqrt(lab2)).margin(1e-10));
    }
  }
}

TEST_CASE("synthetic parameter validation") {
  hsivis::SyntheticParams prm;
  prm.clusters = 0;
  REQUIRE_THROWS(hsivis::make_synthetic(prm));
  prm.clusters = 17;
  REQUIRE_THROWS(hsivis::make_synthetic(prm));
  prm.clusters = 4;
  prm.bands = 0;
  REQUIRE_THROWS(hsivis::make_synthetic(prm));
  prm.bands = 8;
  prm.noise = -0.1;
  REQUIRE_THROWS(hsivis::make_synthetic(prm));
  prm.noise = 0.0;
  prm.width = 1;
  prm.height = 2;  // 2 pixels < 4 clusters
  REQUIRE_THROWS(hsivis::make_synthetic(prm));
}

TEST_CASE("labels file holds one integer per pixel") {
  const auto dir = cli::fresh_dir("labels");
  hsivis::SyntheticParams prm;
  prm.width = 4;
  prm.height = 3;
  prm.seed = 2;
  const hsivis::SyntheticData d = hsivis::make_synthetic(prm);
  hsivis::write_labels(d.labels, (dir / "labels.txt").string());

  std::ifstream in(dir / "labels.txt");
  std::vector<std::size_t> back;
  std::size_t v = 0;
  while (in >> v) back.push_back(v);
  CHECK(back == d.labels);
}

#include "catch2/catch_amalgamated.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

#include "cli_runner.hpp"
#include "hsivis/graph.hpp"
#include "hsivis/rng.hpp"
#include "hsivis/text_format.hpp"
#include "oracles.hpp"

namespace {

hsivis::SpectralCube row_cube(const std::vector<double>& vals) {
  hsivis::SpectralCube cube;
  cube.bands = 1;
  cube.height = 1;
  cube.width = vals.size();
  cube.data = vals;
  return cube;
}

std::vector<std::pair<std::size_t, std::size_t>> edge_pairs(
    const hsivis::SparseGraph& g) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& e : g.edges) out.emplace_back(e.i, e.j);
  return out;
}

}  // namespace

TEST_CASE("spatial smoothing with radius zero returns the input") {
  hsivis::Rng rng(21);
  const hsivis::SpectralCube cube = oracle::random_cube(4, 6, 3, rng);
  const hsivis::SpectralCube out = hsivis::spatial_features(cube, 0, 1.0);
  CHECK(out.data == cube.data);
}

TEST_CASE("spatial smoothing preserves constant cubes") {
  hsivis::SpectralCube cube;
  cube.bands = 2;
  cube.height = 4;
  cube.width = 4;
  cube.data.assign(32, 0.37);
  const hsivis::SpectralCube out = hsivis::spatial_features(cube, 2, 1.5);
  for (double v : out.data) CHECK(v == Catch::Approx(0.37).margin(1e-14));
}

TEST_CASE("spatial smoothing with huge sigma averages the window") {
  hsivis::SpectralCube cube;
  cube.bands = 1;
  cube.height = 3;
  cube.width = 3;
  cube.data = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0};
  const hsivis::SpectralCube out = hsivis::spatial_features(cube, 1, 1e6);
  double mean = 0.0;
  for (double v : cube.data) mean += v;
  mean /= 9.0;
  CHECK(out.at(0, cube.pixel_index(1, 1)) == Catch::Approx(mean).margin(1e-9));
}

TEST_CASE("spatial smoothing commutes with translation in the interior") {
  hsivis::Rng rng(33);
  const hsivis::SpectralCube a = oracle::random_cube(6, 6, 2, rng);
  hsivis::SpectralCube b = a;
  // copy of a shifted one column right; leftmost column recycles values
  for (std::size_t band = 0; band < a.bands; ++band) {
    for (std::size_t r = 0; r < a.height; ++r) {
      for (std::size_t c = 0; c < a.width; ++c) {
        const std::size_t src = c == 0 ? 0 : c - 1;
        b.data[band * 36 + a.pixel_index(r, c)] =
            a.data[band * 36 + a.pixel_index(r, src)];
      }
    }
  }
  const hsivis::SpectralCube fa = hsivis::spatial_features(a, 1, 0.8);
  const hsivis::SpectralCube fb = hsivis::spatial_features(b, 1, 0.8);
  for (std::size_t band = 0; band < a.bands; ++band) {
    for (std::size_t r = 2; r <= 3; ++r) {
      for (std::size_t c = 2; c <= 3; ++c) {
        CHECK(fb.data[band * 36 + a.pixel_index(r, c + 1)] ==
              fa.data[band * 36 + a.pixel_index(r, c)]);
      }
    }
  }
}

TEST_CASE("rbf kernel hits its landmark values") {
  const std::vector<double> x = {0.0};
  CHECK(hsivis::rbf_kernel(x, x, 0.5) == 1.0);

  // squared distance 1 with 2 delta^2 = 1 lands on exp(-1)
  const std::vector<double> y = {1.0};
  const double v = hsivis::rbf_kernel(x, y, std::sqrt(0.5));
  CHECK(v == Catch::Approx(std::exp(-1.0)).margin(1e-10));

  CHECK(hsivis::rbf_kernel(y, x, std::sqrt(0.5)) == v);

  const std::vector<double> z = {1.0, 2.0};
  REQUIRE_THROWS(hsivis::rbf_kernel(x, z, 1.0));
  REQUIRE_THROWS(hsivis::rbf_kernel(x, y, 0.0));
}

TEST_CASE("composite kernel interpolates its two parts") {
  hsivis::Rng rng(7);
  std::vector<double> xs_i(4), xs_j(4), xw_i(4), xw_j(4);
  for (auto* v : {&xs_i, &xs_j, &xw_i, &xw_j}) {
    for (double& x : *v) x = rng.uniform(-1.0, 1.0);
  }
  hsivis::KernelParams prm;
  prm.delta_s = 0.7;
  prm.delta_w = 1.3;

  prm.mu = 1.0;
  CHECK(hsivis::composite_kernel(xs_i, xs_j, xw_i, xw_j, prm) ==
        hsivis::rbf_kernel(xs_i, xs_j, prm.delta_s));
  prm.mu = 0.0;
  CHECK(hsivis::composite_kernel(xs_i, xs_j, xw_i, xw_j, prm) ==
        hsivis::rbf_kernel(xw_i, xw_j, prm.delta_w));

  for (double mu : {0.0, 0.3, 1.0}) {
    prm.mu = mu;
    CHECK(hsivis::composite_kernel(xs_i, xs_i, xw_i, xw_i, prm) ==
          Catch::Approx(1.0).margin(1e-15));
  }
}

TEST_CASE("kernel parameter validation rejects bad ranges") {
  hsivis::KernelParams prm;
  prm.mu = 1.5;
  REQUIRE_THROWS(prm.validate());
  prm.mu = 0.5;
  prm.k = 0;
  REQUIRE_THROWS(prm.validate());
  prm.k = 10;
  prm.delta_s = -1.0;
  REQUIRE_THROWS(prm.validate());
}

TEST_CASE("knn graph links mutual and one-sided nearest neighbors") {
  const hsivis::SpectralCube cube = row_cube({0.0, 1.0, 10.0});
  hsivis::KernelParams prm;
  prm.k = 1;
  prm.spatial_radius = 1;
  const hsivis::SparseGraph g = hsivis::knn_graph(cube, prm);
  CHECK(edge_pairs(g) ==
        std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 2}});
}

TEST_CASE("two pixels produce the single possible edge") {
  const hsivis::SpectralCube cube = row_cube({0.0, 1.0});
  hsivis::KernelParams prm;
  prm.k = 1;
  prm.spatial_radius = 1;
  const hsivis::SparseGraph g = hsivis::knn_graph(cube, prm);
  REQUIRE(g.edges.size() == 1);

  const hsivis::SpectralCube sp =
      hsivis::spatial_features(cube, prm.spatial_radius, prm.spatial_sigma);
  const std::vector<double> xs = {cube.at(0, 0)};
  const std::vector<double> ys = {cube.at(0, 1)};
  const std::vector<double> xw = {sp.at(0, 0)};
  const std::vector<double> yw = {sp.at(0, 1)};
  CHECK(g.edges[0].w == hsivis::composite_kernel(xs, ys, xw, yw, prm));
}

TEST_CASE("knn graph edge set matches a full-sort rebuild") {
  hsivis::Rng rng(55);
  const hsivis::SpectralCube cube = oracle::random_cube(5, 5, 4, rng);
  hsivis::KernelParams prm;
  prm.k = 3;
  prm.spatial_radius = 1;
  const hsivis::SparseGraph g = hsivis::knn_graph(cube, prm);
  CHECK(edge_pairs(g) == oracle::brute_knn_edges(cube, prm.k));

  // weights spelled out longhand
  const hsivis::SpectralCube sp =
      hsivis::spatial_features(cube, prm.spatial_radius, prm.spatial_sigma);
  for (const auto& e : g.edges) {
    double ds2 = 0.0, dw2 = 0.0;
    for (std::size_t b = 0; b < cube.bands; ++b) {
      const double ds = cube.at(b, e.i) - cube.at(b, e.j);
      const double dw = sp.at(b, e.i) - sp.at(b, e.j);
      ds2 += ds * ds;
      dw2 += dw * dw;
    }
    const double w =
        prm.mu * std::exp(-ds2 / (2.0 * prm.delta_s * prm.delta_s)) +
        (1.0 - prm.mu) * std::exp(-dw2 / (2.0 * prm.delta_w * prm.delta_w));
    CHECK(e.w == Catch::Approx(w).margin(1e-12));
  }
}

TEST_CASE("knn graph edge cases") {
  hsivis::Rng rng(9);
  const hsivis::SpectralCube cube = oracle::random_cube(2, 2, 1, rng);
  hsivis::KernelParams prm;
  prm.k = 4;
  REQUIRE_THROWS(hsivis::knn_graph(cube, prm));

  const hsivis::SpectralCube lone = oracle::random_cube(1, 1, 3, rng);
  prm.k = 10;
  const hsivis::SparseGraph g = hsivis::knn_graph(lone, prm);
  CHECK(g.n == 1);
  CHECK(g.edges.empty());
  CHECK(g.degree == std::vector<double>{0.0});
}

TEST_CASE("degrees equal adjacency row sums in ascending order") {
  hsivis::Rng rng(60);
  const hsivis::SpectralCube cube = oracle::random_cube(5, 5, 4, rng);
  hsivis::KernelParams prm;
  prm.k = 3;
  const hsivis::SparseGraph g = hsivis::knn_graph(cube, prm);
  const Eigen::MatrixXd W = oracle::dense_adjacency(g);
  for (std::size_t i = 0; i < g.n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < g.n; ++j) {
      const double w = W(static_cast<Eigen::Index>(i),
                         static_cast<Eigen::Index>(j));
      if (w != 0.0) sum += w;
    }
    CHECK(g.degree[i] == sum);
  }
}

TEST_CASE("laplacian of a three-node path acts as expected") {
  hsivis::SparseGraph g;
  g.n = 3;
  g.edges = {{0, 1, 1.0}, {1, 2, 1.0}};
  g.finalize();

  const double x0 = 0.3, x1 = -1.7, x2 = 2.2;
  Eigen::MatrixXd V(1, 3);
  V << x0, x1, x2;
  const Eigen::MatrixXd out = hsivis::laplacian_apply(g, V);
  CHECK(out(0, 0) == 1.0 * x0 - x1);
  CHECK(out(0, 1) == 2.0 * x1 - x0 - x2);
  CHECK(out(0, 2) == 1.0 * x2 - x1);
}

TEST_CASE("matrix-free laplacian agrees with the dense matrix") {
  hsivis::Rng rng(71);
  const hsivis::SpectralCube cube = oracle::random_cube(6, 7, 3, rng);
  hsivis::KernelParams prm;
  prm.k = 4;
  const hsivis::SparseGraph g = hsivis::knn_graph(cube, prm);
  const Eigen::MatrixXd L = oracle::dense_laplacian(g);

  Eigen::MatrixXd V(3, static_cast<Eigen::Index>(g.n));
  for (Eigen::Index i = 0; i < V.size(); ++i) {
    V(i / V.cols(), i % V.cols()) = rng.uniform(-2.0, 2.0);
  }
  const Eigen::MatrixXd fast = hsivis::laplacian_apply(g, V);
  const Eigen::MatrixXd dense = V * L;
  CHECK((fast - dense).cwiseAbs().maxCoeff() < 1e-12);

  // constants are in the null space up to accumulation order
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, static_cast<Eigen::Index>(g.n));
  const Eigen::MatrixXd zero = hsivis::laplacian_apply(g, ones);
  CHECK(zero.cwiseAbs().maxCoeff() < 1e-12);

  // row sums vanish
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    CHECK(std::abs(L.row(i).sum()) < 1e-12);
  }

  // and the quadratic form is nonnegative
  for (int t = 0; t < 100; ++t) {
    Eigen::MatrixXd v(1, static_cast<Eigen::Index>(g.n));
    for (Eigen::Index i = 0; i < v.cols(); ++i) v(0, i) = rng.normal();
    const double quad = (hsivis::laplacian_apply(g, v) * v.transpose())(0, 0);
    CHECK(quad >= -1e-10 * v.squaredNorm());
  }
}

TEST_CASE("pure spectral mixing ignores the spatial channel") {
  hsivis::Rng rng(83);
  const hsivis::SpectralCube cube = oracle::random_cube(4, 5, 3, rng);
  hsivis::KernelParams a;
  a.mu = 1.0;
  a.k = 3;
  a.spatial_radius = 0;
  a.spatial_sigma = 1.0;
  hsivis::KernelParams b = a;
  b.spatial_radius = 3;
  b.spatial_sigma = 2.5;

  const hsivis::SparseGraph ga = hsivis::knn_graph(cube, a);
  const hsivis::SparseGraph gb = hsivis::knn_graph(cube, b);
  REQUIRE(ga.edges.size() == gb.edges.size());
  for (std::size_t t = 0; t < ga.edges.size(); ++t) {
    CHECK(ga.edges[t].i == gb.edges[t].i);
    CHECK(ga.edges[t].j == gb.edges[t].j);
    CHECK(ga.edges[t].w == gb.edges[t].w);
  }
}

TEST_CASE("median bandwidths are deterministic and positive") {
  hsivis::Rng rng(99);
  const hsivis::SpectralCube cube = oracle::random_cube(8, 8, 4, rng);
  const hsivis::Bandwidths a = hsivis::median_bandwidths(cube, 1, 1.0, 1000, 42);
  const hsivis::Bandwidths b = hsivis::median_bandwidths(cube, 1, 1.0, 1000, 42);
  CHECK(a.delta_s == b.delta_s);
  CHECK(a.delta_w == b.delta_w);
  CHECK(a.delta_s > 0.0);
  CHECK(a.delta_w > 0.0);

  const hsivis::Bandwidths c = hsivis::median_bandwidths(cube, 1, 1.0, 1000, 43);
  CHECK((c.delta_s != a.delta_s || c.delta_w != a.delta_w));
}

TEST_CASE("median bandwidth of a two-pixel cube is the lone distance") {
  const hsivis::SpectralCube cube = row_cube({0.0, 3.0});
  const hsivis::Bandwidths bw = hsivis::median_bandwidths(cube, 1, 1.0, 1000, 5);
  CHECK(bw.delta_s == 3.0);
  const hsivis::SpectralCube sp = hsivis::spatial_features(cube, 1, 1.0);
  CHECK(bw.delta_w == Catch::Approx(std::abs(sp.at(0, 1) - sp.at(0, 0))));
}

TEST_CASE("degenerate distances fall back to unit bandwidth") {
  hsivis::SpectralCube cube;
  cube.bands = 1;
  cube.height = 2;
  cube.width = 2;
  cube.data.assign(4, 1.0);
  const hsivis::Bandwidths bw = hsivis::median_bandwidths(cube, 1, 1.0, 1000, 5);
  CHECK(bw.delta_s == 1.0);
  CHECK(bw.delta_w == 1.0);
}

TEST_CASE("graph text dump lists every edge once") {
  hsivis::Rng rng(14);
  const hsivis::SpectralCube cube = oracle::random_cube(4, 4, 2, rng);
  hsivis::KernelParams prm;
  prm.k = 2;
  const hsivis::SparseGraph g = hsivis::knn_graph(cube, prm);

  const auto dir = cli::fresh_dir("graph_dump");
  hsivis::write_graph(g, (dir / "g.txt").string());
  std::ifstream in(dir / "g.txt");
  std::size_t n = 0, e = 0;
  in >> n >> e;
  REQUIRE(n == g.n);
  REQUIRE(e == g.edges.size());
  for (std::size_t t = 0; t < e; ++t) {
    std::size_t i = 0, j = 0;
    std::string w;
    in >> i >> j >> w;
    CHECK(i == g.edges[t].i);
    CHECK(j == g.edges[t].j);
    CHECK(hsivis::parse_double(w, "w") == g.edges[t].w);
  }
}

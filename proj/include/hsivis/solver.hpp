#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsivis/color.hpp"
#include "hsivis/correspondence.hpp"
#include "hsivis/cube.hpp"
#include "hsivis/graph.hpp"
#include "hsivis/projection.hpp"

namespace hsivis {

struct SolveOptions {
  std::optional<double> lambda;  // empty = k * n / pair count
  std::size_t knn_k = 10;        // feeds the automatic lambda rule
  double cg_tol = 1e-8;
  std::size_t cg_max_iter = 0;  // 0 = 10 * sqrt(n), floor 200
  double ridge = 0.0;

  void validate() const {
    if (lambda && !(*lambda > 0.0)) {
      throw std::invalid_argument("lambda must be > 0");
    }
    if (!(cg_tol > 0.0)) throw std::invalid_argument("cg_tol must be > 0");
    if (!(ridge >= 0.0)) throw std::invalid_argument("ridge must be >= 0");
    if (knn_k < 1) throw std::invalid_argument("knn_k must be >= 1");
  }
};

struct EmbeddingResult {
  Eigen::MatrixXd Y;  // 3 x n color coordinates (Lab for solver output)
  std::vector<std::size_t> iterations;
  std::vector<double> residuals;
  bool max_iter_hit = false;
  double lambda_used = 0.0;
};

struct CgOutcome {
  Eigen::VectorXd x;
  std::size_t iters = 0;
  double residual = 0.0;  // relative l2
  bool hit_max = false;
};

// Plain conjugate gradient on a matrix-free SPD operator. Stops when the
// relative l2 residual is under tol and, when abs_inf_tol > 0, the residual
// max-norm is under abs_inf_tol as well (the gradient bounds downstream are
// max-norm bounds, which l2 control alone does not give).
template <typename ApplyA>
CgOutcome cg_solve(ApplyA&& apply_A, const Eigen::VectorXd& b, double tol,
                   std::size_t max_iter, double abs_inf_tol = 0.0) {
  CgOutcome out;
  out.x = Eigen::VectorXd::Zero(b.size());
  const double bnorm = b.norm();
  if (bnorm == 0.0) return out;

  Eigen::VectorXd r = b;
  Eigen::VectorXd p = r;
  double rs = r.squaredNorm();
  for (std::size_t it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd Ap = apply_A(p);
    const double pAp = p.dot(Ap);
    if (!std::isfinite(pAp) || pAp <= 0.0) {
      throw std::runtime_error(
          "conjugate gradient hit a non-positive curvature direction; "
          "the system is not positive definite");
    }
    const double alpha = rs / pAp;
    out.x += alpha * p;
    r -= alpha * Ap;
    const double rs_new = r.squaredNorm();
    if (!std::isfinite(rs_new)) {
      throw std::runtime_error("conjugate gradient produced non-finite values");
    }
    out.iters = it;
    out.residual = std::sqrt(rs_new) / bnorm;
    if (out.residual <= tol &&
        (abs_inf_tol <= 0.0 || r.lpNorm<Eigen::Infinity>() <= abs_inf_tol)) {
      return out;
    }
    const double beta = rs_new / rs;
    p = r + beta * p;
    rs = rs_new;
  }
  out.hit_max = true;
  return out;
}

inline Eigen::MatrixXd cube_matrix(const SpectralCube& cube) {
  const std::size_t n = cube.pixels();
  Eigen::MatrixXd X(cube.bands, n);
  for (std::size_t b = 0; b < cube.bands; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      X(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i)) =
          cube.data[b * n + i];
    }
  }
  return X;
}

inline Eigen::MatrixXd image_matrix(const ColorImage& img) {
  const std::size_t m = img.pixels();
  Eigen::MatrixXd S(3, m);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t j = 0; j < m; ++j) {
      S(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) =
          img.data[c * m + j];
    }
  }
  return S;
}

inline ColorImage matrix_image(const Eigen::MatrixXd& M, std::size_t height,
                               std::size_t width, ColorSpace space) {
  if (M.rows() != 3 || static_cast<std::size_t>(M.cols()) != height * width) {
    throw std::invalid_argument("matrix_image: need a 3 x (h*w) matrix");
  }
  ColorImage img;
  img.space = space;
  img.height = height;
  img.width = width;
  img.data.resize(3 * height * width);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t j = 0; j < height * width; ++j) {
      img.data[c * height * width + j] =
          M(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j));
    }
  }
  return img;
}

namespace detail {

inline constexpr std::size_t kNoPixel = static_cast<std::size_t>(-1);

// Smallest pixel index of a connected component with no constrained pixel,
// or kNoPixel if every component is covered.
inline std::size_t find_unconstrained_component(
    const SparseGraph& g, const std::vector<double>& row_sums) {
  std::vector<char> visited(g.n, 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < g.n; ++start) {
    if (visited[start]) continue;
    bool covered = false;
    stack.assign(1, start);
    visited[start] = 1;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      if (row_sums[v] > 0.0) covered = true;
      for (std::size_t t = g.adj_offsets[v]; t < g.adj_offsets[v + 1]; ++t) {
        const std::size_t u = g.adj_index[t];
        if (!visited[u]) {
          visited[u] = 1;
          stack.push_back(u);
        }
      }
    }
    if (!covered) return start;
  }
  return kNoPixel;
}

inline double resolve_lambda(const SolveOptions& opts, std::size_t n,
                             std::size_t pair_count) {
  if (opts.lambda) return *opts.lambda;
  return static_cast<double>(opts.knn_k * n) /
         static_cast<double>(pair_count);
}

inline std::size_t resolve_cg_max_iter(const SolveOptions& opts,
                                       std::size_t n) {
  if (opts.cg_max_iter > 0) return opts.cg_max_iter;
  const std::size_t scaled = static_cast<std::size_t>(
      10.0 * std::sqrt(static_cast<double>(n)));
  return std::max<std::size_t>(200, scaled);
}

inline void check_solver_shapes(std::size_t graph_n, const Correspondence& corr,
                                const ColorImage& S_lab) {
  corr.validate();
  if (corr.n != graph_n) {
    throw std::invalid_argument("correspondence covers " +
                                std::to_string(corr.n) + " pixels, graph has " +
                                std::to_string(graph_n));
  }
  if (corr.m != S_lab.pixels()) {
    throw std::invalid_argument("correspondence expects " +
                                std::to_string(corr.m) +
                                " reference pixels, image has " +
                                std::to_string(S_lab.pixels()));
  }
  if (S_lab.space != ColorSpace::Lab) {
    throw std::invalid_argument("reference colors must be in Lab space");
  }
}

}  // namespace detail

// Direct solve for the 3 x n color coordinates: each channel solves
// ((1/lambda) L + C1 + ridge I) y = (S C^T) by matrix-free CG. Without
// ridge, a connected component with no constrained pixel leaves the system
// singular, so that is rejected up front with a witness pixel.
inline EmbeddingResult instance_level(const SparseGraph& g,
                                      const Correspondence& corr,
                                      const ColorImage& S_lab,
                                      const SolveOptions& opts) {
  opts.validate();
  detail::check_solver_shapes(g.n, corr, S_lab);
  if (corr.pairs.empty()) {
    throw std::invalid_argument("solving needs at least one color pair");
  }

  const std::size_t n = g.n;
  const double lambda = detail::resolve_lambda(opts, n, corr.pairs.size());
  const double inv_lambda = 1.0 / lambda;

  if (opts.ridge == 0.0) {
    const std::size_t witness =
        detail::find_unconstrained_component(g, corr.row_sums);
    if (witness != detail::kNoPixel) {
      throw std::runtime_error(
          "connected component containing pixel " + std::to_string(witness) +
          " has no constrained pixel; add pairs covering it or set ridge > 0");
    }
  }

  const Eigen::MatrixXd S = image_matrix(S_lab);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, static_cast<Eigen::Index>(n));
  for (const auto& [i, j] : corr.pairs) {
    B.col(static_cast<Eigen::Index>(i)) += S.col(static_cast<Eigen::Index>(j));
  }

  auto apply_A = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(v.size());
    for (std::size_t j = 0; j < n; ++j) {
      double lap = g.degree[j] * v[static_cast<Eigen::Index>(j)];
      for (std::size_t t = g.adj_offsets[j]; t < g.adj_offsets[j + 1]; ++t) {
        lap -= g.adj_weight[t] * v[static_cast<Eigen::Index>(g.adj_index[t])];
      }
      out[static_cast<Eigen::Index>(j)] =
          inv_lambda * lap + corr.row_sums[j] * v[static_cast<Eigen::Index>(j)] +
          opts.ridge * v[static_cast<Eigen::Index>(j)];
    }
    return out;
  };

  const double bmax = B.cwiseAbs().maxCoeff();
  const double inf_tol = 5.0 * opts.cg_tol * bmax;
  const std::size_t max_iter = detail::resolve_cg_max_iter(opts, n);

  EmbeddingResult res;
  res.Y.resize(3, static_cast<Eigen::Index>(n));
  res.lambda_used = lambda;
  for (Eigen::Index c = 0; c < 3; ++c) {
    const CgOutcome out = cg_solve(apply_A, B.row(c).transpose(), opts.cg_tol,
                                   max_iter, inf_tol);
    res.Y.row(c) = out.x.transpose();
    res.iterations.push_back(out.iters);
    res.residuals.push_back(out.residual);
    res.max_iter_hit = res.max_iter_hit || out.hit_max;
  }
  return res;
}

struct FeatureResult {
  ProjectionMatrix projection;
  double lambda_used = 0.0;
  std::array<double, 3> residuals = {0.0, 0.0, 0.0};  // relative, per channel
};

// Closed-form projection: F solves (X ((1/lambda) L + C1) X^T + ridge I) F
// = X C S^T. Only the p x p system is ever formed; one iterative-refinement
// pass tightens the direct solve.
inline FeatureResult feature_level(const SpectralCube& cube,
                                   const SparseGraph& g,
                                   const Correspondence& corr,
                                   const ColorImage& S_lab,
                                   const SolveOptions& opts) {
  opts.validate();
  cube.validate();
  if (cube.pixels() != g.n) {
    throw std::invalid_argument("cube pixel count does not match graph");
  }
  detail::check_solver_shapes(g.n, corr, S_lab);
  if (corr.pairs.empty()) {
    throw std::invalid_argument("solving needs at least one color pair");
  }

  const std::size_t n = g.n;
  const std::size_t p = cube.bands;
  const double lambda = detail::resolve_lambda(opts, n, corr.pairs.size());
  const double inv_lambda = 1.0 / lambda;

  if (opts.ridge == 0.0) {
    const std::size_t witness =
        detail::find_unconstrained_component(g, corr.row_sums);
    if (witness != detail::kNoPixel) {
      throw std::runtime_error(
          "connected component containing pixel " + std::to_string(witness) +
          " has no constrained pixel; add pairs covering it or set ridge > 0");
    }
  }

  const Eigen::MatrixXd X = cube_matrix(cube);
  const Eigen::MatrixXd S = image_matrix(S_lab);

  const Eigen::MatrixXd XL = laplacian_apply(g, X);
  Eigen::MatrixXd T = inv_lambda * XL;
  for (std::size_t i = 0; i < n; ++i) {
    T.col(static_cast<Eigen::Index>(i)) +=
        corr.row_sums[i] * X.col(static_cast<Eigen::Index>(i));
  }
  Eigen::MatrixXd M = T * X.transpose();
  if (opts.ridge > 0.0) {
    M.diagonal().array() += opts.ridge;
  }

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), 3);
  for (const auto& [i, j] : corr.pairs) {
    B += X.col(static_cast<Eigen::Index>(i)) *
         S.col(static_cast<Eigen::Index>(j)).transpose();
  }

  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error(
        "feature-level system is singular or indefinite; set ridge > 0");
  }
  Eigen::MatrixXd F = llt.solve(B);
  F += llt.solve(B - M * F);
  if (!F.allFinite()) {
    throw std::runtime_error(
        "feature-level system is numerically singular; set ridge > 0");
  }

  FeatureResult res;
  res.lambda_used = lambda;
  const Eigen::MatrixXd R = M * F - B;
  for (Eigen::Index c = 0; c < 3; ++c) {
    const double bn = B.col(c).norm();
    res.residuals[static_cast<std::size_t>(c)] =
        bn > 0.0 ? R.col(c).norm() / bn : 0.0;
  }

  res.projection.source_bands = p;
  res.projection.weights.resize(p * 3);
  for (std::size_t b = 0; b < p; ++b) {
    for (std::size_t c = 0; c < 3; ++c) {
      res.projection.weights[b * 3 + c] =
          F(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c));
    }
  }
  res.projection.validate();
  return res;
}

inline EmbeddingResult apply_projection(const ProjectionMatrix& proj,
                                        const SpectralCube& cube) {
  proj.validate();
  cube.validate();
  if (proj.source_bands != cube.bands) {
    throw std::invalid_argument(
        "projection expects " + std::to_string(proj.source_bands) +
        " bands but cube has " + std::to_string(cube.bands) +
        " (was it captured by the same sensor?)");
  }
  const std::size_t p = cube.bands;
  Eigen::MatrixXd F(static_cast<Eigen::Index>(p), 3);
  for (std::size_t b = 0; b < p; ++b) {
    for (std::size_t c = 0; c < 3; ++c) {
      F(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) =
          proj.weights[b * 3 + c];
    }
  }
  EmbeddingResult res;
  res.Y = F.transpose() * cube_matrix(cube);
  return res;
}

// Baseline linear embedder: the 3 generalized eigenvectors of
// (X L X^T, X D X^T) with smallest eigenvalues, via Cholesky reduction to a
// standard symmetric problem.
inline ProjectionMatrix lpp_baseline(const SpectralCube& cube,
                                     const SparseGraph& g) {
  cube.validate();
  if (cube.pixels() != g.n) {
    throw std::invalid_argument("cube pixel count does not match graph");
  }
  const std::size_t p = cube.bands;
  if (p < 3) {
    throw std::invalid_argument("baseline projection needs at least 3 bands");
  }

  const Eigen::MatrixXd X = cube_matrix(cube);
  const Eigen::MatrixXd A = laplacian_apply(g, X) * X.transpose();
  Eigen::MatrixXd XD = X;
  for (std::size_t i = 0; i < g.n; ++i) {
    XD.col(static_cast<Eigen::Index>(i)) *= g.degree[i];
  }
  Eigen::MatrixXd B = XD * X.transpose();

  Eigen::LLT<Eigen::MatrixXd> llt(B);
  if (llt.info() != Eigen::Success) {
    B.diagonal().array() += 1e-10 * B.trace() / static_cast<double>(p);
    llt.compute(B);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error(
          "degree-weighted covariance cannot be factored");
    }
  }

  const Eigen::MatrixXd Li = llt.matrixL().solve(
      Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p),
                                static_cast<Eigen::Index>(p)));
  const Eigen::MatrixXd C = Li * A * Li.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition failed");
  }

  ProjectionMatrix proj;
  proj.source_bands = p;
  proj.weights.resize(p * 3);
  for (Eigen::Index c = 0; c < 3; ++c) {
    Eigen::VectorXd f = llt.matrixU().solve(es.eigenvectors().col(c));
    f /= std::sqrt(f.dot(B * f));
    Eigen::Index imax = 0;
    f.cwiseAbs().maxCoeff(&imax);
    if (f(imax) < 0.0) f = -f;
    for (std::size_t b = 0; b < p; ++b) {
      proj.weights[b * 3 + static_cast<std::size_t>(c)] =
          f(static_cast<Eigen::Index>(b));
    }
  }
  proj.validate();
  return proj;
}

// Smoothness-plus-anchoring objective in trace form, constant term included:
// tr(Y L Y^T) + lambda (tr(Y C1 Y^T) + tr(S C2 S^T) - 2 tr(Y C S^T)).
inline double objective_instance(const Eigen::MatrixXd& Y,
                                 const SparseGraph& g,
                                 const Correspondence& corr,
                                 const ColorImage& S_lab, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  if (Y.rows() != 3 || static_cast<std::size_t>(Y.cols()) != g.n) {
    throw std::invalid_argument("objective needs a 3 x n color matrix");
  }
  detail::check_solver_shapes(g.n, corr, S_lab);

  const Eigen::MatrixXd S = image_matrix(S_lab);
  const Eigen::MatrixXd YL = laplacian_apply(g, Y);
  const double smooth = YL.cwiseProduct(Y).sum();

  double y_anchor = 0.0;
  for (std::size_t i = 0; i < corr.n; ++i) {
    y_anchor +=
        corr.row_sums[i] * Y.col(static_cast<Eigen::Index>(i)).squaredNorm();
  }
  double s_anchor = 0.0;
  for (std::size_t j = 0; j < corr.m; ++j) {
    s_anchor +=
        corr.col_sums[j] * S.col(static_cast<Eigen::Index>(j)).squaredNorm();
  }
  double cross = 0.0;
  for (const auto& [i, j] : corr.pairs) {
    cross += Y.col(static_cast<Eigen::Index>(i))
                 .dot(S.col(static_cast<Eigen::Index>(j)));
  }
  return smooth + lambda * (y_anchor + s_anchor - 2.0 * cross);
}

inline double objective_feature(const ProjectionMatrix& proj,
                                const SpectralCube& cube, const SparseGraph& g,
                                const Correspondence& corr,
                                const ColorImage& S_lab, double lambda) {
  const EmbeddingResult mapped = apply_projection(proj, cube);
  return objective_instance(mapped.Y, g, corr, S_lab, lambda);
}

}  // namespace hsivis

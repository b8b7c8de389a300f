#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hsivis/rng.hpp"
#include "hsivis/text_format.hpp"

namespace hsivis {

// Sparse pairing between cube pixels (flat index i < n) and reference-image
// pixels (flat index j < m). row_sums and col_sums are the diagonals of the
// pairing matrix's row/column marginals; the solver consumes them directly.
struct Correspondence {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> row_sums;
  std::vector<double> col_sums;

  void build_sums() {
    row_sums.assign(n, 0.0);
    col_sums.assign(m, 0.0);
    for (const auto& [i, j] : pairs) {
      if (i >= n || j >= m) {
        throw std::invalid_argument("correspondence pair index out of range");
      }
      row_sums[i] += 1.0;
      col_sums[j] += 1.0;
    }
  }

  void validate() const {
    if (row_sums.size() != n || col_sums.size() != m) {
      throw std::invalid_argument("correspondence sums not built");
    }
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& pr : pairs) {
      if (pr.first >= n || pr.second >= m) {
        throw std::invalid_argument("correspondence pair index out of range");
      }
      if (!seen.insert(pr).second) {
        throw std::invalid_argument("correspondence has duplicate pairs");
      }
    }
  }
};

inline Correspondence make_correspondence(
    std::size_t n, std::size_t m,
    std::vector<std::pair<std::size_t, std::size_t>> pairs) {
  Correspondence c;
  c.n = n;
  c.m = m;
  c.pairs = std::move(pairs);
  std::sort(c.pairs.begin(), c.pairs.end());
  c.build_sums();
  c.validate();
  return c;
}

// Seeded uniform draw of ceil(fraction * n) distinct pixels, each paired
// with itself (cube and reference share the grid).
inline Correspondence sample_aligned(std::size_t n, double fraction,
                                     std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_aligned: n must be >= 1");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("fraction must lie in (0,1]");
  }
  const std::size_t count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n)));

  Rng rng(seed);
  std::vector<std::size_t> picks = rng.sample_without_replacement(n, count);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(picks.size());
  for (std::size_t i : picks) pairs.emplace_back(i, i);
  return make_correspondence(n, n, std::move(pairs));
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline bool blank_or_comment(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

}  // namespace detail

// CSV lines `hsi_row,hsi_col,ref_row,ref_col`, 0-based, `#` comments.
inline Correspondence read_pairs(const std::string& path,
                                 std::size_t cube_height,
                                 std::size_t cube_width,
                                 std::size_t ref_height,
                                 std::size_t ref_width) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pairs file: " + path);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank_or_comment(line)) continue;
    const std::vector<std::string> f = detail::split_csv(line);
    if (f.size() != 4) {
      throw std::runtime_error("pairs line " + std::to_string(lineno) +
                               " needs 4 fields: " + path);
    }
    const long long hr = parse_int(f[0], "hsi_row");
    const long long hc = parse_int(f[1], "hsi_col");
    const long long rr = parse_int(f[2], "ref_row");
    const long long rc = parse_int(f[3], "ref_col");
    if (hr < 0 || hc < 0 || rr < 0 || rc < 0 ||
        static_cast<std::size_t>(hr) >= cube_height ||
        static_cast<std::size_t>(hc) >= cube_width ||
        static_cast<std::size_t>(rr) >= ref_height ||
        static_cast<std::size_t>(rc) >= ref_width) {
      throw std::runtime_error("pairs line " + std::to_string(lineno) +
                               " has out-of-range coordinates: " + path);
    }
    const std::pair<std::size_t, std::size_t> pr(
        static_cast<std::size_t>(hr) * cube_width + static_cast<std::size_t>(hc),
        static_cast<std::size_t>(rr) * ref_width + static_cast<std::size_t>(rc));
    if (!seen.insert(pr).second) {
      throw std::runtime_error("pairs line " + std::to_string(lineno) +
                               " duplicates an earlier pair: " + path);
    }
    pairs.push_back(pr);
  }
  if (pairs.empty()) {
    throw std::runtime_error("pairs file has no pairs: " + path);
  }
  return make_correspondence(cube_height * cube_width, ref_height * ref_width,
                             std::move(pairs));
}

inline void write_pairs(const Correspondence& c, const std::string& path,
                        std::size_t cube_width, std::size_t ref_width) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write pairs file: " + path);
  for (const auto& [i, j] : c.pairs) {
    out << i / cube_width << "," << i % cube_width << "," << j / ref_width
        << "," << j % ref_width << "\n";
  }
  out.flush();
  if (!out) throw std::runtime_error("failed writing pairs file: " + path);
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Projective map on image coordinates, h[2][2] fixed at 1.
struct Homography {
  double h[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  double det() const {
    return h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) -
           h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0]) +
           h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
  }

  void validate() const {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (!std::isfinite(h[r][c])) {
          throw std::invalid_argument("homography has non-finite entries");
        }
      }
    }
    if (h[2][2] != 1.0) {
      throw std::invalid_argument("homography must have h[2][2] = 1");
    }
    if (std::abs(det()) <= 1e-12) {
      throw std::invalid_argument("homography is singular");
    }
  }

  Vec2 apply(const Vec2& p) const {
    const double w = h[2][0] * p.x + h[2][1] * p.y + h[2][2];
    return {(h[0][0] * p.x + h[0][1] * p.y + h[0][2]) / w,
            (h[1][0] * p.x + h[1][1] * p.y + h[1][2]) / w};
  }
};

namespace detail {

struct NormalizedPoints {
  Eigen::Matrix3d T;
  std::vector<Vec2> pts;
};

// Translate centroid to the origin and scale so the RMS radius is sqrt(2).
inline NormalizedPoints hartley_normalize(const std::vector<Vec2>& pts) {
  const double count = static_cast<double>(pts.size());
  double cx = 0.0, cy = 0.0;
  for (const Vec2& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= count;
  cy /= count;
  double sum2 = 0.0;
  for (const Vec2& p : pts) {
    const double dx = p.x - cx;
    const double dy = p.y - cy;
    sum2 += dx * dx + dy * dy;
  }
  const double rms = std::sqrt(sum2 / count);
  if (!(rms > 1e-12)) {
    throw std::runtime_error("degenerate geometry: points coincide");
  }
  const double s = std::sqrt(2.0) / rms;

  NormalizedPoints out;
  out.T << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  out.pts.reserve(pts.size());
  for (const Vec2& p : pts) {
    out.pts.push_back({s * (p.x - cx), s * (p.y - cy)});
  }
  return out;
}

}  // namespace detail

// Least-squares fit of the 8 free parameters (h33 = 1): each pair yields two
// equations linear in h after clearing the projective denominator. Solved in
// Hartley-normalized coordinates, then denormalized.
inline Homography fit_homography(const std::vector<Vec2>& src,
                                 const std::vector<Vec2>& dst) {
  if (src.size() != dst.size()) {
    throw std::invalid_argument("fit_homography: point counts differ");
  }
  const std::size_t count = src.size();
  if (count < 4) {
    throw std::invalid_argument("fit_homography: need at least 4 pairs");
  }

  const detail::NormalizedPoints ns = detail::hartley_normalize(src);
  const detail::NormalizedPoints nd = detail::hartley_normalize(dst);

  Eigen::MatrixXd A(2 * count, 8);
  Eigen::VectorXd b(2 * count);
  for (std::size_t t = 0; t < count; ++t) {
    const double x = ns.pts[t].x;
    const double y = ns.pts[t].y;
    const double u = nd.pts[t].x;
    const double v = nd.pts[t].y;
    const Eigen::Index r = static_cast<Eigen::Index>(2 * t);
    A.row(r) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    b(r) = u;
    A.row(r + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(r + 1) = v;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < 8) {
    throw std::runtime_error(
        "degenerate geometry: homography system is rank-deficient");
  }
  const Eigen::VectorXd hv = qr.solve(b);

  Eigen::Matrix3d Hn;
  Hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), 1.0;
  const Eigen::Matrix3d H = nd.T.inverse() * Hn * ns.T;
  if (std::abs(H(2, 2)) < 1e-12) {
    throw std::runtime_error("degenerate homography: vanishing scale term");
  }

  Homography out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out.h[r][c] = H(r, c) / H(2, 2);
    }
  }
  out.validate();
  return out;
}

struct RansacResult {
  Homography H;
  std::vector<bool> inliers;
};

// Hypothesize-and-verify over seeded 4-point samples; the winning consensus
// set is refit and the mask recomputed against the refit model.
inline RansacResult ransac_homography(const std::vector<Vec2>& src,
                                      const std::vector<Vec2>& dst,
                                      double inlier_px, std::size_t iters,
                                      std::uint64_t seed) {
  if (src.size() != dst.size()) {
    throw std::invalid_argument("ransac_homography: point counts differ");
  }
  const std::size_t count = src.size();
  if (count < 4) {
    throw std::invalid_argument("ransac_homography: need at least 4 pairs");
  }
  if (!(inlier_px > 0.0)) {
    throw std::invalid_argument("inlier_px must be > 0");
  }
  if (iters < 1) throw std::invalid_argument("iters must be >= 1");

  auto mask_for = [&](const Homography& H) {
    std::vector<bool> mask(count, false);
    for (std::size_t t = 0; t < count; ++t) {
      const Vec2 proj = H.apply(src[t]);
      const double dx = proj.x - dst[t].x;
      const double dy = proj.y - dst[t].y;
      const double err = std::sqrt(dx * dx + dy * dy);
      mask[t] = err < inlier_px;
    }
    return mask;
  };

  Rng rng(seed);
  std::size_t best_count = 0;
  std::vector<bool> best_mask;
  std::vector<Vec2> s4(4), d4(4);
  for (std::size_t it = 0; it < iters; ++it) {
    const std::vector<std::size_t> idx = rng.sample_without_replacement(count, 4);
    for (std::size_t t = 0; t < 4; ++t) {
      s4[t] = src[idx[t]];
      d4[t] = dst[idx[t]];
    }
    Homography cand;
    try {
      cand = fit_homography(s4, d4);
    } catch (const std::exception&) {
      continue;  // degenerate sample
    }
    const std::vector<bool> mask = mask_for(cand);
    const std::size_t c =
        static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
    if (c > best_count) {
      best_count = c;
      best_mask = mask;
    }
  }

  if (best_count < 4) {
    throw std::runtime_error(
        "RANSAC found no consensus of at least 4 inliers");
  }

  std::vector<Vec2> si, di;
  si.reserve(best_count);
  di.reserve(best_count);
  for (std::size_t t = 0; t < count; ++t) {
    if (best_mask[t]) {
      si.push_back(src[t]);
      di.push_back(dst[t]);
    }
  }
  RansacResult out;
  out.H = fit_homography(si, di);
  out.inliers = mask_for(out.H);
  return out;
}

// Seeded cube pixels pushed through H onto the reference grid; landings are
// rounded to the nearest pixel (half away from zero) and out-of-image
// landings dropped.
inline Correspondence pairs_from_homography(const Homography& H,
                                            std::size_t cube_height,
                                            std::size_t cube_width,
                                            std::size_t ref_height,
                                            std::size_t ref_width,
                                            double fraction,
                                            std::uint64_t seed) {
  H.validate();
  if (cube_height < 1 || cube_width < 1 || ref_height < 1 || ref_width < 1) {
    throw std::invalid_argument("pairs_from_homography: empty image grid");
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("fraction must lie in (0,1]");
  }
  const std::size_t n = cube_height * cube_width;
  const std::size_t count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n)));

  Rng rng(seed);
  const std::vector<std::size_t> picks =
      rng.sample_without_replacement(n, count);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(count);
  for (std::size_t i : picks) {
    const double x = static_cast<double>(i % cube_width);
    const double y = static_cast<double>(i / cube_width);
    const Vec2 mapped = H.apply({x, y});
    if (!std::isfinite(mapped.x) || !std::isfinite(mapped.y)) continue;
    const double rx = std::round(mapped.x);
    const double ry = std::round(mapped.y);
    if (rx < 0.0 || ry < 0.0 || rx >= static_cast<double>(ref_width) ||
        ry >= static_cast<double>(ref_height)) {
      continue;
    }
    pairs.emplace_back(i, static_cast<std::size_t>(ry) * ref_width +
                              static_cast<std::size_t>(rx));
  }
  if (pairs.empty()) {
    throw std::runtime_error(
        "every sampled pixel maps outside the reference image");
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return make_correspondence(n, ref_height * ref_width, std::move(pairs));
}

// Keypoint matches: CSV `x,y,xp,yp` as decimal floats, `#` comments.
struct MatchList {
  std::vector<Vec2> src;
  std::vector<Vec2> dst;
};

inline MatchList read_matches(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open matches file: " + path);
  MatchList out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank_or_comment(line)) continue;
    const std::vector<std::string> f = detail::split_csv(line);
    if (f.size() != 4) {
      throw std::runtime_error("matches line " + std::to_string(lineno) +
                               " needs 4 fields: " + path);
    }
    out.src.push_back({parse_double(f[0], "x"), parse_double(f[1], "y")});
    out.dst.push_back({parse_double(f[2], "xp"), parse_double(f[3], "yp")});
  }
  if (out.src.empty()) {
    throw std::runtime_error("matches file has no matches: " + path);
  }
  return out;
}

inline void write_homography(const Homography& H, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write homography: " + path);
  for (int r = 0; r < 3; ++r) {
    out << format_sig17(H.h[r][0]) << " " << format_sig17(H.h[r][1]) << " "
        << format_sig17(H.h[r][2]) << "\n";
  }
  out.flush();
  if (!out) throw std::runtime_error("failed writing homography: " + path);
}

inline Homography read_homography(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open homography: " + path);
  Homography H;
  for (int r = 0; r < 3; ++r) {
    std::string line;
    if (!std::getline(in, line)) {
      throw std::runtime_error("homography file truncated: " + path);
    }
    std::size_t start = 0;
    for (int c = 0; c < 3; ++c) {
      while (start < line.size() && (line[start] == ' ' || line[start] == '\t'))
        ++start;
      std::size_t end = start;
      while (end < line.size() && line[end] != ' ' && line[end] != '\t' &&
             line[end] != '\r')
        ++end;
      if (start == end) {
        throw std::runtime_error("homography row " + std::to_string(r) +
                                 " needs 3 values: " + path);
      }
      H.h[r][c] = parse_double(line.substr(start, end - start),
                               "homography entry");
      start = end;
    }
  }
  H.validate();
  return H;
}

}  // namespace hsivis

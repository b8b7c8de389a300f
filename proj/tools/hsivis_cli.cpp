#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hsivis/color.hpp"
#include "hsivis/correspondence.hpp"
#include "hsivis/cube.hpp"
#include "hsivis/graph.hpp"
#include "hsivis/metrics.hpp"
#include "hsivis/projection.hpp"
#include "hsivis/solver.hpp"
#include "hsivis/synthetic.hpp"
#include "hsivis/text_format.hpp"

namespace {

// Flag-level problems: reported on stderr, exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VisualizeConfig {
  std::string cube_path;
  std::string ref_path;
  std::string out_path;
  std::string pairs_path;
  std::string projection_out;
  std::size_t k = 10;
  double mu = 0.5;
  double delta_s = 0.0;
  double delta_w = 0.0;
  bool delta_s_set = false;
  bool delta_w_set = false;
  std::size_t spatial_radius = 2;
  double spatial_sigma = 1.0;
  std::string lambda = "auto";
  double match_fraction = 0.0;
  bool match_fraction_set = false;
  std::uint64_t seed = 0;
  double ridge = 0.0;
  double cg_tol = 1e-8;
};

std::optional<double> parse_lambda_flag(const std::string& s) {
  if (s == "auto") return std::nullopt;
  double v = 0.0;
  try {
    v = hsivis::parse_double(s, "lambda");
  } catch (const std::exception&) {
    throw UsageError("--lambda must be 'auto' or a positive number, got '" +
                     s + "'");
  }
  if (!(v > 0.0)) {
    throw UsageError("--lambda must be 'auto' or a positive number, got '" +
                     s + "'");
  }
  return v;
}

std::size_t parse_budget_flag(const std::string& s) {
  if (s == "all") return hsivis::kAllPairs;
  long long v = 0;
  try {
    v = hsivis::parse_int(s, "pair budget");
  } catch (const std::exception&) {
    throw UsageError("--pair-budget must be 'all' or an integer >= 2, got '" +
                     s + "'");
  }
  if (v < 2) {
    throw UsageError("--pair-budget must be 'all' or an integer >= 2, got '" +
                     s + "'");
  }
  return static_cast<std::size_t>(v);
}

void validate_visualize_flags(const VisualizeConfig& cfg) {
  if (!(cfg.mu >= 0.0 && cfg.mu <= 1.0)) {
    throw UsageError("--mu must lie in [0,1]");
  }
  if (cfg.k < 1) throw UsageError("--k must be >= 1");
  if (cfg.delta_s_set && !(cfg.delta_s > 0.0)) {
    throw UsageError("--delta-s must be > 0");
  }
  if (cfg.delta_w_set && !(cfg.delta_w > 0.0)) {
    throw UsageError("--delta-w must be > 0");
  }
  if (!(cfg.spatial_sigma > 0.0)) {
    throw UsageError("--spatial-sigma must be > 0");
  }
  if (cfg.match_fraction_set &&
      !(cfg.match_fraction > 0.0 && cfg.match_fraction <= 1.0)) {
    throw UsageError("--match-fraction must lie in (0,1]");
  }
  if (!(cfg.ridge >= 0.0)) throw UsageError("--ridge must be >= 0");
  if (!(cfg.cg_tol > 0.0)) throw UsageError("--cg-tol must be > 0");
  parse_lambda_flag(cfg.lambda);
  if (cfg.pairs_path.empty() && !cfg.match_fraction_set) {
    throw UsageError(
        "supply --pairs or --match-fraction to define the color anchors");
  }
}

void print_solver_line(double lambda, const std::vector<std::size_t>& iters,
                       const std::vector<double>& res) {
  std::cout << "lambda=" << hsivis::format_shortest(lambda) << " iters=";
  for (std::size_t c = 0; c < 3; ++c) {
    std::cout << (c ? "," : "") << (c < iters.size() ? iters[c] : 0);
  }
  std::cout << " res=";
  for (std::size_t c = 0; c < 3; ++c) {
    std::cout << (c ? "," : "")
              << hsivis::format_shortest(c < res.size() ? res[c] : 0.0);
  }
  std::cout << "\n";
}

void run_visualize(const VisualizeConfig& cfg, bool feature_mode) {
  validate_visualize_flags(cfg);

  const hsivis::SpectralCube cube = hsivis::read_cube(cfg.cube_path);
  const hsivis::ColorImage ref = hsivis::read_image(cfg.ref_path);

  hsivis::Correspondence corr;
  if (!cfg.pairs_path.empty()) {
    corr = hsivis::read_pairs(cfg.pairs_path, cube.height, cube.width,
                              ref.height, ref.width);
  } else {
    if (ref.height != cube.height || ref.width != cube.width) {
      throw std::runtime_error(
          "--match-fraction needs a reference on the same pixel grid as the "
          "cube; use --pairs for unaligned images");
    }
    corr = hsivis::sample_aligned(cube.pixels(), cfg.match_fraction, cfg.seed);
  }

  hsivis::KernelParams kp;
  kp.k = cfg.k;
  kp.mu = cfg.mu;
  kp.spatial_radius = cfg.spatial_radius;
  kp.spatial_sigma = cfg.spatial_sigma;
  if (cfg.delta_s_set && cfg.delta_w_set) {
    kp.delta_s = cfg.delta_s;
    kp.delta_w = cfg.delta_w;
  } else {
    const hsivis::Bandwidths bw = hsivis::median_bandwidths(
        cube, cfg.spatial_radius, cfg.spatial_sigma, 1000, cfg.seed);
    kp.delta_s = cfg.delta_s_set ? cfg.delta_s : bw.delta_s;
    kp.delta_w = cfg.delta_w_set ? cfg.delta_w : bw.delta_w;
  }

  const hsivis::SparseGraph graph = hsivis::knn_graph(cube, kp);
  const hsivis::ColorImage S_lab = hsivis::rgb_to_lab(ref);

  hsivis::SolveOptions opts;
  opts.lambda = parse_lambda_flag(cfg.lambda);
  opts.knn_k = cfg.k;
  opts.cg_tol = cfg.cg_tol;
  opts.ridge = cfg.ridge;

  Eigen::MatrixXd Y;
  if (feature_mode) {
    const hsivis::FeatureResult fr =
        hsivis::feature_level(cube, graph, corr, S_lab, opts);
    hsivis::write_projection(fr.projection, cfg.projection_out);
    Y = hsivis::apply_projection(fr.projection, cube).Y;
    print_solver_line(fr.lambda_used, {},
                      {fr.residuals[0], fr.residuals[1], fr.residuals[2]});
  } else {
    const hsivis::EmbeddingResult er =
        hsivis::instance_level(graph, corr, S_lab, opts);
    Y = er.Y;
    print_solver_line(er.lambda_used, er.iterations, er.residuals);
    if (er.max_iter_hit) {
      std::cerr << "warning: conjugate gradient hit the iteration cap; "
                   "residuals above may exceed --cg-tol\n";
    }
  }

  const hsivis::ColorImage y_lab =
      hsivis::matrix_image(Y, cube.height, cube.width, hsivis::ColorSpace::Lab);
  hsivis::write_image(hsivis::lab_to_rgb(y_lab), cfg.out_path);
}

struct ApplyConfig {
  std::string cube_path;
  std::string projection_path;
  std::string out_path;
};

void run_apply(const ApplyConfig& cfg) {
  const hsivis::ProjectionMatrix proj =
      hsivis::read_projection(cfg.projection_path);
  const hsivis::SpectralCube cube = hsivis::read_cube(cfg.cube_path);
  const hsivis::EmbeddingResult er = hsivis::apply_projection(proj, cube);
  const hsivis::ColorImage y_lab = hsivis::matrix_image(
      er.Y, cube.height, cube.width, hsivis::ColorSpace::Lab);
  hsivis::write_image(hsivis::lab_to_rgb(y_lab), cfg.out_path);
}

struct RegisterConfig {
  std::string matches_path;
  std::string homography_out;
  std::string inliers_out;
  double inlier_px = 3.0;
  std::size_t iters = 1000;
  std::uint64_t seed = 0;
};

void run_register(const RegisterConfig& cfg) {
  if (!(cfg.inlier_px > 0.0)) throw UsageError("--inlier-px must be > 0");
  if (cfg.iters < 1) throw UsageError("--iters must be >= 1");

  const hsivis::MatchList ml = hsivis::read_matches(cfg.matches_path);
  const hsivis::RansacResult rr = hsivis::ransac_homography(
      ml.src, ml.dst, cfg.inlier_px, cfg.iters, cfg.seed);
  hsivis::write_homography(rr.H, cfg.homography_out);

  std::ofstream out(cfg.inliers_out, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write pairs file: " + cfg.inliers_out);
  }
  std::size_t kept = 0;
  std::set<std::array<long long, 4>> seen;
  for (std::size_t t = 0; t < ml.src.size(); ++t) {
    if (!rr.inliers[t]) continue;
    const std::array<long long, 4> row = {
        std::llround(ml.src[t].y), std::llround(ml.src[t].x),
        std::llround(ml.dst[t].y), std::llround(ml.dst[t].x)};
    if (!seen.insert(row).second) continue;
    out << row[0] << "," << row[1] << "," << row[2] << "," << row[3] << "\n";
    ++kept;
  }
  out.flush();
  if (!out) {
    throw std::runtime_error("failed writing pairs file: " + cfg.inliers_out);
  }
  std::cout << "inliers=" << kept << " total=" << ml.src.size() << "\n";
}

struct EvalConfig {
  std::string cube_path;
  std::string image_path;
  std::string image_cube_path;
  std::string pair_budget = "100000";
  std::uint64_t seed = 0;
};

void run_eval(const EvalConfig& cfg) {
  const std::size_t budget = parse_budget_flag(cfg.pair_budget);
  if (cfg.image_path.empty() == cfg.image_cube_path.empty()) {
    throw UsageError(
        "supply exactly one of --image (RGB) or --image-cube (3-band Lab "
        "coordinates)");
  }

  const hsivis::SpectralCube cube = hsivis::read_cube(cfg.cube_path);
  hsivis::ColorImage lab;
  if (!cfg.image_path.empty()) {
    lab = hsivis::rgb_to_lab(hsivis::read_image(cfg.image_path));
  } else {
    const hsivis::SpectralCube c2 = hsivis::read_cube(cfg.image_cube_path);
    if (c2.bands != 3) {
      throw std::runtime_error("--image-cube must have exactly 3 bands, has " +
                               std::to_string(c2.bands));
    }
    lab.space = hsivis::ColorSpace::Lab;
    lab.height = c2.height;
    lab.width = c2.width;
    lab.data = c2.data;  // band-major 3-band == channel-major
  }

  const hsivis::DistanceSample sample =
      hsivis::distance_sample(cube, lab, budget, cfg.seed);
  const double gamma = hsivis::gamma_of(sample);
  std::cout << "gamma=" << hsivis::format_shortest(gamma)
            << " pairs=" << sample.pair_count << " seed=" << sample.seed
            << "\n";
}

struct SynthConfig {
  std::size_t width = 16;
  std::size_t height = 16;
  std::size_t bands = 8;
  std::size_t clusters = 4;
  double noise = 0.01;
  std::uint64_t seed = 1;
  std::uint64_t model_seed = 0;
  bool model_seed_set = false;
  std::string cube_out;
  std::string reference_out;
  std::string labels_out;
};

void run_synth(const SynthConfig& cfg) {
  hsivis::SyntheticParams prm;
  prm.width = cfg.width;
  prm.height = cfg.height;
  prm.bands = cfg.bands;
  prm.clusters = cfg.clusters;
  prm.noise = cfg.noise;
  prm.seed = cfg.seed;
  if (cfg.model_seed_set) prm.model_seed = cfg.model_seed;

  const hsivis::SyntheticData data = hsivis::make_synthetic(prm);
  hsivis::write_cube(data.cube, cfg.cube_out);
  hsivis::write_image(data.reference, cfg.reference_out);
  hsivis::write_labels(data.labels, cfg.labels_out);
}

void add_visualize_options(CLI::App* sub, VisualizeConfig& cfg,
                           bool feature_mode) {
  sub->add_option("--cube", cfg.cube_path, "cube header file")->required();
  sub->add_option("--reference", cfg.ref_path, "reference RGB image (PPM)")
      ->required();
  sub->add_option("--out", cfg.out_path, "output image (PPM)")->required();
  sub->add_option("--pairs", cfg.pairs_path,
                  "correspondence CSV (hsi_row,hsi_col,ref_row,ref_col)");
  auto* frac = sub->add_option("--match-fraction", cfg.match_fraction,
                               "sample this fraction of aligned pixels");
  sub->add_option("--k", cfg.k, "neighbors per pixel");
  sub->add_option("--mu", cfg.mu, "spectral/spatial kernel trade-off");
  auto* ds = sub->add_option("--delta-s", cfg.delta_s,
                             "spectral bandwidth (default: median heuristic)");
  auto* dw = sub->add_option("--delta-w", cfg.delta_w,
                             "spatial bandwidth (default: median heuristic)");
  sub->add_option("--spatial-radius", cfg.spatial_radius,
                  "Gaussian window radius");
  sub->add_option("--spatial-sigma", cfg.spatial_sigma, "Gaussian window sigma");
  sub->add_option("--lambda", cfg.lambda, "constraint weight, or 'auto'");
  sub->add_option("--seed", cfg.seed, "RNG seed");
  sub->add_option("--ridge", cfg.ridge, "diagonal regularizer");
  sub->add_option("--cg-tol", cfg.cg_tol, "CG relative residual tolerance");
  if (feature_mode) {
    sub->add_option("--projection-out", cfg.projection_out,
                    "projection matrix output file")
        ->required();
  }
  sub->callback([&cfg, frac, ds, dw, feature_mode] {
    cfg.match_fraction_set = frac->count() > 0;
    cfg.delta_s_set = ds->count() > 0;
    cfg.delta_w_set = dw->count() > 0;
    run_visualize(cfg, feature_mode);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"natural-color renderings of hyperspectral cubes"};
  app.require_subcommand(1);

  VisualizeConfig vi_cfg;
  add_visualize_options(
      app.add_subcommand("visualize-instance",
                         "solve colors for every pixel directly"),
      vi_cfg, false);

  VisualizeConfig vf_cfg;
  add_visualize_options(
      app.add_subcommand("visualize-feature",
                         "solve a band-to-color projection, then render"),
      vf_cfg, true);

  ApplyConfig ap_cfg;
  {
    CLI::App* sub = app.add_subcommand(
        "apply-projection", "render a cube with a stored projection");
    sub->add_option("--cube", ap_cfg.cube_path, "cube header file")->required();
    sub->add_option("--projection", ap_cfg.projection_path,
                    "projection matrix file")
        ->required();
    sub->add_option("--out", ap_cfg.out_path, "output image (PPM)")->required();
    sub->callback([&ap_cfg] { run_apply(ap_cfg); });
  }

  RegisterConfig rg_cfg;
  {
    CLI::App* sub = app.add_subcommand(
        "register", "fit a homography to keypoint matches with RANSAC");
    sub->add_option("--matches", rg_cfg.matches_path,
                    "keypoint match CSV (x,y,xp,yp)")
        ->required();
    sub->add_option("--homography-out", rg_cfg.homography_out,
                    "homography output file")
        ->required();
    sub->add_option("--inliers-out", rg_cfg.inliers_out,
                    "inlier pairs CSV output")
        ->required();
    sub->add_option("--inlier-px", rg_cfg.inlier_px,
                    "reprojection error threshold in pixels");
    sub->add_option("--iters", rg_cfg.iters, "RANSAC iterations");
    sub->add_option("--seed", rg_cfg.seed, "RNG seed");
    sub->callback([&rg_cfg] { run_register(rg_cfg); });
  }

  EvalConfig ev_cfg;
  {
    CLI::App* sub = app.add_subcommand(
        "eval-distance", "distance-preservation score of a rendering");
    sub->add_option("--cube", ev_cfg.cube_path, "cube header file")->required();
    sub->add_option("--image", ev_cfg.image_path, "rendered RGB image (PPM)");
    sub->add_option("--image-cube", ev_cfg.image_cube_path,
                    "3-band cube holding Lab coordinates directly");
    sub->add_option("--pair-budget", ev_cfg.pair_budget,
                    "sampled pixel pairs, or 'all'");
    sub->add_option("--seed", ev_cfg.seed, "RNG seed");
    sub->callback([&ev_cfg] { run_eval(ev_cfg); });
  }

  SynthConfig sy_cfg;
  {
    CLI::App* sub = app.add_subcommand(
        "make-synthetic", "generate a clustered test cube with reference");
    sub->add_option("--width", sy_cfg.width, "image width");
    sub->add_option("--height", sy_cfg.height, "image height");
    sub->add_option("--bands", sy_cfg.bands, "spectral bands");
    sub->add_option("--clusters", sy_cfg.clusters, "spatial clusters");
    sub->add_option("--noise", sy_cfg.noise, "Gaussian noise sigma");
    sub->add_option("--seed", sy_cfg.seed, "layout and noise seed");
    auto* ms = sub->add_option("--model-seed", sy_cfg.model_seed,
                               "sensor model seed (default: --seed)");
    sub->add_option("--cube-out", sy_cfg.cube_out, "cube header output path")
        ->required();
    sub->add_option("--reference-out", sy_cfg.reference_out,
                    "reference PPM output path")
        ->required();
    sub->add_option("--labels-out", sy_cfg.labels_out,
                    "cluster label CSV output path")
        ->required();
    sub->callback([&sy_cfg, ms] {
      sy_cfg.model_seed_set = ms->count() > 0;
      run_synth(sy_cfg);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}

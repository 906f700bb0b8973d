// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
//
// nastereo command-line frontend.
//
// Exit codes: 0 success, 2 input or configuration error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nastereo/nastereo.hpp"
#include "nastereo/png.hpp"

namespace fs = std::filesystem;
using namespace nastereo;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

std::string view_stem(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03d", i);
  return buf;
}

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return parse_run_config(io::KeyValues::load(path));
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw InputError("missing " + what + ": " + p.string());
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw InputError("cannot open " + p.string() + " for writing");
  return f;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string spec;
  std::string out;
  std::optional<int> seed;
};

int cmd_synth(const SynthArgs& a) {
  io::KeyValues kv = io::KeyValues::load(a.spec);
  SynthSpec spec = parse_synth_spec(kv);
  if (a.seed) {
    if (*a.seed < 0) throw InputError("--seed must be >= 0");
    spec.seed = static_cast<std::uint64_t>(*a.seed);
    spec.scene.texture.seed = spec.seed;
  }
  const auto views = render(spec.scene);
  fs::create_directories(a.out);
  const fs::path out(a.out);
  auto manifest = open_out(out / "manifest.txt");
  manifest << "# nastereo dataset: one view stem per line\n";
  for (std::size_t i = 0; i < views.size(); ++i) {
    const std::string stem = view_stem(static_cast<int>(i));
    const auto& v = views[i];
    io::write_pgm(out / (stem + "_image.pgm"), v.image);
    io::write_depth_pfm(out / (stem + "_depth.pfm"), v.depth_gt);
    io::write_normal_pfm(out / (stem + "_normal.pfm"), v.normal_gt);
    io::write_camera(out / (stem + "_camera.txt"), v.camera);
    if (spec.depth_noise_sigma > 0.0) {
      const auto noisy =
          add_depth_noise(v.depth_gt, spec.depth_noise_sigma, spec.seed + i);
      io::write_depth_pfm(out / (stem + "_depth_noisy.pfm"), noisy);
    }
    manifest << stem << '\n';
  }
  std::cout << "wrote " << views.size() << " views to " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

std::vector<std::string> read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.txt";
  std::ifstream f(path);
  if (!f) throw InputError("missing dataset manifest: " + path.string());
  std::vector<std::string> stems;
  std::string line;
  while (std::getline(f, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    stems.push_back(line.substr(b, e - b + 1));
  }
  return stems;
}

struct SweepArgs {
  std::string dataset;
  std::string out;
  std::string config;
  std::optional<int> planes;
  std::optional<std::string> cost;
  bool dump_volume = false;
};

int cmd_sweep(const SweepArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (a.planes) cfg.sweep.num_planes = *a.planes;
  if (a.cost) cfg.sweep.cost = parse_cost(*a.cost);
  cfg.sweep.validate();

  const fs::path dir(a.dataset);
  const auto stems = read_manifest(dir);
  if (stems.size() < 2) throw InputError("need >= 2 views, dataset has " +
                                         std::to_string(stems.size()));
  std::vector<GrayImage> images;
  std::vector<Camera> cameras;
  for (const auto& stem : stems) {
    const fs::path image = dir / (stem + "_image.pgm");
    const fs::path camera = dir / (stem + "_camera.txt");
    require_file(image, "image file");
    require_file(camera, "camera file");
    images.push_back(io::read_pgm(image));
    cameras.push_back(io::read_camera(camera));
  }

  const CostVolume cv = build_cost_volume<double>(
      images[0], std::span<const GrayImage>(images).subspan(1), cameras[0],
      std::span<const Camera>(cameras).subspan(1), cfg.sweep);
  const ProbabilityVolume pv =
      to_probability(cv, cfg.sweep.temperature, cfg.min_valid_fraction);
  const DepthMap depth = soft_argmin_depth(pv);
  DepthMap argmin = argmin_depth(cv);
  argmin.valid = depth.valid;
  for (int v = 0; v < argmin.height(); ++v)
    for (int u = 0; u < argmin.width(); ++u)
      if (!argmin.is_valid(u, v)) argmin.z(u, v) = 0.0;

  const fs::path out(a.out);
  fs::create_directories(out);
  io::write_depth_pfm(out / "depth.pfm", depth);
  io::write_depth_pfm(out / "depth_argmin.pfm", argmin);
  io::write_mask_pgm(out / "mask.pgm", depth.valid);
  io::write_camera(out / "camera.txt", cameras[0]);
  if (a.dump_volume) io::write_probability_volume(out / "volume", pv);
  std::cout << "valid_pixels = " << depth.valid_count() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct NormalsArgs {
  std::string input;
  std::string camera;
  std::string out;
  std::string config;
};

void write_normals(const fs::path& out, const NormalMap& n) {
  fs::create_directories(out);
  io::write_normal_pfm(out / "normal.pfm", n);
  io::write_normal_png(out / "normal.png", n);
}

int cmd_normals_from_depth(const NormalsArgs& a) {
  const RunConfig cfg = load_run_config(a.config);
  const DepthMap d = io::read_depth_pfm(a.input);
  const Camera cam = io::read_camera(a.camera);
  write_normals(a.out, normals_from_depth(d, cam.intrinsics, cfg.depth_normals));
  return 0;
}

int cmd_normals_from_volume(const NormalsArgs& a) {
  const RunConfig cfg = load_run_config(a.config);
  const ProbabilityVolume pv = io::read_probability_volume(a.input);
  const Camera cam = io::read_camera(a.camera);
  write_normals(a.out, normals_from_volume(pv, cam.intrinsics, cfg.volume_normals));
  return 0;
}

// ---------------------------------------------------------------------------

struct ConsistencyArgs {
  std::string depth;
  std::string normals;
  std::string camera;
  std::string config;
};

void check_same_shape(const DepthMap& d, const NormalMap& n) {
  if (d.width() != n.width() || d.height() != n.height())
    throw InputError("depth is " + std::to_string(d.width()) + "x" +
                     std::to_string(d.height()) + " but normals are " +
                     std::to_string(n.width()) + "x" + std::to_string(n.height()));
}

int cmd_consistency(const ConsistencyArgs& a) {
  const RunConfig cfg = load_run_config(a.config);
  const DepthMap d = io::read_depth_pfm(a.depth);
  const NormalMap n = io::read_normal_pfm(a.normals);
  const Camera cam = io::read_camera(a.camera);
  check_same_shape(d, n);
  const double delta = cfg.loss.huber_delta;
  std::cout << "L_c = " << io::format_double(loss_consistency(d, n, cam.intrinsics, delta))
            << '\n';
  std::cout << "L_t = " << io::format_double(loss_tangent(d, n, cam.intrinsics, delta))
            << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct RefineArgs {
  std::string depth;
  std::string normals;
  std::string camera;
  std::string out;
  std::string config;
  std::optional<std::string> loss;
};

void write_trace(const fs::path& path, const std::vector<RefineIteration>& trace) {
  auto f = open_out(path);
  f << "iter,E,data_term,consistency_term\n";
  for (const auto& t : trace)
    f << t.iter << ',' << io::format_double(t.objective) << ','
      << io::format_double(t.data_term) << ',' << io::format_double(t.consistency_term)
      << '\n';
}

int cmd_refine(const RefineArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (a.loss) cfg.refine.term = parse_loss(*a.loss);
  const DepthMap d = io::read_depth_pfm(a.depth);
  const NormalMap n = io::read_normal_pfm(a.normals);
  const Camera cam = io::read_camera(a.camera);
  check_same_shape(d, n);
  const fs::path out(a.out);
  fs::create_directories(out);
  try {
    const RefineResult r = refine_depth(d, n, cam.intrinsics, cfg.refine);
    io::write_depth_pfm(out / "depth.pfm", r.depth);
    write_trace(out / "trace.csv", r.trace);
    std::cout << "iterations = " << r.trace.size() - 1 << '\n'
              << "converged = " << (r.converged ? 1 : 0) << '\n'
              << "E = " << io::format_double(r.trace.back().objective) << '\n';
  } catch (const DivergenceError& e) {
    write_trace(out / "trace.csv", e.trace());
    throw;
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string out;
  std::string config;
  int view = 0;
};

// <dir>/<stem>.<ext>, falling back to the dataset layout <dir>/view_NNN_<stem>.<ext>.
std::optional<fs::path> resolve(const fs::path& dir, const std::string& stem,
                                const std::string& ext, int view) {
  const fs::path direct = dir / (stem + ext);
  if (fs::is_regular_file(direct)) return direct;
  const fs::path indexed = dir / (view_stem(view) + "_" + stem + ext);
  if (fs::is_regular_file(indexed)) return indexed;
  return std::nullopt;
}

int cmd_eval(const EvalArgs& a) {
  const RunConfig cfg = load_run_config(a.config);
  const fs::path pred_dir(a.pred), gt_dir(a.gt);
  const auto pred_depth_path = resolve(pred_dir, "depth", ".pfm", a.view);
  const auto gt_depth_path = resolve(gt_dir, "depth", ".pfm", a.view);
  if (!pred_depth_path) throw InputError("missing predicted depth in " + a.pred);
  if (!gt_depth_path) throw InputError("missing ground-truth depth in " + a.gt);
  const DepthMap pred = io::read_depth_pfm(*pred_depth_path);
  const DepthMap gt = io::read_depth_pfm(*gt_depth_path);

  MetricsReport report;
  report.depth = depth_metrics(pred, gt);

  std::optional<NormalMap> pred_n, gt_n;
  if (auto p = resolve(pred_dir, "normal", ".pfm", a.view)) pred_n = io::read_normal_pfm(*p);
  if (auto p = resolve(gt_dir, "normal", ".pfm", a.view)) gt_n = io::read_normal_pfm(*p);
  if (pred_n && gt_n) report.normal = normal_metrics(*pred_n, *gt_n);

  std::cout << to_key_value(report);

  std::optional<Camera> cam;
  if (auto p = resolve(pred_dir, "camera", ".txt", a.view)) {
    cam = io::read_camera(*p);
  } else if (auto q = resolve(gt_dir, "camera", ".txt", a.view)) {
    cam = io::read_camera(*q);
  }
  const NormalMap* normals = pred_n ? &*pred_n : gt_n ? &*gt_n : nullptr;
  const double delta = cfg.loss.huber_delta;
  if (cam && normals) {
    check_same_shape(pred, *normals);
    std::cout << "L_c = "
              << io::format_double(loss_consistency(pred, *normals, cam->intrinsics, delta))
              << '\n';
    std::cout << "L_t = "
              << io::format_double(loss_tangent(pred, *normals, cam->intrinsics, delta))
              << '\n';
  }
  DepthMap d1 = pred;
  if (auto p = resolve(pred_dir, "depth_argmin", ".pfm", a.view)) d1 = io::read_depth_pfm(*p);
  if (pred_n && gt_n) {
    const LossBreakdown l = loss_total(d1, pred, gt, *pred_n, *gt_n, cfg.loss);
    std::cout << "L_z = " << io::format_double(l.l_z) << '\n'
              << "L_n = " << io::format_double(l.l_n) << '\n'
              << "L = " << io::format_double(l.total) << '\n';
  }

  const fs::path out = a.out.empty() ? pred_dir : fs::path(a.out);
  fs::create_directories(out);
  auto csv = open_out(out / "metrics.csv");
  csv << to_csv(report);
  return 0;
}

// ---------------------------------------------------------------------------

struct ViewScoreArgs {
  std::string dataset;
  std::string config;
};

int cmd_viewscore(const ViewScoreArgs& a) {
  const RunConfig cfg = load_run_config(a.config);
  const fs::path dir(a.dataset);
  const auto stems = read_manifest(dir);
  std::vector<Camera> cams;
  std::vector<DepthMap> depths;
  for (const auto& stem : stems) {
    const fs::path camera = dir / (stem + "_camera.txt");
    const fs::path depth = dir / (stem + "_depth.pfm");
    require_file(camera, "camera file");
    require_file(depth, "depth file");
    cams.push_back(io::read_camera(camera));
    depths.push_back(io::read_depth_pfm(depth));
  }
  std::cout << "# i j score\n";
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const CameraPose to_world = cams[i].pose.inverse();
    for (std::size_t j = i + 1; j < cams.size(); ++j) {
      std::vector<Point3> shared;
      const DepthMap& d = depths[i];
      for (int v = 0; v < d.height(); ++v) {
        for (int u = 0; u < d.width(); ++u) {
          if (!d.is_valid(u, v)) continue;
          const Point3 world = to_world.transform(
              unproject({double(u), double(v)}, d.z(u, v), cams[i].intrinsics));
          const Point3 in_j = cams[j].pose.transform(world);
          if (!(in_j.z() > 0.0)) continue;
          const PixelCoord px = project(in_j, cams[j].intrinsics);
          if (px.u < 0.0 || px.v < 0.0 || px.u > d.width() - 1.0 || px.v > d.height() - 1.0)
            continue;
          shared.push_back(world);
        }
      }
      const double score = view_pair_score(shared, cams[i].pose.center(),
                                           cams[j].pose.center(), cfg.view_selection);
      std::cout << i << ' ' << j << ' ' << io::format_double(score) << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nastereo: plane-sweep stereo with depth-normal consistency"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "render a synthetic dataset from a scene file");
  c_synth->add_option("spec", synth.spec, "scene description file")->required();
  c_synth->add_option("--out", synth.out, "output dataset directory")->required();
  c_synth->add_option("--seed", synth.seed, "texture and noise seed");

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "plane-sweep depth for view 0 of a dataset");
  c_sweep->add_option("dataset", sweep.dataset, "dataset directory")->required();
  c_sweep->add_option("--out", sweep.out, "output directory")->required();
  c_sweep->add_option("--config", sweep.config, "run configuration file");
  c_sweep->add_option("--planes", sweep.planes, "number of depth planes");
  c_sweep->add_option("--cost", sweep.cost, "matching cost")
      ->check(CLI::IsMember({"sad", "zncc"}));
  c_sweep->add_flag("--dump-volume", sweep.dump_volume,
                    "write the probability volume as PFM slices");

  auto* c_normals = app.add_subcommand("normals", "surface normals from depth or a volume");
  c_normals->require_subcommand(1);
  NormalsArgs from_depth, from_volume;
  auto* c_fd = c_normals->add_subcommand("from-depth", "least-squares fit on a depth map");
  c_fd->add_option("depth", from_depth.input, "depth PFM")->required();
  c_fd->add_option("--camera", from_depth.camera, "camera file")->required();
  c_fd->add_option("--out", from_depth.out, "output directory")->required();
  c_fd->add_option("--config", from_depth.config, "run configuration file");
  auto* c_fv = c_normals->add_subcommand("from-volume", "aggregate over volume slices");
  c_fv->add_option("volume", from_volume.input, "directory written by sweep --dump-volume")
      ->required();
  c_fv->add_option("--camera", from_volume.camera, "camera file")->required();
  c_fv->add_option("--out", from_volume.out, "output directory")->required();
  c_fv->add_option("--config", from_volume.config, "run configuration file");

  ConsistencyArgs cons;
  auto* c_cons = app.add_subcommand("consistency", "print L_c and L_t");
  c_cons->add_option("--depth", cons.depth, "depth PFM")->required();
  c_cons->add_option("--normals", cons.normals, "normal PFM")->required();
  c_cons->add_option("--camera", cons.camera, "camera file")->required();
  c_cons->add_option("--config", cons.config, "run configuration file");

  RefineArgs refine;
  auto* c_refine = app.add_subcommand("refine", "consistency-driven depth refinement");
  c_refine->add_option("--depth", refine.depth, "depth PFM")->required();
  c_refine->add_option("--normals", refine.normals, "normal PFM")->required();
  c_refine->add_option("--camera", refine.camera, "camera file")->required();
  c_refine->add_option("--out", refine.out, "output directory")->required();
  c_refine->add_option("--config", refine.config, "run configuration file");
  c_refine->add_option("--loss", refine.loss, "consistency term")
      ->check(CLI::IsMember({"lc", "lt"}));

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "depth and normal metrics plus losses");
  c_eval->add_option("pred", eval.pred, "prediction directory")->required();
  c_eval->add_option("gt", eval.gt, "ground-truth directory")->required();
  c_eval->add_option("--out", eval.out, "where metrics.csv goes (default: pred)");
  c_eval->add_option("--config", eval.config, "run configuration file");
  c_eval->add_option("--view", eval.view, "view index for dataset-layout directories");

  ViewScoreArgs vs;
  auto* c_vs = app.add_subcommand("viewscore", "score every view pair of a dataset");
  c_vs->add_option("dataset", vs.dataset, "dataset directory")->required();
  c_vs->add_option("--config", vs.config, "run configuration file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (c_synth->parsed()) return cmd_synth(synth);
    if (c_sweep->parsed()) return cmd_sweep(sweep);
    if (c_fd->parsed()) return cmd_normals_from_depth(from_depth);
    if (c_fv->parsed()) return cmd_normals_from_volume(from_volume);
    if (c_cons->parsed()) return cmd_consistency(cons);
    if (c_refine->parsed()) return cmd_refine(refine);
    if (c_eval->parsed()) return cmd_eval(eval);
    if (c_vs->parsed()) return cmd_viewscore(vs);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

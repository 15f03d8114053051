#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "threedp/errors.hpp"
#include "threedp/existence.hpp"
#include "threedp/harness.hpp"
#include "threedp/shape_learning.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace threedp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalidInput = 2;
constexpr int kExitInferenceFailure = 3;

struct CliConfig {
  KernelConfig kernel;
  CloudLikParams likelihood;
  CameraIntrinsics camera;
  double far_plane = 500.0;
  double sigma_pixel = 0.5;
  std::uint64_t seed = 0;
  bool desk_camera = true;  // use the desk-scene camera unless overridden
};

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

CliConfig load_config(const std::string& path) {
  CliConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  in >> j;
  if (j.contains("kernel")) {
    const json& k = j["kernel"];
    maybe(k, "rw_trans_std", cfg.kernel.rw_trans_std);
    maybe(k, "rw_rot_kappa", cfg.kernel.rw_rot_kappa);
    maybe(k, "contact_ab_std", cfg.kernel.contact_ab_std);
    maybe(k, "contact_z_std", cfg.kernel.contact_z_std);
    maybe(k, "dd_pos_std", cfg.kernel.dd_pos_std);
    maybe(k, "dd_rot_kappa", cfg.kernel.dd_rot_kappa);
    maybe(k, "dd_prob", cfg.kernel.dd_prob);
    maybe(k, "dbscan_eps", cfg.kernel.dbscan_eps);
    maybe(k, "dbscan_min_pts", cfg.kernel.dbscan_min_pts);
    maybe(k, "icp_iters", cfg.kernel.icp_iters);
    maybe(k, "particles_per_object", cfg.kernel.particles_per_object);
    maybe(k, "stage2_sweeps_per_object", cfg.kernel.stage2_sweeps_per_object);
    maybe(k, "sweeps", cfg.kernel.sweeps);
    maybe(k, "burn_in_fraction", cfg.kernel.burn_in_fraction);
    maybe(k, "thin", cfg.kernel.thin);
    maybe(k, "ablate_structure", cfg.kernel.ablate_structure);
    maybe(k, "rn_float_to_contact", cfg.kernel.rn_float_to_contact);
  }
  if (j.contains("likelihood")) {
    const json& l = j["likelihood"];
    maybe(l, "outlier_weight", cfg.likelihood.outlier_weight);
    maybe(l, "r_ball", cfg.likelihood.r_ball);
    maybe(l, "bounds_volume", cfg.likelihood.bounds_volume);
    maybe(l, "count_hits_only", cfg.likelihood.count_hits_only);
  }
  if (j.contains("camera")) {
    const json& c = j["camera"];
    maybe(c, "fx", cfg.camera.fx);
    maybe(c, "fy", cfg.camera.fy);
    maybe(c, "cx", cfg.camera.cx);
    maybe(c, "cy", cfg.camera.cy);
    maybe(c, "width", cfg.camera.width);
    maybe(c, "height", cfg.camera.height);
    cfg.desk_camera = false;
  }
  maybe(j, "far_plane", cfg.far_plane);
  maybe(j, "sigma_pixel", cfg.sigma_pixel);
  maybe(j, "seed", cfg.seed);
  return cfg;
}

std::uint64_t effective_seed(std::uint64_t seed) {
  if (const char* env = std::getenv("THREEDP_SEED")) return std::stoull(env);
  return seed;
}

SceneContext make_context(const CliConfig& cfg) {
  SceneContext ctx = make_desk_context();
  if (!cfg.desk_camera) ctx.camera = cfg.camera;
  ctx.far_plane = cfg.far_plane;
  return ctx;
}

json graph_json(const SceneGraph& g) { return json::parse(scene_graph_to_json(g)); }

int cmd_learn_shapes(const std::string& views_dir, const std::string& poses_file,
                     const std::string& out_file, std::vector<int> grid, double res,
                     const std::string& config_path) {
  const CliConfig cfg = load_config(config_path);
  SceneContext ctx = make_context(cfg);

  std::vector<std::string> view_files;
  for (const auto& entry : fs::directory_iterator(views_dir)) {
    if (entry.path().extension() == ".dpt") view_files.push_back(entry.path().string());
  }
  std::sort(view_files.begin(), view_files.end());
  if (view_files.empty()) throw std::runtime_error("no .dpt views in " + views_dir);

  std::vector<DepthImage> images;
  for (const auto& f : view_files) images.push_back(read_dpt(f));
  const std::vector<Pose> poses = read_pose_list(poses_file);
  if (poses.size() != images.size()) {
    throw std::runtime_error("pose count does not match view count");
  }

  PoseBeliefParticles belief;
  belief.dims = GridDims{grid[0], grid[1], grid[2]};
  belief.resolution = res;
  belief.particles.push_back({Pose{}, poses, 1.0});

  const LearnedShape learned = learn_shape(images, belief, ctx);
  write_vox(out_file, learned.belief);
  std::cout << "wrote " << out_file << " (" << grid[0] << "x" << grid[1] << "x" << grid[2]
            << " @ " << res << " cm)\n";
  return kExitOk;
}

int cmd_generate(const std::string& category_str, std::uint64_t seed, const std::string& out_dir,
                 std::vector<int> types) {
  const SceneCategory category = category_from_string(category_str);
  const SceneContext ctx = make_desk_context();
  seed = effective_seed(seed);
  Rng rng(seed);
  if (types.empty()) {
    // Default: table plus random tabletop objects drawn from the library.
    const int n_library = static_cast<int>(ctx.shapes.size()) - 1;
    const int want =
        category == SceneCategory::Single || category == SceneCategory::PartialView ? 1 : 2;
    types.push_back(kTableType);
    std::uniform_int_distribution<int> pick(1, n_library);
    while (static_cast<int>(types.size()) < want + 1) {
      const int t = pick(rng);
      if (std::find(types.begin(), types.end(), t) == types.end()) types.push_back(t);
    }
  }
  SceneSpec spec = generate_scene(category, types, ctx, rng);
  spec.seed = seed;
  write_scene_dir(out_dir, spec);
  std::cout << "wrote scene " << out_dir << " (" << category_str << ", seed " << seed << ")\n";
  return kExitOk;
}

int cmd_infer(const std::string& scene_dir, const std::string& config_path,
              bool ablate_structure, const std::string& samples_file) {
  CliConfig cfg = load_config(config_path);
  if (ablate_structure) cfg.kernel.ablate_structure = true;
  SceneContext ctx = make_context(cfg);
  const SceneSpec spec = read_scene_dir(scene_dir);

  Rng rng(effective_seed(cfg.seed != 0 ? cfg.seed : spec.seed));
  const PointCloud observed = unproject(spec.observation, ctx);
  const InferenceResult result =
      run_inference(observed, spec.types, ctx, cfg.likelihood, cfg.kernel, rng);

  json out;
  out["best"] = graph_json(result.best);
  out["best_score"] = result.best_score;
  out["samples"] = json::array();
  out["scores"] = result.sample_scores;
  for (const auto& g : result.samples) out["samples"].push_back(graph_json(g));
  std::ofstream f(samples_file);
  if (!f) throw std::runtime_error("cannot open " + samples_file);
  f << out.dump(2) << "\n";
  std::cout << "best score " << result.best_score << ", " << result.samples.size()
            << " samples -> " << samples_file << "\n";
  return kExitOk;
}

int cmd_infer_existence(const std::string& scene_dir, std::vector<int> candidates,
                        double p_pres, int sweeps, const std::string& config_path) {
  const CliConfig cfg = load_config(config_path);
  SceneContext ctx = make_context(cfg);
  const SceneSpec spec = read_scene_dir(scene_dir);
  if (candidates.empty()) {
    for (std::size_t t = 1; t < ctx.shapes.size(); ++t) {
      if (std::find(spec.types.begin(), spec.types.end(), static_cast<int>(t)) ==
          spec.types.end()) {
        candidates.push_back(static_cast<int>(t));
      }
    }
  }
  ExistencePrior prior;
  prior.types = candidates;
  prior.p_pres.assign(candidates.size(), p_pres);
  ExistenceConfig ecfg;
  ecfg.sweeps = sweeps;
  ecfg.sigma_pixel = cfg.sigma_pixel;
  Rng rng(effective_seed(cfg.seed != 0 ? cfg.seed : spec.seed));
  const ExistenceResult result = infer_existence(spec.observation, prior, ctx, ecfg, rng);

  json out;
  out["candidates"] = candidates;
  out["presence_prob"] = result.presence_prob;
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& results_dir, const std::string& report_file,
                 const std::string& method) {
  const SceneContext ctx = make_desk_context();
  std::vector<std::string> scene_dirs;
  for (const auto& entry : fs::directory_iterator(results_dir)) {
    if (entry.is_directory()) scene_dirs.push_back(entry.path().string());
  }
  std::sort(scene_dirs.begin(), scene_dirs.end());
  if (scene_dirs.empty()) throw std::runtime_error("no scene directories in " + results_dir);

  std::vector<std::pair<SceneGraph, SceneSpec>> results;
  for (const auto& dir : scene_dirs) {
    SceneSpec spec = read_scene_dir(dir);
    std::ifstream f(dir + "/samples.json");
    if (!f) throw std::runtime_error("missing " + dir + "/samples.json");
    json samples;
    f >> samples;
    results.emplace_back(scene_graph_from_json(samples.at("best").dump()), std::move(spec));
  }
  const EvalReport report = evaluate_suite(results, {0.5, 1.0, 2.0}, method, ctx);
  std::ofstream out(report_file);
  if (!out) throw std::runtime_error("cannot open " + report_file);
  out << report_csv(report);
  std::cout << "accuracy@0.5/1.0/2.0 cm: " << report.accuracy[0] << " " << report.accuracy[1]
            << " " << report.accuracy[2] << " (" << report.records.size() << " objects) -> "
            << report_file << "\n";
  return kExitOk;
}

int cmd_render(const std::string& scene_json, const std::string& out_file,
               const std::string& config_path) {
  const CliConfig cfg = load_config(config_path);
  SceneContext ctx = make_context(cfg);
  std::ifstream f(scene_json);
  if (!f) throw std::runtime_error("cannot open " + scene_json);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const SceneGraph g = scene_graph_from_json(text);
  std::vector<VoxelShape> shapes;
  for (const auto& b : ctx.shapes) shapes.push_back(mode_shape(b));
  write_dpt(out_file, render_depth(g, shapes, ctx));
  std::cout << "wrote " << out_file << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene-graph inference from depth images"};
  app.require_subcommand(1);

  std::string views_dir, poses_file, out_file, config_path;
  std::vector<int> grid = {32, 32, 32};
  double res = 0.5;
  auto* learn = app.add_subcommand("learn-shapes", "Learn a voxel shape belief from depth views");
  learn->add_option("--views", views_dir, "Directory of .dpt views")->required();
  learn->add_option("--poses", poses_file, "JSON camera pose list")->required();
  learn->add_option("--out", out_file, "Output .vox file")->required();
  learn->add_option("--grid", grid, "Grid dims h w l")->expected(3);
  learn->add_option("--res", res, "Cell size in cm");
  learn->add_option("--config", config_path, "JSON config");

  std::string category = "single", scene_dir, samples_file, report_file, results_dir;
  std::string scene_json, method = "3dp3";
  std::uint64_t seed = 1;
  std::vector<int> types, candidates;
  bool ablate = false;
  double p_pres = 0.5;
  int sweeps = 2000;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic scene");
  gen->add_option("--category", category, "single|stacked|partial_view|partially_occluded");
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--out", out_file, "Output scene directory")->required();
  gen->add_option("--types", types, "Object type ids (table first)");

  auto* infer = app.add_subcommand("infer", "Infer the scene graph for a scene directory");
  infer->add_option("--scene", scene_dir, "Scene directory")->required();
  infer->add_option("--config", config_path, "JSON config");
  infer->add_flag("--ablate-structure", ablate, "Disable structure moves");
  infer->add_option("--samples", samples_file, "Output samples JSON")->required();

  auto* exist = app.add_subcommand("infer-existence", "Infer presence of occluded objects");
  exist->add_option("--scene", scene_dir, "Scene directory")->required();
  exist->add_option("--candidates", candidates, "Candidate type ids");
  exist->add_option("--p-pres", p_pres, "Prior presence probability");
  exist->add_option("--sweeps", sweeps, "Chain sweeps");
  exist->add_option("--config", config_path, "JSON config");

  auto* eval = app.add_subcommand("evaluate", "Score inferred scenes and write a CSV report");
  eval->add_option("--results", results_dir, "Directory of scene dirs with samples.json")
      ->required();
  eval->add_option("--report", report_file, "Output CSV path")->required();
  eval->add_option("--method", method, "Method label for CSV rows");

  auto* render = app.add_subcommand("render", "Render a scene-graph JSON to a depth image");
  render->add_option("--scene", scene_json, "Scene graph JSON file")->required();
  render->add_option("--out", out_file, "Output .dpt file")->required();
  render->add_option("--config", config_path, "JSON config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalidInput;
  }

  try {
    if (learn->parsed()) return cmd_learn_shapes(views_dir, poses_file, out_file, grid, res,
                                                 config_path);
    if (gen->parsed()) return cmd_generate(category, seed, out_file, types);
    if (infer->parsed()) return cmd_infer(scene_dir, config_path, ablate, samples_file);
    if (exist->parsed()) {
      return cmd_infer_existence(scene_dir, candidates, p_pres, sweeps, config_path);
    }
    if (eval->parsed()) return cmd_evaluate(results_dir, report_file, method);
    if (render->parsed()) return cmd_render(scene_json, out_file, config_path);
  } catch (const NoHypotheses& e) {
    std::cerr << "inference failure: " << e.what() << "\n";
    return kExitInferenceFailure;
  } catch (const DegenerateCorrespondences& e) {
    std::cerr << "inference failure: " << e.what() << "\n";
    return kExitInferenceFailure;
  } catch (const SingularOrientation& e) {
    std::cerr << "inference failure: " << e.what() << "\n";
    return kExitInferenceFailure;
  } catch (const PlacementFailure& e) {
    std::cerr << "inference failure: " << e.what() << "\n";
    return kExitInferenceFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  }
  return kExitOk;
}

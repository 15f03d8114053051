#include "threedp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "threedp/errors.hpp"

namespace threedp {

namespace {

constexpr int kPlacementRetries = 100;
constexpr int kMinVisiblePixels = 30;

VoxelShape solid_box(int h, int w, int l) {
  VoxelShape s = make_shape(GridDims{h, w, l}, 0.5);
  std::fill(s.occupancy.begin(), s.occupancy.end(), 1);
  return s;
}

VoxelShape cylinder_shape() {
  VoxelShape s = make_shape(GridDims{10, 10, 12}, 0.5);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      const double dx = i + 0.5 - 5.0, dy = j + 0.5 - 5.0;
      if (dx * dx + dy * dy > 4.5 * 4.5) continue;
      for (int k = 0; k < 12; ++k) s.occupancy[s.dims.index(i, j, k)] = 1;
    }
  }
  return s;
}

VoxelShape l_shape() {
  VoxelShape s = make_shape(GridDims{10, 6, 10}, 0.5);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 6; ++j) {
      for (int k = 0; k < 10; ++k) {
        if (k < 4 || i < 4) s.occupancy[s.dims.index(i, j, k)] = 1;
      }
    }
  }
  return s;
}

VoxelShape blob_shape() {
  VoxelShape s = make_shape(GridDims{10, 10, 10}, 0.5);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      for (int k = 0; k < 10; ++k) {
        const double dx = i + 0.5 - 5.0, dy = j + 0.5 - 5.0, dz = k + 0.5 - 5.0;
        if (dx * dx + dy * dy + dz * dz <= 4.7 * 4.7) s.occupancy[s.dims.index(i, j, k)] = 1;
      }
    }
  }
  return s;
}

ContactParam table_contact(double a, double b, double phi) {
  ContactParam cp;
  cp.parent_face = 5;  // +z of the support
  cp.child_face = 4;   // -z of the child
  cp.coords.a = a;
  cp.coords.b = b;
  cp.coords.z = 0.0;
  cp.coords.eta = Vec3(0.0, 0.0, 1.0);
  cp.coords.phi = phi;
  return cp;
}

std::vector<VoxelShape> mode_samples(const SceneContext& ctx) {
  std::vector<VoxelShape> out;
  out.reserve(ctx.shapes.size());
  for (const auto& b : ctx.shapes) out.push_back(mode_shape(b));
  return out;
}

/// Pixels where object v is the front-most surface of the full render.
int visible_pixels(const SceneGraph& g, int v, const std::vector<VoxelShape>& shapes,
                   const SceneContext& ctx) {
  const auto poses = world_poses(g, context_planes(ctx));
  const DepthImage full = render_depth(g, shapes, ctx);
  const DepthImage alone = render_object(shapes[g.types[v]], poses[v], ctx);
  int count = 0;
  for (std::size_t i = 0; i < full.depths.size(); ++i) {
    if (alone.depths[i] < ctx.far_plane && full.depths[i] == alone.depths[i]) ++count;
  }
  return count;
}

bool touches_border(const DepthImage& img) {
  for (int u = 0; u < img.width; ++u) {
    if (img.at(u, 0) < img.far_plane || img.at(u, img.height - 1) < img.far_plane) return true;
  }
  for (int v = 0; v < img.height; ++v) {
    if (img.at(0, v) < img.far_plane || img.at(img.width - 1, v) < img.far_plane) return true;
  }
  return false;
}

std::array<double, 3> quartiles_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * (static_cast<double>(v.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
  };
  return {q(0.25), q(0.5), q(0.75)};
}

}  // namespace

std::string category_to_string(SceneCategory c) {
  switch (c) {
    case SceneCategory::Single: return "single";
    case SceneCategory::Stacked: return "stacked";
    case SceneCategory::PartialView: return "partial_view";
    case SceneCategory::PartiallyOccluded: return "partially_occluded";
  }
  return "single";
}

SceneCategory category_from_string(const std::string& s) {
  if (s == "single") return SceneCategory::Single;
  if (s == "stacked") return SceneCategory::Stacked;
  if (s == "partial_view") return SceneCategory::PartialView;
  if (s == "partially_occluded") return SceneCategory::PartiallyOccluded;
  throw OutOfSupport("unknown scene category: " + s);
}

std::vector<ShapeBelief> desk_object_library() {
  std::vector<ShapeBelief> lib;
  lib.push_back(belief_from_shape(solid_box(80, 80, 4)));  // table, 40x40x2 cm
  lib.push_back(belief_from_shape(solid_box(8, 8, 8)));    // 4 cm cube
  lib.push_back(belief_from_shape(solid_box(6, 6, 16)));   // 3x3x8 cm tall box
  lib.push_back(belief_from_shape(cylinder_shape()));
  lib.push_back(belief_from_shape(l_shape()));
  lib.push_back(belief_from_shape(blob_shape()));
  return lib;
}

SceneContext make_desk_context() {
  SceneContext ctx;
  ctx.shapes = desk_object_library();
  ctx.camera.width = 64;
  ctx.camera.height = 64;
  ctx.camera.fx = 80.0;
  ctx.camera.fy = 80.0;
  ctx.camera.cx = 32.0;
  ctx.camera.cy = 32.0;
  ctx.far_plane = 500.0;

  // Camera above the near table edge, looking at the tabletop center.
  const Vec3 eye(0.0, -30.0, 25.0);
  const Vec3 target(0.0, 0.0, 0.0);
  const Vec3 z = (target - eye).normalized();
  const Vec3 x(1.0, 0.0, 0.0);
  const Vec3 y = z.cross(x).normalized();
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  ctx.camera_pose.translation = eye;
  ctx.camera_pose.rotation = canonical_quat(Quat(r));
  ctx.rebuild_planes();
  return ctx;
}

SceneSpec generate_scene(SceneCategory category, const std::vector<int>& types,
                         const SceneContext& ctx, Rng& rng) {
  if (types.empty() || types[0] != kTableType) {
    throw OutOfSupport("generate_scene: types must start with the table type");
  }
  const int n = static_cast<int>(types.size());
  const int want = category == SceneCategory::Single || category == SceneCategory::PartialView
                       ? 2
                       : 3;
  if (n != want) {
    throw OutOfSupport("generate_scene: category needs " + std::to_string(want) + " objects");
  }
  const auto shapes = mode_samples(ctx);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + unif(rng) * (hi - lo); };

  SceneSpec spec;
  spec.category = category;
  spec.types = types;

  for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
    SceneGraph g;
    g.types = types;
    g.parent.assign(n, kRoot);
    g.params.resize(n);
    // Table grid spans [0,40]x[0,40]x[0,2]; top surface at z = 0.
    g.params[0] = FloatingParam{Pose{Vec3(-20.0, -20.0, -2.0), Quat::Identity()}};

    bool ok = true;
    switch (category) {
      case SceneCategory::Single: {
        g.parent[1] = 0;
        g.params[1] = table_contact(uni(-8.0, 8.0), uni(-8.0, 8.0), uni(0.0, 2.0 * M_PI));
        ok = visible_pixels(g, 1, shapes, ctx) >= kMinVisiblePixels;
        break;
      }
      case SceneCategory::Stacked: {
        g.parent[1] = 0;
        g.params[1] = table_contact(uni(-6.0, 6.0), uni(-6.0, 6.0), uni(0.0, 2.0 * M_PI));
        g.parent[2] = 1;
        g.params[2] = table_contact(uni(-0.4, 0.4), uni(-0.4, 0.4), uni(0.0, 2.0 * M_PI));
        ok = visible_pixels(g, 2, shapes, ctx) >= kMinVisiblePixels &&
             visible_pixels(g, 1, shapes, ctx) >= kMinVisiblePixels;
        break;
      }
      case SceneCategory::PartialView: {
        // Push the object toward the table edge until its render leaves frame.
        const double mag = uni(10.0, 15.0);
        const bool along_a = unif(rng) < 0.5;
        const double sign = unif(rng) < 0.5 ? -1.0 : 1.0;
        const double a = along_a ? sign * mag : uni(-6.0, 6.0);
        const double b = along_a ? uni(-6.0, 6.0) : sign * mag;
        g.parent[1] = 0;
        g.params[1] = table_contact(a, b, uni(0.0, 2.0 * M_PI));
        const auto poses = world_poses(g, context_planes(ctx));
        const DepthImage alone = render_object(shapes[types[1]], poses[1], ctx);
        ok = touches_border(alone) && visible_pixels(g, 1, shapes, ctx) >= kMinVisiblePixels;
        break;
      }
      case SceneCategory::PartiallyOccluded: {
        // Object 1 is the far target, object 2 the near occluder (camera is on
        // the -y side).
        const double at = uni(-4.0, 4.0), bt = uni(2.0, 8.0);
        g.parent[1] = 0;
        g.params[1] = table_contact(at, bt, uni(0.0, 2.0 * M_PI));
        g.parent[2] = 0;
        g.params[2] =
            table_contact(at + uni(-1.0, 1.0), bt - uni(4.0, 8.0), uni(0.0, 2.0 * M_PI));
        SceneGraph no_occluder;
        no_occluder.types = {types[0], types[1]};
        no_occluder.parent = {kRoot, 0};
        no_occluder.params = {g.params[0], g.params[1]};
        const int unoccluded = visible_pixels(no_occluder, 1, shapes, ctx);
        const int visible = visible_pixels(g, 1, shapes, ctx);
        ok = unoccluded >= kMinVisiblePixels && visible > 0 &&
             static_cast<double>(visible) <= 0.7 * static_cast<double>(unoccluded) &&
             visible_pixels(g, 2, shapes, ctx) >= kMinVisiblePixels;
        break;
      }
    }
    if (!ok) continue;
    spec.truth = g;
    spec.observation = render_depth(g, shapes, ctx);
    return spec;
  }
  throw PlacementFailure("generate_scene: no valid placement for category " +
                         category_to_string(category));
}

double add_s(const Pose& est, const Pose& truth, const PointCloud& model_points) {
  if (model_points.empty()) throw EmptyModel("add_s: empty model cloud");
  std::vector<Vec3> est_placed;
  est_placed.reserve(model_points.size());
  for (const auto& p : model_points.points) est_placed.push_back(est.apply(p));
  const KdTree3 tree(est_placed);
  double total = 0.0;
  for (const auto& p : model_points.points) {
    double d = 0.0;
    tree.nearest(truth.apply(p), &d);
    total += d;
  }
  return total / static_cast<double>(model_points.size());
}

EvalReport evaluate_suite(const std::vector<std::pair<SceneGraph, SceneSpec>>& results,
                          const std::vector<double>& thresholds, const std::string& method,
                          const SceneContext& ctx) {
  EvalReport report;
  report.thresholds = thresholds;
  const auto planes = context_planes(ctx);
  std::vector<PointCloud> models(ctx.shapes.size());
  for (std::size_t t = 0; t < ctx.shapes.size(); ++t) {
    models[t] = surface_cloud(mode_shape(ctx.shapes[t]), Pose{});
  }

  for (std::size_t s = 0; s < results.size(); ++s) {
    const auto& [est, spec] = results[s];
    const auto est_poses = world_poses(est, planes);
    const auto truth_poses = world_poses(spec.truth, planes);
    for (int i = 0; i < spec.truth.n_objects(); ++i) {
      const int type = spec.truth.types[i];
      if (type == kTableType) continue;
      EvalRecord rec;
      rec.scene_id = static_cast<int>(s);
      rec.category = spec.category;
      rec.object_type = type;
      rec.method = method;
      rec.add_s_cm = add_s(est_poses[i], truth_poses[i], models[type]);
      report.records.push_back(rec);
    }
  }

  std::vector<double> errs;
  std::map<int, std::vector<double>> by_type;
  std::map<SceneCategory, std::vector<double>> by_cat;
  for (const auto& rec : report.records) {
    errs.push_back(rec.add_s_cm);
    by_type[rec.object_type].push_back(rec.add_s_cm);
    by_cat[rec.category].push_back(rec.add_s_cm);
  }
  auto accuracy_at = [&](double thr) {
    if (errs.empty()) return 0.0;
    const auto hits = std::count_if(errs.begin(), errs.end(), [&](double e) { return e < thr; });
    return static_cast<double>(hits) / static_cast<double>(errs.size());
  };
  for (double thr : thresholds) report.accuracy.push_back(accuracy_at(thr));
  for (double thr = 0.1; thr <= 3.0 + 1e-9; thr += 0.1) {
    report.accuracy_curve.emplace_back(thr, accuracy_at(thr));
  }
  if (!errs.empty()) {
    report.quartiles = quartiles_of(errs);
    for (auto& [t, v] : by_type) report.quartiles_by_type[t] = quartiles_of(v);
    for (auto& [c, v] : by_cat) report.quartiles_by_category[c] = quartiles_of(v);
  }
  return report;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "scene_id,category,object_type,method,add_s_cm\n";
  char row[160];
  for (const auto& rec : report.records) {
    std::snprintf(row, sizeof(row), "%d,%s,%d,%s,%.6f\n", rec.scene_id,
                  category_to_string(rec.category).c_str(), rec.object_type,
                  rec.method.c_str(), rec.add_s_cm);
    out += row;
  }
  return out;
}

void write_scene_dir(const std::string& dir, const SceneSpec& spec) {
  std::filesystem::create_directories(dir);
  write_dpt(dir + "/observed.dpt", spec.observation);
  std::ofstream truth(dir + "/truth.json");
  truth << scene_graph_to_json(spec.truth) << "\n";
  nlohmann::json meta;
  meta["category"] = category_to_string(spec.category);
  meta["seed"] = spec.seed;
  meta["types"] = spec.types;
  std::ofstream out(dir + "/meta.json");
  out << meta.dump(2) << "\n";
}

SceneSpec read_scene_dir(const std::string& dir) {
  SceneSpec spec;
  spec.observation = read_dpt(dir + "/observed.dpt");
  std::ifstream truth(dir + "/truth.json");
  if (!truth) throw std::runtime_error("read_scene_dir: missing " + dir + "/truth.json");
  std::string text((std::istreambuf_iterator<char>(truth)), std::istreambuf_iterator<char>());
  spec.truth = scene_graph_from_json(text);
  std::ifstream meta_in(dir + "/meta.json");
  if (!meta_in) throw std::runtime_error("read_scene_dir: missing " + dir + "/meta.json");
  nlohmann::json meta;
  meta_in >> meta;
  spec.category = category_from_string(meta.at("category"));
  spec.seed = meta.at("seed");
  spec.types = meta.at("types").get<std::vector<int>>();
  return spec;
}

}  // namespace threedp

#pragma once

#include <map>
#include <string>

#include "threedp/inference.hpp"

namespace threedp {

enum class SceneCategory { Single, Stacked, PartialView, PartiallyOccluded };

std::string category_to_string(SceneCategory c);
SceneCategory category_from_string(const std::string& s);

/// One synthetic evaluation scene: ground truth plus its exact depth render.
struct SceneSpec {
  SceneCategory category = SceneCategory::Single;
  std::vector<int> types;  // object type ids; the table is type 0, object 0
  std::uint64_t seed = 0;
  SceneGraph truth;
  DepthImage observation;
};

inline constexpr int kTableType = 0;

/// Procedural desk-scale object set: type 0 is the table slab, the rest are
/// tabletop objects (box, tall box, cylinder, L-shape, round blob).
std::vector<ShapeBelief> desk_object_library();

/// Scene context for the desk setup: library shapes, tilted camera above the
/// table edge, world bounds, cached contact planes.
SceneContext make_desk_context();

/// Build a ground-truth scene of the given category and render it. types must
/// start with the table. Throws PlacementFailure when the category's geometric
/// condition cannot be met after bounded retries.
SceneSpec generate_scene(SceneCategory category, const std::vector<int>& types,
                         const SceneContext& ctx, Rng& rng);

/// Average distance from each truth-placed model point to the nearest
/// est-placed model point (symmetry-tolerant pose error), in cm.
double add_s(const Pose& est, const Pose& truth, const PointCloud& model_points);

struct EvalRecord {
  int scene_id = 0;
  SceneCategory category = SceneCategory::Single;
  int object_type = 0;
  std::string method;
  double add_s_cm = 0.0;
};

struct EvalReport {
  std::vector<EvalRecord> records;
  std::vector<double> thresholds;
  std::vector<double> accuracy;                       // per threshold, over all records
  std::array<double, 3> quartiles{0.0, 0.0, 0.0};     // overall Q1/Q2/Q3
  std::map<int, std::array<double, 3>> quartiles_by_type;
  std::map<SceneCategory, std::array<double, 3>> quartiles_by_category;
  std::vector<std::pair<double, double>> accuracy_curve;  // threshold vs accuracy
};

/// Score estimated graphs against their scenes: per-object ADD-S of world
/// poses (the table excluded), accuracies at the thresholds, quartiles.
EvalReport evaluate_suite(const std::vector<std::pair<SceneGraph, SceneSpec>>& results,
                          const std::vector<double>& thresholds, const std::string& method,
                          const SceneContext& ctx);

/// CSV rows: scene_id,category,object_type,method,add_s_cm.
std::string report_csv(const EvalReport& report);

/// Scene directory I/O used by the CLI: observed.dpt, truth.json, meta.json.
void write_scene_dir(const std::string& dir, const SceneSpec& spec);
SceneSpec read_scene_dir(const std::string& dir);

}  // namespace threedp

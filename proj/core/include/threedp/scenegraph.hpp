#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "threedp/shapes.hpp"

namespace threedp {

inline constexpr int kRoot = -1;

struct FloatingParam {
  Pose pose;
};

struct ContactParam {
  int parent_face = 5;  // f'
  int child_face = 4;   // f
  HopfContactCoords coords;
};

using NodeParam = std::variant<FloatingParam, ContactParam>;

/// Rooted directed tree over N objects. parent[i] == kRoot for floating
/// objects; params[i] holds FloatingParam iff parent[i] == kRoot.
struct SceneGraph {
  std::vector<int> types;    // object type ids, each at most once
  std::vector<int> parent;   // kRoot or object index
  std::vector<NodeParam> params;

  int n_objects() const { return static_cast<int>(types.size()); }
  bool floating(int v) const { return parent[v] == kRoot; }
};

struct CameraIntrinsics {
  double fx = 64.0, fy = 64.0, cx = 32.0, cy = 32.0;
  int width = 64, height = 64;
};

struct Cuboid {
  Vec3 min{-50.0, -50.0, -50.0};
  Vec3 max{50.0, 50.0, 50.0};

  double volume() const { return (max - min).prod(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

struct SceneContext {
  std::vector<ShapeBelief> shapes;  // per object type
  Cuboid bounds;
  CameraIntrinsics camera;
  Pose camera_pose;  // camera-to-world extrinsic
  double far_plane = 500.0;
  bool uniform_structure_prior = true;  // false: delta on G0

  // Cached per-type contact planes; call rebuild_planes() after editing shapes.
  std::vector<std::vector<ContactPlane>> planes;
  void rebuild_planes();
};

/// Contact prior hyperparameters (fixed across the project).
inline constexpr double kContactOffsetHalfRange = 50.0;  // a,b ~ Uniform([-50,50]^2)
inline constexpr double kContactZStd = 1.0;              // z ~ N(0, 1cm)
inline constexpr double kContactEtaKappa = 250.0;        // vMF concentration on S^2

/// World poses of all objects by tree traversal; planes indexed by type.
std::vector<Pose> world_poses(const SceneGraph& g,
                              const std::vector<std::vector<ContactPlane>>& planes_by_type);

/// Per-type contact planes: bounding cuboid of each type's mode shape.
std::vector<std::vector<ContactPlane>> context_planes(const SceneContext& ctx);

/// Object indices in v's subtree, including v.
std::vector<int> subtree(const std::vector<int>& parent, int v);

/// Sever v from its parent and graft it under u (kRoot or an object index).
/// Returns v's previous parent. Throws InvalidGraft if u is v or a descendant.
int sever_graft(std::vector<int>& parent, int v, int u);

/// All (v, u) pairs with v an object and u in {root} + objects outside v's subtree.
std::vector<std::pair<int, int>> candidate_pairs(const std::vector<int>& parent);

/// (N+1)^(N-1) rooted trees on N objects.
std::uint64_t count_structures(int n);

/// Log density of the structure + parameter prior w.r.t. the base measures
/// with total masses SO(3) -> pi^2, S^2 -> 4*pi, S^1 -> 2*pi. Returns -inf
/// out of support. The type term p(c) and the shape prior are handled elsewhere.
double prior_logpdf(const SceneGraph& g, const SceneContext& ctx);

/// Log density of a single node's parameter under its prior form.
double param_logpdf(const NodeParam& param, const SceneContext& ctx);

SceneGraph sample_prior(const SceneContext& ctx, int n, const std::vector<int>& types, Rng& rng);

Pose sample_floating_prior(const SceneContext& ctx, Rng& rng);
ContactParam sample_contact_prior(Rng& rng);

/// Uniform rotation via normalized 4-Gaussian quaternion.
Quat sample_uniform_rotation(Rng& rng);

/// vMF sample on S^2 with mean direction (0,0,1), by inversion of the marginal
/// along the mean axis.
Vec3 sample_vmf_north(double kappa, Rng& rng);

/// log of the vMF density on S^2 w.r.t. the uniform measure of total mass 4*pi.
double vmf_north_logpdf(const Vec3& x, double kappa);

/// JSON serialization of the scene-graph schema.
std::string scene_graph_to_json(const SceneGraph& g);
SceneGraph scene_graph_from_json(const std::string& json_text);

}  // namespace threedp

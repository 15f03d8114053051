#pragma once

#include <string>

#include "threedp/renderer.hpp"

namespace threedp {

enum class VoxelStatus : std::uint8_t { Unobserved, Free, Occupied };

/// Per-voxel occupancy posterior from carving depth views against one
/// hypothesized grid placement and camera trajectory.
struct VoxelPosterior {
  GridDims dims;
  double resolution = 0.5;
  double p_occ = 0.5;
  std::vector<double> probs;         // 0 free, 1 occupied, p_occ unobserved
  std::vector<VoxelStatus> status;
};

/// Weighted pose hypotheses for a capture session: each particle carries a
/// placement of the object grid and the camera trajectory.
struct PoseBeliefParticles {
  GridDims dims;
  double resolution = 0.5;

  struct Particle {
    Pose grid_pose;                  // object grid to world
    std::vector<Pose> camera_poses;  // camera to world, one per view
    double weight = 1.0;
  };
  std::vector<Particle> particles;
};

/// Ray-march every pixel of every view through the object grid: cells strictly
/// in front of the observed depth become free, the cell containing the
/// backprojected hit becomes occupied, cells behind stay unobserved. A cell
/// marked both ways is resolved free (carving wins), or throws
/// InconsistentObservation when strict.
VoxelPosterior voxel_posterior(const GridDims& dims, double resolution, const Pose& grid_pose,
                               const std::vector<Pose>& camera_poses,
                               const std::vector<DepthImage>& images, const SceneContext& ctx,
                               double p_occ = 0.5, bool strict = false);

/// Exact KL minimizer over independent-Bernoulli fields: the per-voxel
/// weighted average of the particle posteriors.
ShapeBelief collapse_mixture(const std::vector<VoxelPosterior>& posteriors,
                             const std::vector<double>& weights);

struct LearnedShape {
  ShapeBelief belief;
  std::vector<ContactPlane> planes;  // bounding cuboid of the mode shape
};

LearnedShape learn_shape(const std::vector<DepthImage>& images,
                         const PoseBeliefParticles& belief, const SceneContext& ctx,
                         double p_occ = 0.5);

struct PoseNoiseCfg {
  double trans_std = 0.0;   // cm
  double rot_kappa = 1e12;  // vMF concentration; huge = exact
};

/// Synthetic stand-in for a SLAM pose posterior: particle 1 is the truth, the
/// rest perturb every camera pose; uniform weights.
PoseBeliefParticles synth_pose_belief(const std::vector<Pose>& true_camera_poses,
                                      const Pose& grid_pose, GridDims dims, double resolution,
                                      int k, const PoseNoiseCfg& noise, Rng& rng);

/// JSON pose list {"poses":[{"t":[x,y,z],"q":[w,x,y,z]}, ...]}.
std::vector<Pose> read_pose_list(const std::string& path);
void write_pose_list(const std::string& path, const std::vector<Pose>& poses);

}  // namespace threedp

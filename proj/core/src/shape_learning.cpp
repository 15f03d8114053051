#include "threedp/shape_learning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "threedp/errors.hpp"

namespace threedp {

namespace {

// Comfortably above float32 depth quantization at desk-scale distances.
constexpr double kDepthTol = 1e-4;

/// Walk one ray through the grid, marking free cells in front of the observed
/// depth. The ray parameter equals camera-frame z (direction z-scaled to 1).
template <typename MarkFree>
void carve_ray(const GridDims& dims, double s, const Vec3& origin, const Vec3& dir,
               double depth, MarkFree&& mark_free) {
  const Vec3 grid_max(dims.h * s, dims.w * s, dims.l * s);
  double t0 = 0.0, t1 = depth - kDepthTol;
  for (int d = 0; d < 3; ++d) {
    if (std::abs(dir[d]) < 1e-300) {
      if (origin[d] < 0.0 || origin[d] > grid_max[d]) return;
      continue;
    }
    double ta = (0.0 - origin[d]) / dir[d];
    double tb = (grid_max[d] - origin[d]) / dir[d];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 >= t1) return;

  const Vec3 entry = origin + t0 * dir;
  int cell[3];
  for (int d = 0; d < 3; ++d) {
    const int dim = d == 0 ? dims.h : (d == 1 ? dims.w : dims.l);
    cell[d] = std::clamp(static_cast<int>(std::floor(entry[d] / s)), 0, dim - 1);
  }
  int step[3];
  double t_max[3], t_delta[3];
  for (int d = 0; d < 3; ++d) {
    if (dir[d] > 0.0) {
      step[d] = 1;
      t_max[d] = ((cell[d] + 1) * s - origin[d]) / dir[d];
      t_delta[d] = s / dir[d];
    } else if (dir[d] < 0.0) {
      step[d] = -1;
      t_max[d] = (cell[d] * s - origin[d]) / dir[d];
      t_delta[d] = -s / dir[d];
    } else {
      step[d] = 0;
      t_max[d] = std::numeric_limits<double>::infinity();
      t_delta[d] = std::numeric_limits<double>::infinity();
    }
  }

  double t_enter = t0;
  while (t_enter < t1) {
    const int axis = (t_max[0] < t_max[1]) ? (t_max[0] < t_max[2] ? 0 : 2)
                                           : (t_max[1] < t_max[2] ? 1 : 2);
    // The cell is free only if the ray is observed to pass fully through it.
    if (t_max[axis] < depth - kDepthTol) mark_free(cell[0], cell[1], cell[2]);
    t_enter = t_max[axis];
    cell[axis] += step[axis];
    const int dim = axis == 0 ? dims.h : (axis == 1 ? dims.w : dims.l);
    if (cell[axis] < 0 || cell[axis] >= dim) break;
    t_max[axis] += t_delta[axis];
  }
}

}  // namespace

VoxelPosterior voxel_posterior(const GridDims& dims, double resolution, const Pose& grid_pose,
                               const std::vector<Pose>& camera_poses,
                               const std::vector<DepthImage>& images, const SceneContext& ctx,
                               double p_occ, bool strict) {
  if (camera_poses.size() != images.size()) {
    throw DimMismatch("voxel_posterior: pose/image count mismatch");
  }
  VoxelPosterior post;
  post.dims = dims;
  post.resolution = resolution;
  post.p_occ = p_occ;
  post.status.assign(dims.cell_count(), VoxelStatus::Unobserved);
  std::vector<char> free_mark(dims.cell_count(), 0), occ_mark(dims.cell_count(), 0);

  const Pose grid_from_world = invert(grid_pose);
  const auto& K = ctx.camera;
  for (std::size_t t = 0; t < images.size(); ++t) {
    const DepthImage& img = images[t];
    const Pose& cam = camera_poses[t];
    const Vec3 origin = grid_from_world.apply(cam.translation);
    const Eigen::Matrix3d rot = (grid_from_world.rotation * cam.rotation).toRotationMatrix();
    for (int v = 0; v < img.height; ++v) {
      for (int u = 0; u < img.width; ++u) {
        const double depth = img.at(u, v);
        const Vec3 dir_cam((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
        carve_ray(dims, resolution, origin, rot * dir_cam, depth,
                  [&](int i, int j, int k) { free_mark[dims.index(i, j, k)] = 1; });
        if (depth < img.far_plane - kDepthTol) {
          const Vec3 p_cam((u - K.cx) * depth / K.fx, (v - K.cy) * depth / K.fy, depth);
          // Nudge off the cell face the hit lies on, into the struck cell.
          const Vec3 p_grid = grid_from_world.apply(cam.apply(p_cam)) +
                              1e-3 * resolution * (rot * dir_cam).normalized();
          const int i = static_cast<int>(std::floor(p_grid.x() / resolution));
          const int j = static_cast<int>(std::floor(p_grid.y() / resolution));
          const int k = static_cast<int>(std::floor(p_grid.z() / resolution));
          if (dims.contains(i, j, k)) occ_mark[dims.index(i, j, k)] = 1;
        }
      }
    }
  }

  post.probs.assign(dims.cell_count(), p_occ);
  for (std::size_t c = 0; c < dims.cell_count(); ++c) {
    if (free_mark[c] && occ_mark[c]) {
      if (strict) throw InconsistentObservation("voxel_posterior: cell both free and occupied");
      occ_mark[c] = 0;  // carving wins under pose noise
    }
    if (free_mark[c]) {
      post.status[c] = VoxelStatus::Free;
      post.probs[c] = 0.0;
    } else if (occ_mark[c]) {
      post.status[c] = VoxelStatus::Occupied;
      post.probs[c] = 1.0;
    }
  }
  return post;
}

ShapeBelief collapse_mixture(const std::vector<VoxelPosterior>& posteriors,
                             const std::vector<double>& weights) {
  if (posteriors.empty() || posteriors.size() != weights.size()) {
    throw WeightMismatch("collapse_mixture: posterior/weight count mismatch");
  }
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw WeightMismatch("collapse_mixture: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw WeightMismatch("collapse_mixture: weights must sum to 1");

  ShapeBelief out;
  out.dims = posteriors[0].dims;
  out.resolution = posteriors[0].resolution;
  out.probs.assign(out.dims.cell_count(), 0.0);
  for (std::size_t k = 0; k < posteriors.size(); ++k) {
    if (!(posteriors[k].dims == out.dims)) throw DimMismatch("collapse_mixture: grid dims differ");
    for (std::size_t c = 0; c < out.probs.size(); ++c) {
      out.probs[c] += weights[k] * posteriors[k].probs[c];
    }
  }
  return out;
}

LearnedShape learn_shape(const std::vector<DepthImage>& images,
                         const PoseBeliefParticles& belief, const SceneContext& ctx,
                         double p_occ) {
  if (belief.particles.empty()) throw WeightMismatch("learn_shape: no particles");
  std::vector<VoxelPosterior> posteriors;
  std::vector<double> weights;
  posteriors.reserve(belief.particles.size());
  for (const auto& part : belief.particles) {
    posteriors.push_back(voxel_posterior(belief.dims, belief.resolution, part.grid_pose,
                                         part.camera_poses, images, ctx, p_occ));
    weights.push_back(part.weight);
  }
  LearnedShape out;
  out.belief = collapse_mixture(posteriors, weights);
  out.planes = bounding_cuboid_planes(mode_shape(out.belief));
  return out;
}

PoseBeliefParticles synth_pose_belief(const std::vector<Pose>& true_camera_poses,
                                      const Pose& grid_pose, GridDims dims, double resolution,
                                      int k, const PoseNoiseCfg& noise, Rng& rng) {
  if (k < 1) throw WeightMismatch("synth_pose_belief: need at least one particle");
  PoseBeliefParticles out;
  out.dims = dims;
  out.resolution = resolution;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int p = 0; p < k; ++p) {
    PoseBeliefParticles::Particle part;
    part.grid_pose = grid_pose;
    part.weight = 1.0 / static_cast<double>(k);
    part.camera_poses = true_camera_poses;
    if (p > 0) {
      for (auto& pose : part.camera_poses) {
        pose.translation +=
            noise.trans_std * Vec3(gauss(rng), gauss(rng), gauss(rng));
        if (noise.rot_kappa < 1e11) {
          // Small rotation: axis-angle with vMF-like concentration.
          Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
          axis.normalize();
          const double angle = std::abs(gauss(rng)) / std::sqrt(noise.rot_kappa);
          pose.rotation = canonical_quat(
              pose.rotation * Quat(Eigen::AngleAxisd(angle, axis)));
        }
      }
    }
    out.particles.push_back(std::move(part));
  }
  return out;
}

std::vector<Pose> read_pose_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_pose_list: cannot open " + path);
  nlohmann::json j;
  in >> j;
  std::vector<Pose> out;
  for (const auto& p : j.at("poses")) {
    Pose pose;
    const auto& t = p.at("t");
    const auto& q = p.at("q");
    pose.translation = Vec3(t.at(0), t.at(1), t.at(2));
    pose.rotation = canonical_quat(Quat(q.at(0), q.at(1), q.at(2), q.at(3)));
    out.push_back(pose);
  }
  return out;
}

void write_pose_list(const std::string& path, const std::vector<Pose>& poses) {
  nlohmann::json j;
  j["poses"] = nlohmann::json::array();
  for (const auto& p : poses) {
    j["poses"].push_back(
        {{"t", {p.translation.x(), p.translation.y(), p.translation.z()}},
         {"q", {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()}}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_pose_list: cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace threedp

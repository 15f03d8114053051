#pragma once

#include <string>
#include <vector>

#include "threedp/scenegraph.hpp"

namespace threedp {

/// Depth image in cm; pixels with no hit carry the far-plane value.
struct DepthImage {
  int width = 0, height = 0;
  double far_plane = 500.0;
  std::vector<float> depths;  // row-major, height x width

  float at(int u, int v) const { return depths[static_cast<std::size_t>(v) * width + u]; }
  float& at(int u, int v) { return depths[static_cast<std::size_t>(v) * width + u]; }
};

DepthImage make_depth_image(const CameraIntrinsics& cam, double far_plane);

/// Depth of the first occupied voxel hit along a ray, in units of camera-frame
/// z (grid traversal in the object frame). Returns far_plane on miss.
double ray_depth(const VoxelShape& shape, const Vec3& origin_obj, const Vec3& dir_obj,
                 double far_plane);

/// Depth render of all objects in the scene via per-object grid traversal;
/// nearest hit wins per pixel.
DepthImage render_depth(const SceneGraph& scene, const std::vector<VoxelShape>& samples,
                        const SceneContext& ctx);

/// Render a single object at a given world pose (used by pose hypotheses).
DepthImage render_object(const VoxelShape& shape, const Pose& world_pose,
                         const SceneContext& ctx);

/// Pixel (u,v,d) -> camera-frame point ((u-cx)d/fx, (v-cy)d/fy, d), then the
/// camera extrinsic. Far-plane pixels are dropped.
PointCloud unproject(const DepthImage& img, const SceneContext& ctx);

/// DPT1 file format: ASCII header "DPT1 width height D\n" followed by
/// width*height little-endian 32-bit floats, row-major.
void write_dpt(const std::string& path, const DepthImage& img);
DepthImage read_dpt(const std::string& path);

}  // namespace threedp

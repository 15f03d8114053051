#include "threedp/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace threedp {

DepthImage make_depth_image(const CameraIntrinsics& cam, double far_plane) {
  DepthImage img;
  img.width = cam.width;
  img.height = cam.height;
  img.far_plane = far_plane;
  img.depths.assign(static_cast<std::size_t>(cam.width) * cam.height,
                    static_cast<float>(far_plane));
  return img;
}

double ray_depth(const VoxelShape& shape, const Vec3& origin, const Vec3& dir,
                 double far_plane) {
  const double s = shape.resolution;
  const Vec3 grid_max(shape.dims.h * s, shape.dims.w * s, shape.dims.l * s);

  // Slab intersection with the grid AABB [0, grid_max].
  double t0 = 0.0, t1 = far_plane;
  for (int d = 0; d < 3; ++d) {
    if (std::abs(dir[d]) < 1e-300) {
      if (origin[d] < 0.0 || origin[d] > grid_max[d]) return far_plane;
      continue;
    }
    double ta = (0.0 - origin[d]) / dir[d];
    double tb = (grid_max[d] - origin[d]) / dir[d];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 >= t1) return far_plane;

  // Amanatides-Woo traversal; t_enter of the first occupied cell is the depth.
  const Vec3 entry = origin + t0 * dir;
  int cell[3];
  for (int d = 0; d < 3; ++d) {
    cell[d] = static_cast<int>(std::floor(entry[d] / s));
    const int dim = d == 0 ? shape.dims.h : (d == 1 ? shape.dims.w : shape.dims.l);
    cell[d] = std::clamp(cell[d], 0, dim - 1);
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
    if (shape.occupied(cell[0], cell[1], cell[2])) {
      return std::min(std::max(t_enter, 0.0), far_plane);
    }
    const int axis = (t_max[0] < t_max[1]) ? (t_max[0] < t_max[2] ? 0 : 2)
                                           : (t_max[1] < t_max[2] ? 1 : 2);
    t_enter = t_max[axis];
    cell[axis] += step[axis];
    const int dim = axis == 0 ? shape.dims.h : (axis == 1 ? shape.dims.w : shape.dims.l);
    if (cell[axis] < 0 || cell[axis] >= dim) break;
    t_max[axis] += t_delta[axis];
  }
  return far_plane;
}

namespace {

void render_one(DepthImage& img, const VoxelShape& shape, const Pose& world_pose,
                const SceneContext& ctx) {
  const Pose obj_from_world = invert(world_pose);
  const Pose cam = ctx.camera_pose;
  const Vec3 origin_obj = obj_from_world.apply(cam.translation);
  const Eigen::Matrix3d rot = (obj_from_world.rotation * cam.rotation).toRotationMatrix();
  const auto& K = ctx.camera;
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      // Direction scaled so the ray parameter equals camera-frame z.
      const Vec3 dir_cam((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
      const Vec3 dir_obj = rot * dir_cam;
      const double d = ray_depth(shape, origin_obj, dir_obj, img.far_plane);
      if (d < img.at(u, v)) img.at(u, v) = static_cast<float>(d);
    }
  }
}

}  // namespace

DepthImage render_depth(const SceneGraph& scene, const std::vector<VoxelShape>& samples,
                        const SceneContext& ctx) {
  DepthImage img = make_depth_image(ctx.camera, ctx.far_plane);
  // Contact planes come from the per-type mode shapes, not the samples, so
  // graph traversal gives the same world poses for every shape sample.
  const auto poses = world_poses(scene, context_planes(ctx));
  for (int i = 0; i < scene.n_objects(); ++i) {
    const auto& shape = samples[scene.types[i]];
    if (shape.occupied_count() == 0) continue;  // non-renderable sample
    render_one(img, shape, poses[i], ctx);
  }
  return img;
}

DepthImage render_object(const VoxelShape& shape, const Pose& world_pose,
                         const SceneContext& ctx) {
  DepthImage img = make_depth_image(ctx.camera, ctx.far_plane);
  if (shape.occupied_count() > 0) render_one(img, shape, world_pose, ctx);
  return img;
}

PointCloud unproject(const DepthImage& img, const SceneContext& ctx) {
  PointCloud cloud;
  const auto& K = ctx.camera;
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      const double d = img.at(u, v);
      if (d >= img.far_plane) continue;
      const Vec3 p_cam((u - K.cx) * d / K.fx, (v - K.cy) * d / K.fy, d);
      cloud.points.push_back(ctx.camera_pose.apply(p_cam));
    }
  }
  return cloud;
}

void write_dpt(const std::string& path, const DepthImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_dpt: cannot open " + path);
  char header[96];
  std::snprintf(header, sizeof(header), "DPT1 %d %d %.17g\n", img.width, img.height,
                img.far_plane);
  out << header;
  out.write(reinterpret_cast<const char*>(img.depths.data()),
            static_cast<std::streamsize>(img.depths.size() * sizeof(float)));
}

DepthImage read_dpt(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_dpt: cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::istringstream hdr(line);
  std::string magic;
  DepthImage img;
  hdr >> magic >> img.width >> img.height >> img.far_plane;
  if (magic != "DPT1" || !hdr || img.width <= 0 || img.height <= 0) {
    throw std::runtime_error("read_dpt: bad header in " + path);
  }
  img.depths.resize(static_cast<std::size_t>(img.width) * img.height);
  in.read(reinterpret_cast<char*>(img.depths.data()),
          static_cast<std::streamsize>(img.depths.size() * sizeof(float)));
  if (!in) throw std::runtime_error("read_dpt: truncated file " + path);
  return img;
}

}  // namespace threedp

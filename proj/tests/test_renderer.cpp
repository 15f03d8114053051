#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "threedp/renderer.hpp"

using namespace threedp;

namespace {

VoxelShape solid_cube() {
  VoxelShape cube = make_shape(GridDims{4, 4, 4}, 0.5);  // 2 cm cube
  std::fill(cube.occupancy.begin(), cube.occupancy.end(), 1);
  return cube;
}

SceneContext cube_context() {
  SceneContext ctx;
  ctx.shapes = {belief_from_shape(solid_cube())};
  ctx.rebuild_planes();
  return ctx;  // default camera: identity extrinsic looking along +z
}

SceneGraph floating_cube(const Vec3& t, const Quat& q = Quat::Identity()) {
  SceneGraph g;
  g.types = {0};
  g.parent = {kRoot};
  Pose p;
  p.translation = t;
  p.rotation = q;
  g.params = {FloatingParam{p}};
  return g;
}

/// Slab-method ray/axis-aligned-box intersection; returns entry in camera-z
/// units, or far on miss. Oracle for the grid traversal.
double box_entry_depth(const Vec3& lo, const Vec3& hi, const Vec3& dir, double far) {
  double t0 = 0.0, t1 = far;
  for (int d = 0; d < 3; ++d) {
    if (std::abs(dir[d]) < 1e-300) {
      if (lo[d] > 0.0 || hi[d] < 0.0) return far;
      continue;
    }
    double a = lo[d] / dir[d], b = hi[d] / dir[d];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  return (t0 <= t1) ? t0 : far;
}

}  // namespace

TEST_CASE("empty scene renders the far plane everywhere") {
  SceneContext ctx = cube_context();
  SceneGraph g;  // no objects
  const DepthImage img = render_depth(g, {solid_cube()}, ctx);
  CHECK(img.width == ctx.camera.width);
  CHECK(img.height == ctx.camera.height);
  for (float d : img.depths) CHECK(d == doctest::Approx(ctx.far_plane));
}

TEST_CASE("render matches analytic ray-box intersection") {
  SceneContext ctx = cube_context();
  // Irrational-ish offsets so no ray grazes a box edge exactly.
  const Vec3 t(-1.03, -0.97, 5.13);
  const SceneGraph g = floating_cube(t);
  const DepthImage img = render_depth(g, {solid_cube()}, ctx);

  const Vec3 lo = t, hi = t + Vec3(2.0, 2.0, 2.0);
  int hits = 0;
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      const Vec3 dir((u - ctx.camera.cx) / ctx.camera.fx, (v - ctx.camera.cy) / ctx.camera.fy,
                     1.0);
      // Camera sits at the origin, so box coordinates are already ray-relative.
      const double want = box_entry_depth(lo, hi, dir, ctx.far_plane);
      const double got = img.at(u, v);
      CHECK(std::abs(got - want) < 1e-4);
      if (want < ctx.far_plane) ++hits;
    }
  }
  CHECK(hits > 50);  // the cube is visible
}

TEST_CASE("nearest object wins per pixel") {
  SceneContext ctx = cube_context();
  ctx.shapes.push_back(ctx.shapes[0]);
  ctx.rebuild_planes();
  SceneGraph g;
  g.types = {0, 1};
  g.parent = {kRoot, kRoot};
  Pose near, far_pose;
  near.translation = Vec3(-1.0, -1.0, 5.0);
  far_pose.translation = Vec3(-1.0, -1.0, 10.0);
  g.params = {FloatingParam{near}, FloatingParam{far_pose}};
  const DepthImage img = render_depth(g, {solid_cube(), solid_cube()}, ctx);
  CHECK(img.at(32, 32) == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("unproject pinned values and far-plane dropping") {
  SceneContext ctx = cube_context();
  DepthImage img = make_depth_image(ctx.camera, ctx.far_plane);
  img.at(40, 20) = 10.0f;
  const PointCloud pc = unproject(img, ctx);
  REQUIRE(pc.size() == 1);
  CHECK((pc.points[0] - Vec3(1.25, -1.875, 10.0)).norm() < 1e-6);

  // A non-identity extrinsic moves the point accordingly.
  SceneContext moved = ctx;
  moved.camera_pose.translation = Vec3(0.0, 0.0, -3.0);
  const PointCloud pc2 = unproject(img, moved);
  CHECK((pc2.points[0] - Vec3(1.25, -1.875, 7.0)).norm() < 1e-6);
}

TEST_CASE("render/unproject round trip lands on the object surface") {
  SceneContext ctx = cube_context();
  const Vec3 t(-1.2, -0.8, 6.4);
  const SceneGraph g = floating_cube(t);
  const DepthImage img = render_depth(g, {solid_cube()}, ctx);
  const PointCloud pc = unproject(img, ctx);
  REQUIRE(pc.size() > 50);
  const Vec3 lo = t, hi = t + Vec3(2.0, 2.0, 2.0);
  for (const Vec3& p : pc.points) {
    // Distance from the point to the box boundary.
    Vec3 clamped = p.cwiseMax(lo).cwiseMin(hi);
    double outside = (p - clamped).norm();
    double inside = std::min({p.x() - lo.x(), hi.x() - p.x(), p.y() - lo.y(), hi.y() - p.y(),
                              p.z() - lo.z(), hi.z() - p.z()});
    const double dist = outside > 0 ? outside : std::max(0.0, inside);
    CHECK(dist < 0.5);
  }
}

TEST_CASE("rendering is deterministic") {
  SceneContext ctx = cube_context();
  const SceneGraph g = floating_cube(Vec3(-0.7, -1.1, 7.3),
                                     canonical_quat(Quat(Eigen::AngleAxisd(0.4, Vec3(1, 2, 3).normalized()))));
  const DepthImage a = render_depth(g, {solid_cube()}, ctx);
  const DepthImage b = render_depth(g, {solid_cube()}, ctx);
  REQUIRE(a.depths.size() == b.depths.size());
  CHECK(std::memcmp(a.depths.data(), b.depths.data(), a.depths.size() * sizeof(float)) == 0);
}

TEST_CASE("depth decreases as the object approaches the camera") {
  SceneContext ctx = cube_context();
  double prev = ctx.far_plane;
  for (double z = 20.0; z >= 4.0; z -= 2.0) {
    const DepthImage img = render_depth(floating_cube(Vec3(-1, -1, z)), {solid_cube()}, ctx);
    CHECK(img.at(32, 32) < prev);
    prev = img.at(32, 32);
  }
}

TEST_CASE("render_object agrees with a single-object scene render") {
  SceneContext ctx = cube_context();
  Pose p;
  p.translation = Vec3(-1.4, -0.6, 8.2);
  p.rotation = canonical_quat(Quat(Eigen::AngleAxisd(0.9, Vec3(0, 1, 1).normalized())));
  const DepthImage a = render_object(solid_cube(), p, ctx);
  const DepthImage b = render_depth(floating_cube(p.translation, p.rotation), {solid_cube()}, ctx);
  CHECK(std::memcmp(a.depths.data(), b.depths.data(), a.depths.size() * sizeof(float)) == 0);
}

TEST_CASE("DPT1 round trip") {
  SceneContext ctx = cube_context();
  const DepthImage img = render_depth(floating_cube(Vec3(-1, -1, 6)), {solid_cube()}, ctx);
  const std::string path =
      (std::filesystem::temp_directory_path() / "threedp_test_depth.dpt").string();
  write_dpt(path, img);
  const DepthImage back = read_dpt(path);
  std::filesystem::remove(path);
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  CHECK(back.far_plane == doctest::Approx(img.far_plane));
  REQUIRE(back.depths.size() == img.depths.size());
  CHECK(std::memcmp(back.depths.data(), img.depths.data(), img.depths.size() * sizeof(float)) == 0);
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "threedp/geometry.hpp"
#include "threedp/shapes.hpp"

using namespace threedp;

namespace {

Quat random_rotation(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Quat q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return canonical_quat(q);
}

Pose random_pose(Rng& rng) {
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  Pose p;
  p.translation = Vec3(u(rng), u(rng), u(rng));
  p.rotation = random_rotation(rng);
  return p;
}

Eigen::Matrix4d to_matrix(const Pose& p) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = p.rotation.toRotationMatrix();
  m.topRightCorner<3, 1>() = p.translation;
  return m;
}

double pose_error(const Pose& a, const Pose& b) {
  const double t = (a.translation - b.translation).norm();
  const double r = (a.rotation.toRotationMatrix() - b.rotation.toRotationMatrix()).norm();
  return t + r;
}

double angle_mod_2pi(double a, double b) {
  const double d = std::remainder(a - b, 2.0 * M_PI);
  return std::abs(d);
}

}  // namespace

TEST_CASE("compose identity and inverse") {
  Rng rng(7);
  const Pose p = random_pose(rng);
  CHECK(pose_error(compose(Pose{}, p), p) < 1e-12);
  CHECK(pose_error(compose(p, Pose{}), p) < 1e-12);
  CHECK(pose_error(compose(p, invert(p)), Pose{}) < 1e-9);
  CHECK(pose_error(compose(invert(p), p), Pose{}) < 1e-9);
}

TEST_CASE("compose acts like rigid motion on a point") {
  Pose trans;
  trans.translation = Vec3(1.0, 0.0, 0.0);
  Pose rot_z;
  rot_z.rotation = Quat(Eigen::AngleAxisd(M_PI_2, Vec3::UnitZ()));
  const Pose combined = compose(trans, rot_z);
  const Vec3 out = combined.apply(Vec3(1.0, 0.0, 0.0));
  CHECK((out - Vec3(1.0, 1.0, 0.0)).norm() < 1e-12);
}

TEST_CASE("compose is associative, matrix oracle") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    const Pose left = compose(compose(a, b), c);
    const Pose right = compose(a, compose(b, c));
    CHECK(pose_error(left, right) < 1e-9);
    const Eigen::Matrix4d m = to_matrix(a) * to_matrix(b) * to_matrix(c);
    CHECK((to_matrix(left) - m).norm() < 1e-9);
  }
}

TEST_CASE("hopf decomposition of simple rotations") {
  Vec3 eta;
  double phi;

  hopf_from_rotation(Quat::Identity(), eta, phi);
  CHECK((eta - Vec3(0, 0, 1)).norm() < 1e-12);
  CHECK(std::abs(phi) < 1e-12);

  for (double psi : {0.3, 1.2, 2.9, 4.5, 6.1}) {
    const Quat q(std::cos(psi / 2.0), 0.0, 0.0, std::sin(psi / 2.0));
    hopf_from_rotation(q, eta, phi);
    CHECK((eta - Vec3(0, 0, 1)).norm() < 1e-12);
    CHECK(angle_mod_2pi(phi, psi) < 1e-9);
  }

  // 90 degrees about x carries the north pole to (0,-1,0).
  const Quat qx(std::sqrt(0.5), std::sqrt(0.5), 0.0, 0.0);
  hopf_from_rotation(qx, eta, phi);
  const Vec3 oracle = qx.toRotationMatrix() * Vec3(0, 0, 1);
  CHECK((eta - oracle).norm() < 1e-12);
  CHECK((eta - Vec3(0, -1, 0)).norm() < 1e-9);
  CHECK(std::abs(phi) < 1e-9);
}

TEST_CASE("hopf is invariant under quaternion sign") {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    std::normal_distribution<double> g(0.0, 1.0);
    Quat q(g(rng), g(rng), g(rng), g(rng));
    q.normalize();
    const Quat neg(-q.w(), -q.x(), -q.y(), -q.z());
    Vec3 e1, e2;
    double p1, p2;
    try {
      hopf_from_rotation(q, e1, p1);
    } catch (const SingularOrientation&) {
      continue;
    }
    hopf_from_rotation(neg, e2, p2);
    CHECK(e1 == e2);
    CHECK(p1 == p2);
  }
}

TEST_CASE("rotation_from_hopf pinned values") {
  CHECK(pose_error(Pose{Vec3::Zero(), rotation_from_hopf(Vec3(0, 0, 1), 0.0)}, Pose{}) < 1e-12);
  const Quat q = rotation_from_hopf(Vec3(0, 0, 1), M_PI_2);
  CHECK(std::abs(q.w() - std::cos(M_PI / 4.0)) < 1e-12);
  CHECK(std::abs(q.x()) < 1e-12);
  CHECK(std::abs(q.y()) < 1e-12);
  CHECK(std::abs(q.z() - std::sin(M_PI / 4.0)) < 1e-12);
}

TEST_CASE("hopf round-trips on Haar-random rotations") {
  Rng rng(17);
  double max_err = 0.0;
  int tested = 0;
  while (tested < 10000) {
    const Quat q = random_rotation(rng);
    Vec3 eta;
    double phi;
    try {
      hopf_from_rotation(q, eta, phi);
    } catch (const SingularOrientation&) {
      continue;
    }
    ++tested;
    const Quat back = rotation_from_hopf(eta, phi);
    max_err = std::max(max_err,
                       (back.coeffs() - canonical_quat(q).coeffs()).norm());
    // The reconstructed rotation must carry the north pole to eta.
    CHECK((back.toRotationMatrix() * Vec3(0, 0, 1) - eta).norm() < 1e-9);
  }
  CHECK(max_err < 1e-9);
}

TEST_CASE("singular orientation is rejected") {
  const Quat flip_y(0.0, 0.0, 1.0, 0.0);  // carries north pole to south pole
  Vec3 eta;
  double phi;
  CHECK_THROWS_AS(hopf_from_rotation(flip_y, eta, phi), SingularOrientation);
  CHECK_THROWS_AS(rotation_from_hopf(Vec3(0, 0, -1), 0.0), SingularOrientation);
}

TEST_CASE("xi pinned values and round trips") {
  const HopfContactCoords id = xi(Pose{});
  CHECK(std::abs(id.a) < 1e-12);
  CHECK(std::abs(id.b) < 1e-12);
  CHECK(std::abs(id.z) < 1e-12);
  CHECK((id.eta - Vec3(0, 0, 1)).norm() < 1e-12);
  CHECK(std::abs(id.phi) < 1e-12);

  Pose shift;
  shift.translation = Vec3(1.0, 2.0, 3.0);
  const HopfContactCoords t = xi(shift);
  CHECK(std::abs(t.a - 1.0) < 1e-12);
  CHECK(std::abs(t.b - 2.0) < 1e-12);
  CHECK(std::abs(t.z - 3.0) < 1e-12);
  CHECK((t.eta - Vec3(0, 0, 1)).norm() < 1e-12);

  HopfContactCoords half_turn;
  half_turn.phi = M_PI;
  const Pose p = xi_inv(half_turn);
  const Quat expect(Eigen::AngleAxisd(M_PI, Vec3::UnitZ()));
  CHECK((p.rotation.toRotationMatrix() - expect.toRotationMatrix()).norm() < 1e-12);

  Rng rng(19);
  std::uniform_real_distribution<double> u(-5.0, 5.0), up(0.0, 2.0 * M_PI);
  double max_err = 0.0;
  int tested = 0;
  while (tested < 10000) {
    Pose rel = random_pose(rng);
    HopfContactCoords c;
    try {
      c = xi(rel);
    } catch (const SingularOrientation&) {
      continue;
    }
    ++tested;
    max_err = std::max(max_err, pose_error(xi_inv(c), rel));

    HopfContactCoords c2;
    c2.a = u(rng);
    c2.b = u(rng);
    c2.z = u(rng);
    std::normal_distribution<double> g(0.0, 1.0);
    Vec3 dir(g(rng), g(rng), g(rng));
    dir.normalize();
    if (dir.z() < -1.0 + 1e-3) continue;
    c2.eta = dir;
    c2.phi = up(rng);
    const HopfContactCoords back = xi(xi_inv(c2));
    max_err = std::max(max_err, std::abs(back.a - c2.a) + std::abs(back.b - c2.b) +
                                    std::abs(back.z - c2.z) + (back.eta - c2.eta).norm() +
                                    angle_mod_2pi(back.phi, c2.phi));
  }
  CHECK(max_err < 1e-9);
}

namespace {

std::vector<ContactPlane> unit_cube_planes() {
  VoxelShape cube = make_shape(GridDims{2, 2, 2}, 0.5);  // 1 cm cube
  std::fill(cube.occupancy.begin(), cube.occupancy.end(), 1);
  return bounding_cuboid_planes(cube);
}

}  // namespace

TEST_CASE("contact_relative_pose flush stacking of unit cubes") {
  const auto planes = unit_cube_planes();
  HopfContactCoords flush;  // all-zero offsets, flush orientation

  const Pose rel = contact_relative_pose(5, 4, flush, planes, planes);
  // Child's bottom-face center lands on the parent's top-face center.
  const Vec3 child_bottom_center(0.5, 0.5, 0.0);
  CHECK((rel.apply(child_bottom_center) - Vec3(0.5, 0.5, 1.0)).norm() < 1e-9);
  // Child's top face ends up 1 cm higher: cubes stack.
  CHECK((rel.apply(Vec3(0.5, 0.5, 1.0)) - Vec3(0.5, 0.5, 2.0)).norm() < 1e-9);

  HopfContactCoords off = flush;
  off.a = 0.5;  // in-plane shift along the parent face's x axis (world x for +z)
  const Pose rel_a = contact_relative_pose(5, 4, off, planes, planes);
  CHECK((rel_a.apply(child_bottom_center) - Vec3(1.0, 0.5, 1.0)).norm() < 1e-9);

  HopfContactCoords gap = flush;
  gap.z = 1.0;  // 1 cm gap along the parent face normal
  const Pose rel_z = contact_relative_pose(5, 4, gap, planes, planes);
  CHECK((rel_z.apply(child_bottom_center) - Vec3(0.5, 0.5, 2.0)).norm() < 1e-9);

  CHECK_THROWS_AS(contact_relative_pose(6, 4, flush, planes, planes), InvalidFace);
  CHECK_THROWS_AS(contact_relative_pose(5, -1, flush, planes, planes), InvalidFace);
}

TEST_CASE("relative_face_pose inverts the contact construction") {
  const auto planes = unit_cube_planes();
  Rng rng(23);
  std::uniform_real_distribution<double> u(-3.0, 3.0), up(0.0, 2.0 * M_PI);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> face(0, 5);

  // Coincident anti-parallel faces map to identity coordinates.
  {
    const Pose parent_world = random_pose(rng);
    const Pose rel = contact_relative_pose(5, 4, HopfContactCoords{}, planes, planes);
    const Pose child_world = compose(parent_world, rel);
    const Pose pf = compose(parent_world, planes[5].pose_in_object);
    const Pose cf = compose(child_world, planes[4].pose_in_object);
    const HopfContactCoords c = xi(relative_face_pose(pf, cf));
    CHECK(std::abs(c.a) < 1e-9);
    CHECK(std::abs(c.b) < 1e-9);
    CHECK(std::abs(c.z) < 1e-9);
    CHECK((c.eta - Vec3(0, 0, 1)).norm() < 1e-9);
  }

  // A 2 cm gap along the parent normal reads back as z = 2.
  {
    HopfContactCoords gap;
    gap.z = 2.0;
    const Pose rel = contact_relative_pose(5, 4, gap, planes, planes);
    const Pose pf = planes[5].pose_in_object;
    const Pose cf = compose(rel, planes[4].pose_in_object);
    const HopfContactCoords c = xi(relative_face_pose(pf, cf));
    CHECK(std::abs(c.z - 2.0) < 1e-9);
  }

  // Random coordinates and faces round-trip through world-frame face poses.
  int tested = 0;
  while (tested < 500) {
    HopfContactCoords c;
    c.a = u(rng);
    c.b = u(rng);
    c.z = u(rng);
    Vec3 dir(g(rng), g(rng), g(rng));
    dir.normalize();
    if (dir.z() < -0.99) continue;
    c.eta = dir;
    c.phi = up(rng);
    const int fp = face(rng), f = face(rng);
    ++tested;

    const Pose parent_world = random_pose(rng);
    const Pose rel = contact_relative_pose(fp, f, c, planes, planes);
    const Pose child_world = compose(parent_world, rel);
    const Pose pf = compose(parent_world, planes[fp].pose_in_object);
    const Pose cf = compose(child_world, planes[f].pose_in_object);
    const HopfContactCoords back = xi(relative_face_pose(pf, cf));
    CHECK(std::abs(back.a - c.a) < 1e-8);
    CHECK(std::abs(back.b - c.b) < 1e-8);
    CHECK(std::abs(back.z - c.z) < 1e-8);
    CHECK((back.eta - c.eta).norm() < 1e-8);
    CHECK(angle_mod_2pi(back.phi, c.phi) < 1e-8);
  }
}

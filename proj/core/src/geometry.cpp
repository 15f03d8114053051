#include "threedp/geometry.hpp"

#include <cmath>

namespace threedp {

Quat canonical_quat(const Quat& q) {
  Quat r = q.normalized();
  const double c[4] = {r.w(), r.x(), r.y(), r.z()};
  for (double v : c) {
    if (v > 0.0) return r;
    if (v < 0.0) return Quat(-r.w(), -r.x(), -r.y(), -r.z());
  }
  return r;
}

Pose compose(const Pose& p1, const Pose& p2) {
  Pose out;
  out.translation = p1.translation + p1.rotation * p2.translation;
  out.rotation = (p1.rotation * p2.rotation).normalized();
  return out;
}

Pose invert(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.conjugate();
  out.translation = -(out.rotation * p.translation);
  return out;
}

const std::array<Eigen::Matrix3d, kNumFaces>& face_frames() {
  static const std::array<Eigen::Matrix3d, kNumFaces> frames = [] {
    std::array<Eigen::Matrix3d, kNumFaces> f;
    auto make = [](const Vec3& x, const Vec3& n) {
      Eigen::Matrix3d m;
      m.col(0) = x;
      m.col(1) = n.cross(x);
      m.col(2) = n;
      return m;
    };
    f[0] = make(Vec3::UnitY(), -Vec3::UnitX());  // -x
    f[1] = make(Vec3::UnitZ(), Vec3::UnitX());   // +x
    f[2] = make(Vec3::UnitZ(), -Vec3::UnitY());  // -y
    f[3] = make(Vec3::UnitX(), Vec3::UnitY());   // +y
    f[4] = make(Vec3::UnitY(), -Vec3::UnitZ());  // -z
    f[5] = make(Vec3::UnitX(), Vec3::UnitZ());   // +z
    return f;
  }();
  return frames;
}

void hopf_from_rotation(const Quat& qin, Vec3& eta, double& phi) {
  // Canonicalize the sign first so both quaternion signs take the identical
  // floating-point path (phi is invariant under (w,z) -> (-w,-z) only up to
  // rounding otherwise).
  const Quat q = canonical_quat(qin);
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  eta = Vec3(2.0 * (x * z + w * y), 2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + y * y));
  if (eta.z() <= -1.0 + kPoleTol) {
    throw SingularOrientation("hopf_from_rotation: eta at the south pole");
  }
  // phi = 2 * arctan(z/w), arctan branch chosen in [0, pi).
  double half = std::atan2(z, w);
  if (half < 0.0) half += M_PI;
  if (half >= M_PI) half -= M_PI;
  phi = 2.0 * half;
}

Quat rotation_from_hopf(const Vec3& eta, double phi) {
  const double a = eta.x(), b = eta.y(), c = eta.z();
  if (c <= -1.0 + kPoleTol) {
    throw SingularOrientation("rotation_from_hopf: eta at the south pole");
  }
  const double s = 1.0 / std::sqrt(2.0 * (1.0 + c));
  const double ch = std::cos(phi / 2.0), sh = std::sin(phi / 2.0);
  Quat q(s * (1.0 + c) * ch,         // w
         s * (a * sh - b * ch),      // x
         s * (a * ch + b * sh),      // y
         s * (1.0 + c) * sh);        // z
  return canonical_quat(q);
}

HopfContactCoords xi(const Pose& rel) {
  HopfContactCoords out;
  out.a = rel.translation.x();
  out.b = rel.translation.y();
  out.z = rel.translation.z();
  hopf_from_rotation(rel.rotation, out.eta, out.phi);
  return out;
}

Pose xi_inv(const HopfContactCoords& c) {
  Pose out;
  out.translation = Vec3(c.a, c.b, c.z);
  out.rotation = rotation_from_hopf(c.eta, c.phi);
  return out;
}

namespace {
// 180 degree rotation about the face x axis: maps a same-orientation face
// frame to the flush anti-parallel configuration.
const Quat& flip_quat() {
  static const Quat f(0.0, 1.0, 0.0, 0.0);
  return f;
}
}  // namespace

Pose relative_face_pose(const Pose& world_parent_face, const Pose& world_child_face) {
  Pose rel = compose(invert(world_parent_face), world_child_face);
  rel.rotation = (rel.rotation * flip_quat()).normalized();
  return rel;
}

Pose contact_relative_pose(int parent_face, int child_face, const HopfContactCoords& coords,
                           const std::vector<ContactPlane>& parent_planes,
                           const std::vector<ContactPlane>& child_planes) {
  if (parent_face < 0 || parent_face >= static_cast<int>(parent_planes.size())) {
    throw InvalidFace("contact_relative_pose: bad parent face id");
  }
  if (child_face < 0 || child_face >= static_cast<int>(child_planes.size())) {
    throw InvalidFace("contact_relative_pose: bad child face id");
  }
  Pose face_to_face = xi_inv(coords);
  face_to_face.rotation = (face_to_face.rotation * flip_quat()).normalized();
  const Pose& pf = parent_planes[parent_face].pose_in_object;
  const Pose& cf = child_planes[child_face].pose_in_object;
  return compose(compose(pf, face_to_face), invert(cf));
}

}  // namespace threedp

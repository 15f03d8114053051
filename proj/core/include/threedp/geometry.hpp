#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <vector>

#include "threedp/errors.hpp"

namespace threedp {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Tolerance around the singular orientation eta = (0,0,-1). Proposals
/// landing inside this neighborhood are rejected by the samplers.
inline constexpr double kPoleTol = 1e-6;

/// Canonical quaternion sign: w >= 0, tie-break x >= 0, then y >= 0, then z > 0.
Quat canonical_quat(const Quat& q);

/// Rigid SE(3) element. Translation in cm, rotation as a unit quaternion.
struct Pose {
  Vec3 translation{Vec3::Zero()};
  Quat rotation{Quat::Identity()};

  static Pose identity() { return Pose{}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

Pose compose(const Pose& p1, const Pose& p2);
Pose invert(const Pose& p);

/// Contact parametrization of a face-to-face relative pose.
/// (a, b): in-plane offset (cm); z: perpendicular offset (cm);
/// eta: image of the north pole on S^2; phi: residual in-plane angle in [0, 2pi).
struct HopfContactCoords {
  double a = 0.0;
  double b = 0.0;
  double z = 0.0;
  Vec3 eta{0.0, 0.0, 1.0};
  double phi = 0.0;
};

/// One face of a bounding cuboid: origin at the face center, +z axis along the
/// outward normal, x/y along the cuboid edges in a fixed right-handed order.
struct ContactPlane {
  int face_id = 0;  // in [0, 6): -x, +x, -y, +y, -z, +z
  Pose pose_in_object;
};

inline constexpr int kNumFaces = 6;

/// Fixed face frames for an axis-aligned cuboid, indexed -x,+x,-y,+y,-z,+z.
/// Columns are (x axis, y axis, outward normal).
const std::array<Eigen::Matrix3d, kNumFaces>& face_frames();

/// Decompose a rotation into Hopf coordinates: where it carries (0,0,1), plus
/// the residual in-plane angle. Throws SingularOrientation near eta=(0,0,-1).
void hopf_from_rotation(const Quat& q, Vec3& eta, double& phi);

/// Inverse of hopf_from_rotation on its domain (eta.z > -1 + tol).
Quat rotation_from_hopf(const Vec3& eta, double phi);

/// Contact coordinates of a face-to-face relative pose (flip already removed).
HopfContactCoords xi(const Pose& rel);

/// Inverse of xi.
Pose xi_inv(const HopfContactCoords& c);

/// Relative pose of a child face w.r.t. a parent face, with the flush-contact
/// flip removed so that coincident anti-parallel faces map to identity
/// coordinates under xi.
Pose relative_face_pose(const Pose& world_parent_face, const Pose& world_child_face);

/// Relative pose of a contact child w.r.t. its parent:
/// (pose of parent face f') * (face-to-face pose with flip) * (pose of child face f)^-1.
Pose contact_relative_pose(int parent_face, int child_face, const HopfContactCoords& coords,
                           const std::vector<ContactPlane>& parent_planes,
                           const std::vector<ContactPlane>& child_planes);

}  // namespace threedp

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "threedp/geometry.hpp"

namespace threedp {

using Rng = std::mt19937_64;

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct GridDims {
  int h = 0, w = 0, l = 0;

  std::size_t cell_count() const {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(l);
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * w + j) * l + k;
  }
  bool contains(int i, int j, int k) const {
    return i >= 0 && i < h && j >= 0 && j < w && k >= 0 && k < l;
  }
  bool operator==(const GridDims&) const = default;
};

/// Binary occupancy grid spanning [0, h*s] x [0, w*s] x [0, l*s] in the
/// object frame, row-major (i, j, l).
struct VoxelShape {
  GridDims dims;
  double resolution = 0.5;  // cm per cell
  std::vector<std::uint8_t> occupancy;

  bool occupied(int i, int j, int k) const { return occupancy[dims.index(i, j, k)] != 0; }
  std::size_t occupied_count() const;
  Vec3 cell_center(int i, int j, int k) const {
    return Vec3((i + 0.5) * resolution, (j + 0.5) * resolution, (k + 0.5) * resolution);
  }
};

/// Independent-Bernoulli occupancy field over the same grid layout.
struct ShapeBelief {
  GridDims dims;
  double resolution = 0.5;
  std::vector<double> probs;

  bool deterministic() const;
};

VoxelShape make_shape(GridDims dims, double resolution);
ShapeBelief belief_from_shape(const VoxelShape& shape);

VoxelShape sample_shape(const ShapeBelief& belief, Rng& rng);

/// Threshold the belief at 0.5.
VoxelShape mode_shape(const ShapeBelief& belief);

/// Six contact planes on the tight axis-aligned bounding box of occupied cells.
std::vector<ContactPlane> bounding_cuboid_planes(const VoxelShape& shape);

double shape_iou(const VoxelShape& a, const VoxelShape& b);

/// Centers of occupied cells with at least one free or out-of-grid 6-neighbor,
/// transformed by pose.
PointCloud surface_cloud(const VoxelShape& shape, const Pose& pose);

/// VOX1 file format: ASCII header "VOX1 h w l s\n" followed by h*w*l
/// little-endian 32-bit floats.
void write_vox(const std::string& path, const ShapeBelief& belief);
ShapeBelief read_vox(const std::string& path);

}  // namespace threedp

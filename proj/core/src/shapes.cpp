#include "threedp/shapes.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace threedp {

std::size_t VoxelShape::occupied_count() const {
  return static_cast<std::size_t>(std::count_if(occupancy.begin(), occupancy.end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

bool ShapeBelief::deterministic() const {
  return std::all_of(probs.begin(), probs.end(), [](double p) { return p == 0.0 || p == 1.0; });
}

VoxelShape make_shape(GridDims dims, double resolution) {
  VoxelShape s;
  s.dims = dims;
  s.resolution = resolution;
  s.occupancy.assign(dims.cell_count(), 0);
  return s;
}

ShapeBelief belief_from_shape(const VoxelShape& shape) {
  ShapeBelief b;
  b.dims = shape.dims;
  b.resolution = shape.resolution;
  b.probs.resize(shape.occupancy.size());
  std::transform(shape.occupancy.begin(), shape.occupancy.end(), b.probs.begin(),
                 [](std::uint8_t v) { return v ? 1.0 : 0.0; });
  return b;
}

VoxelShape sample_shape(const ShapeBelief& belief, Rng& rng) {
  VoxelShape s = make_shape(belief.dims, belief.resolution);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < belief.probs.size(); ++i) {
    const double p = belief.probs[i];
    if (p >= 1.0) {
      s.occupancy[i] = 1;
    } else if (p <= 0.0) {
      s.occupancy[i] = 0;
    } else {
      s.occupancy[i] = unif(rng) < p ? 1 : 0;
    }
  }
  return s;
}

VoxelShape mode_shape(const ShapeBelief& belief) {
  VoxelShape s = make_shape(belief.dims, belief.resolution);
  for (std::size_t i = 0; i < belief.probs.size(); ++i) {
    s.occupancy[i] = belief.probs[i] > 0.5 ? 1 : 0;
  }
  return s;
}

std::vector<ContactPlane> bounding_cuboid_planes(const VoxelShape& shape) {
  int lo[3] = {shape.dims.h, shape.dims.w, shape.dims.l};
  int hi[3] = {-1, -1, -1};
  for (int i = 0; i < shape.dims.h; ++i) {
    for (int j = 0; j < shape.dims.w; ++j) {
      for (int k = 0; k < shape.dims.l; ++k) {
        if (!shape.occupied(i, j, k)) continue;
        const int idx[3] = {i, j, k};
        for (int d = 0; d < 3; ++d) {
          lo[d] = std::min(lo[d], idx[d]);
          hi[d] = std::max(hi[d], idx[d]);
        }
      }
    }
  }
  if (hi[0] < 0) throw EmptyShape("bounding_cuboid_planes: no occupied cells");

  const double s = shape.resolution;
  const Vec3 min_c(lo[0] * s, lo[1] * s, lo[2] * s);
  const Vec3 max_c((hi[0] + 1) * s, (hi[1] + 1) * s, (hi[2] + 1) * s);
  const Vec3 center = 0.5 * (min_c + max_c);

  std::vector<ContactPlane> planes(kNumFaces);
  for (int f = 0; f < kNumFaces; ++f) {
    ContactPlane p;
    p.face_id = f;
    const int axis = f / 2;
    const bool positive = (f % 2) == 1;
    Vec3 origin = center;
    origin[axis] = positive ? max_c[axis] : min_c[axis];
    p.pose_in_object.translation = origin;
    p.pose_in_object.rotation = canonical_quat(Quat(face_frames()[f]));
    planes[f] = p;
  }
  return planes;
}

double shape_iou(const VoxelShape& a, const VoxelShape& b) {
  if (a.dims != b.dims || a.resolution != b.resolution) {
    throw DimMismatch("shape_iou: mismatched grids");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.occupancy.size(); ++i) {
    const bool oa = a.occupancy[i] != 0, ob = b.occupancy[i] != 0;
    inter += (oa && ob);
    uni += (oa || ob);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

PointCloud surface_cloud(const VoxelShape& shape, const Pose& pose) {
  if (shape.occupied_count() == 0) throw EmptyShape("surface_cloud: empty shape");
  PointCloud cloud;
  static constexpr int kNbr[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                     {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  for (int i = 0; i < shape.dims.h; ++i) {
    for (int j = 0; j < shape.dims.w; ++j) {
      for (int k = 0; k < shape.dims.l; ++k) {
        if (!shape.occupied(i, j, k)) continue;
        bool surface = false;
        for (const auto& n : kNbr) {
          const int ni = i + n[0], nj = j + n[1], nk = k + n[2];
          if (!shape.dims.contains(ni, nj, nk) || !shape.occupied(ni, nj, nk)) {
            surface = true;
            break;
          }
        }
        if (surface) cloud.points.push_back(pose.apply(shape.cell_center(i, j, k)));
      }
    }
  }
  return cloud;
}

void write_vox(const std::string& path, const ShapeBelief& belief) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_vox: cannot open " + path);
  char header[128];
  std::snprintf(header, sizeof(header), "VOX1 %d %d %d %.17g\n", belief.dims.h, belief.dims.w,
                belief.dims.l, belief.resolution);
  out << header;
  std::vector<float> data(belief.probs.begin(), belief.probs.end());
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
}

ShapeBelief read_vox(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_vox: cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::istringstream hdr(line);
  std::string magic;
  ShapeBelief b;
  hdr >> magic >> b.dims.h >> b.dims.w >> b.dims.l >> b.resolution;
  if (magic != "VOX1" || !hdr || b.dims.cell_count() == 0) {
    throw std::runtime_error("read_vox: bad header in " + path);
  }
  std::vector<float> data(b.dims.cell_count());
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!in) throw std::runtime_error("read_vox: truncated file " + path);
  b.probs.assign(data.begin(), data.end());
  return b;
}

}  // namespace threedp

#include "threedp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace threedp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double normal_logpdf(double x, double mu, double sigma) {
  const double d = (x - mu) / sigma;
  return -0.5 * d * d - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
}

bool accept_log_alpha(double log_alpha, Rng& rng) {
  if (log_alpha >= 0.0) return true;
  if (log_alpha == kNegInf) return false;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return std::log(unif(rng)) < log_alpha;
}

/// Ensure the retained pseudo-marginal estimate matches the current graph.
void ensure_pm_init(ChainState& state, const SceneContext& ctx, const SceneLikelihood* lik) {
  if (state.pm.initialized) return;
  if (lik) {
    std::vector<std::vector<VoxelShape>> samples;
    const double est = lik->estimate(state.graph, ctx, state.pm, state.rng, &samples);
    state.pm.retained_samples = std::move(samples);
    state.pm.retained_log_estimate = est;
  } else {
    state.pm.retained_log_estimate = 0.0;
  }
  state.pm.initialized = true;
}

/// Evaluate a proposal's likelihood estimate; constant-likelihood chains get 0.
double proposal_estimate(const SceneGraph& g, const SceneContext& ctx,
                         const SceneLikelihood* lik, ChainState& state,
                         std::vector<std::vector<VoxelShape>>* samples_out) {
  if (!lik) return 0.0;
  return lik->estimate(g, ctx, state.pm, state.rng, samples_out);
}

void commit(ChainState& state, double est, std::vector<std::vector<VoxelShape>>&& samples) {
  state.pm.retained_log_estimate = est;
  if (!samples.empty()) state.pm.retained_samples = std::move(samples);
}

}  // namespace

std::vector<std::vector<int>> dbscan(const PointCloud& points, double eps, int min_pts,
                                     std::vector<int>* noise) {
  const int n = static_cast<int>(points.size());
  const KdTree3 tree(points.points);
  std::vector<int> label(n, 0);  // 0 unvisited, -1 noise, >0 cluster id
  std::vector<std::vector<int>> clusters;

  auto neighbors = [&](int i) {
    std::vector<int> out;
    for (int j = 0; j < n; ++j) {
      if ((points.points[j] - points.points[i]).norm() <= eps) out.push_back(j);
    }
    return out;
  };
  // k-d tree accelerated count to skip the scan for obvious noise.
  auto neighbor_count = [&](int i) { return tree.radius_count(points.points[i], eps); };

  int next_cluster = 0;
  for (int i = 0; i < n; ++i) {
    if (label[i] != 0) continue;
    if (static_cast<int>(neighbor_count(i)) < min_pts) {
      label[i] = -1;
      continue;
    }
    ++next_cluster;
    std::vector<int> cluster;
    std::vector<int> frontier = {i};
    label[i] = next_cluster;
    while (!frontier.empty()) {
      const int cur = frontier.back();
      frontier.pop_back();
      cluster.push_back(cur);
      const auto nbrs = neighbors(cur);
      if (static_cast<int>(nbrs.size()) < min_pts) continue;  // border point
      for (int j : nbrs) {
        if (label[j] == 0 || label[j] == -1) {
          if (label[j] == 0) frontier.push_back(j);
          label[j] = next_cluster;
        }
      }
    }
    std::sort(cluster.begin(), cluster.end());
    clusters.push_back(std::move(cluster));
  }
  if (noise) {
    noise->clear();
    for (int i = 0; i < n; ++i) {
      if (label[i] == -1) noise->push_back(i);
    }
  }
  return clusters;
}

const std::array<Quat, 24>& nominal_orientations() {
  static const std::array<Quat, 24> quats = [] {
    std::array<Quat, 24> out;
    int idx = 0;
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& perm : perms) {
      for (int signs = 0; signs < 8; ++signs) {
        Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
        for (int c = 0; c < 3; ++c) {
          m(perm[c], c) = (signs >> c) & 1 ? -1.0 : 1.0;
        }
        if (m.determinant() > 0.5) {
          out[idx++] = canonical_quat(Quat(m));
        }
      }
    }
    return out;
  }();
  return quats;
}

PointCloud unexplained_points(const PointCloud& observed, const PointCloud& rendered,
                              double r_ball) {
  if (rendered.empty()) return observed;
  const KdTree3 tree(rendered.points);
  PointCloud out;
  for (const auto& p : observed.points) {
    double d = 0.0;
    tree.nearest(p, &d);
    if (d > r_ball) out.points.push_back(p);
  }
  return out;
}

Pose icp_refine(const VoxelShape& shape, const Pose& init, const PointCloud& target,
                const SceneContext& ctx, int iters) {
  if (target.empty()) throw DegenerateCorrespondences("icp_refine: empty target");
  const KdTree3 tree(target.points);
  Pose pose = init;
  double best_mean = std::numeric_limits<double>::infinity();
  Pose best_pose = init;

  for (int it = 0; it < iters; ++it) {
    const PointCloud model = unproject(render_object(shape, pose, ctx), ctx);
    if (model.size() < 3) throw DegenerateCorrespondences("icp_refine: too few model points");

    Eigen::Matrix3Xd src(3, model.size()), dst(3, model.size());
    double mean_dist = 0.0;
    for (std::size_t i = 0; i < model.size(); ++i) {
      double d = 0.0;
      const int j = tree.nearest(model.points[i], &d);
      src.col(static_cast<Eigen::Index>(i)) = model.points[i];
      dst.col(static_cast<Eigen::Index>(i)) = target.points[j];
      mean_dist += d;
    }
    mean_dist /= static_cast<double>(model.size());
    if (mean_dist < best_mean) {
      best_mean = mean_dist;
      best_pose = pose;
    } else if (mean_dist > best_mean + 1e-9) {
      break;  // objective stopped improving
    }

    const Vec3 src_mean = src.rowwise().mean();
    const Vec3 dst_mean = dst.rowwise().mean();
    src.colwise() -= src_mean;
    dst.colwise() -= dst_mean;
    const Eigen::Matrix3d cov = dst * src.transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues()(1) < 1e-12) {
      throw DegenerateCorrespondences("icp_refine: collinear correspondences");
    }
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
      Eigen::Matrix3d u = svd.matrixU();
      u.col(2) *= -1.0;
      r = u * svd.matrixV().transpose();
    }
    Pose delta;
    delta.rotation = canonical_quat(Quat(r));
    delta.translation = dst_mean - r * src_mean;
    pose = compose(delta, pose);
  }
  // Final evaluation of the last pose.
  const PointCloud model = unproject(render_object(shape, pose, ctx), ctx);
  if (!model.empty()) {
    double mean_dist = 0.0;
    for (const auto& p : model.points) {
      double d = 0.0;
      tree.nearest(p, &d);
      mean_dist += d;
    }
    mean_dist /= static_cast<double>(model.size());
    if (mean_dist < best_mean) best_pose = pose;
  }
  return best_pose;
}

std::vector<PoseHypothesis> pose_hypotheses(const PointCloud& unexplained,
                                            const VoxelShape& shape, const SceneContext& ctx,
                                            const CloudLikParams& lik_params,
                                            const KernelConfig& cfg) {
  std::vector<PoseHypothesis> out;
  if (unexplained.empty()) return out;
  const auto clusters = dbscan(unexplained, cfg.dbscan_eps, cfg.dbscan_min_pts);
  if (clusters.empty()) return out;

  // Offset from the grid origin to the occupied-region centroid, so a
  // hypothesis centers the shape on the cluster.
  Vec3 centroid = Vec3::Zero();
  std::size_t count = 0;
  for (int i = 0; i < shape.dims.h; ++i) {
    for (int j = 0; j < shape.dims.w; ++j) {
      for (int k = 0; k < shape.dims.l; ++k) {
        if (shape.occupied(i, j, k)) {
          centroid += shape.cell_center(i, j, k);
          ++count;
        }
      }
    }
  }
  if (count == 0) return out;
  centroid /= static_cast<double>(count);

  for (const auto& cluster : clusters) {
    Vec3 center = Vec3::Zero();
    for (int idx : cluster) center += unexplained.points[idx];
    center /= static_cast<double>(cluster.size());
    PointCloud cluster_cloud;
    cluster_cloud.points.reserve(cluster.size());
    for (int idx : cluster) cluster_cloud.points.push_back(unexplained.points[idx]);

    for (const auto& q : nominal_orientations()) {
      Pose init;
      init.rotation = q;
      init.translation = center - q * centroid;
      Pose refined = init;
      try {
        refined = icp_refine(shape, init, cluster_cloud, ctx, cfg.icp_iters);
      } catch (const DegenerateCorrespondences&) {
        continue;
      }
      const PointCloud rendered = unproject(render_object(shape, refined, ctx), ctx);
      const double score = cloud_loglik(unexplained, rendered, lik_params);
      out.push_back(PoseHypothesis{refined, score});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const PoseHypothesis& a, const PoseHypothesis& b) { return a.log_score > b.log_score; });
  return out;
}

Quat sample_vmf_quat(const Quat& center, double kappa, Rng& rng) {
  // Wood's algorithm on S^3 (p = 4).
  constexpr double p = 4.0;
  const double b = (-2.0 * kappa + std::sqrt(4.0 * kappa * kappa + (p - 1.0) * (p - 1.0))) /
                   (p - 1.0);
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + (p - 1.0) * std::log(1.0 - x0 * x0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::gamma_distribution<double> gamma_half(1.5, 1.0);

  double w = 0.0;
  while (true) {
    const double g1 = gamma_half(rng), g2 = gamma_half(rng);
    const double z = g1 / (g1 + g2);  // Beta(1.5, 1.5)
    const double u = unif(rng);
    w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    if (kappa * w + (p - 1.0) * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
  }

  // Uniform direction on the 2-sphere of the tangent space.
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Vector4d center_v(center.w(), center.x(), center.y(), center.z());
  Eigen::Vector4d tangent;
  do {
    Eigen::Vector4d raw(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    tangent = raw - center_v.dot(raw) * center_v;
  } while (tangent.norm() < 1e-12);
  tangent.normalize();

  Eigen::Vector4d sample = w * center_v + std::sqrt(std::max(0.0, 1.0 - w * w)) * tangent;
  // Antipodal symmetrization: ±q are the same rotation.
  if (unif(rng) < 0.5) sample = -sample;
  return canonical_quat(Quat(sample(0), sample(1), sample(2), sample(3)));
}

double vmf_quat_logpdf_unnorm(const Quat& q, const Quat& center, double kappa) {
  const double d = kappa * (q.w() * center.w() + q.x() * center.x() + q.y() * center.y() +
                            q.z() * center.z());
  // log(exp(d) + exp(-d)), stable.
  const double a = std::abs(d);
  return a + std::log1p(std::exp(-2.0 * a));
}

bool mh_pose_move(ChainState& state, int v, const SceneContext& ctx, const SceneLikelihood* lik,
                  const KernelConfig& cfg, PoseProposalMode mode,
                  const Pose* data_driven_center) {
  auto& counter = state.stats[mode == PoseProposalMode::RandomWalk ? "pose_walk" : "pose_dd"];
  ++counter.proposed;
  ensure_pm_init(state, ctx, lik);

  const auto& current = std::get<FloatingParam>(state.graph.params[v]);
  std::normal_distribution<double> gauss(0.0, 1.0);

  FloatingParam proposed;
  double log_q_ratio = 0.0;
  if (mode == PoseProposalMode::RandomWalk) {
    proposed.pose.translation =
        current.pose.translation +
        cfg.rw_trans_std * Vec3(gauss(state.rng), gauss(state.rng), gauss(state.rng));
    proposed.pose.rotation = sample_vmf_quat(current.pose.rotation, cfg.rw_rot_kappa, state.rng);
    // Symmetric proposal, q terms cancel.
  } else {
    const Pose& c = *data_driven_center;
    proposed.pose.translation =
        c.translation + cfg.dd_pos_std * Vec3(gauss(state.rng), gauss(state.rng), gauss(state.rng));
    proposed.pose.rotation = sample_vmf_quat(c.rotation, cfg.dd_rot_kappa, state.rng);
    auto logq = [&](const Pose& p) {
      double lq = 0.0;
      for (int d = 0; d < 3; ++d) {
        lq += normal_logpdf(p.translation[d], c.translation[d], cfg.dd_pos_std);
      }
      lq += vmf_quat_logpdf_unnorm(p.rotation, c.rotation, cfg.dd_rot_kappa);
      return lq;
    };
    log_q_ratio = logq(current.pose) - logq(proposed.pose);
  }

  const double lp_cur = param_logpdf(state.graph.params[v], ctx);
  const double lp_new = param_logpdf(NodeParam{proposed}, ctx);
  if (lp_new == kNegInf) return false;

  SceneGraph candidate = state.graph;
  candidate.params[v] = proposed;
  std::vector<std::vector<VoxelShape>> samples;
  const double est = proposal_estimate(candidate, ctx, lik, state, &samples);

  const double log_alpha =
      (lp_new - lp_cur) + (est - state.pm.retained_log_estimate) + log_q_ratio;
  if (!accept_log_alpha(log_alpha, state.rng)) return false;

  state.graph = std::move(candidate);
  commit(state, est, std::move(samples));
  ++counter.accepted;
  return true;
}

bool mh_contact_move(ChainState& state, int v, const SceneContext& ctx,
                     const SceneLikelihood* lik, const KernelConfig& cfg) {
  auto& counter = state.stats["contact_walk"];
  ++counter.proposed;
  ensure_pm_init(state, ctx, lik);

  const auto& current = std::get<ContactParam>(state.graph.params[v]);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ContactParam proposed = current;
  proposed.coords.a += cfg.contact_ab_std * gauss(state.rng);
  proposed.coords.b += cfg.contact_ab_std * gauss(state.rng);
  proposed.coords.z += cfg.contact_z_std * gauss(state.rng);

  const double lp_cur = param_logpdf(state.graph.params[v], ctx);
  const double lp_new = param_logpdf(NodeParam{proposed}, ctx);
  if (lp_new == kNegInf) return false;

  SceneGraph candidate = state.graph;
  candidate.params[v] = proposed;
  std::vector<std::vector<VoxelShape>> samples;
  const double est = proposal_estimate(candidate, ctx, lik, state, &samples);

  const double log_alpha = (lp_new - lp_cur) + (est - state.pm.retained_log_estimate);
  if (!accept_log_alpha(log_alpha, state.rng)) return false;

  state.graph = std::move(candidate);
  commit(state, est, std::move(samples));
  ++counter.accepted;
  return true;
}

namespace {

int allowed_target_count(const std::vector<int>& parent, int v) {
  const int n = static_cast<int>(parent.size());
  const int sub = static_cast<int>(subtree(parent, v).size());
  return 1 + (n - sub);  // root plus objects outside v's subtree
}

}  // namespace

std::optional<StructureProposal> apply_involution(const SceneGraph& g, int v, int u, int f,
                                                  int fp, const SceneContext& ctx) {
  const auto planes = context_planes(ctx);
  const auto poses = world_poses(g, planes);
  const int old_parent = g.parent[v];

  StructureProposal out;
  out.v = v;
  out.forward_u = u;
  out.reverse_u = old_parent;
  out.graph = g;

  if (old_parent != kRoot) {
    const auto& cp = std::get<ContactParam>(g.params[v]);
    out.reverse_f = cp.child_face;
    out.reverse_fp = cp.parent_face;
  }

  if (u == kRoot && old_parent == kRoot) {
    out.kind = MoveKind::FloatToFloat;
    out.log_rn = 0.0;
    return out;  // no change
  }

  sever_graft(out.graph.parent, v, u);

  if (u == kRoot) {
    // contact -> floating: theta_v becomes the world pose of v.
    out.kind = MoveKind::ContactToFloat;
    out.graph.params[v] = FloatingParam{poses[v]};
    out.log_rn = -std::log(8.0);
    return out;
  }

  // floating -> contact or contact -> contact: theta_v from the face-relative pose.
  const Pose parent_face =
      compose(poses[u], planes[g.types[u]][fp].pose_in_object);
  const Pose child_face = compose(poses[v], planes[g.types[v]][f].pose_in_object);
  HopfContactCoords coords;
  try {
    coords = xi(relative_face_pose(parent_face, child_face));
  } catch (const SingularOrientation&) {
    return std::nullopt;
  }
  ContactParam cp;
  cp.parent_face = fp;
  cp.child_face = f;
  cp.coords = coords;
  out.graph.params[v] = cp;
  if (old_parent == kRoot) {
    out.kind = MoveKind::FloatToContact;
    out.log_rn = std::log(8.0);
  } else {
    out.kind = MoveKind::ContactToContact;
    out.log_rn = 0.0;
  }
  return out;
}

bool structure_move(ChainState& state, const SceneContext& ctx, const SceneLikelihood* lik,
                    const KernelConfig& cfg) {
  auto& counter = state.stats["structure"];
  ++counter.proposed;
  ensure_pm_init(state, ctx, lik);

  const int n = state.graph.n_objects();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int v = std::min(n - 1, static_cast<int>(unif(state.rng) * n));

  // Allowed graft targets: root plus objects outside v's subtree.
  std::vector<int> allowed = {kRoot};
  {
    std::vector<char> in_sub(n, 0);
    for (int w : subtree(state.graph.parent, v)) in_sub[w] = 1;
    for (int u = 0; u < n; ++u) {
      if (!in_sub[u]) allowed.push_back(u);
    }
  }
  const int pick = std::min(static_cast<int>(allowed.size()) - 1,
                            static_cast<int>(unif(state.rng) * allowed.size()));
  const int u = allowed[pick];

  int f = -1, fp = -1;
  if (u != kRoot) {
    f = std::min(kNumFaces - 1, static_cast<int>(unif(state.rng) * kNumFaces));
    fp = std::min(kNumFaces - 1, static_cast<int>(unif(state.rng) * kNumFaces));
  }

  auto proposal = apply_involution(state.graph, v, u, f, fp, ctx);
  if (!proposal) return false;  // singular orientation: reject

  if (proposal->kind == MoveKind::FloatToFloat) {
    ++counter.accepted;  // always accepts, state unchanged
    return true;
  }

  // Proposal probability ratio q(reverse) / q(forward). The 1/N factors for v
  // cancel; face factors appear only on contact-target sides.
  const double fwd_targets = allowed_target_count(state.graph.parent, v);
  const double rev_targets = allowed_target_count(proposal->graph.parent, v);
  double log_q = std::log(fwd_targets) - std::log(rev_targets);
  if (u != kRoot) log_q += 2.0 * std::log(static_cast<double>(kNumFaces));          // forward faces
  if (proposal->reverse_u != kRoot) log_q -= 2.0 * std::log(static_cast<double>(kNumFaces));

  const double lp_cur = prior_logpdf(state.graph, ctx);
  const double lp_new = prior_logpdf(proposal->graph, ctx);
  if (lp_new == kNegInf) return false;

  // Radon-Nikodym correction; the float-to-contact constant is configurable
  // for mutation testing, contact-to-float uses its reciprocal.
  double log_rn = 0.0;
  if (proposal->kind == MoveKind::FloatToContact) log_rn = std::log(cfg.rn_float_to_contact);
  if (proposal->kind == MoveKind::ContactToFloat) log_rn = -std::log(cfg.rn_float_to_contact);

  std::vector<std::vector<VoxelShape>> samples;
  const double est = proposal_estimate(proposal->graph, ctx, lik, state, &samples);

  const double log_alpha =
      (lp_new - lp_cur) + (est - state.pm.retained_log_estimate) + log_q + log_rn;
  if (!accept_log_alpha(log_alpha, state.rng)) return false;

  state.graph = std::move(proposal->graph);
  commit(state, est, std::move(samples));
  ++counter.accepted;
  return true;
}

namespace {

DepthImage render_subset(const std::vector<Pose>& poses, const std::vector<char>& placed,
                         const std::vector<int>& types, const std::vector<VoxelShape>& shapes,
                         const SceneContext& ctx) {
  DepthImage img = make_depth_image(ctx.camera, ctx.far_plane);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (!placed[i]) continue;
    const DepthImage single = render_object(shapes[types[i]], poses[i], ctx);
    for (std::size_t p = 0; p < img.depths.size(); ++p) {
      img.depths[p] = std::min(img.depths[p], single.depths[p]);
    }
  }
  return img;
}

}  // namespace

std::vector<Pose> map_initialize(const PointCloud& observed, const std::vector<int>& types,
                                 const SceneContext& ctx, const CloudLikParams& lik_params,
                                 const KernelConfig& cfg, Rng& rng) {
  const int n = static_cast<int>(types.size());
  if (observed.empty()) throw NoHypotheses("map_initialize: no observed points");

  std::vector<VoxelShape> mode_shapes;
  mode_shapes.reserve(ctx.shapes.size());
  for (const auto& b : ctx.shapes) mode_shapes.push_back(mode_shape(b));

  // Fit large objects first so supports are explained before the supported.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return mode_shapes[types[a]].occupied_count() > mode_shapes[types[b]].occupied_count();
  });

  const SceneLikelihood lik(observed, lik_params, 0);
  auto joint_score = [&](const std::vector<Pose>& poses) {
    SceneGraph g;
    g.types = types;
    g.parent.assign(n, kRoot);
    g.params.resize(n);
    for (int i = 0; i < n; ++i) g.params[i] = FloatingParam{poses[i]};
    return lik.loglik(g, mode_shapes, ctx);
  };

  struct Particle {
    std::vector<Pose> poses;
    double score = 0.0;
    int assigned = 0;
  };

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto sample_hypothesis = [&](const std::vector<PoseHypothesis>& hyps, bool take_best) -> Pose {
    if (take_best) return hyps.front().pose;
    double max_s = hyps.front().log_score;
    std::vector<double> w(hyps.size());
    double total = 0.0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      w[i] = std::exp(hyps[i].log_score - max_s);
      total += w[i];
    }
    double r = unif(rng) * total;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      r -= w[i];
      if (r <= 0.0) return hyps[i].pose;
    }
    return hyps.back().pose;
  };

  const int num_particles = std::max(1, cfg.particles_per_object) * n;
  std::vector<Particle> particles(num_particles);
  bool any_hypothesis = false;

  for (int p = 0; p < num_particles; ++p) {
    Particle& part = particles[p];
    part.assigned = order[p % n];
    part.poses.assign(n, Pose{});
    std::vector<char> placed(n, 0);
    for (int v : order) {
      const DepthImage rendered = render_subset(part.poses, placed, types, mode_shapes, ctx);
      const PointCloud unexp =
          unexplained_points(observed, unproject(rendered, ctx), lik_params.r_ball);
      const auto hyps = pose_hypotheses(unexp, mode_shapes[types[v]], ctx, lik_params, cfg);
      if (hyps.empty()) {
        part.poses[v] = sample_floating_prior(ctx, rng);
      } else {
        any_hypothesis = true;
        part.poses[v] = sample_hypothesis(hyps, p == 0);
      }
      placed[v] = 1;
    }
    part.score = joint_score(part.poses);
  }
  if (!any_hypothesis) throw NoHypotheses("map_initialize: no hypotheses for any object");

  std::vector<Pose> best_poses = particles[0].poses;
  double best_score = particles[0].score;
  for (const auto& p : particles) {
    if (p.score > best_score) {
      best_score = p.score;
      best_poses = p.poses;
    }
  }

  const int sweeps = cfg.stage2_sweeps_per_object * n;
  const std::vector<char> all_placed(n, 1);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (auto& part : particles) {
      const int v = part.assigned;
      std::vector<char> others(n, 1);
      others[v] = 0;
      const DepthImage rendered = render_subset(part.poses, others, types, mode_shapes, ctx);
      const PointCloud unexp =
          unexplained_points(observed, unproject(rendered, ctx), lik_params.r_ball);
      const auto hyps = pose_hypotheses(unexp, mode_shapes[types[v]], ctx, lik_params, cfg);
      if (hyps.empty()) continue;
      const Pose proposal = sample_hypothesis(hyps, false);
      std::vector<Pose> cand = part.poses;
      cand[v] = proposal;
      const double cand_score = joint_score(cand);
      if (accept_log_alpha(cand_score - part.score, rng)) {
        part.poses = std::move(cand);
        part.score = cand_score;
      }
      if (part.score > best_score) {
        best_score = part.score;
        best_poses = part.poses;
      }
    }
    // Multinomial resampling by normalized weights.
    double max_s = particles[0].score;
    for (const auto& p : particles) max_s = std::max(max_s, p.score);
    std::vector<double> w(particles.size());
    double total = 0.0;
    for (std::size_t i = 0; i < particles.size(); ++i) {
      w[i] = std::exp(particles[i].score - max_s);
      total += w[i];
    }
    std::vector<Particle> next(particles.size());
    for (std::size_t i = 0; i < particles.size(); ++i) {
      double r = unif(rng) * total;
      std::size_t j = 0;
      for (; j + 1 < particles.size(); ++j) {
        r -= w[j];
        if (r <= 0.0) break;
      }
      next[i] = particles[j];
      next[i].assigned = particles[i].assigned;  // assignments stay with slots
    }
    particles = std::move(next);
  }
  return best_poses;
}

InferenceResult run_inference(const PointCloud& observed, const std::vector<int>& types,
                              const SceneContext& ctx, const CloudLikParams& lik_params,
                              const KernelConfig& cfg, Rng& rng) {
  const int n = static_cast<int>(types.size());
  const std::vector<Pose> init_poses = map_initialize(observed, types, ctx, lik_params, cfg, rng);

  ChainState state;
  state.rng.seed(rng());
  state.graph.types = types;
  state.graph.parent.assign(n, kRoot);
  state.graph.params.resize(n);
  for (int v = 0; v < n; ++v) state.graph.params[v] = FloatingParam{init_poses[v]};

  const SceneLikelihood lik(observed, lik_params, 0);
  ensure_pm_init(state, ctx, &lik);

  InferenceResult result;
  result.initial_poses = init_poses;
  result.best = state.graph;
  result.best_score = prior_logpdf(state.graph, ctx) + state.pm.retained_log_estimate;

  const int burn_in = static_cast<int>(cfg.burn_in_fraction * cfg.sweeps);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
    if (!cfg.ablate_structure) structure_move(state, ctx, &lik, cfg);
    for (int k = 0; k < n; ++k) {
      const int v = std::min(n - 1, static_cast<int>(unif(state.rng) * n));
      if (state.graph.floating(v)) {
        const bool data_driven = unif(state.rng) < cfg.dd_prob;
        mh_pose_move(state, v, ctx, &lik, cfg,
                     data_driven ? PoseProposalMode::DataDriven : PoseProposalMode::RandomWalk,
                     &init_poses[v]);
      } else {
        mh_contact_move(state, v, ctx, &lik, cfg);
      }
    }
    const double score = prior_logpdf(state.graph, ctx) + state.pm.retained_log_estimate;
    if (score > result.best_score) {
      result.best_score = score;
      result.best = state.graph;
    }
    if (sweep >= burn_in && (sweep - burn_in) % cfg.thin == 0) {
      result.samples.push_back(state.graph);
      result.sample_scores.push_back(score);
    }
  }
  return result;
}

bool audit_pm_consistency(ChainState& state, const SceneContext& ctx,
                          const SceneLikelihood& lik, double tol) {
  if (!state.pm.initialized || state.pm.retained_samples.empty()) return true;
  std::vector<double> vals;
  vals.reserve(state.pm.retained_samples.size());
  for (const auto& sample : state.pm.retained_samples) {
    vals.push_back(lik.loglik(state.graph, sample, ctx));
  }
  return std::abs(logmeanexp(vals) - state.pm.retained_log_estimate) <= tol;
}

}  // namespace threedp

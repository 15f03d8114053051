#include "threedp/existence.hpp"

#include <cmath>

#include "threedp/errors.hpp"

namespace threedp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Euler boxes: yaw, roll in [-pi, pi), pitch in [-pi/2, pi/2].
const double kEulerLogVol = std::log(2.0 * M_PI * M_PI * 2.0 * M_PI);

bool accept_log_alpha(double log_alpha, Rng& rng) {
  if (log_alpha >= 0.0) return true;
  if (log_alpha == kNegInf) return false;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return std::log(unif(rng)) < log_alpha;
}

std::vector<VoxelShape> mode_samples(const SceneContext& ctx) {
  std::vector<VoxelShape> out;
  out.reserve(ctx.shapes.size());
  for (const auto& b : ctx.shapes) out.push_back(mode_shape(b));
  return out;
}

double state_loglik(const ExistenceState& s, const DepthImage* observed,
                    const ExistencePrior& prior, const SceneContext& ctx,
                    const ExistenceConfig& cfg, const std::vector<VoxelShape>& shapes) {
  if (!observed || cfg.constant_likelihood) return 0.0;
  SceneGraph g;
  for (std::size_t m = 0; m < prior.types.size(); ++m) {
    if (!s.present[m]) continue;
    g.types.push_back(prior.types[m]);
    g.parent.push_back(kRoot);
    g.params.push_back(FloatingParam{s.poses[m]});
  }
  const DepthImage rendered = render_depth(g, shapes, ctx);
  return pixel_loglik(*observed, rendered, cfg.sigma_pixel);
}

Pose sample_pose_prior(const SceneContext& ctx, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Pose p;
  for (int d = 0; d < 3; ++d) {
    p.translation[d] =
        ctx.bounds.min[d] + unif(rng) * (ctx.bounds.max[d] - ctx.bounds.min[d]);
  }
  p.rotation = sample_uniform_euler(rng);
  return p;
}

}  // namespace

Vec3 euler_from_quat(const Quat& q) {
  const Eigen::Matrix3d r = q.toRotationMatrix();
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  double yaw, roll;
  if (std::abs(r(2, 0)) < 1.0 - 1e-12) {
    yaw = std::atan2(r(1, 0), r(0, 0));
    roll = std::atan2(r(2, 1), r(2, 2));
  } else {
    yaw = std::atan2(-r(0, 1), r(1, 1));  // gimbal lock: fold roll into yaw
    roll = 0.0;
  }
  return Vec3(yaw, pitch, roll);
}

Quat quat_from_euler(const Vec3& e) {
  return canonical_quat(Quat(Eigen::AngleAxisd(e[0], Vec3::UnitZ()) *
                             Eigen::AngleAxisd(e[1], Vec3::UnitY()) *
                             Eigen::AngleAxisd(e[2], Vec3::UnitX())));
}

Quat sample_uniform_euler(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Vec3 e(-M_PI + 2.0 * M_PI * unif(rng), -M_PI_2 + M_PI * unif(rng),
               -M_PI + 2.0 * M_PI * unif(rng));
  return quat_from_euler(e);
}

double existence_prior_logpdf(const ExistenceState& s, const ExistencePrior& prior,
                              const SceneContext& ctx) {
  double lp = 0.0;
  for (std::size_t m = 0; m < prior.types.size(); ++m) {
    const double p = prior.p_pres[m];
    if (s.present[m]) {
      lp += std::log(p);
      if (!ctx.bounds.contains(s.poses[m].translation)) return kNegInf;
      lp += -std::log(ctx.bounds.volume()) - kEulerLogVol;
    } else {
      if (p >= 1.0) return kNegInf;
      lp += std::log1p(-p);
    }
  }
  return lp;
}

bool presence_move(ExistenceState& s, int m, const DepthImage* observed,
                   const ExistencePrior& prior, const SceneContext& ctx,
                   const ExistenceConfig& cfg, Rng& rng) {
  const auto shapes = mode_samples(ctx);
  const double p = prior.p_pres[m];
  const double cur_lik = state_loglik(s, observed, prior, ctx, cfg, shapes);

  ExistenceState cand = s;
  double log_alpha;
  if (!s.present[m]) {
    cand.present[m] = 1;
    cand.poses[m] = sample_pose_prior(ctx, rng);
    const double cand_lik = state_loglik(cand, observed, prior, ctx, cfg, shapes);
    log_alpha = (p >= 1.0 ? std::numeric_limits<double>::infinity()
                          : std::log(p) - std::log1p(-p)) +
                (cand_lik - cur_lik);
  } else {
    if (p >= 1.0) return false;  // certain presence: death impossible
    cand.present[m] = 0;
    const double cand_lik = state_loglik(cand, observed, prior, ctx, cfg, shapes);
    log_alpha = std::log1p(-p) - std::log(p) + (cand_lik - cur_lik);
  }
  if (!accept_log_alpha(log_alpha, rng)) return false;
  s = std::move(cand);
  return true;
}

ExistenceResult infer_existence(const DepthImage& observed, const ExistencePrior& prior,
                                const SceneContext& ctx, const ExistenceConfig& cfg, Rng& rng) {
  const int n = static_cast<int>(prior.types.size());
  const auto shapes = mode_samples(ctx);
  const DepthImage* obs = cfg.constant_likelihood ? nullptr : &observed;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  ExistenceState state;
  state.present.assign(n, 0);
  state.poses.assign(n, Pose{});
  for (int m = 0; m < n; ++m) {
    if (unif(rng) < prior.p_pres[m]) {
      state.present[m] = 1;
      state.poses[m] = sample_pose_prior(ctx, rng);
    }
  }

  auto pose_move = [&](int m) {
    const double cur_lik = state_loglik(state, obs, prior, ctx, cfg, shapes);
    ExistenceState cand = state;
    if (unif(rng) < cfg.prior_redraw_prob) {
      cand.poses[m] = sample_pose_prior(ctx, rng);  // independence, densities cancel
    } else {
      cand.poses[m].translation +=
          cfg.trans_walk_std * Vec3(gauss(rng), gauss(rng), gauss(rng));
      if (!ctx.bounds.contains(cand.poses[m].translation)) return;
      Vec3 e = euler_from_quat(cand.poses[m].rotation);
      e += cfg.euler_walk_std * Vec3(gauss(rng), gauss(rng), gauss(rng));
      // Yaw/roll wrap on the circle (symmetric); pitch leaving its box is
      // outside the Euler-uniform support.
      e[0] = std::remainder(e[0], 2.0 * M_PI);
      e[2] = std::remainder(e[2], 2.0 * M_PI);
      if (e[1] < -M_PI_2 || e[1] > M_PI_2) return;
      cand.poses[m].rotation = quat_from_euler(e);
    }
    const double cand_lik = state_loglik(cand, obs, prior, ctx, cfg, shapes);
    if (accept_log_alpha(cand_lik - cur_lik, rng)) state = std::move(cand);
  };

  ExistenceResult result;
  result.presence_prob.assign(n, 0.0);
  result.pose_samples.assign(n, {});
  const int burn_in = static_cast<int>(cfg.burn_in_fraction * cfg.sweeps);
  int kept = 0;
  for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
    for (int m = 0; m < n; ++m) {
      presence_move(state, m, obs, prior, ctx, cfg, rng);
      if (state.present[m]) pose_move(m);
    }
    if (sweep < burn_in) continue;
    ++kept;
    for (int m = 0; m < n; ++m) {
      if (state.present[m]) {
        result.presence_prob[m] += 1.0;
        result.pose_samples[m].push_back(state.poses[m]);
      }
    }
  }
  for (int m = 0; m < n; ++m) result.presence_prob[m] /= std::max(1, kept);
  return result;
}

}  // namespace threedp

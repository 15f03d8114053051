#pragma once

#include "threedp/likelihood.hpp"

namespace threedp {

/// Independent Bernoulli presence per candidate type (binomial count when the
/// probabilities are shared).
struct ExistencePrior {
  std::vector<int> types;    // candidate object type ids
  std::vector<double> p_pres;  // per candidate, in (0,1]
};

/// Chain state: per-candidate presence flag and, when present, a floating pose
/// with the orientation carried in Euler angles.
struct ExistenceState {
  std::vector<char> present;
  std::vector<Pose> poses;  // valid iff present
};

struct ExistenceConfig {
  int sweeps = 2000;
  double burn_in_fraction = 0.25;
  double trans_walk_std = 1.0;   // cm
  double euler_walk_std = 0.2;   // rad
  double prior_redraw_prob = 0.2;
  double sigma_pixel = 0.5;      // cm
  bool constant_likelihood = false;  // prior-preservation testing
};

/// Intrinsic zyx Euler angles (yaw, pitch, roll); yaw/roll in [-pi, pi),
/// pitch in [-pi/2, pi/2].
Vec3 euler_from_quat(const Quat& q);
Quat quat_from_euler(const Vec3& euler);

/// Uniform orientation in the Euler parametrization (not Haar); the pose prior
/// in this module is uniform translation over the bounds times this.
Quat sample_uniform_euler(Rng& rng);

/// Log prior of a state: Bernoulli presence terms plus the uniform pose
/// density for each present object. Label permutation factors cancel in every
/// ratio taken here and are dropped.
double existence_prior_logpdf(const ExistenceState& s, const ExistencePrior& prior,
                              const SceneContext& ctx);

/// Birth/death flip of candidate m with the pose proposed from the prior, so
/// pose densities cancel: alpha = (p/(1-p))^{+-1} * likelihood ratio.
/// observed == nullptr runs the constant-likelihood chain. Returns accept.
bool presence_move(ExistenceState& s, int m, const DepthImage* observed,
                   const ExistencePrior& prior, const SceneContext& ctx,
                   const ExistenceConfig& cfg, Rng& rng);

struct ExistenceResult {
  std::vector<double> presence_prob;           // per candidate
  std::vector<std::vector<Pose>> pose_samples;  // per candidate, when present
};

/// Cycle presence flips and pose moves (translation/Euler walks plus prior
/// redraws) over all candidates; probabilities are post-burn-in flag
/// frequencies.
ExistenceResult infer_existence(const DepthImage& observed, const ExistencePrior& prior,
                                const SceneContext& ctx, const ExistenceConfig& cfg, Rng& rng);

}  // namespace threedp

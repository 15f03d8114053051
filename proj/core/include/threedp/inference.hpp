#pragma once

#include <array>
#include <map>
#include <optional>

#include "threedp/likelihood.hpp"

namespace threedp {

struct KernelConfig {
  // Random-walk proposal scales.
  double rw_trans_std = 0.5;    // cm
  double rw_rot_kappa = 2000.0;
  double contact_ab_std = 0.5;  // cm
  double contact_z_std = 0.2;   // cm

  // Data-driven independence proposal around an ICP estimate.
  double dd_pos_std = 1.0;      // cm
  double dd_rot_kappa = 500.0;
  double dd_prob = 0.1;         // fraction of floating-pose moves that are data-driven

  // Pose initialization.
  double dbscan_eps = 1.5;      // cm
  int dbscan_min_pts = 5;
  int icp_iters = 20;
  int particles_per_object = 2;
  int stage2_sweeps_per_object = 20;

  // Chain schedule.
  int sweeps = 300;
  double burn_in_fraction = 0.25;
  int thin = 5;
  bool ablate_structure = false;  // 3DP3*: never schedule structure moves

  // Radon-Nikodym correction for a floating-to-contact proposal (its
  // reciprocal applies to contact-to-floating). Exposed for mutation testing.
  double rn_float_to_contact = 8.0;
};

struct MoveCounter {
  long proposed = 0;
  long accepted = 0;
};

struct ChainState {
  SceneGraph graph;
  PseudoMarginalState pm;
  Rng rng;
  std::map<std::string, MoveCounter> stats;
};

/// Density-based clustering; expansion in index order so the result is
/// deterministic given input order. Returns clusters of point indices;
/// noise indices optionally reported.
std::vector<std::vector<int>> dbscan(const PointCloud& points, double eps, int min_pts,
                                     std::vector<int>* noise = nullptr);

/// The 24 rotational symmetries of a cube.
const std::array<Quat, 24>& nominal_orientations();

/// Iterated closest-point refinement: nearest-neighbor correspondences from the
/// rendered object cloud to the target, rigid update via Kabsch.
Pose icp_refine(const VoxelShape& shape, const Pose& init, const PointCloud& target,
                const SceneContext& ctx, int iters);

struct PoseHypothesis {
  Pose pose;
  double log_score = 0.0;
};

/// DBSCAN cluster centers x 24 nominal orientations, ICP-refined and scored by
/// the single-object cloud likelihood against the unexplained points.
std::vector<PoseHypothesis> pose_hypotheses(const PointCloud& unexplained,
                                            const VoxelShape& shape, const SceneContext& ctx,
                                            const CloudLikParams& lik_params,
                                            const KernelConfig& cfg);

/// Observed points farther than r_ball from every rendered point.
PointCloud unexplained_points(const PointCloud& observed, const PointCloud& rendered,
                              double r_ball);

/// vMF sample on S^3 around a center quaternion (antipodally symmetrized).
Quat sample_vmf_quat(const Quat& center, double kappa, Rng& rng);

/// Unnormalized log density of the symmetrized S^3 vMF (normalizer cancels in
/// same-kappa MH ratios).
double vmf_quat_logpdf_unnorm(const Quat& q, const Quat& center, double kappa);

enum class PoseProposalMode { RandomWalk, DataDriven };

/// MH move on the 6DoF pose of a floating object. lik == nullptr runs the
/// constant-likelihood chain (prior preservation testing). Returns accept.
bool mh_pose_move(ChainState& state, int v, const SceneContext& ctx, const SceneLikelihood* lik,
                  const KernelConfig& cfg, PoseProposalMode mode,
                  const Pose* data_driven_center = nullptr);

/// Symmetric Gaussian walk on a contact child's (a, b, z). Returns accept.
bool mh_contact_move(ChainState& state, int v, const SceneContext& ctx,
                     const SceneLikelihood* lik, const KernelConfig& cfg);

enum class MoveKind { FloatToFloat, FloatToContact, ContactToFloat, ContactToContact };

/// Result of the structure involution applied to (G, v, u, f, f').
struct StructureProposal {
  SceneGraph graph;  // proposed graph; world poses identical to the input's
  MoveKind kind = MoveKind::FloatToFloat;
  int v = 0;
  int forward_u = kRoot;
  int reverse_u = kRoot;              // v's previous parent
  int reverse_f = -1, reverse_fp = -1;  // faces that reverse the move
  double log_rn = 0.0;                // log Radon-Nikodym correction (canonical constants)
};

/// Apply the structure involution. f/fp are ignored when u == kRoot. Returns
/// nullopt when the re-derived contact orientation is singular.
std::optional<StructureProposal> apply_involution(const SceneGraph& g, int v, int u, int f,
                                                  int fp, const SceneContext& ctx);

/// Involutive structure move: sever a uniformly chosen object and graft it on a
/// uniformly chosen allowed target, re-deriving parameters so every world pose
/// is unchanged. Returns accept.
bool structure_move(ChainState& state, const SceneContext& ctx, const SceneLikelihood* lik,
                    const KernelConfig& cfg);

/// Stage-two MAP pose initialization: per-object particles moved by
/// mixture-of-hypotheses kernels with multinomial resampling.
std::vector<Pose> map_initialize(const PointCloud& observed, const std::vector<int>& types,
                                 const SceneContext& ctx, const CloudLikParams& lik_params,
                                 const KernelConfig& cfg, Rng& rng);

struct InferenceResult {
  std::vector<SceneGraph> samples;
  std::vector<double> sample_scores;
  SceneGraph best;
  double best_score = 0.0;
  std::vector<Pose> initial_poses;
};

/// Three-stage end-to-end inference: types given, MAP pose initialization,
/// then the structure + pose MCMC chain.
InferenceResult run_inference(const PointCloud& observed, const std::vector<int>& types,
                              const SceneContext& ctx, const CloudLikParams& lik_params,
                              const KernelConfig& cfg, Rng& rng);

/// Recompute the retained pseudo-marginal estimate from the retained samples
/// and compare (consistency audit).
bool audit_pm_consistency(ChainState& state, const SceneContext& ctx,
                          const SceneLikelihood& lik, double tol = 1e-9);

}  // namespace threedp

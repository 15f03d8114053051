#pragma once

#include "threedp/kdtree.hpp"
#include "threedp/renderer.hpp"

namespace threedp {

struct CloudLikParams {
  double outlier_weight = 0.01;  // C in (0,1)
  double r_ball = 0.5;           // cm
  double bounds_volume = 1e6;    // cm^3, volume of B
  // When false, K~ counts every pixel of the depth image (including misses)
  // rather than only rendered points.
  bool count_hits_only = true;
};

/// Robust point-cloud mixture log likelihood: per observed point, a uniform
/// outlier floor over B plus uniform balls of radius r around rendered points.
/// Radius counting via a k-d tree over the rendered cloud.
double cloud_loglik(const PointCloud& observed, const PointCloud& rendered,
                    const CloudLikParams& p, std::size_t total_pixels = 0);

/// Per-pixel depth mixture: 0.1 uniform over [0, D] plus 0.9 Normal(I; Itil, sigma).
double pixel_loglik(const DepthImage& observed, const DepthImage& rendered, double sigma);

/// State retained across pseudo-marginal evaluations for one chain.
struct PseudoMarginalState {
  int num_samples = 5;  // R
  bool fixed_samples = true;
  std::vector<std::vector<VoxelShape>> retained_samples;  // R sets of per-type shapes
  double retained_log_estimate = 0.0;
  bool initialized = false;
};

/// Scene-level observation model: renders the graph with given shape samples
/// and scores the observed cloud.
class SceneLikelihood {
 public:
  SceneLikelihood(PointCloud observed, CloudLikParams params, std::size_t observed_pixels)
      : observed_(std::move(observed)), params_(params), observed_pixels_(observed_pixels) {}

  /// p(Y | O, c, G, theta) for one sampled shape set.
  double loglik(const SceneGraph& g, const std::vector<VoxelShape>& samples,
                const SceneContext& ctx) const;

  /// Unbiased pseudo-marginal log estimate: logmeanexp over R shape sets
  /// sampled from the beliefs (or the retained sets when fixed_samples).
  /// Does not modify the retained estimate; callers commit via accept().
  double estimate(const SceneGraph& g, const SceneContext& ctx, PseudoMarginalState& state,
                  Rng& rng, std::vector<std::vector<VoxelShape>>* samples_out = nullptr) const;

  const PointCloud& observed() const { return observed_; }
  const CloudLikParams& params() const { return params_; }

 private:
  PointCloud observed_;
  CloudLikParams params_;
  std::size_t observed_pixels_ = 0;
};

/// Numerically stable log(mean(exp(x))).
double logmeanexp(const std::vector<double>& xs);

}  // namespace threedp

#include "threedp/likelihood.hpp"

#include <algorithm>
#include <cmath>

namespace threedp {

double logmeanexp(const std::vector<double>& xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc / static_cast<double>(xs.size()));
}

double cloud_loglik(const PointCloud& observed, const PointCloud& rendered,
                    const CloudLikParams& p, std::size_t total_pixels) {
  const double outlier = p.outlier_weight / p.bounds_volume;
  const std::size_t k_tilde =
      p.count_hits_only ? rendered.size() : std::max(total_pixels, rendered.size());
  if (rendered.empty()) {
    return static_cast<double>(observed.size()) * std::log(outlier);
  }
  const double ball_volume = (4.0 / 3.0) * M_PI * p.r_ball * p.r_ball * p.r_ball;
  const double inlier_scale =
      (1.0 - p.outlier_weight) / (static_cast<double>(k_tilde) * ball_volume);
  const KdTree3 tree(rendered.points);
  double total = 0.0;
  for (const auto& y : observed.points) {
    const std::size_t n = tree.radius_count(y, p.r_ball);
    total += std::log(outlier + inlier_scale * static_cast<double>(n));
  }
  return total;
}

double pixel_loglik(const DepthImage& observed, const DepthImage& rendered, double sigma) {
  if (observed.width != rendered.width || observed.height != rendered.height) {
    throw DimMismatch("pixel_loglik: image dims differ");
  }
  const double uniform = 0.1 / observed.far_plane;
  const double norm = 0.9 / (sigma * std::sqrt(2.0 * M_PI));
  double total = 0.0;
  for (std::size_t i = 0; i < observed.depths.size(); ++i) {
    const double d = (observed.depths[i] - rendered.depths[i]) / sigma;
    total += std::log(uniform + norm * std::exp(-0.5 * d * d));
  }
  return total;
}

double SceneLikelihood::loglik(const SceneGraph& g, const std::vector<VoxelShape>& samples,
                               const SceneContext& ctx) const {
  const DepthImage rendered = render_depth(g, samples, ctx);
  const PointCloud cloud = unproject(rendered, ctx);
  return cloud_loglik(observed_, cloud, params_,
                      static_cast<std::size_t>(rendered.width) * rendered.height);
}

double SceneLikelihood::estimate(const SceneGraph& g, const SceneContext& ctx,
                                 PseudoMarginalState& state, Rng& rng,
                                 std::vector<std::vector<VoxelShape>>* samples_out) const {
  const int r = state.num_samples;
  const bool reuse = state.fixed_samples && state.initialized;

  bool deterministic = true;
  for (const auto& b : ctx.shapes) deterministic &= b.deterministic();

  std::vector<std::vector<VoxelShape>> samples;
  if (reuse) {
    samples = state.retained_samples;
  } else {
    samples.resize(r);
    for (int i = 0; i < r; ++i) {
      samples[i].reserve(ctx.shapes.size());
      for (const auto& b : ctx.shapes) samples[i].push_back(sample_shape(b, rng));
      if (deterministic && i == 0) {
        for (int j = 1; j < r; ++j) samples[j] = samples[0];
        break;
      }
    }
  }

  double est;
  if (deterministic) {
    est = loglik(g, samples[0], ctx);  // all replicates identical
  } else {
    std::vector<double> vals(r);
    for (int i = 0; i < r; ++i) vals[i] = loglik(g, samples[i], ctx);
    est = logmeanexp(vals);
  }
  if (samples_out) *samples_out = std::move(samples);
  return est;
}

}  // namespace threedp

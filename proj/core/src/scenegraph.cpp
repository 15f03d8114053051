#include "threedp/scenegraph.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

namespace threedp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double normal_logpdf(double x, double mu, double sigma) {
  const double d = (x - mu) / sigma;
  return -0.5 * d * d - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
}

bool is_tree(const std::vector<int>& parent) {
  const int n = static_cast<int>(parent.size());
  for (int i = 0; i < n; ++i) {
    int cur = i;
    int steps = 0;
    while (cur != kRoot) {
      cur = parent[cur];
      if (++steps > n) return false;  // cycle
    }
  }
  return true;
}

}  // namespace

std::vector<Pose> world_poses(const SceneGraph& g,
                              const std::vector<std::vector<ContactPlane>>& planes_by_type) {
  const int n = g.n_objects();
  std::vector<Pose> poses(n);
  std::vector<char> done(n, 0);

  // Iterative resolution along parent chains.
  auto resolve = [&](auto&& self, int v) -> const Pose& {
    if (done[v]) return poses[v];
    if (g.floating(v)) {
      poses[v] = std::get<FloatingParam>(g.params[v]).pose;
    } else {
      const int u = g.parent[v];
      const Pose& xu = self(self, u);
      const auto& cp = std::get<ContactParam>(g.params[v]);
      const Pose delta =
          contact_relative_pose(cp.parent_face, cp.child_face, cp.coords,
                                planes_by_type[g.types[u]], planes_by_type[g.types[v]]);
      poses[v] = compose(xu, delta);
    }
    done[v] = 1;
    return poses[v];
  };
  for (int v = 0; v < n; ++v) resolve(resolve, v);
  return poses;
}

std::vector<std::vector<ContactPlane>> context_planes(const SceneContext& ctx) {
  if (ctx.planes.size() == ctx.shapes.size()) return ctx.planes;
  std::vector<std::vector<ContactPlane>> planes;
  planes.reserve(ctx.shapes.size());
  for (const auto& belief : ctx.shapes) {
    planes.push_back(bounding_cuboid_planes(mode_shape(belief)));
  }
  return planes;
}

void SceneContext::rebuild_planes() {
  planes.clear();
  planes = context_planes(*this);
}

std::vector<int> subtree(const std::vector<int>& parent, int v) {
  const int n = static_cast<int>(parent.size());
  std::vector<char> in(n, 0);
  in[v] = 1;
  // Parent pointers only; repeated passes until closure (n is small).
  bool changed = true;
  while (changed) {
    changed = false;
    for (int i = 0; i < n; ++i) {
      if (!in[i] && parent[i] != kRoot && in[parent[i]]) {
        in[i] = 1;
        changed = true;
      }
    }
  }
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    if (in[i]) out.push_back(i);
  }
  return out;
}

int sever_graft(std::vector<int>& parent, int v, int u) {
  const int n = static_cast<int>(parent.size());
  if (v < 0 || v >= n) throw InvalidGraft("sever_graft: bad vertex");
  if (u != kRoot) {
    if (u < 0 || u >= n) throw InvalidGraft("sever_graft: bad target");
    for (int w : subtree(parent, v)) {
      if (w == u) throw InvalidGraft("sever_graft: target inside severed subtree");
    }
  }
  const int prev = parent[v];
  parent[v] = u;
  return prev;
}

std::vector<std::pair<int, int>> candidate_pairs(const std::vector<int>& parent) {
  const int n = static_cast<int>(parent.size());
  std::vector<std::pair<int, int>> out;
  for (int v = 0; v < n; ++v) {
    std::vector<char> in_sub(n, 0);
    for (int w : subtree(parent, v)) in_sub[w] = 1;
    out.emplace_back(v, kRoot);
    for (int u = 0; u < n; ++u) {
      if (!in_sub[u]) out.emplace_back(v, u);
    }
  }
  return out;
}

std::uint64_t count_structures(int n) {
  std::uint64_t out = 1;
  for (int i = 0; i < n - 1; ++i) out *= static_cast<std::uint64_t>(n + 1);
  return out;
}

double param_logpdf(const NodeParam& param, const SceneContext& ctx) {
  if (std::holds_alternative<FloatingParam>(param)) {
    const auto& fp = std::get<FloatingParam>(param);
    if (!ctx.bounds.contains(fp.pose.translation)) return kNegInf;
    return -std::log(ctx.bounds.volume()) - std::log(M_PI * M_PI);
  }
  const auto& cp = std::get<ContactParam>(param);
  const auto& c = cp.coords;
  if (std::abs(c.a) > kContactOffsetHalfRange || std::abs(c.b) > kContactOffsetHalfRange) {
    return kNegInf;
  }
  double lp = -2.0 * std::log(static_cast<double>(kNumFaces));
  lp += -2.0 * std::log(2.0 * kContactOffsetHalfRange);
  lp += normal_logpdf(c.z, 0.0, kContactZStd);
  lp += vmf_north_logpdf(c.eta, kContactEtaKappa);
  lp += -std::log(2.0 * M_PI);
  return lp;
}

double prior_logpdf(const SceneGraph& g, const SceneContext& ctx) {
  const int n = g.n_objects();
  double lp = 0.0;
  if (ctx.uniform_structure_prior) {
    lp -= (n - 1) * std::log(static_cast<double>(n + 1));
  } else {
    for (int v = 0; v < n; ++v) {
      if (!g.floating(v)) return kNegInf;
    }
  }
  for (int v = 0; v < n; ++v) {
    lp += param_logpdf(g.params[v], ctx);
    if (lp == kNegInf) return kNegInf;
  }
  return lp;
}

Quat sample_uniform_rotation(Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Quat q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  return canonical_quat(q);
}

Vec3 sample_vmf_north(double kappa, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (true) {
    const double u = unif(rng);
    // Inversion of the marginal of the polar angle cosine.
    const double t = 1.0 + std::log(u + (1.0 - u) * std::exp(-2.0 * kappa)) / kappa;
    if (t <= -1.0 + kPoleTol) continue;  // singular set, resample
    const double psi = 2.0 * M_PI * unif(rng);
    const double r = std::sqrt(std::max(0.0, 1.0 - t * t));
    return Vec3(r * std::cos(psi), r * std::sin(psi), t);
  }
}

double vmf_north_logpdf(const Vec3& x, double kappa) {
  // Density w.r.t. the spherical measure of total mass 4*pi:
  // kappa * exp(kappa * z) / (4*pi*sinh(kappa)), evaluated in log space.
  const double log_sinh = kappa + std::log1p(-std::exp(-2.0 * kappa)) - std::log(2.0);
  return std::log(kappa) + kappa * x.z() - std::log(4.0 * M_PI) - log_sinh;
}

Pose sample_floating_prior(const SceneContext& ctx, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Pose p;
  for (int d = 0; d < 3; ++d) {
    p.translation[d] = ctx.bounds.min[d] + unif(rng) * (ctx.bounds.max[d] - ctx.bounds.min[d]);
  }
  p.rotation = sample_uniform_rotation(rng);
  return p;
}

ContactParam sample_contact_prior(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ContactParam cp;
  cp.parent_face = static_cast<int>(unif(rng) * kNumFaces) % kNumFaces;
  cp.child_face = static_cast<int>(unif(rng) * kNumFaces) % kNumFaces;
  cp.coords.a = (2.0 * unif(rng) - 1.0) * kContactOffsetHalfRange;
  cp.coords.b = (2.0 * unif(rng) - 1.0) * kContactOffsetHalfRange;
  cp.coords.z = gauss(rng) * kContactZStd;
  cp.coords.eta = sample_vmf_north(kContactEtaKappa, rng);
  cp.coords.phi = 2.0 * M_PI * unif(rng);
  return cp;
}

SceneGraph sample_prior(const SceneContext& ctx, int n, const std::vector<int>& types, Rng& rng) {
  SceneGraph g;
  g.types = types;
  g.parent.assign(n, kRoot);
  if (ctx.uniform_structure_prior) {
    std::uniform_int_distribution<int> pick(kRoot, n - 1);
    do {
      for (int i = 0; i < n; ++i) {
        int p = pick(rng);
        while (p == i) p = pick(rng);
        g.parent[i] = p;
      }
    } while (!is_tree(g.parent));
  }
  g.params.resize(n);
  for (int v = 0; v < n; ++v) {
    if (g.parent[v] == kRoot) {
      g.params[v] = FloatingParam{sample_floating_prior(ctx, rng)};
    } else {
      g.params[v] = sample_contact_prior(rng);
    }
  }
  return g;
}

std::string scene_graph_to_json(const SceneGraph& g) {
  nlohmann::json j;
  j["n"] = g.n_objects();
  j["types"] = g.types;
  nlohmann::json nodes = nlohmann::json::array();
  for (int v = 0; v < g.n_objects(); ++v) {
    nlohmann::json node;
    node["id"] = v;
    if (g.parent[v] == kRoot) {
      node["parent"] = "root";
      const auto& fp = std::get<FloatingParam>(g.params[v]);
      node["param"] = {{"kind", "floating"},
                       {"t", {fp.pose.translation.x(), fp.pose.translation.y(),
                              fp.pose.translation.z()}},
                       {"q", {fp.pose.rotation.w(), fp.pose.rotation.x(), fp.pose.rotation.y(),
                              fp.pose.rotation.z()}}};
    } else {
      node["parent"] = g.parent[v];
      const auto& cp = std::get<ContactParam>(g.params[v]);
      node["param"] = {{"kind", "contact"},
                       {"f", cp.child_face},
                       {"fp", cp.parent_face},
                       {"a", cp.coords.a},
                       {"b", cp.coords.b},
                       {"z", cp.coords.z},
                       {"eta", {cp.coords.eta.x(), cp.coords.eta.y(), cp.coords.eta.z()}},
                       {"phi", cp.coords.phi}};
    }
    nodes.push_back(node);
  }
  j["nodes"] = nodes;
  return j.dump();
}

SceneGraph scene_graph_from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  SceneGraph g;
  const int n = j.at("n").get<int>();
  g.types = j.at("types").get<std::vector<int>>();
  g.parent.assign(n, kRoot);
  g.params.resize(n);
  for (const auto& node : j.at("nodes")) {
    const int v = node.at("id").get<int>();
    const auto& param = node.at("param");
    if (node.at("parent").is_string()) {
      g.parent[v] = kRoot;
      FloatingParam fp;
      const auto t = param.at("t");
      const auto q = param.at("q");
      fp.pose.translation = Vec3(t[0], t[1], t[2]);
      fp.pose.rotation = Quat(q[0], q[1], q[2], q[3]).normalized();
      g.params[v] = fp;
    } else {
      g.parent[v] = node.at("parent").get<int>();
      ContactParam cp;
      cp.child_face = param.at("f").get<int>();
      cp.parent_face = param.at("fp").get<int>();
      cp.coords.a = param.at("a").get<double>();
      cp.coords.b = param.at("b").get<double>();
      cp.coords.z = param.at("z").get<double>();
      const auto eta = param.at("eta");
      cp.coords.eta = Vec3(eta[0], eta[1], eta[2]).normalized();
      cp.coords.phi = param.at("phi").get<double>();
      g.params[v] = cp;
    }
  }
  return g;
}

}  // namespace threedp

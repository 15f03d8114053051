#include <doctest.h>

#include <cmath>
#include <map>
#include <queue>
#include <set>

#include "threedp/scenegraph.hpp"

using namespace threedp;

namespace {

SceneContext cube_context() {
  SceneContext ctx;
  VoxelShape cube = make_shape(GridDims{2, 2, 2}, 0.5);  // 1 cm cube
  std::fill(cube.occupancy.begin(), cube.occupancy.end(), 1);
  for (int t = 0; t < 4; ++t) ctx.shapes.push_back(belief_from_shape(cube));
  ctx.rebuild_planes();
  return ctx;
}

/// Independent tree check: BFS from the root over child lists.
bool is_tree_oracle(const std::vector<int>& parent) {
  const int n = static_cast<int>(parent.size());
  std::vector<std::vector<int>> children(n);
  std::queue<int> frontier;
  for (int i = 0; i < n; ++i) {
    if (parent[i] == kRoot) {
      frontier.push(i);
    } else if (parent[i] < 0 || parent[i] >= n || parent[i] == i) {
      return false;
    } else {
      children[parent[i]].push_back(i);
    }
  }
  int visited = 0;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    ++visited;
    for (int c : children[v]) frontier.push(c);
  }
  return visited == n;
}

std::vector<std::vector<int>> enumerate_trees(int n) {
  std::vector<std::vector<int>> trees;
  std::vector<int> parent(n, kRoot);
  const auto total = static_cast<std::uint64_t>(std::pow(n + 1, n));
  for (std::uint64_t code = 0; code < total; ++code) {
    std::uint64_t c = code;
    bool valid = true;
    for (int i = 0; i < n; ++i) {
      const int p = static_cast<int>(c % (n + 1)) - 1;
      c /= (n + 1);
      if (p == i) {
        valid = false;
        break;
      }
      parent[i] = p;
    }
    if (valid && is_tree_oracle(parent)) trees.push_back(parent);
  }
  return trees;
}

}  // namespace

TEST_CASE("world_poses basics") {
  SceneContext ctx = cube_context();
  const auto planes = context_planes(ctx);

  SceneGraph g;
  g.types = {0};
  g.parent = {kRoot};
  Pose p;
  p.translation = Vec3(3.0, -1.0, 2.0);
  p.rotation = canonical_quat(Quat(Eigen::AngleAxisd(0.7, Vec3::UnitY())));
  g.params = {FloatingParam{p}};
  const auto poses = world_poses(g, planes);
  CHECK((poses[0].translation - p.translation).norm() < 1e-12);

  // Chain: cube B flush on cube A's top face stacks exactly one edge length.
  SceneGraph chain;
  chain.types = {0, 1};
  chain.parent = {kRoot, 0};
  ContactParam cp;
  cp.parent_face = 5;
  cp.child_face = 4;
  chain.params = {FloatingParam{p}, cp};
  const auto stacked = world_poses(chain, planes);
  const Vec3 a_top = stacked[0].apply(Vec3(0.5, 0.5, 1.0));
  const Vec3 b_bottom = stacked[1].apply(Vec3(0.5, 0.5, 0.0));
  CHECK((a_top - b_bottom).norm() < 1e-9);

  // Re-rooting B as floating with its world pose leaves world poses unchanged.
  SceneGraph rerooted = chain;
  rerooted.parent[1] = kRoot;
  rerooted.params[1] = FloatingParam{stacked[1]};
  const auto again = world_poses(rerooted, planes);
  CHECK((again[1].translation - stacked[1].translation).norm() < 1e-12);
  CHECK((again[1].rotation.coeffs() - stacked[1].rotation.coeffs()).norm() < 1e-12);
}

TEST_CASE("sever_graft is an involution and validates targets") {
  std::vector<int> parent = {kRoot, kRoot};
  const int prev = sever_graft(parent, 1, 0);
  CHECK(prev == kRoot);
  CHECK(parent == std::vector<int>{kRoot, 0});

  const int prev2 = sever_graft(parent, 1, prev);
  CHECK(prev2 == 0);
  CHECK(parent == std::vector<int>{kRoot, kRoot});

  std::vector<int> chain = {kRoot, 0, 1};
  CHECK_THROWS_AS(sever_graft(chain, 0, 2), InvalidGraft);  // descendant
  CHECK_THROWS_AS(sever_graft(chain, 0, 0), InvalidGraft);  // self
}

TEST_CASE("sever_graft preserves the tree invariant on random moves") {
  Rng rng(31);
  const int n = 6;
  std::vector<int> parent(n, kRoot);
  std::uniform_int_distribution<int> pick_v(0, n - 1), pick_u(kRoot, n - 1);
  int done = 0;
  while (done < 10000) {
    const int v = pick_v(rng), u = pick_u(rng);
    try {
      sever_graft(parent, v, u);
    } catch (const InvalidGraft&) {
      continue;
    }
    ++done;
    REQUIRE(is_tree_oracle(parent));
  }
}

TEST_CASE("candidate_pairs") {
  CHECK(candidate_pairs({kRoot}) == std::vector<std::pair<int, int>>{{0, kRoot}});

  const auto star = candidate_pairs({kRoot, kRoot});
  CHECK(star.size() == 4);
  const std::set<std::pair<int, int>> star_set(star.begin(), star.end());
  CHECK(star_set.count({0, kRoot}));
  CHECK(star_set.count({0, 1}));
  CHECK(star_set.count({1, kRoot}));
  CHECK(star_set.count({1, 0}));

  const auto chain = candidate_pairs({kRoot, 0});
  const std::set<std::pair<int, int>> chain_set(chain.begin(), chain.end());
  CHECK(chain.size() == 3);
  CHECK_FALSE(chain_set.count({0, 1}));  // 1 is a descendant of 0
}

TEST_CASE("count_structures matches brute force") {
  CHECK(count_structures(1) == 1);
  CHECK(count_structures(3) == 16);
  CHECK(count_structures(4) == 125);
  CHECK(enumerate_trees(3).size() == 16);
  CHECK(enumerate_trees(4).size() == 125);
}

TEST_CASE("structure moves connect all trees (irreducibility)") {
  for (int n = 2; n <= 3; ++n) {
    const auto trees = enumerate_trees(n);
    std::map<std::vector<int>, int> index;
    for (std::size_t i = 0; i < trees.size(); ++i) index[trees[i]] = static_cast<int>(i);
    std::vector<char> seen(trees.size(), 0);
    std::queue<std::vector<int>> frontier;
    frontier.push(trees[0]);
    seen[0] = 1;
    while (!frontier.empty()) {
      auto cur = frontier.front();
      frontier.pop();
      for (const auto& [v, u] : candidate_pairs(cur)) {
        auto next = cur;
        sever_graft(next, v, u);
        const int idx = index.at(next);
        if (!seen[idx]) {
          seen[idx] = 1;
          frontier.push(next);
        }
      }
    }
    CHECK(std::count(seen.begin(), seen.end(), 1) == static_cast<long>(trees.size()));
  }
}

TEST_CASE("prior_logpdf closed forms") {
  SceneContext ctx = cube_context();

  SceneGraph g;
  g.types = {0};
  g.parent = {kRoot};
  g.params = {FloatingParam{Pose{}}};  // bounds-center
  const double expected = -std::log(ctx.bounds.volume()) - std::log(M_PI * M_PI);
  CHECK(prior_logpdf(g, ctx) == doctest::Approx(expected).epsilon(1e-12));

  // Contact child at the prior mode: faces uniform, offsets uniform, z normal
  // peak, vMF mode, phi uniform.
  ContactParam cp;
  cp.parent_face = 5;
  cp.child_face = 4;
  const double lp = param_logpdf(NodeParam{cp}, ctx);
  const double kappa = kContactEtaKappa;
  const double log_sinh = kappa + std::log1p(-std::exp(-2.0 * kappa)) - std::log(2.0);
  const double want = -std::log(36.0) - std::log(100.0 * 100.0) +
                      (-0.5 * std::log(2.0 * M_PI)) +
                      (std::log(kappa) + kappa - std::log(4.0 * M_PI) - log_sinh) -
                      std::log(2.0 * M_PI);
  CHECK(lp == doctest::Approx(want).epsilon(1e-12));

  ContactParam out = cp;
  out.coords.a = 60.0;
  CHECK(param_logpdf(NodeParam{out}, ctx) == -std::numeric_limits<double>::infinity());

  SceneGraph far = g;
  std::get<FloatingParam>(far.params[0]).pose.translation = Vec3(200.0, 0.0, 0.0);
  CHECK(prior_logpdf(far, ctx) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("contact prior density integrates to one") {
  SceneContext ctx = cube_context();
  ContactParam mode;
  mode.parent_face = 0;
  mode.child_face = 0;
  const double l_mode = param_logpdf(NodeParam{mode}, ctx);

  auto eval = [&](const ContactParam& cp) { return std::exp(param_logpdf(NodeParam{cp}, ctx)); };

  // Faces: sum over the 36 combinations.
  double q_faces = 0.0;
  for (int f = 0; f < 6; ++f) {
    for (int fp = 0; fp < 6; ++fp) {
      ContactParam cp = mode;
      cp.child_face = f;
      cp.parent_face = fp;
      q_faces += eval(cp);
    }
  }
  auto quad_1d = [&](double lo, double hi, int steps, auto&& set) {
    const double h = (hi - lo) / steps;
    double acc = 0.0;
    for (int i = 0; i <= steps; ++i) {
      ContactParam cp = mode;
      set(cp, lo + i * h);
      const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
      acc += w * eval(cp);
    }
    return acc * h;
  };
  const double q_a = quad_1d(-50.0, 50.0, 400, [](ContactParam& c, double v) { c.coords.a = v; });
  const double q_b = quad_1d(-50.0, 50.0, 400, [](ContactParam& c, double v) { c.coords.b = v; });
  const double q_z = quad_1d(-10.0, 10.0, 4000, [](ContactParam& c, double v) { c.coords.z = v; });
  const double q_phi =
      quad_1d(0.0, 2.0 * M_PI, 400, [](ContactParam& c, double v) { c.coords.phi = v; });
  // Sphere: the density depends only on eta_z = t; dS = 2*pi*dt.
  double q_eta = 0.0;
  {
    const int steps = 40000;
    const double h = 2.0 / steps;
    for (int i = 0; i <= steps; ++i) {
      const double t = -1.0 + i * h;
      ContactParam cp = mode;
      cp.coords.eta = Vec3(std::sqrt(std::max(0.0, 1.0 - t * t)), 0.0, t);
      const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
      q_eta += w * eval(cp) * 2.0 * M_PI;
    }
    q_eta *= h;
  }
  // Each 1-D quadrature carries the mode value of every other factor; divide
  // the surplus out to get the full product integral.
  const double total =
      q_faces * q_a * q_b * q_z * q_eta * q_phi / std::exp(5.0 * l_mode);
  CHECK(total == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("sample_prior supports both structure modes") {
  SceneContext ctx = cube_context();
  Rng rng(37);

  SceneContext delta = ctx;
  delta.uniform_structure_prior = false;
  for (int i = 0; i < 50; ++i) {
    const SceneGraph g = sample_prior(delta, 3, {0, 1, 2}, rng);
    for (int v = 0; v < 3; ++v) {
      CHECK(g.floating(v));
      CHECK(ctx.bounds.contains(std::get<FloatingParam>(g.params[v]).pose.translation));
    }
  }

  // Uniform mode: each of the 16 trees on N=3 within 3 sigma of 1/16.
  std::map<std::vector<int>, int> counts;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[sample_prior(ctx, 3, {0, 1, 2}, rng).parent]++;
  CHECK(counts.size() == 16);
  const double sigma = std::sqrt((1.0 / 16) * (15.0 / 16) / draws);
  for (const auto& [tree, c] : counts) {
    CHECK(std::abs(static_cast<double>(c) / draws - 1.0 / 16) < 3.5 * sigma);
  }
}

TEST_CASE("vMF sphere sampler matches its density moments") {
  Rng rng(41);
  const double kappa = 250.0;
  double mean_z = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean_z += sample_vmf_north(kappa, rng).z();
  mean_z /= n;
  const double expect = 1.0 / std::tanh(kappa) - 1.0 / kappa;
  CHECK(mean_z == doctest::Approx(expect).epsilon(0.002));
}

TEST_CASE("scene graph JSON round trip") {
  SceneContext ctx = cube_context();
  Rng rng(43);
  for (int i = 0; i < 20; ++i) {
    const SceneGraph g = sample_prior(ctx, 4, {0, 1, 2, 3}, rng);
    const SceneGraph back = scene_graph_from_json(scene_graph_to_json(g));
    REQUIRE(back.n_objects() == g.n_objects());
    CHECK(back.types == g.types);
    CHECK(back.parent == g.parent);
    for (int v = 0; v < 4; ++v) {
      if (g.floating(v)) {
        const auto& a = std::get<FloatingParam>(g.params[v]).pose;
        const auto& b = std::get<FloatingParam>(back.params[v]).pose;
        CHECK((a.translation - b.translation).norm() < 1e-12);
        CHECK((a.rotation.coeffs() - b.rotation.coeffs()).norm() < 1e-12);
      } else {
        const auto& a = std::get<ContactParam>(g.params[v]);
        const auto& b = std::get<ContactParam>(back.params[v]);
        CHECK(a.parent_face == b.parent_face);
        CHECK(a.child_face == b.child_face);
        CHECK(std::abs(a.coords.a - b.coords.a) < 1e-12);
        CHECK(std::abs(a.coords.z - b.coords.z) < 1e-12);
        CHECK((a.coords.eta - b.coords.eta).norm() < 1e-12);
        CHECK(std::abs(a.coords.phi - b.coords.phi) < 1e-12);
      }
    }
  }
}

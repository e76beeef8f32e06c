#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "lsc/hcomm.hpp"
#include "lsc/rng.hpp"
#include "oracles.hpp"

using namespace lsc;
using namespace lsc::hcomm;
using numcore::Mlp;
using numcore::ParamSet;
using numcore::Tape;
using numcore::Tensor;
using topology::Edge;
using topology::Role;
using topology::Topology;

namespace {

GnnConfig spread_cfg(int n_agents = 5, int n_landmarks = 2) {
  env::ScenarioConfig sc;
  sc.scenario = env::Scenario::spread;
  sc.n_agents = n_agents;
  sc.n_landmarks = n_landmarks;
  return GnnConfig::for_scenario(sc);
}

GnnConfig battle_cfg() {
  env::ScenarioConfig sc;
  sc.scenario = env::Scenario::battle;
  return GnnConfig::for_scenario(sc);
}

Tensor random_obs(const GnnConfig& cfg, int n, Rng& rng) {
  Tensor t = Tensor::zeros({n, cfg.obs_dim});
  for (double& v : t.data) v = rng.uniform(-1, 1);
  return t;
}

// Two groups: leader 0 with followers 1,2 and leader 3 with follower 4.
Topology two_groups() {
  Topology t;
  t.kind = topology::Kind::hierarchical;
  t.agents = {0, 1, 2, 3, 4};
  t.roles = {Role::high, Role::low, Role::low, Role::high, Role::low};
  t.edges = {{0, 1}, {0, 2}, {0, 3}, {1, 0}, {2, 0}, {3, 0}, {3, 4}, {4, 3}};
  std::sort(t.edges.begin(), t.edges.end());
  return t;
}

Topology none_topo(int n) {
  Topology t;
  t.kind = topology::Kind::none;
  for (int i = 0; i < n; ++i) t.agents.push_back(i);
  t.roles.assign(static_cast<size_t>(n), Role::low);
  return t;
}

std::vector<double> row_of(const Tensor& m, int64_t r) {
  return {m.data.begin() + r * m.cols(), m.data.begin() + (r + 1) * m.cols()};
}

}  // namespace

TEST_CASE("encode: parameter sharing gives identical embeddings for identical inputs") {
  const GnnConfig cfg = spread_cfg();
  ParamSet ps;
  init_policy_params(cfg, ps, 7);
  Rng rng(1);
  Tensor obs = random_obs(cfg, 3, rng);
  for (int j = 0; j < cfg.obs_dim; ++j) obs.at(2, j) = obs.at(0, j);
  Tape t;
  const int emb = encode(t, cfg, ps, t.input(obs));
  CHECK(t.value(emb).shape == std::vector<int64_t>{3, cfg.hidden});
  CHECK(row_of(t.value(emb), 0) == row_of(t.value(emb), 2));
  CHECK(row_of(t.value(emb), 0) != row_of(t.value(emb), 1));
}

TEST_CASE("encode: zero observation stays finite and embedding width is the hidden size") {
  for (const GnnConfig& cfg : {spread_cfg(), battle_cfg()}) {
    ParamSet ps;
    init_policy_params(cfg, ps, 7);
    Tape t;
    const int emb = encode(t, cfg, ps, t.input(Tensor::zeros({2, cfg.obs_dim})));
    CHECK(t.value(emb).shape == std::vector<int64_t>{2, cfg.hidden});
    CHECK(t.value(emb).all_finite());
  }
}

TEST_CASE("intra_aggregate: leader with no followers folds in the zero aggregate") {
  const GnnConfig cfg = spread_cfg();
  ParamSet ps;
  init_policy_params(cfg, ps, 9);
  Topology topo;
  topo.kind = topology::Kind::hierarchical;
  topo.agents = {0, 1, 2};
  topo.roles = {Role::high, Role::low, Role::high};  // leader 2 has no followers
  topo.edges = {{0, 1}, {1, 0}, {0, 2}, {2, 0}};
  std::sort(topo.edges.begin(), topo.edges.end());
  Rng rng(2);
  const Tensor obs = random_obs(cfg, 3, rng);

  Tape t;
  const int emb = encode(t, cfg, ps, t.input(obs));
  const NodeFeatures nf = intra_aggregate(t, cfg, ps, emb, topo);
  REQUIRE(nf.leaders == std::vector<int>{0, 2});

  // Manual route: up_node(concat(zeros, embed_2)).
  const int zero = t.input(Tensor::zeros({1, cfg.msg_dim}));
  std::vector<int32_t> take2;
  for (int j = 0; j < cfg.hidden; ++j) take2.push_back(static_cast<int32_t>(2 * cfg.hidden + j));
  const int e2 = t.take(emb, take2, 1, cfg.hidden);
  Mlp up_node{"phi.up_node", {cfg.msg_dim + cfg.hidden, cfg.hidden}, true};
  const int manual = up_node.apply(t, ps, t.concat_cols({zero, e2}));
  CHECK(row_of(t.value(nf.cluster), 1) == row_of(t.value(manual), 0));
}

TEST_CASE("intra_aggregate: duplicate followers double the aggregate") {
  const GnnConfig cfg = spread_cfg();
  ParamSet ps;
  init_policy_params(cfg, ps, 11);
  Rng rng(3);
  Tensor obs = random_obs(cfg, 3, rng);
  for (int j = 0; j < cfg.obs_dim; ++j) obs.at(2, j) = obs.at(1, j);  // identical followers

  Topology one;
  one.kind = topology::Kind::hierarchical;
  one.agents = {0, 1, 2};
  one.roles = {Role::high, Role::low, Role::low};
  one.edges = {{0, 1}, {1, 0}, {0, 2}, {2, 0}};
  std::sort(one.edges.begin(), one.edges.end());

  Tape t;
  const int emb = encode(t, cfg, ps, t.input(obs));
  const NodeFeatures nf = intra_aggregate(t, cfg, ps, emb, one);

  // Manual route: the aggregate is exactly twice one follower's message.
  std::vector<int32_t> take1;
  for (int j = 0; j < cfg.hidden; ++j) take1.push_back(static_cast<int32_t>(cfg.hidden + j));
  const int e1 = t.take(emb, take1, 1, cfg.hidden);
  Mlp up_edge{"phi.up_edge", {cfg.hidden, cfg.msg_dim}, true};
  const int msg = up_edge.apply(t, ps, e1);
  const int doubled = t.scale(msg, 2.0);
  std::vector<int32_t> take0;
  for (int j = 0; j < cfg.hidden; ++j) take0.push_back(static_cast<int32_t>(j));
  const int e0 = t.take(emb, take0, 1, cfg.hidden);
  Mlp up_node{"phi.up_node", {cfg.msg_dim + cfg.hidden, cfg.hidden}, true};
  const int manual = up_node.apply(t, ps, t.concat_cols({doubled, e0}));
  CHECK(row_of(t.value(nf.cluster), 0) == row_of(t.value(manual), 0));
}

TEST_CASE("intra_aggregate: follower permutation leaves the cluster perception unchanged") {
  const GnnConfig cfg = spread_cfg(7, 2);
  ParamSet ps;
  init_policy_params(cfg, ps, 13);
  Rng rng(5);
  const Tensor obs = random_obs(cfg, 4, rng);
  Topology topo;
  topo.kind = topology::Kind::hierarchical;
  topo.agents = {0, 1, 2, 3};
  topo.roles = {Role::high, Role::low, Role::low, Role::low};
  topo.edges = {{0, 1}, {1, 0}, {0, 2}, {2, 0}, {0, 3}, {3, 0}};
  std::sort(topo.edges.begin(), topo.edges.end());

  Tape ta;
  const NodeFeatures a = intra_aggregate(ta, cfg, ps, encode(ta, cfg, ps, ta.input(obs)), topo);

  // Permute the three follower observations (rows 1..3 -> 3,1,2).
  Tensor perm = obs;
  for (int j = 0; j < cfg.obs_dim; ++j) {
    perm.at(1, j) = obs.at(3, j);
    perm.at(2, j) = obs.at(1, j);
    perm.at(3, j) = obs.at(2, j);
  }
  Tape tb;
  const NodeFeatures b = intra_aggregate(tb, cfg, ps, encode(tb, cfg, ps, tb.input(perm)), topo);
  const auto ra = row_of(ta.value(a.cluster), 0), rb = row_of(tb.value(b.cluster), 0);
  for (size_t i = 0; i < ra.size(); ++i) CHECK(ra[i] == doctest::Approx(rb[i]).epsilon(1e-12));
}

TEST_CASE("inter_share: lone leader derives its global view from the zero aggregate") {
  const GnnConfig cfg = spread_cfg();
  ParamSet ps;
  init_policy_params(cfg, ps, 15);
  Rng rng(6);
  const Tensor obs = random_obs(cfg, 2, rng);
  Topology topo;
  topo.kind = topology::Kind::hierarchical;
  topo.agents = {0, 1};
  topo.roles = {Role::high, Role::low};
  topo.edges = {{0, 1}, {1, 0}};
  std::sort(topo.edges.begin(), topo.edges.end());

  Tape t;
  const int emb = encode(t, cfg, ps, t.input(obs));
  NodeFeatures nf = intra_aggregate(t, cfg, ps, emb, topo);
  inter_share(t, cfg, ps, nf, topo);

  const int zero = t.input(Tensor::zeros({1, cfg.msg_dim}));
  std::vector<int32_t> take0;
  for (int j = 0; j < cfg.hidden; ++j) take0.push_back(static_cast<int32_t>(j));
  const int e0 = t.take(emb, take0, 1, cfg.hidden);
  Mlp inter_node{"phi.inter_node", {cfg.msg_dim + cfg.hidden, cfg.hidden}, true};
  const int manual = inter_node.apply(t, ps, t.concat_cols({zero, e0}));
  CHECK(row_of(t.value(nf.global), 0) == row_of(t.value(manual), 0));
}

TEST_CASE("inter_share: symmetric leaders obtain identical global views") {
  const GnnConfig cfg = spread_cfg();
  ParamSet ps;
  init_policy_params(cfg, ps, 17);
  Rng rng(7);
  Tensor obs = random_obs(cfg, 2, rng);
  for (int j = 0; j < cfg.obs_dim; ++j) obs.at(1, j) = obs.at(0, j);
  Topology topo;
  topo.kind = topology::Kind::hierarchical;
  topo.agents = {0, 1};
  topo.roles = {Role::high, Role::high};
  topo.edges = {{0, 1}, {1, 0}};
  std::sort(topo.edges.begin(), topo.edges.end());

  Tape t;
  NodeFeatures nf = intra_aggregate(t, cfg, ps, encode(t, cfg, ps, t.input(obs)), topo);
  inter_share(t, cfg, ps, nf, topo);
  CHECK(row_of(t.value(nf.global), 0) == row_of(t.value(nf.global), 1));
}

TEST_CASE("inter_share: a leader's global view ignores relabeling of its peers") {
  const GnnConfig cfg = spread_cfg(6, 2);
  ParamSet ps;
  init_policy_params(cfg, ps, 19);
  Rng rng(8);
  const Tensor obs = random_obs(cfg, 3, rng);
  Topology topo;
  topo.kind = topology::Kind::hierarchical;
  topo.agents = {0, 1, 2};
  topo.roles = {Role::high, Role::high, Role::high};
  topo.edges = {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}};
  std::sort(topo.edges.begin(), topo.edges.end());

  Tape ta;
  NodeFeatures a = intra_aggregate(ta, cfg, ps, encode(ta, cfg, ps, ta.input(obs)), topo);
  inter_share(ta, cfg, ps, a, topo);

  Tensor swapped = obs;  // swap leaders 1 and 2
  for (int j = 0; j < cfg.obs_dim; ++j) {
    swapped.at(1, j) = obs.at(2, j);
    swapped.at(2, j) = obs.at(1, j);
  }
  Tape tb;
  NodeFeatures b = intra_aggregate(tb, cfg, ps, encode(tb, cfg, ps, tb.input(swapped)), topo);
  inter_share(tb, cfg, ps, b, topo);
  const auto ra = row_of(ta.value(a.global), 0), rb = row_of(tb.value(b.global), 0);
  for (size_t i = 0; i < ra.size(); ++i) CHECK(ra[i] == doctest::Approx(rb[i]).epsilon(1e-12));
}

TEST_CASE("intra_share: isolated follower keeps its embedding, leaders self-update") {
  const GnnConfig cfg = spread_cfg();
  ParamSet ps;
  init_policy_params(cfg, ps, 21);
  Rng rng(9);
  const Tensor obs = random_obs(cfg, 3, rng);
  Topology topo;  // agent 2 is a follower with no leader edge
  topo.kind = topology::Kind::hierarchical;
  topo.agents = {0, 1, 2};
  topo.roles = {Role::high, Role::low, Role::low};
  topo.edges = {{0, 1}, {1, 0}};
  std::sort(topo.edges.begin(), topo.edges.end());

  Tape t;
  const int emb = encode(t, cfg, ps, t.input(obs));
  NodeFeatures nf = intra_aggregate(t, cfg, ps, emb, topo);
  inter_share(t, cfg, ps, nf, topo);
  const int out = intra_share(t, cfg, ps, nf, topo);
  CHECK(row_of(t.value(out), 2) == row_of(t.value(emb), 2));
  CHECK(row_of(t.value(out), 1) != row_of(t.value(emb), 1));

  // Leader row equals down_node(down_edge(global, cluster, embed), embed).
  Mlp down_edge{"phi.down_edge", {3 * cfg.hidden, cfg.msg_dim}, true};
  Mlp down_node{"phi.down_node", {cfg.msg_dim + cfg.hidden, cfg.hidden}, true};
  std::vector<int32_t> take0;
  for (int j = 0; j < cfg.hidden; ++j) take0.push_back(static_cast<int32_t>(j));
  const int e0 = t.take(emb, take0, 1, cfg.hidden);
  const int g0 = t.take(nf.global, take0, 1, cfg.hidden);
  const int c0 = t.take(nf.cluster, take0, 1, cfg.hidden);
  const int msg = down_edge.apply(t, ps, t.concat_cols({g0, c0, e0}));
  const int manual = down_node.apply(t, ps, t.concat_cols({msg, e0}));
  CHECK(row_of(t.value(out), 0) == row_of(t.value(manual), 0));
}

TEST_CASE("intra_share: co-followers of one leader receive identical payloads") {
  const GnnConfig cfg = spread_cfg();
  ParamSet ps;
  init_policy_params(cfg, ps, 23);
  Rng rng(10);
  const Tensor obs = random_obs(cfg, 5, rng);
  const Topology topo = two_groups();
  Tape t;
  Probe probe;
  (void)hcomm_forward(t, cfg, ps, obs, topo, &probe);
  std::vector<double> to1, to2;
  for (const Probe::Msg& m : probe.messages) {
    if (m.phase != "down") continue;
    if (m.src == 0 && m.dst == 1) to1 = m.payload;
    if (m.src == 0 && m.dst == 2) to2 = m.payload;
  }
  REQUIRE_FALSE(to1.empty());
  CHECK(to1 == to2);
}

TEST_CASE("hcomm_forward: no communication degenerates to per-agent Q of the encoding") {
  const GnnConfig cfg = spread_cfg();
  ParamSet ps;
  init_policy_params(cfg, ps, 25);
  Rng rng(11);
  const Tensor obs = random_obs(cfg, 5, rng);
  Tape t;
  const int q = hcomm_forward(t, cfg, ps, obs, none_topo(5));
  CHECK(t.value(q).shape == std::vector<int64_t>{5, cfg.action_count});

  Tape t2;
  Mlp qhead{"q", {cfg.hidden, 64, 64, cfg.action_count}, false};
  const int manual = qhead.apply(t2, ps, encode(t2, cfg, ps, t2.input(obs)));
  CHECK(t.value(q).data == t2.value(manual).data);
}

TEST_CASE("hcomm_forward: battle head width matches the battle action space") {
  const GnnConfig cfg = battle_cfg();
  ParamSet ps;
  init_policy_params(cfg, ps, 27);
  Rng rng(12);
  const Tensor obs = random_obs(cfg, 3, rng);
  Tape t;
  const int q = hcomm_forward(t, cfg, ps, obs, none_topo(3));
  env::ScenarioConfig sc;
  sc.scenario = env::Scenario::battle;
  CHECK(t.value(q).cols() == sc.action_count(env::Team::ally));
}

TEST_CASE("hcomm_forward: without edges a perturbed agent only moves its own Q") {
  const GnnConfig cfg = spread_cfg();
  ParamSet ps;
  init_policy_params(cfg, ps, 29);
  Rng rng(13);
  const Tensor obs = random_obs(cfg, 5, rng);
  Tensor bumped = obs;
  bumped.at(2, 0) += 0.5;
  Tape ta, tb;
  const int qa = hcomm_forward(ta, cfg, ps, obs, none_topo(5));
  const int qb = hcomm_forward(tb, cfg, ps, bumped, none_topo(5));
  for (int i = 0; i < 5; ++i) {
    if (i == 2) CHECK(row_of(ta.value(qa), i) != row_of(tb.value(qb), i));
    else CHECK(row_of(ta.value(qa), i) == row_of(tb.value(qb), i));
  }
}

TEST_CASE("hcomm_forward: hierarchical pass reaches every agent in one step") {
  // Perturbing the group-2 follower must be able to move every Q row: its
  // message climbs to leader 3, crosses to leader 0 and descends to 1 and 2.
  // Relu gates on the narrow message channels can eat one-sided bumps, so a
  // whole-row shift in either direction counts as reaching an agent.
  const GnnConfig cfg = spread_cfg();
  ParamSet ps;
  init_policy_params(cfg, ps, 31);
  // Make every message-function relu transparent by forcing the phi weights
  // non-negative: the feature tensors they consume are already non-negative,
  // so any embedding change must propagate through the whole hierarchy and
  // the check probes the wiring rather than relu luck at one random init.
  ParamSet open_gates = ps.clone();
  for (auto& [name, e] : open_gates.entries)
    if (name.rfind("phi.", 0) == 0)
      for (double& v : e.value.data) v = std::abs(v);

  Rng rng(14);
  const Tensor obs = random_obs(cfg, 5, rng);
  const Topology topo = two_groups();
  Tensor up = obs;
  for (int j = 0; j < cfg.obs_dim; ++j) up.at(4, j) += 3.0;

  Tape ta, tu;
  const int qa = hcomm_forward(ta, cfg, open_gates, obs, topo);
  const int qu = hcomm_forward(tu, cfg, open_gates, up, topo);
  for (int i = 0; i < 5; ++i) CHECK(row_of(ta.value(qa), i) != row_of(tu.value(qu), i));

  // And with no edges the same perturbation stays confined to the agent.
  Tape tn, tm;
  const int qn = hcomm_forward(tn, cfg, ps, obs, none_topo(5));
  const int qm = hcomm_forward(tm, cfg, ps, up, none_topo(5));
  for (int i = 0; i < 4; ++i) CHECK(row_of(tn.value(qn), i) == row_of(tm.value(qm), i));
  CHECK(row_of(tn.value(qn), 4) != row_of(tm.value(qm), 4));
}

TEST_CASE("hcomm_forward: relabeling followers inside a group permutes their rows only") {
  const GnnConfig cfg = spread_cfg();
  ParamSet ps;
  init_policy_params(cfg, ps, 33);
  Rng rng(15);
  const Tensor obs = random_obs(cfg, 5, rng);
  Tensor swapped = obs;  // agents 1 and 2 are both followers of leader 0
  for (int j = 0; j < cfg.obs_dim; ++j) {
    swapped.at(1, j) = obs.at(2, j);
    swapped.at(2, j) = obs.at(1, j);
  }
  const Topology topo = two_groups();
  Tape ta, tb;
  const int qa = hcomm_forward(ta, cfg, ps, obs, topo);
  const int qb = hcomm_forward(tb, cfg, ps, swapped, topo);
  for (int i = 0; i < 5; ++i) {
    const int j = i == 1 ? 2 : i == 2 ? 1 : i;
    const auto ra = row_of(ta.value(qa), i), rb = row_of(tb.value(qb), j);
    for (size_t c = 0; c < ra.size(); ++c) CHECK(ra[c] == doctest::Approx(rb[c]).epsilon(1e-12));
  }
}

TEST_CASE("hcomm_forward: deterministic and rejects mismatched rows") {
  const GnnConfig cfg = spread_cfg();
  ParamSet ps;
  init_policy_params(cfg, ps, 35);
  Rng rng(16);
  const Tensor obs = random_obs(cfg, 5, rng);
  const Topology topo = two_groups();
  Tape ta, tb;
  CHECK(ta.value(hcomm_forward(ta, cfg, ps, obs, topo)).data ==
        tb.value(hcomm_forward(tb, cfg, ps, obs, topo)).data);
  Tape tc;
  CHECK_THROWS_AS(hcomm_forward(tc, cfg, ps, random_obs(cfg, 4, rng), topo), NumericError);
}

TEST_CASE("hcomm_forward: gradients through the full pass match finite differences") {
  const GnnConfig cfg = spread_cfg();
  ParamSet ps;
  init_policy_params(cfg, ps, 37);
  Rng rng(17);
  const Tensor obs = random_obs(cfg, 5, rng);
  const Topology topo = two_groups();

  auto loss = [&] {
    Tape t;
    return t.value(t.reduce_sum(t.square(hcomm_forward(t, cfg, ps, obs, topo)))).data[0];
  };
  auto grads = [&] {
    Tape t;
    const int l = t.reduce_sum(t.square(hcomm_forward(t, cfg, ps, obs, topo)));
    t.backward(l, Tensor::row({1.0}), ps);
  };
  // Sample a handful of elements from every entry.
  std::vector<std::pair<std::string, size_t>> picks;
  Rng pick_rng(18);
  for (const auto& [name, e] : ps.entries)
    for (int s = 0; s < 4; ++s)
      picks.emplace_back(name,
                         static_cast<size_t>(pick_rng.next_int(static_cast<int>(e.value.data.size()))));
  CHECK(oracles::fd_check_sampled(ps, loss, grads, picks) < 1e-4);
}

TEST_CASE("hcomm_forward: optional reverse payload changes the down phase only") {
  GnnConfig cfg = spread_cfg();
  cfg.down_edge_includes_reverse = true;
  ParamSet ps;
  init_policy_params(cfg, ps, 39);
  Rng rng(19);
  const Tensor obs = random_obs(cfg, 5, rng);
  Tape t;
  const int q = hcomm_forward(t, cfg, ps, obs, two_groups());
  CHECK(t.value(q).all_finite());
  CHECK(ps.value("phi.down_edge.w0").shape[0] == 3 * cfg.hidden + cfg.msg_dim);
}

TEST_CASE("weightgen_forward: three outputs per agent from its own view only") {
  const GnnConfig cfg = spread_cfg();
  ParamSet ps;
  init_weightgen_params(cfg, ps, 41);
  Rng rng(20);
  const Tensor obs = random_obs(cfg, 4, rng);
  Tape t;
  const int q = weightgen_forward(t, cfg, ps, obs);
  CHECK(t.value(q).shape == std::vector<int64_t>{4, 3});
  Tensor bumped = obs;
  bumped.at(1, 0) += 1.0;
  Tape tb;
  const int qb = weightgen_forward(tb, cfg, ps, bumped);
  CHECK(row_of(t.value(q), 0) == row_of(tb.value(qb), 0));
  CHECK(row_of(t.value(q), 1) != row_of(tb.value(qb), 1));
}

#include "lsc/topology.hpp"

#include <algorithm>
#include <cmath>

namespace lsc::topology {

Kind kind_from_string(const std::string& s) {
  if (s == "hierarchical") return Kind::hierarchical;
  if (s == "fully-connected") return Kind::fully_connected;
  if (s == "star") return Kind::star;
  if (s == "neighboring") return Kind::neighboring;
  if (s == "tree") return Kind::tree;
  if (s == "none") return Kind::none;
  throw ConfigError("topology: unknown kind: " + s);
}

std::string to_string(Kind k) {
  switch (k) {
    case Kind::hierarchical: return "hierarchical";
    case Kind::fully_connected: return "fully-connected";
    case Kind::star: return "star";
    case Kind::neighboring: return "neighboring";
    case Kind::tree: return "tree";
    case Kind::none: return "none";
  }
  return "?";
}

std::vector<int> Topology::high_level() const {
  std::vector<int> out;
  for (size_t i = 0; i < agents.size(); ++i)
    if (roles[i] == Role::high) out.push_back(agents[i]);
  return out;
}

std::vector<int> Topology::low_level() const {
  std::vector<int> out;
  for (size_t i = 0; i < agents.size(); ++i)
    if (roles[i] == Role::low) out.push_back(agents[i]);
  return out;
}

bool Topology::has_edge(int src, int dst) const {
  return std::binary_search(edges.begin(), edges.end(), Edge{src, dst});
}

int Topology::index_of(int agent) const {
  const auto it = std::lower_bound(agents.begin(), agents.end(), agent);
  if (it == agents.end() || *it != agent) return -1;
  return static_cast<int>(it - agents.begin());
}

std::vector<Topology::Group> Topology::groups() const {
  std::vector<Group> out;
  for (size_t i = 0; i < agents.size(); ++i)
    if (roles[i] == Role::high) out.push_back({agents[i], {agents[i]}});
  auto group_of = [&](int leader) -> Group* {
    for (auto& g : out)
      if (g.leader == leader) return &g;
    return nullptr;
  };
  // A follower joins the group of the lowest-id leader it reports to; the
  // election attaches each follower to exactly one leader.
  for (size_t i = 0; i < agents.size(); ++i) {
    if (roles[i] != Role::low) continue;
    for (const Edge& e : edges) {
      if (e.src != agents[i]) continue;
      const int j = index_of(e.dst);
      if (j >= 0 && roles[static_cast<size_t>(j)] == Role::high) {
        group_of(e.dst)->members.push_back(agents[i]);
        break;
      }
    }
  }
  for (auto& g : out) std::sort(g.members.begin(), g.members.end());
  return out;
}

WeightAssignment fixed_weights(int num_agents, int level) {
  if (level < 0 || level > 2) throw ConfigError("fixed_weights: level must be in {0,1,2}");
  WeightAssignment w;
  w.weights.assign(static_cast<size_t>(num_agents), level);
  return w;
}

void ClusterConfig::validate() const {
  if (radius <= 0) throw ConfigError("cluster: radius must be positive");
  if (max_wait_rounds < 1) throw ConfigError("cluster: max_wait_rounds must be >= 1");
  if (rounds_cap < 2 * max_wait_rounds)
    throw ConfigError("cluster: rounds_cap must be >= 2 * max_wait_rounds");
}

namespace {

enum class Phase : uint8_t { low, high, undecided };

// j beats i when it has strictly larger weight, ties going to the lower id.
bool dominates(int wj, int idj, int wi, int idi) {
  return wj > wi || (wj == wi && idj < idi);
}

}  // namespace

Topology cbrp(const Topology& prev, std::span<const int> agent_ids,
              std::span<const int> weights, std::span<const Vec2> positions,
              const ClusterConfig& cfg) {
  cfg.validate();
  const size_t n = agent_ids.size();
  if (weights.size() != n || positions.size() != n)
    throw ConfigError("cbrp: weights/positions must cover all live agents");

  const double r2 = cfg.radius * cfg.radius;
  auto in_radius = [&](size_t a, size_t b) { return dist2(positions[a], positions[b]) < r2; };

  std::vector<Phase> phase(n, Phase::low);
  for (size_t i = 0; i < n; ++i) {
    const int at = prev.index_of(agent_ids[i]);
    if (at >= 0 && prev.roles[static_cast<size_t>(at)] == Role::high) phase[i] = Phase::high;
  }

  // Maintenance: demotions read a snapshot so simultaneous checks cannot
  // depend on iteration order; followers left without a leader in radius
  // become undecided.
  {
    const std::vector<Phase> snap = phase;
    for (size_t i = 0; i < n; ++i) {
      if (snap[i] != Phase::high) continue;
      for (size_t j = 0; j < n; ++j) {
        if (j == i || snap[j] != Phase::high || !in_radius(i, j)) continue;
        if (weights[j] > weights[i]) {
          phase[i] = Phase::low;
          break;
        }
      }
    }
    for (size_t i = 0; i < n; ++i) {
      if (phase[i] != Phase::low) continue;
      bool covered = false;
      for (size_t j = 0; j < n && !covered; ++j)
        covered = j != i && phase[j] == Phase::high && in_radius(i, j);
      if (!covered) phase[i] = Phase::undecided;
    }
  }

  // Election: synchronous rounds with a global round counter standing in for
  // the per-agent waiting timer. An undecided agent promotes itself after
  // max_wait_rounds consecutive rounds without a dominating undecided/high
  // neighbor; its broadcast turns in-radius undecided peers into followers.
  std::vector<int> clean_rounds(n, 0);
  int rounds = 0;
  while (true) {
    bool any_undecided = false;
    for (size_t i = 0; i < n; ++i) any_undecided |= phase[i] == Phase::undecided;
    if (!any_undecided) break;
    if (++rounds > cfg.rounds_cap)
      throw ProtocolError("cbrp: election exceeded rounds_cap without converging");

    std::vector<size_t> promoted;
    for (size_t i = 0; i < n; ++i) {
      if (phase[i] != Phase::undecided) continue;
      bool dominated = false;
      for (size_t j = 0; j < n && !dominated; ++j) {
        if (j == i || phase[j] == Phase::low || !in_radius(i, j)) continue;
        dominated = dominates(weights[j], agent_ids[j], weights[i], agent_ids[i]);
      }
      clean_rounds[i] = dominated ? 0 : clean_rounds[i] + 1;
      if (clean_rounds[i] >= cfg.max_wait_rounds) promoted.push_back(i);
    }
    for (size_t i : promoted) phase[i] = Phase::high;
    if (!promoted.empty()) {
      for (size_t i = 0; i < n; ++i) {
        if (phase[i] != Phase::undecided) continue;
        for (size_t p : promoted) {
          if (in_radius(i, p)) {
            phase[i] = Phase::low;
            break;
          }
        }
      }
    }
  }

  Topology out;
  out.kind = Kind::hierarchical;
  out.agents.assign(agent_ids.begin(), agent_ids.end());
  out.roles.resize(n);
  for (size_t i = 0; i < n; ++i) out.roles[i] = phase[i] == Phase::high ? Role::high : Role::low;

  // Links: every follower reports to its nearest in-radius leader (ties to
  // the lower id) so groups partition the agents; leaders form a complete
  // directed graph regardless of distance.
  for (size_t i = 0; i < n; ++i) {
    if (out.roles[i] != Role::low) continue;
    int best = -1;
    double best_d = 0.0;
    for (size_t j = 0; j < n; ++j) {
      if (out.roles[j] != Role::high || !in_radius(i, j)) continue;
      const double d = dist2(positions[i], positions[j]);
      if (best < 0 || d < best_d || (d == best_d && agent_ids[j] < best)) {
        best = agent_ids[j];
        best_d = d;
      }
    }
    if (best >= 0) {
      out.edges.push_back({agent_ids[i], best});
      out.edges.push_back({best, agent_ids[i]});
    }
  }
  for (size_t i = 0; i < n; ++i) {
    if (out.roles[i] != Role::high) continue;
    for (size_t j = 0; j < n; ++j)
      if (j != i && out.roles[j] == Role::high) out.edges.push_back({agent_ids[i], agent_ids[j]});
  }
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

std::vector<std::vector<int>> radius_components(std::span<const int> agent_ids,
                                                std::span<const Vec2> positions, double radius) {
  const size_t n = agent_ids.size();
  const double r2 = radius * radius;
  std::vector<int> comp(n, -1);
  int next = 0;
  for (size_t i = 0; i < n; ++i) {
    if (comp[i] >= 0) continue;
    std::vector<size_t> stack{i};
    comp[i] = next;
    while (!stack.empty()) {
      const size_t cur = stack.back();
      stack.pop_back();
      for (size_t j = 0; j < n; ++j) {
        if (comp[j] >= 0 || dist2(positions[cur], positions[j]) >= r2) continue;
        comp[j] = next;
        stack.push_back(j);
      }
    }
    ++next;
  }
  std::vector<std::vector<int>> out(static_cast<size_t>(next));
  for (size_t i = 0; i < n; ++i) out[static_cast<size_t>(comp[i])].push_back(agent_ids[i]);
  for (auto& c : out) std::sort(c.begin(), c.end());
  return out;
}

Topology build_baseline(Kind kind, std::span<const int> agent_ids,
                        std::span<const Vec2> positions, double radius) {
  const size_t n = agent_ids.size();
  Topology out;
  out.kind = kind;
  out.agents.assign(agent_ids.begin(), agent_ids.end());
  out.roles.assign(n, Role::low);

  switch (kind) {
    case Kind::fully_connected:
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
          if (i != j) out.edges.push_back({agent_ids[i], agent_ids[j]});
      break;
    case Kind::star: {
      if (n == 0) break;
      const int hub = agent_ids[0];  // lowest live id
      out.roles[0] = Role::high;
      for (size_t j = 1; j < n; ++j) {
        out.edges.push_back({agent_ids[j], hub});
        out.edges.push_back({hub, agent_ids[j]});
      }
      break;
    }
    case Kind::neighboring:
    case Kind::tree: {
      const double r2 = radius * radius;
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
          if (i != j && dist2(positions[i], positions[j]) < r2)
            out.edges.push_back({agent_ids[i], agent_ids[j]});
      break;
    }
    case Kind::none:
      break;
    case Kind::hierarchical:
      throw ConfigError("build_baseline: hierarchical structure comes from cbrp");
  }
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

bool satisfies_invariants(const Topology& topo, std::span<const int> weights,
                          std::span<const Vec2> positions, double radius, std::string* why) {
  auto fail = [&](const char* msg) {
    if (why) *why = msg;
    return false;
  };
  const size_t n = topo.agents.size();
  if (topo.roles.size() != n || weights.size() != n || positions.size() != n)
    return fail("size mismatch");
  const double r2 = radius * radius;
  for (const Edge& e : topo.edges)
    if (topo.index_of(e.src) < 0 || topo.index_of(e.dst) < 0)
      return fail("edge endpoint not live");
  for (size_t i = 0; i < n; ++i) {
    if (topo.roles[i] != Role::high) continue;
    for (size_t j = 0; j < n; ++j)
      if (j != i && topo.roles[j] == Role::high && dist2(positions[i], positions[j]) < r2 &&
          weights[j] > weights[i])
        return fail("dominated leader within radius");
  }
  for (size_t i = 0; i < n; ++i) {
    if (topo.roles[i] != Role::low) continue;
    bool near = false, linked = false;
    for (size_t j = 0; j < n; ++j)
      if (j != i && topo.roles[j] == Role::high && dist2(positions[i], positions[j]) < r2)
        near = true;
    for (const Edge& e : topo.edges) {
      if (e.src != topo.agents[i]) continue;
      const int j = topo.index_of(e.dst);
      if (j >= 0 && topo.roles[static_cast<size_t>(j)] == Role::high) linked = true;
    }
    if (near && !linked) return fail("uncovered follower");
  }
  return true;
}

namespace {

CostReport hierarchical_cost(const Topology& topo) {
  CostReport rep;
  const auto groups = topo.groups();
  const long k = static_cast<long>(groups.size());
  rep.k = static_cast<int>(k);
  long followers = 0;
  long max_band = 0;
  for (const auto& g : groups) {
    const long sz = static_cast<long>(g.members.size());
    rep.b = std::max(rep.b, static_cast<int>(sz));
    followers += sz - 1;
    // Leader: one message up and down per follower plus inter-leader traffic
    // both ways; follower: one up, one down.
    max_band = std::max(max_band, 2 * (sz - 1) + 2 * (k - 1));
    if (sz > 1) max_band = std::max(max_band, 2L);
  }
  rep.n_msg = 2 * followers + k * (k - 1);
  rep.n_step = 1;
  rep.n_bandwidth = max_band;
  return rep;
}

}  // namespace

CostReport account_cost(const Topology& topo) {
  const long n = static_cast<long>(topo.agents.size());
  CostReport rep;
  switch (topo.kind) {
    case Kind::hierarchical:
      return hierarchical_cost(topo);
    case Kind::fully_connected:
      rep.n_msg = n * (n - 1);
      rep.n_step = 1;
      rep.n_bandwidth = n > 1 ? 2 * (n - 1) : 0;
      rep.k = n > 0 ? 1 : 0;
      rep.b = static_cast<int>(n);
      return rep;
    case Kind::star:
      rep.n_msg = n > 1 ? 2 * (n - 1) : 0;
      rep.n_step = 1;
      rep.n_bandwidth = n > 1 ? 2 * (n - 1) : 0;  // the hub touches every message
      rep.k = n > 0 ? 1 : 0;
      rep.b = static_cast<int>(n);
      return rep;
    case Kind::neighboring:
    case Kind::tree: {
      rep.n_msg = static_cast<long>(topo.edges.size());
      std::vector<long> band(static_cast<size_t>(n), 0);
      for (const Edge& e : topo.edges) {
        band[static_cast<size_t>(topo.index_of(e.src))] += 1;
        band[static_cast<size_t>(topo.index_of(e.dst))] += 1;
      }
      for (long bl : band) rep.n_bandwidth = std::max(rep.n_bandwidth, bl);
      // Groups are the connected components of the edge list; the tree
      // variant communicates those groups one after another.
      std::vector<int> comp(static_cast<size_t>(n), -1);
      int next = 0;
      for (size_t i = 0; i < topo.agents.size(); ++i) {
        if (comp[i] >= 0) continue;
        std::vector<size_t> stack{i};
        comp[i] = next;
        while (!stack.empty()) {
          const size_t cur = stack.back();
          stack.pop_back();
          for (const Edge& e : topo.edges) {
            if (e.src != topo.agents[cur]) continue;
            const size_t j = static_cast<size_t>(topo.index_of(e.dst));
            if (comp[j] < 0) {
              comp[j] = next;
              stack.push_back(j);
            }
          }
        }
        ++next;
      }
      rep.k = next;
      std::vector<int> sizes(static_cast<size_t>(next), 0);
      for (int c : comp) sizes[static_cast<size_t>(c)] += 1;
      for (int s : sizes) rep.b = std::max(rep.b, s);
      rep.n_step = topo.kind == Kind::tree ? next : 1;
      return rep;
    }
    case Kind::none:
      rep.n_msg = 0;
      rep.n_step = 1;
      rep.n_bandwidth = 0;
      rep.k = static_cast<int>(n);
      rep.b = n > 0 ? 1 : 0;
      return rep;
  }
  return rep;
}

}  // namespace lsc::topology

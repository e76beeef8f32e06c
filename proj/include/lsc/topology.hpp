#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lsc/common.hpp"

namespace lsc::topology {

enum class Kind : uint8_t { hierarchical, fully_connected, star, neighboring, tree, none };

Kind kind_from_string(const std::string& s);
std::string to_string(Kind k);

enum class Role : uint8_t { low, high };

struct Edge {
  int src;
  int dst;
  bool operator==(const Edge&) const = default;
  bool operator<(const Edge& o) const { return src != o.src ? src < o.src : dst < o.dst; }
};

// Communication graph over the live agents. `agents` is ascending; `roles`
// is parallel to it. Edges are stored sorted for deterministic iteration.
struct Topology {
  Kind kind = Kind::none;
  std::vector<int> agents;
  std::vector<Role> roles;
  std::vector<Edge> edges;

  std::vector<int> high_level() const;
  std::vector<int> low_level() const;
  bool has_edge(int src, int dst) const;
  int index_of(int agent) const;  // -1 when absent

  // Leader partition: one entry per high-level agent (ascending), members
  // sorted, leader included. Only meaningful for hierarchical topologies.
  struct Group {
    int leader;
    std::vector<int> members;
  };
  std::vector<Group> groups() const;
};

struct WeightAssignment {
  std::vector<int> weights;  // parallel to the agent list handed to cbrp
};

WeightAssignment fixed_weights(int num_agents, int level);

struct ClusterConfig {
  double radius = 1.0;
  int max_wait_rounds = 2;
  int rounds_cap = 16;

  void validate() const;
};

// One synchronous pass of the cluster election: maintenance (demote dominated
// leaders, orphan uncovered followers), election (undecided agents wait out
// max_wait_rounds clean rounds before promoting; promotion signals convert
// in-radius undecided peers to followers), then link generation (follower <->
// nearest leader both ways, every ordered leader pair one way).
// `prev` carries the partition from the previous step; pass an empty topology
// at episode start (everyone starts low-level).
Topology cbrp(const Topology& prev, std::span<const int> agent_ids,
              std::span<const int> weights, std::span<const Vec2> positions,
              const ClusterConfig& cfg);

Topology build_baseline(Kind kind, std::span<const int> agent_ids,
                        std::span<const Vec2> positions, double radius);

struct CostReport {
  long n_msg = 0;        // directed messages in one full communication pass
  long n_step = 0;       // sequential phases before acting
  long n_bandwidth = 0;  // max per-agent sent + received
  int k = 0;             // group count
  int b = 0;             // max group size
};

CostReport account_cost(const Topology& topo);

// Connected components of the in-radius graph; used by the neighboring/tree
// accounting and exposed for tests.
std::vector<std::vector<int>> radius_components(std::span<const int> agent_ids,
                                                std::span<const Vec2> positions, double radius);

// Structural sanity of an election result: role partition, no leader inside
// the radius of a strictly heavier leader, every coverable follower linked.
// Used by the harness's debug-mode bookkeeping assertions.
bool satisfies_invariants(const Topology& topo, std::span<const int> weights,
                          std::span<const Vec2> positions, double radius,
                          std::string* why = nullptr);

}  // namespace lsc::topology

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lsc/hcomm.hpp"
#include "lsc/rng.hpp"
#include "lsc/topology.hpp"

namespace lsc::learner {

// One joint step for all learning agents. Observation matrices carry a row
// per agent (zeroed once dead); the alive masks say which rows count. The
// partition before and after the step's election is stored so the losses can
// rebuild the exact communication graphs from positions and weights alone.
struct Transition {
  numcore::Tensor obs, next_obs;  // [n x obs_dim]
  std::vector<Vec2> positions, next_positions;
  std::vector<uint8_t> alive, next_alive;
  std::vector<int> weights;
  std::vector<int> actions;
  std::vector<double> rewards;
  bool done = false;
  std::vector<topology::Role> prev_roles, roles_after;
  uint64_t state_digest = 0;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);
  void push(Transition t);
  size_t size() const { return ring_.size(); }
  size_t capacity() const { return capacity_; }
  // Uniform sample without replacement within the batch.
  std::vector<const Transition*> sample(size_t batch, Rng& rng) const;

 private:
  size_t capacity_;
  size_t next_ = 0;
  std::vector<Transition> ring_;
};

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.01;
  int64_t decay_steps = 1;

  double value(int64_t step) const;  // linear decay, clamped at end
};

// With probability 1-eps the argmax (ties to the lowest index), else uniform.
int select_discrete(std::span<const double> q, double epsilon, Rng& rng);

// How to rebuild a step's communication graph inside the losses.
struct TopologySpec {
  topology::Kind kind = topology::Kind::hierarchical;
  topology::ClusterConfig cluster;
  double baseline_radius = 1.0;
};

topology::Topology rebuild_topology(const TopologySpec& spec, std::span<const int> agent_ids,
                                    std::span<const int> weights, std::span<const Vec2> positions,
                                    const topology::Topology& prev);

// Squared Bellman residual of the weight-generator head, summed over live
// agents and averaged over the batch. Gradients accumulate into `online`.
double weight_generator_loss(const std::vector<const Transition*>& batch,
                             const hcomm::GnnConfig& cfg, numcore::ParamSet& online,
                             const numcore::ParamSet& target, double gamma, bool use_target);

// Squared Bellman residual of the communication-based policy: the full
// message pass runs inside the loss for both the online and the target side,
// with graphs rebuilt from the stored partitions, weights and positions.
double policy_loss(const std::vector<const Transition*>& batch, const hcomm::GnnConfig& cfg,
                   const TopologySpec& tspec, numcore::ParamSet& online,
                   const numcore::ParamSet& target, double gamma);

void update_targets(numcore::ParamSet& policy_target, const numcore::ParamSet& policy_online,
                    numcore::ParamSet* wg_target, const numcore::ParamSet* wg_online, double tau);

}  // namespace lsc::learner

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsc/env.hpp"
#include "lsc/nn.hpp"
#include "lsc/tape.hpp"
#include "lsc/topology.hpp"

namespace lsc::hcomm {

// Network geometry shared by the policy net and the weight generator. The
// battle encoder runs two 3x3 patch-affine layers over the perception window
// before the dense head; spread observations go straight into an MLP.
struct GnnConfig {
  env::Scenario scenario = env::Scenario::spread;
  int obs_dim = 0;
  int action_count = 0;
  int hidden = 32;
  int msg_dim = 3;
  std::vector<int64_t> q_hidden;
  bool down_edge_includes_reverse = false;

  // battle encoder geometry
  int view = 6;
  int channels = env::kBattleChannels;
  int self_dim = 4;
  int conv0_out = 8;
  int conv1_out = 16;

  static GnnConfig for_scenario(const env::ScenarioConfig& sc);
  void validate() const;
};

// Policy parameters: enc.*, phi.* (edge/node update functions for the three
// phases) and q.*. The weight generator uses the same encoder and head
// shapes but three outputs, in its own ParamSet.
void init_policy_params(const GnnConfig& cfg, numcore::ParamSet& ps, uint64_t seed);
void init_weightgen_params(const GnnConfig& cfg, numcore::ParamSet& ps, uint64_t seed);

// Optional capture of per-phase payloads and node features for inspection.
struct Probe {
  struct Msg {
    std::string phase;  // up | inter | down
    int src, dst;
    std::vector<double> payload;
  };
  std::vector<Msg> messages;
  std::vector<int> agents;
  std::vector<int> leaders;
  std::vector<std::vector<double>> embed;    // final embedding per agent
  std::vector<std::vector<double>> cluster;  // per leader
  std::vector<std::vector<double>> global;   // per leader
};

// Tape node ids produced by the communication phases. cluster/global rows are
// parallel to `leaders` (ascending agent id).
struct NodeFeatures {
  int embed = -1;
  int cluster = -1;
  int global = -1;
  std::vector<int> leaders;
};

// obs rows are parallel to topo.agents.
int encode(numcore::Tape& t, const GnnConfig& cfg, const numcore::ParamSet& ps, int obs_node);
NodeFeatures intra_aggregate(numcore::Tape& t, const GnnConfig& cfg, const numcore::ParamSet& ps,
                             int embed, const topology::Topology& topo, Probe* probe = nullptr);
void inter_share(numcore::Tape& t, const GnnConfig& cfg, const numcore::ParamSet& ps,
                 NodeFeatures& nf, const topology::Topology& topo, Probe* probe = nullptr);
int intra_share(numcore::Tape& t, const GnnConfig& cfg, const numcore::ParamSet& ps,
                const NodeFeatures& nf, const topology::Topology& topo, Probe* probe = nullptr);

// Full pass: encode, then the three hierarchical phases (or one generic round
// over a baseline edge set, or nothing for the no-communication mode), then
// the shared Q head. Returns the [n x action_count] node id.
int hcomm_forward(numcore::Tape& t, const GnnConfig& cfg, const numcore::ParamSet& ps,
                  const numcore::Tensor& obs_matrix, const topology::Topology& topo,
                  Probe* probe = nullptr);

// Weight-generator pass: encoder plus a three-way head on each agent's own
// observation; no communication.
int weightgen_forward(numcore::Tape& t, const GnnConfig& cfg, const numcore::ParamSet& ps,
                      const numcore::Tensor& obs_matrix);

}  // namespace lsc::hcomm

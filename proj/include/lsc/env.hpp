#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsc/common.hpp"

namespace lsc::env {

enum class Team : uint8_t { ally, enemy };

enum class Scenario : uint8_t { battle, spread };

Scenario scenario_from_string(const std::string& s);
std::string to_string(Scenario s);

struct ScenarioConfig {
  Scenario scenario = Scenario::spread;

  // battle: two teams on a discrete grid
  int arena_w = 12;
  int arena_h = 12;
  int n_allies = 8;
  int n_enemies = 8;
  int ally_speed = 1, ally_attack = 1, ally_hp = 4;
  int enemy_speed = 2, enemy_attack = 2, enemy_hp = 10;
  int view = 6;  // perception window side
  double reward_hit = 5.0, reward_death = -2.0, reward_miss = -0.01;

  // spread: point agents and landmarks in the unit square
  int n_agents = 12;
  int n_landmarks = 4;
  double step_size = 0.1;
  double view_radius = 0.4;
  double capture_radius = 0.2;
  double reward_success = 2.0, reward_overload = -10.0;
  bool dense_shaping = true;

  int horizon = 50;

  void validate() const;
  int num_learners() const;  // agents driven by the learned policy
  int total_agents() const;
  int action_count(Team team = Team::ally) const;
  int obs_dim() const;
};

struct AgentState {
  int id = 0;
  int row = 0, col = 0;  // battle
  Vec2 pos{};            // spread
  int health = 0;
  bool alive = true;
  Team team = Team::ally;
};

struct WorldState {
  std::vector<AgentState> agents;
  std::vector<Vec2> landmarks;
  int tick = 0;
  uint64_t rng_seed = 0;
};

struct Observation {
  std::vector<double> data;
};

struct RewardEvent {
  int agent;
  std::string tag;  // hit | miss | death | success | overload | shape
  double value;
};

struct StepInfo {
  int kills = 0;     // enemy deaths this step
  int deaths = 0;    // ally deaths this step
  int success = 0;   // landmarks captured by exactly three agents
  int overload = 0;  // landmarks crowded past three agents
  std::vector<RewardEvent> events;
};

struct StepResult {
  std::vector<double> rewards;  // one per agent; derived from info.events
  std::vector<Observation> next_observations;
  bool done = false;
  StepInfo info;
};

WorldState reset(const ScenarioConfig& cfg, uint64_t seed);
Observation observe(const ScenarioConfig& cfg, const WorldState& state, int agent_id);
StepResult step(const ScenarioConfig& cfg, WorldState& state, const std::vector<int>& joint);
// Scripted opponent for battle: attack an adjacent ally, else approach the
// nearest visible one, else random-walk. Pure function of (state, seed).
std::vector<int> enemy_policy(const ScenarioConfig& cfg, const WorldState& state);

uint64_t state_digest(const WorldState& state);

// Battle observation layout: view x view window of 4 channels (wall, same
// team, opposing team, occupant health fraction) at offsets [-view/2,
// view/2), followed by (health, row, col, alive) self features.
constexpr int kBattleChannels = 4;
constexpr int kChanWall = 0, kChanAlly = 1, kChanEnemy = 2, kChanHealth = 3;
int battle_window_offset_lo(const ScenarioConfig& cfg);
int battle_window_index(const ScenarioConfig& cfg, int dy, int dx, int channel);

// Battle action layout: moves (cells with 0 < dy^2+dx^2 <= speed^2 in
// row-major order), then the 8 attack directions, then no-op.
struct GridOffset {
  int dy, dx;
  bool operator==(const GridOffset&) const = default;
};
const std::vector<GridOffset>& battle_moves(int speed);
const std::vector<GridOffset>& battle_attacks();
int battle_noop(const ScenarioConfig& cfg, Team team);

// Spread actions: UP, DOWN, LEFT, RIGHT, STAY.
constexpr int kSpreadActions = 5;

}  // namespace lsc::env

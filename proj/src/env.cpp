#include "lsc/env.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "lsc/rng.hpp"

namespace lsc::env {

namespace {
// Stream tags for seed derivation.
constexpr uint64_t kStreamInit = 0x11;
constexpr uint64_t kStreamMoveOrder = 0x22;
constexpr uint64_t kStreamEnemy = 0x33;
}  // namespace

Scenario scenario_from_string(const std::string& s) {
  if (s == "battle") return Scenario::battle;
  if (s == "spread") return Scenario::spread;
  throw ConfigError("scenario: unknown scenario: " + s);
}

std::string to_string(Scenario s) { return s == Scenario::battle ? "battle" : "spread"; }

void ScenarioConfig::validate() const {
  if (horizon < 1) throw ConfigError("scenario: horizon must be positive");
  if (scenario == Scenario::battle) {
    if (arena_w < 4 || arena_h < 4) throw ConfigError("scenario: arena must be at least 4x4");
    if (n_allies < 1 || n_enemies < 1)
      throw ConfigError("scenario: battle needs at least one agent per team");
    if (ally_speed < 1 || enemy_speed < 1 || ally_hp < 1 || enemy_hp < 1 || ally_attack < 1 ||
        enemy_attack < 1)
      throw ConfigError("scenario: battle stats must be positive");
    if (view < 2 || view % 2 != 0) throw ConfigError("scenario: view must be even and >= 2");
    const int band_w = std::max(1, arena_w / 4);
    if (n_allies > band_w * arena_h || n_enemies > band_w * arena_h)
      throw ConfigError("scenario: team does not fit its spawn band without overlap");
  } else {
    if (n_agents < 1) throw ConfigError("scenario: spread needs at least one agent");
    if (n_landmarks < 1) throw ConfigError("scenario: spread needs at least one landmark");
    if (step_size <= 0 || view_radius <= 0 || capture_radius <= 0)
      throw ConfigError("scenario: spread radii and step size must be positive");
  }
}

int ScenarioConfig::num_learners() const {
  return scenario == Scenario::battle ? n_allies : n_agents;
}

int ScenarioConfig::total_agents() const {
  return scenario == Scenario::battle ? n_allies + n_enemies : n_agents;
}

int ScenarioConfig::action_count(Team team) const {
  if (scenario == Scenario::spread) return kSpreadActions;
  const int speed = team == Team::ally ? ally_speed : enemy_speed;
  return static_cast<int>(battle_moves(speed).size()) + 8 + 1;
}

int ScenarioConfig::obs_dim() const {
  if (scenario == Scenario::battle) return view * view * kBattleChannels + 4;
  return 2 * (n_agents - 1) + 2 * n_landmarks + 2;
}

const std::vector<GridOffset>& battle_moves(int speed) {
  static std::map<int, std::vector<GridOffset>> cache;
  auto it = cache.find(speed);
  if (it == cache.end()) {
    std::vector<GridOffset> moves;
    for (int dy = -speed; dy <= speed; ++dy)
      for (int dx = -speed; dx <= speed; ++dx)
        if ((dy != 0 || dx != 0) && dy * dy + dx * dx <= speed * speed) moves.push_back({dy, dx});
    it = cache.emplace(speed, std::move(moves)).first;
  }
  return it->second;
}

const std::vector<GridOffset>& battle_attacks() {
  static const std::vector<GridOffset> dirs = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                               {0, 1},   {1, -1}, {1, 0},  {1, 1}};
  return dirs;
}

int battle_noop(const ScenarioConfig& cfg, Team team) { return cfg.action_count(team) - 1; }

int battle_window_offset_lo(const ScenarioConfig& cfg) { return -(cfg.view / 2); }

int battle_window_index(const ScenarioConfig& cfg, int dy, int dx, int channel) {
  const int lo = battle_window_offset_lo(cfg);
  return ((dy - lo) * cfg.view + (dx - lo)) * kBattleChannels + channel;
}

namespace {

int max_hp(const ScenarioConfig& cfg, Team team) {
  return team == Team::ally ? cfg.ally_hp : cfg.enemy_hp;
}

int attack_power(const ScenarioConfig& cfg, Team team) {
  return team == Team::ally ? cfg.ally_attack : cfg.enemy_attack;
}

int speed_of(const ScenarioConfig& cfg, Team team) {
  return team == Team::ally ? cfg.ally_speed : cfg.enemy_speed;
}

bool in_arena(const ScenarioConfig& cfg, int row, int col) {
  return row >= 0 && row < cfg.arena_h && col >= 0 && col < cfg.arena_w;
}

int find_live_at(const WorldState& state, int row, int col) {
  for (const AgentState& a : state.agents)
    if (a.alive && a.row == row && a.col == col) return a.id;
  return -1;
}

WorldState reset_battle(const ScenarioConfig& cfg, uint64_t seed) {
  WorldState s;
  s.rng_seed = seed;
  Rng rng(derive_seed(seed, {kStreamInit}));
  const int band_w = std::max(1, cfg.arena_w / 4);

  auto spawn_band = [&](int col_lo, int count, Team team, int hp, int id_base) {
    std::vector<std::pair<int, int>> cells;
    for (int r = 0; r < cfg.arena_h; ++r)
      for (int c = col_lo; c < col_lo + band_w; ++c) cells.emplace_back(r, c);
    rng.shuffle(cells);
    for (int i = 0; i < count; ++i) {
      AgentState a;
      a.id = id_base + i;
      a.row = cells[static_cast<size_t>(i)].first;
      a.col = cells[static_cast<size_t>(i)].second;
      a.health = hp;
      a.team = team;
      s.agents.push_back(a);
    }
  };
  spawn_band(1, cfg.n_allies, Team::ally, cfg.ally_hp, 0);
  spawn_band(cfg.arena_w - 1 - band_w, cfg.n_enemies, Team::enemy, cfg.enemy_hp, cfg.n_allies);
  return s;
}

WorldState reset_spread(const ScenarioConfig& cfg, uint64_t seed) {
  WorldState s;
  s.rng_seed = seed;
  Rng rng(derive_seed(seed, {kStreamInit}));
  for (int i = 0; i < cfg.n_agents; ++i) {
    AgentState a;
    a.id = i;
    a.pos = {rng.next_double(), rng.next_double()};
    a.health = 1;
    s.agents.push_back(a);
  }
  for (int l = 0; l < cfg.n_landmarks; ++l)
    s.landmarks.push_back({rng.next_double(), rng.next_double()});
  return s;
}

Observation observe_battle(const ScenarioConfig& cfg, const WorldState& state,
                           const AgentState& me) {
  Observation obs;
  obs.data.assign(static_cast<size_t>(cfg.obs_dim()), 0.0);
  if (!me.alive) return obs;
  const int lo = battle_window_offset_lo(cfg);
  const int hi = lo + cfg.view - 1;
  for (int dy = lo; dy <= hi; ++dy) {
    for (int dx = lo; dx <= hi; ++dx) {
      const int r = me.row + dy, c = me.col + dx;
      if (!in_arena(cfg, r, c)) {
        obs.data[static_cast<size_t>(battle_window_index(cfg, dy, dx, kChanWall))] = 1.0;
        continue;
      }
      const int occupant = find_live_at(state, r, c);
      if (occupant < 0) continue;
      const AgentState& o = state.agents[static_cast<size_t>(occupant)];
      const int chan = o.team == me.team ? kChanAlly : kChanEnemy;
      obs.data[static_cast<size_t>(battle_window_index(cfg, dy, dx, chan))] = 1.0;
      obs.data[static_cast<size_t>(battle_window_index(cfg, dy, dx, kChanHealth))] =
          static_cast<double>(o.health) / max_hp(cfg, o.team);
    }
  }
  const size_t base = static_cast<size_t>(cfg.view * cfg.view * kBattleChannels);
  obs.data[base + 0] = static_cast<double>(me.health) / max_hp(cfg, me.team);
  obs.data[base + 1] = cfg.arena_h > 1 ? static_cast<double>(me.row) / (cfg.arena_h - 1) : 0.0;
  obs.data[base + 2] = cfg.arena_w > 1 ? static_cast<double>(me.col) / (cfg.arena_w - 1) : 0.0;
  obs.data[base + 3] = 1.0;
  return obs;
}

Observation observe_spread(const ScenarioConfig& cfg, const WorldState& state,
                           const AgentState& me) {
  Observation obs;
  obs.data.reserve(static_cast<size_t>(cfg.obs_dim()));
  for (const AgentState& other : state.agents) {
    if (other.id == me.id) continue;
    obs.data.push_back(other.pos.x - me.pos.x);
    obs.data.push_back(other.pos.y - me.pos.y);
  }
  const double r2 = cfg.view_radius * cfg.view_radius;
  for (const Vec2& lm : state.landmarks) {
    if (dist2(lm, me.pos) < r2) {
      obs.data.push_back(lm.x - me.pos.x);
      obs.data.push_back(lm.y - me.pos.y);
    } else {
      obs.data.push_back(0.0);
      obs.data.push_back(0.0);
    }
  }
  obs.data.push_back(me.pos.x);
  obs.data.push_back(me.pos.y);
  return obs;
}

void validate_actions(const ScenarioConfig& cfg, const WorldState& state,
                      const std::vector<int>& joint) {
  if (joint.size() != state.agents.size())
    throw std::invalid_argument("step: joint action must have one entry per agent");
  for (const AgentState& a : state.agents) {
    const int count = cfg.action_count(a.team);
    const int act = joint[static_cast<size_t>(a.id)];
    if (act < 0 || act >= count) throw std::invalid_argument("step: action index out of range");
  }
}

StepResult step_battle(const ScenarioConfig& cfg, WorldState& state,
                       const std::vector<int>& joint) {
  StepResult res;
  res.rewards.assign(state.agents.size(), 0.0);
  auto& events = res.info.events;

  // Movement: seeded shuffle of the live agents, blocked moves become no-ops.
  std::vector<int> order;
  for (const AgentState& a : state.agents)
    if (a.alive) order.push_back(a.id);
  Rng move_rng(derive_seed(state.rng_seed, {kStreamMoveOrder, static_cast<uint64_t>(state.tick)}));
  move_rng.shuffle(order);
  for (int id : order) {
    AgentState& a = state.agents[static_cast<size_t>(id)];
    const auto& moves = battle_moves(speed_of(cfg, a.team));
    const int act = joint[static_cast<size_t>(id)];
    if (act >= static_cast<int>(moves.size())) continue;  // attack or no-op
    const int nr = a.row + moves[static_cast<size_t>(act)].dy;
    const int nc = a.col + moves[static_cast<size_t>(act)].dx;
    if (in_arena(cfg, nr, nc) && find_live_at(state, nr, nc) < 0) {
      a.row = nr;
      a.col = nc;
    }
  }

  // Attacks: everyone reads health as of the start of the phase and damage
  // lands simultaneously, so mutual kills and shared credit resolve without
  // order effects. A strike on a cell holding a live opponent is a hit;
  // anything else is a miss.
  std::vector<int> damage(state.agents.size(), 0);
  for (const AgentState& a : state.agents) {
    if (!a.alive) continue;
    const auto& moves = battle_moves(speed_of(cfg, a.team));
    const int act = joint[static_cast<size_t>(a.id)];
    const int attack_idx = act - static_cast<int>(moves.size());
    if (attack_idx < 0 || attack_idx >= 8) continue;
    const GridOffset d = battle_attacks()[static_cast<size_t>(attack_idx)];
    const int tr = a.row + d.dy, tc = a.col + d.dx;
    const int target = in_arena(cfg, tr, tc) ? find_live_at(state, tr, tc) : -1;
    if (target >= 0 && state.agents[static_cast<size_t>(target)].team != a.team) {
      damage[static_cast<size_t>(target)] += attack_power(cfg, a.team);
      events.push_back({a.id, "hit", cfg.reward_hit});
    } else {
      events.push_back({a.id, "miss", cfg.reward_miss});
    }
  }
  for (AgentState& a : state.agents) {
    if (!a.alive || damage[static_cast<size_t>(a.id)] == 0) continue;
    a.health = std::max(0, a.health - damage[static_cast<size_t>(a.id)]);
    if (a.health == 0) {
      a.alive = false;
      events.push_back({a.id, "death", cfg.reward_death});
      (a.team == Team::ally ? res.info.deaths : res.info.kills) += 1;
    }
  }

  for (const RewardEvent& e : events) res.rewards[static_cast<size_t>(e.agent)] += e.value;

  state.tick += 1;
  int live_allies = 0, live_enemies = 0;
  for (const AgentState& a : state.agents)
    if (a.alive) (a.team == Team::ally ? live_allies : live_enemies) += 1;
  res.done = state.tick >= cfg.horizon || live_allies == 0 || live_enemies == 0;
  for (const AgentState& a : state.agents)
    res.next_observations.push_back(observe_battle(cfg, state, a));
  return res;
}

StepResult step_spread(const ScenarioConfig& cfg, WorldState& state,
                       const std::vector<int>& joint) {
  StepResult res;
  res.rewards.assign(state.agents.size(), 0.0);
  auto& events = res.info.events;

  static const Vec2 kMoves[kSpreadActions] = {{0, 1}, {0, -1}, {-1, 0}, {1, 0}, {0, 0}};
  for (AgentState& a : state.agents) {
    const Vec2 d = kMoves[joint[static_cast<size_t>(a.id)]];
    a.pos.x = std::clamp(a.pos.x + d.x * cfg.step_size, 0.0, 1.0);
    a.pos.y = std::clamp(a.pos.y + d.y * cfg.step_size, 0.0, 1.0);
  }

  const double cap2 = cfg.capture_radius * cfg.capture_radius;
  double success_total = 0.0, overload_total = 0.0, shape_total = 0.0;
  for (const Vec2& lm : state.landmarks) {
    int within = 0;
    std::vector<double> dists;
    dists.reserve(state.agents.size());
    for (const AgentState& a : state.agents) {
      const double d2 = dist2(lm, a.pos);
      if (d2 < cap2) ++within;
      dists.push_back(std::sqrt(d2));
    }
    if (within == 3) {
      success_total += cfg.reward_success;
      res.info.success += 1;
    } else if (within > 3) {
      overload_total += cfg.reward_overload;
      res.info.overload += 1;
    }
    if (cfg.dense_shaping) {
      std::sort(dists.begin(), dists.end());
      const size_t take = std::min<size_t>(3, dists.size());
      for (size_t i = 0; i < take; ++i) shape_total -= dists[i];
    }
  }
  for (const AgentState& a : state.agents) {
    if (success_total != 0.0) events.push_back({a.id, "success", success_total});
    if (overload_total != 0.0) events.push_back({a.id, "overload", overload_total});
    if (cfg.dense_shaping) events.push_back({a.id, "shape", shape_total});
  }
  for (const RewardEvent& e : events) res.rewards[static_cast<size_t>(e.agent)] += e.value;

  state.tick += 1;
  res.done = state.tick >= cfg.horizon;
  for (const AgentState& a : state.agents)
    res.next_observations.push_back(observe_spread(cfg, state, a));
  return res;
}

}  // namespace

WorldState reset(const ScenarioConfig& cfg, uint64_t seed) {
  cfg.validate();
  return cfg.scenario == Scenario::battle ? reset_battle(cfg, seed) : reset_spread(cfg, seed);
}

Observation observe(const ScenarioConfig& cfg, const WorldState& state, int agent_id) {
  if (agent_id < 0 || agent_id >= static_cast<int>(state.agents.size()))
    throw std::invalid_argument("observe: no such agent");
  const AgentState& a = state.agents[static_cast<size_t>(agent_id)];
  return cfg.scenario == Scenario::battle ? observe_battle(cfg, state, a)
                                          : observe_spread(cfg, state, a);
}

StepResult step(const ScenarioConfig& cfg, WorldState& state, const std::vector<int>& joint_in) {
  if (state.tick >= cfg.horizon) throw std::invalid_argument("step: episode is over");
  std::vector<int> joint = joint_in;
  // Dead agents always no-op, whatever the caller passed.
  for (const AgentState& a : state.agents)
    if (!a.alive) joint[static_cast<size_t>(a.id)] = battle_noop(cfg, a.team);
  validate_actions(cfg, state, joint);
  return cfg.scenario == Scenario::battle ? step_battle(cfg, state, joint)
                                          : step_spread(cfg, state, joint);
}

std::vector<int> enemy_policy(const ScenarioConfig& cfg, const WorldState& state) {
  if (cfg.scenario != Scenario::battle)
    throw std::invalid_argument("enemy_policy: battle scenario only");
  std::vector<int> actions(state.agents.size(), 0);
  Rng rng(derive_seed(state.rng_seed, {kStreamEnemy, static_cast<uint64_t>(state.tick)}));
  const auto& moves = battle_moves(cfg.enemy_speed);
  const int lo = battle_window_offset_lo(cfg);
  const int hi = lo + cfg.view - 1;

  for (const AgentState& e : state.agents) {
    if (e.team != Team::enemy) continue;
    actions[static_cast<size_t>(e.id)] = battle_noop(cfg, Team::enemy);
    if (!e.alive) continue;

    // Attack an adjacent ally (lowest id wins ties).
    int adj_target = -1;
    for (const AgentState& a : state.agents) {
      if (a.team != Team::ally || !a.alive) continue;
      if (std::abs(a.row - e.row) <= 1 && std::abs(a.col - e.col) <= 1 &&
          (a.row != e.row || a.col != e.col)) {
        if (adj_target < 0 || a.id < adj_target) adj_target = a.id;
      }
    }
    if (adj_target >= 0) {
      const AgentState& t = state.agents[static_cast<size_t>(adj_target)];
      const GridOffset want{t.row - e.row, t.col - e.col};
      const auto& dirs = battle_attacks();
      for (size_t d = 0; d < dirs.size(); ++d)
        if (dirs[d] == want)
          actions[static_cast<size_t>(e.id)] = static_cast<int>(moves.size() + d);
      continue;
    }

    // Approach the nearest ally inside the perception window, ties to the
    // lower agent id, then to the first improving move in canonical order.
    int target = -1;
    int best_d2 = 0;
    for (const AgentState& a : state.agents) {
      if (a.team != Team::ally || !a.alive) continue;
      const int dy = a.row - e.row, dx = a.col - e.col;
      if (dy < lo || dy > hi || dx < lo || dx > hi) continue;
      const int d2 = dy * dy + dx * dx;
      if (target < 0 || d2 < best_d2 || (d2 == best_d2 && a.id < target)) {
        target = a.id;
        best_d2 = d2;
      }
    }
    if (target >= 0) {
      const AgentState& t = state.agents[static_cast<size_t>(target)];
      int best_move = -1;
      int best = (e.row - t.row) * (e.row - t.row) + (e.col - t.col) * (e.col - t.col);
      for (size_t m = 0; m < moves.size(); ++m) {
        const int nr = e.row + moves[m].dy, nc = e.col + moves[m].dx;
        if (!in_arena(cfg, nr, nc) || find_live_at(state, nr, nc) >= 0) continue;
        const int d2 = (nr - t.row) * (nr - t.row) + (nc - t.col) * (nc - t.col);
        if (d2 < best) {
          best = d2;
          best_move = static_cast<int>(m);
        }
      }
      if (best_move >= 0) actions[static_cast<size_t>(e.id)] = best_move;
      continue;
    }

    // Nothing visible: random walk. Draws are consumed in enemy id order.
    actions[static_cast<size_t>(e.id)] = rng.next_int(static_cast<int>(moves.size()));
  }
  return actions;
}

uint64_t state_digest(const WorldState& state) {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* p, size_t len) { h = fnv1a64(p, len, h); };
  mix(&state.tick, sizeof(state.tick));
  mix(&state.rng_seed, sizeof(state.rng_seed));
  for (const AgentState& a : state.agents) {
    mix(&a.id, sizeof(a.id));
    mix(&a.row, sizeof(a.row));
    mix(&a.col, sizeof(a.col));
    mix(&a.pos.x, sizeof(a.pos.x));
    mix(&a.pos.y, sizeof(a.pos.y));
    mix(&a.health, sizeof(a.health));
    mix(&a.alive, sizeof(a.alive));
    mix(&a.team, sizeof(a.team));
  }
  for (const Vec2& lm : state.landmarks) {
    mix(&lm.x, sizeof(lm.x));
    mix(&lm.y, sizeof(lm.y));
  }
  return h;
}

}  // namespace lsc::env

#include "lsc/harness.hpp"

#include <algorithm>
#include <cassert>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lsc/checkpoint.hpp"
#include "lsc/nn.hpp"
#include "lsc/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lsc::harness {

using learner::ReplayBuffer;
using learner::Transition;
using numcore::ParamSet;
using numcore::Tape;
using numcore::Tensor;
using topology::Role;
using topology::Topology;

namespace {

// Seed-derivation stream tags.
constexpr uint64_t kStreamWeight = 0x51;
constexpr uint64_t kStreamAction = 0x52;
constexpr uint64_t kStreamBatch = 0x53;
constexpr uint64_t kStreamEnv = 0x54;
constexpr uint64_t kStreamEval = 0x55;

void write_double(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

std::vector<Vec2> learner_positions(const env::ScenarioConfig& sc, const env::WorldState& state) {
  std::vector<Vec2> out;
  for (int i = 0; i < sc.num_learners(); ++i) {
    const env::AgentState& a = state.agents[static_cast<size_t>(i)];
    out.push_back(sc.scenario == env::Scenario::battle
                      ? Vec2{static_cast<double>(a.col), static_cast<double>(a.row)}
                      : a.pos);
  }
  return out;
}

std::vector<uint8_t> learner_alive(const env::ScenarioConfig& sc, const env::WorldState& state) {
  std::vector<uint8_t> out;
  for (int i = 0; i < sc.num_learners(); ++i)
    out.push_back(state.agents[static_cast<size_t>(i)].alive ? 1 : 0);
  return out;
}

Tensor learner_obs_matrix(const env::ScenarioConfig& sc, const env::WorldState& state) {
  const int n = sc.num_learners();
  Tensor m = Tensor::zeros({n, sc.obs_dim()});
  for (int i = 0; i < n; ++i) {
    if (!state.agents[static_cast<size_t>(i)].alive) continue;
    const env::Observation obs = env::observe(sc, state, i);
    for (int c = 0; c < sc.obs_dim(); ++c) m.at(i, c) = obs.data[static_cast<size_t>(c)];
  }
  return m;
}

Tensor rows_for(const Tensor& full, const std::vector<int>& ids) {
  Tensor out = Tensor::zeros({static_cast<int64_t>(ids.size()), full.shape[1]});
  for (size_t r = 0; r < ids.size(); ++r)
    for (int64_t c = 0; c < full.shape[1]; ++c) out.at(static_cast<int64_t>(r), c) = full.at(ids[r], c);
  return out;
}

struct Nets {
  ParamSet policy, policy_target;
  std::optional<ParamSet> wgen, wgen_target;
};

Nets init_nets(const RunConfig& cfg) {
  Nets nets;
  hcomm::init_policy_params(cfg.net, nets.policy, cfg.seed);
  nets.policy_target = nets.policy.clone();
  if (cfg.weight_learning()) {
    ParamSet wg;
    hcomm::init_weightgen_params(cfg.net, wg, derive_seed(cfg.seed, {0x77}));
    nets.wgen_target = wg.clone();
    nets.wgen = std::move(wg);
  }
  return nets;
}

void save_nets(const Nets& nets, const std::string& path) {
  std::map<std::string, const ParamSet*> groups{{"policy", &nets.policy},
                                                {"policy_target", &nets.policy_target}};
  if (nets.wgen) {
    groups.emplace("wgen", &*nets.wgen);
    groups.emplace("wgen_target", &*nets.wgen_target);
  }
  numcore::save_checkpoint(ParamSet{}, path);  // truncate deterministically
  numcore::save_groups(groups, path);
}

int greedy_action(std::span<const double> q) {
  int best = 0;
  for (size_t i = 1; i < q.size(); ++i)
    if (q[i] > q[static_cast<size_t>(best)]) best = static_cast<int>(i);
  return best;
}

// One environment step under the current policy. Fills `tr` when learning.
struct StepOutcome {
  env::StepResult result;
  topology::CostReport cost;
};

StepOutcome policy_step(const RunConfig& cfg, const Nets& nets, env::WorldState& state,
                        std::vector<Role>& roles_by_id, int episode, int tick, double epsilon,
                        bool greedy, Transition* tr) {
  const env::ScenarioConfig& sc = cfg.scenario;
  const int n = sc.num_learners();

  const Tensor obs = learner_obs_matrix(sc, state);
  const std::vector<Vec2> positions = learner_positions(sc, state);
  const std::vector<uint8_t> alive = learner_alive(sc, state);

  std::vector<int> live_ids;
  for (int i = 0; i < n; ++i)
    if (alive[static_cast<size_t>(i)]) live_ids.push_back(i);

  // Weight picks (an auxiliary epsilon-greedy head) feed the election.
  std::vector<int> weights_by_id(static_cast<size_t>(n), 0);
  if (cfg.kind == topology::Kind::hierarchical) {
    if (cfg.weight_mode == WeightMode::fixed) {
      for (int id : live_ids)
        weights_by_id[static_cast<size_t>(id)] = cfg.fixed_level;
    } else {
      Rng wrng(derive_seed(cfg.seed, {kStreamWeight, static_cast<uint64_t>(episode),
                                      static_cast<uint64_t>(tick)}));
      Tape t;
      const int wq = hcomm::weightgen_forward(t, cfg.net, *nets.wgen, rows_for(obs, live_ids));
      for (size_t r = 0; r < live_ids.size(); ++r) {
        const std::vector<double> row{t.value(wq).data.begin() + static_cast<int64_t>(r) * 3,
                                      t.value(wq).data.begin() + static_cast<int64_t>(r) * 3 + 3};
        weights_by_id[static_cast<size_t>(live_ids[r])] =
            greedy ? greedy_action(row) : learner::select_discrete(row, epsilon, wrng);
      }
    }
  }

  // Build this step's communication graph.
  std::vector<int> live_weights;
  std::vector<Vec2> live_positions;
  for (int id : live_ids) {
    live_weights.push_back(weights_by_id[static_cast<size_t>(id)]);
    live_positions.push_back(positions[static_cast<size_t>(id)]);
  }
  Topology prev;
  prev.kind = topology::Kind::hierarchical;
  prev.agents = live_ids;
  for (int id : live_ids) prev.roles.push_back(roles_by_id[static_cast<size_t>(id)]);
  const learner::TopologySpec tspec = cfg.tspec();
  const Topology topo = learner::rebuild_topology(tspec, live_ids, live_weights, live_positions, prev);
#ifndef NDEBUG
  if (topo.kind == topology::Kind::hierarchical) {
    std::string why;
    assert(topology::satisfies_invariants(topo, live_weights, live_positions, cfg.comm_radius,
                                          &why) &&
           "election invariants violated");
  }
#endif

  const std::vector<Role> prev_roles_snapshot = roles_by_id;
  for (size_t r = 0; r < live_ids.size(); ++r)
    roles_by_id[static_cast<size_t>(live_ids[r])] = topo.roles[r];

  // Q values and epsilon-greedy actions for the live learners.
  std::vector<int> joint(state.agents.size(), 0);
  for (const env::AgentState& a : state.agents)
    joint[static_cast<size_t>(a.id)] = env::battle_noop(sc, a.team);
  {
    Rng arng(derive_seed(cfg.seed, {kStreamAction, static_cast<uint64_t>(episode),
                                    static_cast<uint64_t>(tick)}));
    Tape t;
    const int q = hcomm::hcomm_forward(t, cfg.net, nets.policy, rows_for(obs, live_ids), topo);
    const int64_t na = cfg.net.action_count;
    for (size_t r = 0; r < live_ids.size(); ++r) {
      const std::vector<double> row{t.value(q).data.begin() + static_cast<int64_t>(r) * na,
                                    t.value(q).data.begin() + (static_cast<int64_t>(r) + 1) * na};
      joint[static_cast<size_t>(live_ids[r])] =
          greedy ? greedy_action(row) : learner::select_discrete(row, epsilon, arng);
    }
  }
  if (sc.scenario == env::Scenario::battle) {
    const std::vector<int> enemy = env::enemy_policy(sc, state);
    for (const env::AgentState& a : state.agents)
      if (a.team == env::Team::enemy) joint[static_cast<size_t>(a.id)] = enemy[static_cast<size_t>(a.id)];
  }

  StepOutcome out{env::step(sc, state, joint), topology::account_cost(topo)};

  if (tr) {
    tr->obs = obs;
    tr->positions = positions;
    tr->alive = alive;
    tr->weights = weights_by_id;
    tr->actions.assign(joint.begin(), joint.begin() + n);
    tr->rewards.assign(out.result.rewards.begin(), out.result.rewards.begin() + n);
    tr->next_obs = learner_obs_matrix(sc, state);
    tr->next_positions = learner_positions(sc, state);
    tr->next_alive = learner_alive(sc, state);
    tr->done = out.result.done;
    tr->prev_roles = prev_roles_snapshot;
    tr->roles_after = roles_by_id;
    tr->state_digest = env::state_digest(state);
  }
  return out;
}

}  // namespace

learner::TopologySpec RunConfig::tspec() const {
  learner::TopologySpec spec;
  spec.kind = kind;
  spec.cluster = cluster;
  spec.baseline_radius = comm_radius;
  return spec;
}

void RunConfig::validate() const {
  scenario.validate();
  net.validate();
  if (episodes < 1) throw ConfigError("run: episodes must be positive");
  if (eval_cadence < 1) throw ConfigError("run: eval_cadence must be positive");
  if (batch_size < 1 || update_rounds < 0) throw ConfigError("run: bad learner counts");
  if (gamma <= 0 || gamma >= 1) throw ConfigError("run: gamma must be in (0,1)");
  if (tau <= 0 || tau > 1) throw ConfigError("run: tau must be in (0,1]");
  if (lr <= 0) throw ConfigError("run: lr must be positive");
  if (comm_radius <= 0) throw ConfigError("run: communication radius must be positive");
  if (kind == topology::Kind::hierarchical) cluster.validate();
  if (fixed_level < 0 || fixed_level > 2) throw ConfigError("run: fixed_level must be in {0,1,2}");
  if (out_dir.empty()) throw ConfigError("run: out_dir must be set");
}

RunConfig make_run_config(const config::Settings& s) {
  RunConfig cfg;
  env::ScenarioConfig& sc = cfg.scenario;
  sc.scenario = env::scenario_from_string(s.gets("scenario"));
  sc.arena_w = s.geti("env.arena_w");
  sc.arena_h = s.geti("env.arena_h");
  sc.n_allies = s.geti("env.n_allies");
  sc.n_enemies = s.geti("env.n_enemies");
  sc.ally_speed = s.geti("env.ally_speed");
  sc.ally_attack = s.geti("env.ally_attack");
  sc.ally_hp = s.geti("env.ally_hp");
  sc.enemy_speed = s.geti("env.enemy_speed");
  sc.enemy_attack = s.geti("env.enemy_attack");
  sc.enemy_hp = s.geti("env.enemy_hp");
  sc.view = s.geti("env.view");
  sc.reward_hit = s.getd("env.reward_hit");
  sc.reward_death = s.getd("env.reward_death");
  sc.reward_miss = s.getd("env.reward_miss");
  sc.n_agents = s.geti("env.n_agents");
  sc.n_landmarks = s.geti("env.n_landmarks");
  sc.step_size = s.getd("env.step_size");
  sc.view_radius = s.getd("env.view_radius");
  sc.capture_radius = s.getd("env.capture_radius");
  sc.reward_success = s.getd("env.reward_success");
  sc.reward_overload = s.getd("env.reward_overload");
  sc.dense_shaping = s.getb("env.dense_shaping");
  const bool battle = sc.scenario == env::Scenario::battle;
  sc.horizon = s.geti("env.horizon") > 0 ? s.geti("env.horizon") : (battle ? 300 : 50);

  cfg.kind = topology::kind_from_string(s.gets("topology.kind"));
  cfg.comm_radius = s.getd("topology.radius") > 0 ? s.getd("topology.radius") : (battle ? 6.0 : 0.6);
  cfg.cluster.radius = cfg.comm_radius;
  cfg.cluster.max_wait_rounds = s.geti("topology.max_wait_rounds");
  cfg.cluster.rounds_cap = s.geti("topology.rounds_cap");
  const std::string wm = s.gets("topology.weight_mode");
  if (wm != "learned" && wm != "fixed")
    throw ConfigError("config: topology.weight_mode must be learned or fixed");
  cfg.weight_mode = wm == "fixed" ? WeightMode::fixed : WeightMode::learned;
  cfg.fixed_level = s.geti("topology.fixed_level");

  cfg.net = hcomm::GnnConfig::for_scenario(sc);
  cfg.net.hidden = s.geti("net.hidden");
  cfg.net.msg_dim = s.geti("net.msg_dim");
  cfg.net.down_edge_includes_reverse = s.getb("net.down_edge_reverse");

  cfg.gamma = s.getd("learner.gamma");
  cfg.tau = s.getd("learner.tau");
  cfg.lr = s.getd("learner.lr") > 0 ? s.getd("learner.lr") : (battle ? 1e-4 : 1e-3);
  cfg.batch_size = s.geti("learner.batch_size");
  cfg.update_rounds = s.geti("learner.update_rounds");
  cfg.buffer_capacity = static_cast<size_t>(s.geti("learner.buffer_capacity"));
  cfg.eps_start = s.getd("learner.eps_start");
  cfg.eps_end = s.getd("learner.eps_end");
  cfg.eps_decay_frac = s.getd("learner.eps_decay_frac");
  cfg.wg_use_target = s.getb("learner.wg_use_target");

  cfg.episodes = s.geti("run.episodes");
  cfg.eval_cadence = s.geti("run.eval_cadence");
  cfg.eval_trials = s.geti("run.eval_trials");
  cfg.seed = static_cast<uint64_t>(s.geti("run.seed"));
  cfg.out_dir = s.gets("run.out_dir");
  cfg.trace = s.getb("run.trace");
  cfg.config_echo = s.render();
  cfg.validate();
  return cfg;
}

RunConfig apply_variant(RunConfig base, const std::string& variant) {
  base.variant_name = variant;
  if (variant == "lsc") {
    base.kind = topology::Kind::hierarchical;
    base.weight_mode = WeightMode::learned;
  } else if (variant == "lsc-fix") {
    base.kind = topology::Kind::hierarchical;
    base.weight_mode = WeightMode::fixed;
  } else if (variant == "lsc-star") {
    base.kind = topology::Kind::star;
  } else if (variant == "lsc-nbor") {
    base.kind = topology::Kind::neighboring;
  } else if (variant == "lsc-tree") {
    base.kind = topology::Kind::tree;
  } else if (variant == "idqn") {
    base.kind = topology::Kind::none;
  } else {
    throw ConfigError("sweep: unknown variant: " + variant);
  }
  return base;
}

TrainResult train(const RunConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  if (!cfg.config_echo.empty()) {
    std::ofstream mf(cfg.out_dir + "/manifest.txt");
    mf << cfg.config_echo;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(cfg.config_echo));
    mf << "content_hash = " << buf << "\n";
  }

  Nets nets = init_nets(cfg);
  numcore::Adam policy_opt;
  policy_opt.lr = cfg.lr;
  numcore::Adam wgen_opt;
  wgen_opt.lr = cfg.lr;

  ReplayBuffer buffer(cfg.buffer_capacity);
  learner::EpsilonSchedule eps{cfg.eps_start, cfg.eps_end,
                               std::max<int64_t>(1, static_cast<int64_t>(cfg.eps_decay_frac *
                                                                         cfg.episodes))};

  TrainResult result;
  result.metrics_csv = cfg.out_dir + "/metrics.csv";
  result.cost_csv = cfg.out_dir + "/cost.csv";
  result.checkpoint_final = cfg.out_dir + "/ckpt_final.bin";

  std::ofstream metrics(result.metrics_csv);
  metrics << "# schema=lsc.train.v1\n"
          << "episode,steps,mean_step_reward,episode_return,policy_loss,weight_loss,epsilon,"
             "buffer_size,kills,deaths,success,overload\n";
  std::ofstream cost(result.cost_csv);
  cost << "# schema=lsc.cost.v1\nepisode,tick,kind,n_msg,n_step,n_bandwidth,k,b\n";
  std::ofstream trace;
  if (cfg.trace) {
    trace.open(cfg.out_dir + "/trace.csv");
    trace << "# schema=lsc.trace.v1\nepisode,tick,agent,px,py,action,reward,events\n";
  }

  const int n = cfg.scenario.num_learners();
  const learner::TopologySpec tspec = cfg.tspec();

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    env::WorldState state =
        env::reset(cfg.scenario, derive_seed(cfg.seed, {kStreamEnv, static_cast<uint64_t>(ep)}));
    std::vector<Role> roles_by_id(static_cast<size_t>(n), Role::low);
    const double epsilon = eps.value(ep);

    double episode_return = 0.0;
    int steps = 0;
    long kills = 0, deaths = 0, success = 0, overload = 0;
    for (int t = 0; t < cfg.scenario.horizon; ++t) {
      Transition tr;
      const StepOutcome out =
          policy_step(cfg, nets, state, roles_by_id, ep, t, epsilon, false, &tr);
      cost << ep << ',' << t << ',' << topology::to_string(cfg.kind) << ',' << out.cost.n_msg
           << ',' << out.cost.n_step << ',' << out.cost.n_bandwidth << ',' << out.cost.k << ','
           << out.cost.b << '\n';
      if (cfg.trace) {
        for (int i = 0; i < n; ++i) {
          const std::vector<Vec2> pos = learner_positions(cfg.scenario, state);
          trace << ep << ',' << t << ',' << i << ',';
          write_double(trace, pos[static_cast<size_t>(i)].x);
          trace << ',';
          write_double(trace, pos[static_cast<size_t>(i)].y);
          trace << ',' << tr.actions[static_cast<size_t>(i)] << ',';
          write_double(trace, tr.rewards[static_cast<size_t>(i)]);
          trace << ',';
          bool first = true;
          for (const env::RewardEvent& e : out.result.info.events) {
            if (e.agent != i) continue;
            if (!first) trace << ';';
            trace << e.tag << ':';
            write_double(trace, e.value);
            first = false;
          }
          trace << '\n';
        }
      }
      double step_mean = 0.0;
      for (int i = 0; i < n; ++i) step_mean += tr.rewards[static_cast<size_t>(i)];
      episode_return += step_mean / n;
      kills += out.result.info.kills;
      deaths += out.result.info.deaths;
      success += out.result.info.success;
      overload += out.result.info.overload;
      buffer.push(std::move(tr));
      ++steps;
      if (out.result.done) break;
    }

    double policy_loss_value = std::nan("");
    double weight_loss_value = std::nan("");
    for (int k = 0; k < cfg.update_rounds; ++k) {
      if (buffer.size() < static_cast<size_t>(cfg.batch_size)) break;
      Rng brng(derive_seed(cfg.seed, {kStreamBatch, static_cast<uint64_t>(ep),
                                      static_cast<uint64_t>(k)}));
      const auto batch = buffer.sample(static_cast<size_t>(cfg.batch_size), brng);
      try {
        if (cfg.weight_learning()) {
          weight_loss_value = learner::weight_generator_loss(
              batch, cfg.net, *nets.wgen, *nets.wgen_target, cfg.gamma, cfg.wg_use_target);
          wgen_opt.step(*nets.wgen);
        }
        policy_loss_value = learner::policy_loss(batch, cfg.net, tspec, nets.policy,
                                                 nets.policy_target, cfg.gamma);
        policy_opt.step(nets.policy);
        learner::update_targets(nets.policy_target, nets.policy,
                                nets.wgen_target ? &*nets.wgen_target : nullptr,
                                nets.wgen ? &*nets.wgen : nullptr, cfg.tau);
      } catch (const NumericError& e) {
        std::ofstream diag(cfg.out_dir + "/diagnostic.txt");
        diag << "non-finite loss\nepisode = " << ep << "\nround = " << k
             << "\nwhat = " << e.what() << "\n";
        throw;
      }
      result.policy_losses.push_back(policy_loss_value);
    }

    result.episode_returns.push_back(episode_return);
    metrics << ep << ',' << steps << ',';
    write_double(metrics, steps > 0 ? episode_return / steps : 0.0);
    metrics << ',';
    write_double(metrics, episode_return);
    metrics << ',';
    write_double(metrics, policy_loss_value);
    metrics << ',';
    write_double(metrics, weight_loss_value);
    metrics << ',';
    write_double(metrics, epsilon);
    metrics << ',' << buffer.size() << ',' << kills << ',' << deaths << ',' << success << ','
            << overload << '\n';

    if ((ep + 1) % cfg.eval_cadence == 0)
      save_nets(nets, cfg.out_dir + "/ckpt_ep" + std::to_string(ep + 1) + ".bin");
  }

  save_nets(nets, result.checkpoint_final);
  return result;
}

EvalReport evaluate(const RunConfig& cfg, const std::string& checkpoint_path, int trials,
                    const std::string& out_csv) {
  cfg.validate();
  if (trials < 1) throw ConfigError("eval: trials must be positive");

  auto groups = numcore::load_groups(checkpoint_path);
  if (!groups.count("policy")) throw CheckpointError("eval: checkpoint lacks a policy group");
  Nets nets;
  nets.policy = std::move(groups.at("policy"));
  nets.policy_target = groups.count("policy_target") ? std::move(groups.at("policy_target"))
                                                     : nets.policy.clone();
  if (groups.count("wgen")) {
    nets.wgen = std::move(groups.at("wgen"));
    nets.wgen_target = groups.count("wgen_target") ? std::move(groups.at("wgen_target"))
                                                   : nets.wgen->clone();
  }
  if (cfg.weight_learning() && !nets.wgen)
    throw CheckpointError("eval: config wants a learned weight generator, checkpoint has none");

  // Head width must match the scenario's action space.
  const std::string out_w = "q.w" + std::to_string(cfg.net.q_hidden.size());
  if (!nets.policy.has(out_w) ||
      nets.policy.value(out_w).shape[1] != cfg.net.action_count ||
      nets.policy.value("enc.mlp.w0"[0] == 'e' && cfg.scenario.scenario == env::Scenario::spread
                            ? "enc.mlp.w0"
                            : "enc.fc.w")
              .shape[0] <= 0)
    throw CheckpointError("eval: checkpoint head does not match the scenario action space");

  EvalReport rep;
  std::ofstream rows;
  if (!out_csv.empty()) {
    rows.open(out_csv);
    rows << "# schema=lsc.eval.v1\ntrial,steps,trial_reward,kills,deaths,success,overload,"
            "mean_n_msg\n";
  }

  const int n = cfg.scenario.num_learners();
  double reward_accum = 0.0;
  long msg_accum = 0, step_accum = 0;
  for (int trial = 0; trial < trials; ++trial) {
    env::WorldState state = env::reset(
        cfg.scenario, derive_seed(cfg.seed, {kStreamEval, static_cast<uint64_t>(trial)}));
    std::vector<Role> roles_by_id(static_cast<size_t>(n), Role::low);
    double trial_reward = 0.0;
    long kills = 0, deaths = 0, success = 0, overload = 0, msgs = 0;
    int steps = 0;
    for (int t = 0; t < cfg.scenario.horizon; ++t) {
      Transition tr;
      const StepOutcome out = policy_step(cfg, nets, state, roles_by_id, trial, t, 0.0, true, &tr);
      double step_mean = 0.0;
      for (int i = 0; i < n; ++i) step_mean += tr.rewards[static_cast<size_t>(i)];
      trial_reward += step_mean / n;
      kills += out.result.info.kills;
      deaths += out.result.info.deaths;
      success += out.result.info.success;
      overload += out.result.info.overload;
      msgs += out.cost.n_msg;
      rep.max_bandwidth = std::max(rep.max_bandwidth, out.cost.n_bandwidth);
      ++steps;
      if (out.result.done) break;
    }
    rep.n_kills += kills;
    rep.n_deaths += deaths;
    rep.n_success += success;
    rep.n_overload += overload;
    msg_accum += msgs;
    step_accum += steps;
    const bool battle = cfg.scenario.scenario == env::Scenario::battle;
    reward_accum += battle ? trial_reward / std::max(1, steps) : trial_reward;
    if (rows.is_open()) {
      rows << trial << ',' << steps << ',';
      write_double(rows, battle ? trial_reward / std::max(1, steps) : trial_reward);
      rows << ',' << kills << ',' << deaths << ',' << success << ',' << overload << ',';
      write_double(rows, steps > 0 ? static_cast<double>(msgs) / steps : 0.0);
      rows << '\n';
    }
  }
  rep.mean_reward = reward_accum / trials;
  rep.kd_ratio = rep.n_deaths > 0 ? static_cast<double>(rep.n_kills) / rep.n_deaths
                                  : static_cast<double>(rep.n_kills);
  rep.mean_n_msg = step_accum > 0 ? static_cast<double>(msg_accum) / step_accum : 0.0;
  return rep;
}

std::vector<SweepRow> sweep(const std::vector<RunConfig>& cfgs, int workers,
                            const std::string& out_csv) {
  if (cfgs.empty()) throw ConfigError("sweep: no configurations");
  for (const RunConfig& c : cfgs) {
    c.validate();
    if (c.scenario.scenario != cfgs.front().scenario.scenario)
      throw ConfigError("sweep: configurations must share the scenario");
  }

  std::vector<SweepRow> rows(cfgs.size());
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, workers));
#else
  (void)workers;
#endif
#pragma omp parallel for schedule(dynamic, 1)
  for (size_t i = 0; i < cfgs.size(); ++i) {
    SweepRow row;
    row.variant = cfgs[i].variant_name;
    row.seed = static_cast<long>(cfgs[i].seed);
    try {
      const TrainResult tr = train(cfgs[i]);
      const size_t m = tr.episode_returns.size();
      const size_t tenth = std::max<size_t>(1, m / 10);
      double first = 0.0, last = 0.0;
      for (size_t e = 0; e < tenth; ++e) first += tr.episode_returns[e];
      for (size_t e = m - tenth; e < m; ++e) last += tr.episode_returns[e];
      row.first10_mean_return = first / tenth;
      row.final10_mean_return = last / tenth;
      row.eval = evaluate(cfgs[i], tr.checkpoint_final, cfgs[i].eval_trials,
                          cfgs[i].out_dir + "/eval.csv");
    } catch (const std::exception&) {
      row.failed = true;
    }
    rows[i] = row;
  }

  // Aggregate rows, one per variant, in first-appearance order.
  std::vector<SweepRow> aggregates;
  for (const RunConfig& c : cfgs) {
    bool seen = false;
    for (const SweepRow& a : aggregates) seen |= a.variant == c.variant_name;
    if (seen) continue;
    SweepRow agg;
    agg.variant = c.variant_name;
    agg.seed = -1;
    int count = 0;
    for (const SweepRow& r : rows) {
      if (r.variant != agg.variant || r.failed) continue;
      agg.first10_mean_return += r.first10_mean_return;
      agg.final10_mean_return += r.final10_mean_return;
      agg.eval.mean_reward += r.eval.mean_reward;
      agg.eval.n_kills += r.eval.n_kills;
      agg.eval.n_deaths += r.eval.n_deaths;
      agg.eval.n_success += r.eval.n_success;
      agg.eval.n_overload += r.eval.n_overload;
      ++count;
    }
    if (count > 0) {
      agg.first10_mean_return /= count;
      agg.final10_mean_return /= count;
      agg.eval.mean_reward /= count;
      agg.eval.kd_ratio = agg.eval.n_deaths > 0
                              ? static_cast<double>(agg.eval.n_kills) / agg.eval.n_deaths
                              : static_cast<double>(agg.eval.n_kills);
    } else {
      agg.failed = true;
    }
    aggregates.push_back(agg);
  }

  std::vector<SweepRow> all = rows;
  all.insert(all.end(), aggregates.begin(), aggregates.end());
  if (!out_csv.empty()) {
    std::ofstream os(out_csv);
    os << "# schema=lsc.sweep.v1\nvariant,seed,failed,first10_mean_return,final10_mean_return,"
          "eval_mean_reward,kills,deaths,kd_ratio,success,overload\n";
    for (const SweepRow& r : all) {
      os << r.variant << ',' << r.seed << ',' << (r.failed ? 1 : 0) << ',';
      write_double(os, r.first10_mean_return);
      os << ',';
      write_double(os, r.final10_mean_return);
      os << ',';
      write_double(os, r.eval.mean_reward);
      os << ',' << r.eval.n_kills << ',' << r.eval.n_deaths << ',';
      write_double(os, r.eval.kd_ratio);
      os << ',' << r.eval.n_success << ',' << r.eval.n_overload << '\n';
    }
  }
  return all;
}

}  // namespace lsc::harness

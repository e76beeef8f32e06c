#include "lsc/learner.hpp"

#include <algorithm>

namespace lsc::learner {

using numcore::ParamSet;
using numcore::Tape;
using numcore::Tensor;
using topology::Role;
using topology::Topology;

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay: capacity must be positive");
  ring_.reserve(capacity);
}

void ReplayBuffer::push(Transition t) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
  } else {
    ring_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(size_t batch, Rng& rng) const {
  if (batch == 0 || batch > ring_.size())
    throw std::invalid_argument("replay: batch exceeds stored transitions");
  // Partial Fisher-Yates over an index vector.
  std::vector<size_t> idx(ring_.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<const Transition*> out;
  out.reserve(batch);
  for (size_t i = 0; i < batch; ++i) {
    const size_t j = i + static_cast<size_t>(rng.next_int(static_cast<int>(idx.size() - i)));
    std::swap(idx[i], idx[j]);
    out.push_back(&ring_[idx[i]]);
  }
  return out;
}

double EpsilonSchedule::value(int64_t step) const {
  if (decay_steps <= 0 || step >= decay_steps) return end;
  if (step < 0) return start;
  return start + (end - start) * static_cast<double>(step) / static_cast<double>(decay_steps);
}

int select_discrete(std::span<const double> q, double epsilon, Rng& rng) {
  if (q.empty()) throw std::invalid_argument("select: empty value vector");
  if (rng.next_double() < epsilon) return rng.next_int(static_cast<int>(q.size()));
  int best = 0;
  for (size_t i = 1; i < q.size(); ++i)
    if (q[i] > q[static_cast<size_t>(best)]) best = static_cast<int>(i);
  return best;
}

Topology rebuild_topology(const TopologySpec& spec, std::span<const int> agent_ids,
                          std::span<const int> weights, std::span<const Vec2> positions,
                          const Topology& prev) {
  switch (spec.kind) {
    case topology::Kind::hierarchical:
      return topology::cbrp(prev, agent_ids, weights, positions, spec.cluster);
    case topology::Kind::none: {
      Topology t;
      t.kind = topology::Kind::none;
      t.agents.assign(agent_ids.begin(), agent_ids.end());
      t.roles.assign(agent_ids.size(), Role::low);
      return t;
    }
    default:
      return topology::build_baseline(spec.kind, agent_ids, positions, spec.baseline_radius);
  }
}

namespace {

struct LiveView {
  std::vector<int> ids;         // agent ids, ascending
  std::vector<int> weights;
  std::vector<Vec2> positions;
  Tensor obs;                   // [m x obs_dim]
};

LiveView live_view(const Tensor& obs, const std::vector<uint8_t>& alive,
                   const std::vector<int>& weights, const std::vector<Vec2>& positions) {
  LiveView v;
  const int64_t d = obs.shape[1];
  for (size_t i = 0; i < alive.size(); ++i) {
    if (!alive[i]) continue;
    v.ids.push_back(static_cast<int>(i));
    v.weights.push_back(weights[i]);
    v.positions.push_back(positions[i]);
  }
  v.obs = Tensor::zeros({static_cast<int64_t>(v.ids.size()), d});
  for (size_t r = 0; r < v.ids.size(); ++r)
    for (int64_t c = 0; c < d; ++c) v.obs.at(static_cast<int64_t>(r), c) = obs.at(v.ids[r], c);
  return v;
}

Topology roles_only(std::span<const int> agent_ids, const std::vector<Role>& roles_by_agent) {
  Topology t;
  t.kind = topology::Kind::hierarchical;
  t.agents.assign(agent_ids.begin(), agent_ids.end());
  for (int id : agent_ids) t.roles.push_back(roles_by_agent[static_cast<size_t>(id)]);
  return t;
}

double row_max(const Tensor& m, int64_t r) {
  double best = m.at(r, 0);
  for (int64_t c = 1; c < m.cols(); ++c) best = std::max(best, m.at(r, c));
  return best;
}

}  // namespace

double weight_generator_loss(const std::vector<const Transition*>& batch,
                             const hcomm::GnnConfig& cfg, ParamSet& online,
                             const ParamSet& target, double gamma, bool use_target) {
  if (batch.empty()) throw std::invalid_argument("weight_generator_loss: empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const Transition* tr : batch) {
    const LiveView now = live_view(tr->obs, tr->alive, tr->weights, tr->positions);
    if (now.ids.empty()) continue;
    const LiveView next = live_view(tr->next_obs, tr->next_alive, tr->weights, tr->next_positions);

    // Bootstrap values come from a gradient-free pass on a scratch tape.
    std::vector<double> next_max(tr->alive.size(), 0.0);
    if (!next.ids.empty()) {
      Tape tt;
      const int qn = hcomm::weightgen_forward(tt, cfg, use_target ? target : online, next.obs);
      for (size_t r = 0; r < next.ids.size(); ++r)
        next_max[static_cast<size_t>(next.ids[r])] = row_max(tt.value(qn), static_cast<int64_t>(r));
    }

    Tensor y = Tensor::zeros({static_cast<int64_t>(now.ids.size()), 1});
    std::vector<int32_t> picks;
    for (size_t r = 0; r < now.ids.size(); ++r) {
      const int id = now.ids[r];
      const bool terminal = tr->done || !tr->next_alive[static_cast<size_t>(id)];
      y.at(static_cast<int64_t>(r), 0) =
          tr->rewards[static_cast<size_t>(id)] +
          (terminal ? 0.0 : gamma * next_max[static_cast<size_t>(id)]);
      picks.push_back(static_cast<int32_t>(r * 3 + tr->weights[static_cast<size_t>(id)]));
    }

    Tape t;
    const int q = hcomm::weightgen_forward(t, cfg, online, now.obs);
    const int qsel = t.take(q, picks, static_cast<int64_t>(now.ids.size()), 1);
    const int loss = t.reduce_sum(t.square(t.sub(qsel, t.input(y))));
    total += t.value(loss).data[0];
    t.backward(loss, Tensor::row({inv_b}), online);
  }
  return total * inv_b;
}

double policy_loss(const std::vector<const Transition*>& batch, const hcomm::GnnConfig& cfg,
                   const TopologySpec& tspec, ParamSet& online, const ParamSet& target,
                   double gamma) {
  if (batch.empty()) throw std::invalid_argument("policy_loss: empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const Transition* tr : batch) {
    const LiveView now = live_view(tr->obs, tr->alive, tr->weights, tr->positions);
    if (now.ids.empty()) continue;
    const LiveView next = live_view(tr->next_obs, tr->next_alive, tr->weights, tr->next_positions);

    const Topology prev_now = roles_only(now.ids, tr->prev_roles);
    const Topology topo_now =
        rebuild_topology(tspec, now.ids, now.weights, now.positions, prev_now);

    std::vector<double> next_max(tr->alive.size(), 0.0);
    if (!next.ids.empty()) {
      // The next-step graph evolves from this step's partition; the stored
      // weights stand in for the next weight picks, which are not replayed.
      const Topology prev_next = roles_only(next.ids, tr->roles_after);
      const Topology topo_next =
          rebuild_topology(tspec, next.ids, next.weights, next.positions, prev_next);
      Tape tt;
      const int qn = hcomm::hcomm_forward(tt, cfg, target, next.obs, topo_next);
      for (size_t r = 0; r < next.ids.size(); ++r)
        next_max[static_cast<size_t>(next.ids[r])] = row_max(tt.value(qn), static_cast<int64_t>(r));
    }

    Tensor y = Tensor::zeros({static_cast<int64_t>(now.ids.size()), 1});
    std::vector<int32_t> picks;
    for (size_t r = 0; r < now.ids.size(); ++r) {
      const int id = now.ids[r];
      const bool terminal = tr->done || !tr->next_alive[static_cast<size_t>(id)];
      y.at(static_cast<int64_t>(r), 0) =
          tr->rewards[static_cast<size_t>(id)] +
          (terminal ? 0.0 : gamma * next_max[static_cast<size_t>(id)]);
      picks.push_back(static_cast<int32_t>(r * cfg.action_count +
                                           tr->actions[static_cast<size_t>(id)]));
    }

    Tape t;
    const int q = hcomm::hcomm_forward(t, cfg, online, now.obs, topo_now);
    const int qsel = t.take(q, picks, static_cast<int64_t>(now.ids.size()), 1);
    const int loss = t.reduce_sum(t.square(t.sub(qsel, t.input(y))));
    total += t.value(loss).data[0];
    t.backward(loss, Tensor::row({inv_b}), online);
  }
  return total * inv_b;
}

void update_targets(ParamSet& policy_target, const ParamSet& policy_online, ParamSet* wg_target,
                    const ParamSet* wg_online, double tau) {
  numcore::soft_update(policy_target, policy_online, tau);
  if (wg_target && wg_online) numcore::soft_update(*wg_target, *wg_online, tau);
}

}  // namespace lsc::learner

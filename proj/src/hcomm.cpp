#include "lsc/hcomm.hpp"

#include <algorithm>

namespace lsc::hcomm {

using numcore::Mlp;
using numcore::ParamSet;
using numcore::Tape;
using numcore::Tensor;
using topology::Edge;
using topology::Role;
using topology::Topology;

GnnConfig GnnConfig::for_scenario(const env::ScenarioConfig& sc) {
  GnnConfig cfg;
  cfg.scenario = sc.scenario;
  cfg.obs_dim = sc.obs_dim();
  cfg.action_count = sc.action_count(env::Team::ally);
  cfg.q_hidden = sc.scenario == env::Scenario::battle ? std::vector<int64_t>{128, 64}
                                                      : std::vector<int64_t>{64, 64};
  cfg.view = sc.view;
  return cfg;
}

void GnnConfig::validate() const {
  if (obs_dim < 1 || action_count < 1) throw ConfigError("gnn: obs/action dims unset");
  if (hidden < 1 || msg_dim < 1) throw ConfigError("gnn: hidden and msg dims must be positive");
  if (scenario == env::Scenario::battle && view < 6)
    throw ConfigError("gnn: battle encoder needs view >= 6 for two 3x3 layers");
}

namespace {

constexpr int kKernel = 3;

struct Phis {
  Mlp up_edge, up_node, inter_edge, inter_node, down_edge, down_node;
};

Phis make_phis(const GnnConfig& cfg) {
  const int64_t h = cfg.hidden, m = cfg.msg_dim;
  const int64_t down_in = 3 * h + (cfg.down_edge_includes_reverse ? m : 0);
  return {
      {"phi.up_edge", {h, m}, true, 0.1},         {"phi.up_node", {m + h, h}, true, 0.1},
      {"phi.inter_edge", {2 * h, m}, true, 0.1},  {"phi.inter_node", {m + h, h}, true, 0.1},
      {"phi.down_edge", {down_in, m}, true, 0.1}, {"phi.down_node", {m + h, h}, true, 0.1},
  };
}

Mlp make_q(const GnnConfig& cfg, int out) {
  Mlp q{"q", {cfg.hidden}, false};
  for (int64_t hsize : cfg.q_hidden) q.dims.push_back(hsize);
  q.dims.push_back(out);
  return q;
}

int conv_spatial(int in_side) { return in_side - kKernel + 1; }

void init_encoder(const GnnConfig& cfg, ParamSet& ps, uint64_t seed) {
  if (cfg.scenario == env::Scenario::spread) {
    Mlp enc{"enc.mlp", {cfg.obs_dim, 64, cfg.hidden}, true};
    enc.init(ps, seed);
    return;
  }
  const int64_t k0_in = kKernel * kKernel * cfg.channels;
  ps.add("enc.conv0.w", numcore::glorot(k0_in, cfg.conv0_out, seed, "enc.conv0.w"));
  ps.add("enc.conv0.b", Tensor::zeros({cfg.conv0_out}));
  const int64_t k1_in = kKernel * kKernel * cfg.conv0_out;
  ps.add("enc.conv1.w", numcore::glorot(k1_in, cfg.conv1_out, seed, "enc.conv1.w"));
  ps.add("enc.conv1.b", Tensor::zeros({cfg.conv1_out}));
  const int s1 = conv_spatial(cfg.view), s2 = conv_spatial(s1);
  const int64_t flat = static_cast<int64_t>(s2) * s2 * cfg.conv1_out + cfg.self_dim;
  ps.add("enc.fc.w", numcore::glorot(flat, cfg.hidden, seed, "enc.fc.w"));
  ps.add("enc.fc.b", Tensor::zeros({cfg.hidden}));
}

// output[r][c] = src[rows[r]][c]
int gather_rows(Tape& t, int src, const std::vector<int>& rows, int64_t cols) {
  std::vector<int32_t> flat;
  flat.reserve(rows.size() * static_cast<size_t>(cols));
  for (int r : rows)
    for (int64_t c = 0; c < cols; ++c) flat.push_back(static_cast<int32_t>(r * cols + c));
  return t.take(src, std::move(flat), static_cast<int64_t>(rows.size()), cols);
}

// Patch-affine layer: gather every kernel patch of an [n, side, side, ch]
// feature map (stored as rows of `src`) into an im2col matrix.
int im2col(Tape& t, int src, int64_t n, int side, int ch) {
  const int out = conv_spatial(side);
  std::vector<int32_t> idx;
  idx.reserve(static_cast<size_t>(n * out * out * kKernel * kKernel * ch));
  const int64_t row_stride = static_cast<int64_t>(side) * side * ch;
  for (int64_t a = 0; a < n; ++a)
    for (int py = 0; py < out; ++py)
      for (int px = 0; px < out; ++px)
        for (int ky = 0; ky < kKernel; ++ky)
          for (int kx = 0; kx < kKernel; ++kx)
            for (int c = 0; c < ch; ++c)
              idx.push_back(static_cast<int32_t>(a * row_stride +
                                                 ((py + ky) * side + (px + kx)) * ch + c));
  return t.take(src, std::move(idx), n * out * out, static_cast<int64_t>(kKernel) * kKernel * ch);
}

void record_messages(Probe* probe, const Tape& t, int msg_node, const char* phase,
                     const std::vector<Edge>& edges) {
  if (!probe) return;
  const Tensor& msgs = t.value(msg_node);
  for (size_t i = 0; i < edges.size(); ++i) {
    Probe::Msg m;
    m.phase = phase;
    m.src = edges[i].src;
    m.dst = edges[i].dst;
    for (int64_t c = 0; c < msgs.cols(); ++c) m.payload.push_back(msgs.at(static_cast<int64_t>(i), c));
    probe->messages.push_back(std::move(m));
  }
}

}  // namespace

void init_policy_params(const GnnConfig& cfg, ParamSet& ps, uint64_t seed) {
  cfg.validate();
  init_encoder(cfg, ps, seed);
  const Phis phis = make_phis(cfg);
  phis.up_edge.init(ps, seed);
  phis.up_node.init(ps, seed);
  phis.inter_edge.init(ps, seed);
  phis.inter_node.init(ps, seed);
  phis.down_edge.init(ps, seed);
  phis.down_node.init(ps, seed);
  make_q(cfg, cfg.action_count).init(ps, seed);
}

void init_weightgen_params(const GnnConfig& cfg, ParamSet& ps, uint64_t seed) {
  cfg.validate();
  init_encoder(cfg, ps, seed);
  make_q(cfg, 3).init(ps, seed);
}

int encode(Tape& t, const GnnConfig& cfg, const ParamSet& ps, int obs_node) {
  const int64_t n = t.value(obs_node).shape[0];
  if (cfg.scenario == env::Scenario::spread) {
    Mlp enc{"enc.mlp", {cfg.obs_dim, 64, cfg.hidden}, true};
    return enc.apply(t, ps, obs_node);
  }
  const int side1 = cfg.view;
  const int side2 = conv_spatial(side1);
  const int side3 = conv_spatial(side2);
  // The window occupies the leading view*view*channels columns of each row;
  // im2col treats those columns as an [n, view, view, channels] map.
  std::vector<int32_t> win_idx;
  const int64_t win = static_cast<int64_t>(side1) * side1 * cfg.channels;
  for (int64_t a = 0; a < n; ++a)
    for (int64_t j = 0; j < win; ++j) win_idx.push_back(static_cast<int32_t>(a * cfg.obs_dim + j));
  const int window = t.take(obs_node, std::move(win_idx), n, win);
  const int col0 = im2col(t, window, n, side1, cfg.channels);
  const int r0 =
      t.relu(t.affine(col0, t.param(ps, "enc.conv0.w"), t.param(ps, "enc.conv0.b")));
  const int col1 = im2col(t, r0, n, side2, cfg.conv0_out);
  const int r1 =
      t.relu(t.affine(col1, t.param(ps, "enc.conv1.w"), t.param(ps, "enc.conv1.b")));
  // Flatten the [n, side3, side3, conv1_out] map back to one row per agent.
  const int64_t flat = static_cast<int64_t>(side3) * side3 * cfg.conv1_out;
  std::vector<int32_t> flat_idx;
  for (int64_t a = 0; a < n; ++a)
    for (int64_t j = 0; j < flat; ++j) flat_idx.push_back(static_cast<int32_t>(a * flat + j));
  const int spatial = t.take(r1, std::move(flat_idx), n, flat);
  std::vector<int32_t> self_idx;
  for (int64_t a = 0; a < n; ++a)
    for (int j = 0; j < cfg.self_dim; ++j)
      self_idx.push_back(static_cast<int32_t>(a * cfg.obs_dim + win + j));
  const int self = t.take(obs_node, std::move(self_idx), n, cfg.self_dim);
  const int cat = t.concat_cols({spatial, self});
  return t.relu(t.affine(cat, t.param(ps, "enc.fc.w"), t.param(ps, "enc.fc.b")));
}

NodeFeatures intra_aggregate(Tape& t, const GnnConfig& cfg, const ParamSet& ps, int embed,
                             const Topology& topo, Probe* probe) {
  NodeFeatures nf;
  nf.embed = embed;
  nf.leaders = topo.high_level();
  const int64_t k = static_cast<int64_t>(nf.leaders.size());
  const Phis phis = make_phis(cfg);

  auto leader_index = [&](int agent) {
    return static_cast<int32_t>(std::lower_bound(nf.leaders.begin(), nf.leaders.end(), agent) -
                                nf.leaders.begin());
  };

  std::vector<Edge> up_edges;
  for (const Edge& e : topo.edges) {
    const int si = topo.index_of(e.src), di = topo.index_of(e.dst);
    if (topo.roles[static_cast<size_t>(si)] == Role::low &&
        topo.roles[static_cast<size_t>(di)] == Role::high)
      up_edges.push_back(e);
  }
  std::vector<int> senders;
  std::vector<int32_t> segments;
  for (const Edge& e : up_edges) {
    senders.push_back(topo.index_of(e.src));
    segments.push_back(leader_index(e.dst));
  }
  const int msgs = phis.up_edge.apply(t, ps, gather_rows(t, embed, senders, cfg.hidden));
  record_messages(probe, t, msgs, "up", up_edges);
  const int agg = t.segment_sum(msgs, segments, k);
  std::vector<int> leader_rows;
  for (int lid : nf.leaders) leader_rows.push_back(topo.index_of(lid));
  const int leader_embed = gather_rows(t, embed, leader_rows, cfg.hidden);
  nf.cluster = phis.up_node.apply(t, ps, t.concat_cols({agg, leader_embed}));
  return nf;
}

void inter_share(Tape& t, const GnnConfig& cfg, const ParamSet& ps, NodeFeatures& nf,
                 const Topology& topo, Probe* probe) {
  const Phis phis = make_phis(cfg);
  const int64_t k = static_cast<int64_t>(nf.leaders.size());
  auto leader_index = [&](int agent) {
    return static_cast<int32_t>(std::lower_bound(nf.leaders.begin(), nf.leaders.end(), agent) -
                                nf.leaders.begin());
  };
  std::vector<Edge> inter_edges;
  for (const Edge& e : topo.edges) {
    const int si = topo.index_of(e.src), di = topo.index_of(e.dst);
    if (topo.roles[static_cast<size_t>(si)] == Role::high &&
        topo.roles[static_cast<size_t>(di)] == Role::high)
      inter_edges.push_back(e);
  }
  std::vector<int> src_leader_rows;    // rows into cluster/global space
  std::vector<int> src_agent_rows;     // rows into embed space
  std::vector<int32_t> segments;
  for (const Edge& e : inter_edges) {
    src_leader_rows.push_back(leader_index(e.src));
    src_agent_rows.push_back(topo.index_of(e.src));
    segments.push_back(leader_index(e.dst));
  }
  const int src_cluster = gather_rows(t, nf.cluster, src_leader_rows, cfg.hidden);
  const int src_embed = gather_rows(t, nf.embed, src_agent_rows, cfg.hidden);
  const int msgs = phis.inter_edge.apply(t, ps, t.concat_cols({src_cluster, src_embed}));
  record_messages(probe, t, msgs, "inter", inter_edges);
  const int agg = t.segment_sum(msgs, segments, k);
  std::vector<int> leader_rows;
  for (int lid : nf.leaders) leader_rows.push_back(topo.index_of(lid));
  const int leader_embed = gather_rows(t, nf.embed, leader_rows, cfg.hidden);
  nf.global = phis.inter_node.apply(t, ps, t.concat_cols({agg, leader_embed}));
}

int intra_share(Tape& t, const GnnConfig& cfg, const ParamSet& ps, const NodeFeatures& nf,
                const Topology& topo, Probe* probe) {
  const Phis phis = make_phis(cfg);
  auto leader_index = [&](int agent) {
    return static_cast<int>(std::lower_bound(nf.leaders.begin(), nf.leaders.end(), agent) -
                            nf.leaders.begin());
  };

  std::vector<Edge> down_edges;
  for (const Edge& e : topo.edges) {
    const int si = topo.index_of(e.src), di = topo.index_of(e.dst);
    if (topo.roles[static_cast<size_t>(si)] == Role::high &&
        topo.roles[static_cast<size_t>(di)] == Role::low)
      down_edges.push_back(e);
  }

  int embed_out = nf.embed;
  // Followers: one message per down edge, aggregated per receiver.
  if (!down_edges.empty()) {
    std::vector<int> receivers;  // unique receiver rows, ascending
    for (const Edge& e : down_edges) receivers.push_back(topo.index_of(e.dst));
    std::sort(receivers.begin(), receivers.end());
    receivers.erase(std::unique(receivers.begin(), receivers.end()), receivers.end());
    auto receiver_index = [&](int row) {
      return static_cast<int32_t>(std::lower_bound(receivers.begin(), receivers.end(), row) -
                                  receivers.begin());
    };
    std::vector<int> src_leader_rows, src_agent_rows;
    std::vector<int32_t> segments;
    for (const Edge& e : down_edges) {
      src_leader_rows.push_back(leader_index(e.src));
      src_agent_rows.push_back(topo.index_of(e.src));
      segments.push_back(receiver_index(topo.index_of(e.dst)));
    }
    std::vector<int> parts{gather_rows(t, nf.global, src_leader_rows, cfg.hidden),
                           gather_rows(t, nf.cluster, src_leader_rows, cfg.hidden),
                           gather_rows(t, nf.embed, src_agent_rows, cfg.hidden)};
    if (cfg.down_edge_includes_reverse) {
      // The reverse payload is the follower's own up message, recomputed from
      // its embedding (the up edge mirrors every down edge).
      std::vector<int> recv_rows;
      for (const Edge& e : down_edges) recv_rows.push_back(topo.index_of(e.dst));
      const Phis p2 = make_phis(cfg);
      parts.push_back(p2.up_edge.apply(t, ps, gather_rows(t, nf.embed, recv_rows, cfg.hidden)));
    }
    const int msgs = phis.down_edge.apply(t, ps, t.concat_cols(parts));
    record_messages(probe, t, msgs, "down", down_edges);
    const int agg = t.segment_sum(msgs, segments, static_cast<int64_t>(receivers.size()));
    const int recv_embed = gather_rows(t, nf.embed, receivers, cfg.hidden);
    const int updated = phis.down_node.apply(t, ps, t.concat_cols({agg, recv_embed}));
    std::vector<int32_t> rows(receivers.begin(), receivers.end());
    embed_out = t.overwrite_rows(embed_out, updated, std::move(rows));
  }

  // Leaders update themselves from their own feature triple.
  if (!nf.leaders.empty()) {
    std::vector<int> leader_rows;
    for (int lid : nf.leaders) leader_rows.push_back(topo.index_of(lid));
    std::vector<int> self_leader_rows(nf.leaders.size());
    for (size_t i = 0; i < nf.leaders.size(); ++i) self_leader_rows[i] = static_cast<int>(i);
    std::vector<int> parts{gather_rows(t, nf.global, self_leader_rows, cfg.hidden),
                           gather_rows(t, nf.cluster, self_leader_rows, cfg.hidden),
                           gather_rows(t, nf.embed, leader_rows, cfg.hidden)};
    if (cfg.down_edge_includes_reverse)
      parts.push_back(t.input(Tensor::zeros({static_cast<int64_t>(nf.leaders.size()), cfg.msg_dim})));
    const int msgs = phis.down_edge.apply(t, ps, t.concat_cols(parts));
    if (probe) {
      std::vector<Edge> self_edges;
      for (int lid : nf.leaders) self_edges.push_back({lid, lid});
      record_messages(probe, t, msgs, "down", self_edges);
    }
    const int lead_embed = gather_rows(t, nf.embed, leader_rows, cfg.hidden);
    const int updated = phis.down_node.apply(t, ps, t.concat_cols({msgs, lead_embed}));
    std::vector<int32_t> rows(leader_rows.begin(), leader_rows.end());
    embed_out = t.overwrite_rows(embed_out, updated, std::move(rows));
  }
  return embed_out;
}

namespace {

// Single generic round over a baseline edge set: every agent shares its
// embedding along the edges and every agent folds in whatever arrived.
int baseline_round(Tape& t, const GnnConfig& cfg, const ParamSet& ps, int embed,
                   const Topology& topo, Probe* probe) {
  const Phis phis = make_phis(cfg);
  const int64_t n = static_cast<int64_t>(topo.agents.size());
  std::vector<int> senders;
  std::vector<int32_t> segments;
  for (const Edge& e : topo.edges) {
    senders.push_back(topo.index_of(e.src));
    segments.push_back(static_cast<int32_t>(topo.index_of(e.dst)));
  }
  const int msgs = phis.up_edge.apply(t, ps, gather_rows(t, embed, senders, cfg.hidden));
  record_messages(probe, t, msgs, "up", topo.edges);
  const int agg = t.segment_sum(msgs, segments, n);
  return phis.up_node.apply(t, ps, t.concat_cols({agg, embed}));
}

}  // namespace

int hcomm_forward(Tape& t, const GnnConfig& cfg, const ParamSet& ps, const Tensor& obs_matrix,
                  const Topology& topo, Probe* probe) {
  if (obs_matrix.shape[0] != static_cast<int64_t>(topo.agents.size()))
    throw NumericError("hcomm: observation rows must match the live agent set");
  const int obs_node = t.input(obs_matrix);
  int embed = encode(t, cfg, ps, obs_node);

  if (topo.kind == topology::Kind::hierarchical && !topo.agents.empty()) {
    NodeFeatures nf = intra_aggregate(t, cfg, ps, embed, topo, probe);
    inter_share(t, cfg, ps, nf, topo, probe);
    embed = intra_share(t, cfg, ps, nf, topo, probe);
    if (probe) {
      probe->leaders = nf.leaders;
      const Tensor& cl = t.value(nf.cluster);
      const Tensor& gl = t.value(nf.global);
      for (int64_t i = 0; i < cl.rows(); ++i) {
        probe->cluster.emplace_back(cl.data.begin() + i * cl.cols(),
                                    cl.data.begin() + (i + 1) * cl.cols());
        probe->global.emplace_back(gl.data.begin() + i * gl.cols(),
                                   gl.data.begin() + (i + 1) * gl.cols());
      }
    }
  } else if (topo.kind != topology::Kind::none && !topo.agents.empty()) {
    embed = baseline_round(t, cfg, ps, embed, topo, probe);
  }

  if (probe) {
    probe->agents = topo.agents;
    const Tensor& em = t.value(embed);
    for (int64_t i = 0; i < em.rows(); ++i)
      probe->embed.emplace_back(em.data.begin() + i * em.cols(),
                                em.data.begin() + (i + 1) * em.cols());
  }
  return make_q(cfg, cfg.action_count).apply(t, ps, embed);
}

int weightgen_forward(Tape& t, const GnnConfig& cfg, const ParamSet& ps,
                      const Tensor& obs_matrix) {
  const int obs_node = t.input(obs_matrix);
  const int embed = encode(t, cfg, ps, obs_node);
  return make_q(cfg, 3).apply(t, ps, embed);
}

}  // namespace lsc::hcomm

#pragma once

#include <algorithm>
#include <cstdio>
#include <deque>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "kdgp/errors.hpp"
#include "kdgp/geometry.hpp"
#include "kdgp/maxplus.hpp"
#include "kdgp/message.hpp"

namespace kdgp {

/// Undirected communication graph of a deployment: an edge joins two sensors
/// whose distance is at most d_comm. No self-loops; adjacency symmetric.
struct NetworkGraph {
  int R = 0;
  std::vector<Vec2> positions;
  double d_comm = 0.0;
  std::vector<std::pair<int, int>> edges;   ///< i < j, 0-based
  std::vector<std::vector<int>> neighbors;  ///< sorted per node

  bool has_edge(int i, int j) const {
    const auto& n = neighbors[static_cast<std::size_t>(i)];
    return std::binary_search(n.begin(), n.end(), j);
  }
  int max_degree() const {
    int d = 0;
    for (const auto& n : neighbors) d = std::max(d, static_cast<int>(n.size()));
    return d;
  }
};

/// Link degradation models of the consensus experiments.
///  - sync: every edge delivers every iteration.
///  - async: each undirected edge delivers (both directions) with probability
///    p per iteration; `lossy_fraction` < 1 restricts failures to a seeded
///    random subset of edges, the rest behaving synchronously.
///  - packet_loss: edges deliver, but each delivered message is truncated
///    with probability p: a row index drawn uniformly over 1..rows and that
///    row through the last replaced by zeros at the receiver.
struct LinkModel {
  enum class Variant { kSync, kAsync, kPacketLoss };
  Variant variant = Variant::kSync;
  double p = 1.0;
  double lossy_fraction = 1.0;

  void validate() const {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("LinkModel: p must be in [0, 1]");
    if (lossy_fraction < 0.0 || lossy_fraction > 1.0)
      throw std::invalid_argument("LinkModel: lossy_fraction must be in [0, 1]");
  }
};

/// One directed delivery for this iteration. drop_from_row == 0 means the
/// message arrives intact; otherwise rows drop_from_row..rows (1-based) are
/// zeroed at the receiver.
struct Delivery {
  int src = 0;
  int dst = 0;
  int drop_from_row = 0;
};

using DeliveryPlan = std::vector<Delivery>;

inline NetworkGraph graph_from_positions(std::vector<Vec2> positions, double d_comm) {
  NetworkGraph g;
  g.R = static_cast<int>(positions.size());
  g.positions = std::move(positions);
  g.d_comm = d_comm;
  g.neighbors.assign(static_cast<std::size_t>(g.R), {});
  for (int i = 0; i < g.R; ++i)
    for (int j = i + 1; j < g.R; ++j)
      if ((g.positions[static_cast<std::size_t>(i)] - g.positions[static_cast<std::size_t>(j)]).norm() <= d_comm) {
        g.edges.emplace_back(i, j);
        g.neighbors[static_cast<std::size_t>(i)].push_back(j);
        g.neighbors[static_cast<std::size_t>(j)].push_back(i);
      }
  return g;
}

inline bool is_connected(const NetworkGraph& g) {
  if (g.R == 0) return false;
  std::vector<char> seen(static_cast<std::size_t>(g.R), 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  int count = 1;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : g.neighbors[static_cast<std::size_t>(u)])
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++count;
        queue.push_back(v);
      }
  }
  return count == g.R;
}

/// Graph diameter by repeated BFS. Independent of the max-plus reachability
/// route, so the two can cross-check each other.
inline int bfs_diameter(const NetworkGraph& g) {
  int diameter = 0;
  std::vector<int> dist(static_cast<std::size_t>(g.R));
  for (int s = 0; s < g.R; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[static_cast<std::size_t>(s)] = 0;
    std::deque<int> queue{s};
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int v : g.neighbors[static_cast<std::size_t>(u)])
        if (dist[static_cast<std::size_t>(v)] < 0) {
          dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
          queue.push_back(v);
        }
    }
    for (int d : dist) {
      if (d < 0) throw ConfigError("bfs_diameter: graph not connected");
      diameter = std::max(diameter, d);
    }
  }
  return diameter;
}

/// Uniform random deployment, redrawn until connected (at most 100 attempts).
inline NetworkGraph random_geometric_deployment(int R, const Rect& domain, double d_comm,
                                                std::mt19937_64& rng) {
  if (R < 1) throw std::invalid_argument("random_geometric_deployment: R must be >= 1");
  std::uniform_real_distribution<double> ux(domain.xmin, domain.xmax);
  std::uniform_real_distribution<double> uy(domain.ymin, domain.ymax);
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<Vec2> pos;
    pos.reserve(static_cast<std::size_t>(R));
    for (int r = 0; r < R; ++r) {
      const double x = ux(rng);
      const double y = uy(rng);
      pos.emplace_back(x, y);
    }
    NetworkGraph g = graph_from_positions(std::move(pos), d_comm);
    if (is_connected(g)) return g;
  }
  throw ConfigError("random_geometric_deployment: no connected deployment in 100 attempts");
}

/// Max-plus adjacency with self-loops: a_ij = e iff edge or i = j, else eps.
/// Self-loops make mp_mat_pow reachability match the protocol's max over
/// {r} union N_r.
inline maxplus::MaxPlusMatrix build_adjacency(const NetworkGraph& g) {
  maxplus::MaxPlusMatrix a(g.R, g.R);
  for (int i = 0; i < g.R; ++i) a(i, i) = maxplus::e;
  for (const auto& [i, j] : g.edges) {
    a(i, j) = maxplus::e;
    a(j, i) = maxplus::e;
  }
  return a;
}

/// Seeded choice of which edges are lossy. The mask is indexed like
/// g.edges; an empty mask is treated as all-lossy.
inline std::vector<std::uint8_t> make_lossy_mask(const NetworkGraph& g, double fraction,
                                                 std::mt19937_64& rng) {
  std::vector<std::uint8_t> mask(g.edges.size(), 1);
  if (fraction >= 1.0) return mask;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& m : mask) m = u(rng) < fraction ? 1 : 0;
  return mask;
}

/// Per-iteration delivery decisions. Async failures are drawn once per
/// undirected edge (both directions fail together); packet-loss drop rows
/// are drawn per directed delivery. `msg_rows` is the row count of the
/// matrices in flight (E+1 for consensus messages).
inline DeliveryPlan effective_links(const NetworkGraph& g, const LinkModel& model,
                                    int msg_rows, std::mt19937_64& rng,
                                    const std::vector<std::uint8_t>& lossy_mask = {}) {
  model.validate();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> row(1, msg_rows);
  DeliveryPlan plan;
  plan.reserve(2 * g.edges.size());
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto& [i, j] = g.edges[k];
    const bool lossy = lossy_mask.empty() || lossy_mask[k];
    bool deliver = true;
    if (model.variant == LinkModel::Variant::kAsync && lossy) deliver = u(rng) < model.p;
    if (!deliver) continue;
    int drop_ij = 0, drop_ji = 0;
    if (model.variant == LinkModel::Variant::kPacketLoss && lossy) {
      if (u(rng) < model.p) drop_ij = row(rng);
      if (u(rng) < model.p) drop_ji = row(rng);
    }
    plan.push_back({i, j, drop_ij});
    plan.push_back({j, i, drop_ji});
  }
  return plan;
}

/// Zeroes rows drop..last (1-based) in place; drop == 0 leaves m intact.
inline void apply_row_drop(Eigen::MatrixXd& m, int drop_from_row) {
  if (drop_from_row <= 0) return;
  const int first = drop_from_row - 1;
  if (first < m.rows()) m.bottomRows(m.rows() - first).setZero();
}

/// Routes consensus messages through the delivery plan. A sensor never
/// receives its own message; it folds itself into the consensus max directly.
inline std::vector<std::vector<SharedMessage>> exchange_messages(
    const std::vector<SharedMessage>& outboxes, const DeliveryPlan& plan) {
  std::vector<std::vector<SharedMessage>> inboxes(outboxes.size());
  for (const auto& d : plan) {
    SharedMessage msg = outboxes[static_cast<std::size_t>(d.src)];
    apply_row_drop(msg.matrix, d.drop_from_row);
    inboxes[static_cast<std::size_t>(d.dst)].push_back(std::move(msg));
  }
  return inboxes;
}

/// Same routing for bare matrices (average-consensus payloads).
inline std::vector<std::vector<Eigen::MatrixXd>> exchange_matrices(
    const std::vector<Eigen::MatrixXd>& outboxes, const DeliveryPlan& plan) {
  std::vector<std::vector<Eigen::MatrixXd>> inboxes(outboxes.size());
  for (const auto& d : plan) {
    Eigen::MatrixXd m = outboxes[static_cast<std::size_t>(d.src)];
    apply_row_drop(m, d.drop_from_row);
    inboxes[static_cast<std::size_t>(d.dst)].push_back(std::move(m));
  }
  return inboxes;
}

/// Edge-list export for plotting: one "i j" pair per line, 0-based.
inline void write_edge_list(const NetworkGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_edge_list: cannot open " + path);
  for (const auto& [i, j] : g.edges) out << i << ' ' << j << '\n';
}

}  // namespace kdgp

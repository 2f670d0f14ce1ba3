// Chu-Liu/Edmonds maximum spanning arborescence over dense score matrices.

#include "codemix/mst.hpp"

#include <cmath>
#include <limits>

#include "codemix/error.hpp"

namespace codemix {

namespace {

constexpr double kForbidden = -1e12;

struct Edge {
  int u = 0;       // head, current-level id
  int v = 0;       // dependent, current-level id
  double w = 0;    // possibly cycle-adjusted weight
  int parent = -1; // index into the caller's edge list
};

// Returns, per node v in 1..num_nodes-1, the index of its chosen in-edge.
// Slot 0 is unused. Edge order is the tie-breaker: the first maximum wins.
std::vector<int> solve(int num_nodes, const std::vector<Edge>& edges) {
  std::vector<int> best(static_cast<std::size_t>(num_nodes), -1);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    int v = edges[e].v;
    int& b = best[static_cast<std::size_t>(v)];
    if (b < 0 || edges[e].w > edges[static_cast<std::size_t>(b)].w) b = static_cast<int>(e);
  }
  for (int v = 1; v < num_nodes; ++v)
    if (best[static_cast<std::size_t>(v)] < 0)
      throw ContractViolation("node without incoming edges");

  // Cycle detection on the functional graph v -> head(v).
  std::vector<int> state(static_cast<std::size_t>(num_nodes), 0);  // 0 new, 1 on path, 2 done
  state[0] = 2;
  std::vector<int> cycle;
  for (int s = 1; s < num_nodes && cycle.empty(); ++s) {
    if (state[static_cast<std::size_t>(s)] != 0) continue;
    int u = s;
    std::vector<int> path;
    while (state[static_cast<std::size_t>(u)] == 0) {
      state[static_cast<std::size_t>(u)] = 1;
      path.push_back(u);
      u = edges[static_cast<std::size_t>(best[static_cast<std::size_t>(u)])].u;
    }
    if (state[static_cast<std::size_t>(u)] == 1) {
      int x = u;
      do {
        cycle.push_back(x);
        x = edges[static_cast<std::size_t>(best[static_cast<std::size_t>(x)])].u;
      } while (x != u);
    }
    for (int p : path) state[static_cast<std::size_t>(p)] = 2;
  }
  if (cycle.empty()) return best;

  // Contract the cycle into one supernode and recurse.
  std::vector<char> in_cycle(static_cast<std::size_t>(num_nodes), 0);
  for (int c : cycle) in_cycle[static_cast<std::size_t>(c)] = 1;
  std::vector<int> remap(static_cast<std::size_t>(num_nodes), -1);
  int next = 0;
  for (int v = 0; v < num_nodes; ++v)
    if (!in_cycle[static_cast<std::size_t>(v)]) remap[static_cast<std::size_t>(v)] = next++;
  const int cyc_id = next++;
  for (int c : cycle) remap[static_cast<std::size_t>(c)] = cyc_id;

  std::vector<Edge> sub;
  sub.reserve(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Edge& ed = edges[e];
    bool uc = in_cycle[static_cast<std::size_t>(ed.u)] != 0;
    bool vc = in_cycle[static_cast<std::size_t>(ed.v)] != 0;
    if (uc && vc) continue;
    Edge ne;
    ne.u = remap[static_cast<std::size_t>(ed.u)];
    ne.v = remap[static_cast<std::size_t>(ed.v)];
    ne.parent = static_cast<int>(e);
    // Entering the cycle displaces the cycle's own in-edge at that node.
    ne.w = vc ? ed.w - edges[static_cast<std::size_t>(best[static_cast<std::size_t>(ed.v)])].w
              : ed.w;
    sub.push_back(ne);
  }

  std::vector<int> sub_best = solve(next, sub);

  std::vector<int> result(static_cast<std::size_t>(num_nodes), -1);
  int enter_edge = -1;
  for (int v = 1; v < next; ++v) {
    int pe = sub[static_cast<std::size_t>(sub_best[static_cast<std::size_t>(v)])].parent;
    if (v == cyc_id)
      enter_edge = pe;
    else
      result[static_cast<std::size_t>(edges[static_cast<std::size_t>(pe)].v)] = pe;
  }
  const int entered_v = edges[static_cast<std::size_t>(enter_edge)].v;
  for (int c : cycle)
    if (c != entered_v) result[static_cast<std::size_t>(c)] = best[static_cast<std::size_t>(c)];
  result[static_cast<std::size_t>(entered_v)] = enter_edge;
  return result;
}

std::vector<int> run(const Eigen::MatrixXd& weights) {
  const int n = static_cast<int>(weights.cols());
  if (n == 0) return {};
  if (weights.rows() != n + 1) throw ContractViolation("weights must be (n+1) x n");
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n + 1));
  for (int v = 1; v <= n; ++v) {
    for (int u = 0; u <= n; ++u) {
      if (u == v) continue;
      double w = weights(u, v - 1);
      if (!std::isfinite(w)) throw ContractViolation("non-finite arc weight");
      edges.push_back({u, v, w, -1});
    }
  }
  std::vector<int> best = solve(n + 1, edges);
  std::vector<int> heads(static_cast<std::size_t>(n), 0);
  for (int v = 1; v <= n; ++v)
    heads[static_cast<std::size_t>(v - 1)] = edges[static_cast<std::size_t>(best[static_cast<std::size_t>(v)])].u;
  return heads;
}

}  // namespace

std::vector<int> chu_liu_edmonds(const Eigen::MatrixXd& weights) { return run(weights); }

std::vector<int> decode_mst(const Eigen::MatrixXd& weights) {
  std::vector<int> heads = run(weights);
  const int n = static_cast<int>(weights.cols());
  int roots = 0;
  for (int h : heads) roots += h == 0;
  if (roots <= 1) return heads;

  std::vector<int> best_heads;
  double best_total = -std::numeric_limits<double>::infinity();
  for (int r = 1; r <= n; ++r) {
    Eigen::MatrixXd w2 = weights;
    for (int i = 1; i <= n; ++i)
      if (i != r) w2(0, i - 1) = kForbidden;
    std::vector<int> h = run(w2);
    bool used_forbidden = false;
    double total = 0;
    for (int i = 1; i <= n; ++i) {
      if (h[static_cast<std::size_t>(i - 1)] == 0 && i != r) used_forbidden = true;
      total += weights(h[static_cast<std::size_t>(i - 1)], i - 1);
    }
    if (used_forbidden) continue;
    if (total > best_total) {
      best_total = total;
      best_heads = std::move(h);
    }
  }
  return best_heads;
}

}  // namespace codemix

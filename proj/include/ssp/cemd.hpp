#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssp/rs.hpp"

namespace ssp::cemd {

// h x w signal matrix, row major. Projections operate on |x|^p.
struct GridSignal {
  int h = 1;
  int w = 1;
  std::vector<double> values;  // values[r*w + c]
  double norm_p = 1.0;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * w + c]; }
  Index n() const { return static_cast<Index>(h) * w; }
};

struct CemdParams {
  Index k = 1;        // total sparsity; w must divide k
  Index budget = 0;   // EMD budget B
  double delta = 0.05;

  Index column_sparsity(int w) const { return k / w; }
};

// Support as per-column sorted row lists; every column holds exactly s rows.
using Support = std::vector<std::vector<int>>;

struct SupportResult {
  Support columns;
  double head = 0;   // sum of |x|^p over the support
  Index emd = 0;     // support EMD
  std::string algorithm;
  int flow_calls = 0;
};

struct LambdaBracket {
  double lo = 0;  // larger multiplier: its support meets the EMD budget
  double hi = 0;  // "r": the smaller multiplier, EMD at or above budget
  int iterations = 0;
  bool collapsed = false;  // the unconstrained optimum already fit the budget
};

// Minimum-cost bijection between two equal-size index sets on the line.
Index emd(const std::vector<int>& a, const std::vector<int>& b);
// Sum of column-to-column EMDs; all columns must have equal cardinality.
Index support_emd(const Support& s);

double head_value(const GridSignal& x, const Support& s);

// EMD flow network: one unit-capacity node per entry carrying cost -|x|^p,
// complete unit edges between adjacent columns costing lambda * row distance.
struct FlowNetwork {
  struct Edge {
    int to;
    int cap;
    double cost;
    int flow = 0;
    int rev;  // index of the reverse edge in adj[to]
  };
  int h = 0, w = 0;
  Index supply = 0;
  int source = 0, sink = 1;
  std::vector<std::vector<Edge>> adj;

  int in_node(int r, int c) const { return 2 + 2 * (c * h + r); }
  int out_node(int r, int c) const { return in_node(r, c) + 1; }
  const Edge& split_edge(int r, int c) const { return adj[static_cast<std::size_t>(in_node(r, c))][0]; }
};

FlowNetwork build_flow_network(const GridSignal& x, Index column_sparsity, double lambda);

// Integral min-cost max-flow via successive shortest augmenting paths with
// vertex potentials; decomposes into exactly s node-disjoint paths.
SupportResult min_cost_flow(FlowNetwork& g, const GridSignal& x);

// Bisection over the EMD penalty, maintaining emd(lo side) <= B <= emd(hi side).
struct LambdaSearchResult {
  SupportResult omega_l;
  SupportResult omega_r;
  LambdaBracket bracket;
};
LambdaSearchResult lambda_search(const GridSignal& x, const CemdParams& params);

// One source-sink path as its per-column rows.
using Path = std::vector<int>;

Index path_emd(const Path& p);
double path_head(const GridSignal& x, const Path& p);

// Row-cut decomposition: a path with EMD at most emd(p)/d keeping at least
// head(p)/(2d).
Path path_decompose(const Path& p, Index d, const GridSignal& x);

// Single-criterion head projection: lambda search, per-path decomposition of
// the over-budget side, best in-model candidate.
SupportResult cemd_head_projection(const GridSignal& x, const CemdParams& params);

// Tail-side plumbing for recovery: best support with EMD at most 2B over a
// fixed lambda grid (monotone in the budget by construction).
SupportResult cemd_tail_projection(const GridSignal& x, const CemdParams& params);

// Canonical node-disjoint paths of a support: q-th smallest row per column.
std::vector<Path> support_paths(const Support& s);

bool in_model(const Support& s, int h, int w, Index column_sparsity, Index budget);

}  // namespace ssp::cemd

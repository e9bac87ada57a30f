#include "ssp/cemd.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace ssp::cemd {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double powered(const GridSignal& x, int r, int c) {
  return std::pow(std::abs(x.at(r, c)), x.norm_p);
}

void validate(const GridSignal& x, const CemdParams& params) {
  require(x.h >= 1 && x.w >= 1, "grid must be nonempty");
  require(static_cast<Index>(x.values.size()) == x.n(), "grid dimensions mismatch");
  require(params.k >= 1 && params.k % x.w == 0, "w must divide k");
  require(params.k / x.w <= x.h, "column sparsity exceeds grid height");
  require(params.budget >= 0, "EMD budget must be nonnegative");
  require(params.delta > 0 && params.delta < 0.25, "delta must lie in (0, 1/4)");
}

// Best zero-EMD support: the s rows with the largest full-row weight.
Support best_constant_rows(const GridSignal& x, Index s) {
  std::vector<std::pair<double, int>> rows(static_cast<std::size_t>(x.h));
  for (int r = 0; r < x.h; ++r) {
    double sum = 0;
    for (int c = 0; c < x.w; ++c) sum += powered(x, r, c);
    rows[static_cast<std::size_t>(r)] = {sum, r};
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  std::vector<int> chosen;
  for (Index i = 0; i < s; ++i) chosen.push_back(rows[static_cast<std::size_t>(i)].second);
  std::sort(chosen.begin(), chosen.end());
  return Support(static_cast<std::size_t>(x.w), chosen);
}

SupportResult finish(const GridSignal& x, Support s, const char* algorithm) {
  SupportResult res;
  res.columns = std::move(s);
  res.head = head_value(x, res.columns);
  res.emd = support_emd(res.columns);
  res.algorithm = algorithm;
  return res;
}

}  // namespace

Index emd(const std::vector<int>& a, const std::vector<int>& b) {
  require(a.size() == b.size(), "EMD needs equal-size sets");
  std::vector<int> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  Index total = 0;
  for (std::size_t i = 0; i < sa.size(); ++i) total += std::abs(sa[i] - sb[i]);
  return total;
}

Index support_emd(const Support& s) {
  for (std::size_t c = 1; c < s.size(); ++c)
    require(s[c].size() == s[0].size(), "support columns must have equal cardinality");
  Index total = 0;
  for (std::size_t c = 0; c + 1 < s.size(); ++c) total += emd(s[c], s[c + 1]);
  return total;
}

double head_value(const GridSignal& x, const Support& s) {
  double total = 0;
  for (int c = 0; c < static_cast<int>(s.size()); ++c)
    for (int r : s[static_cast<std::size_t>(c)]) total += powered(x, r, c);
  return total;
}

std::vector<Path> support_paths(const Support& s) {
  std::size_t count = s.empty() ? 0 : s[0].size();
  std::vector<Path> paths(count, Path(s.size()));
  for (std::size_t c = 0; c < s.size(); ++c) {
    std::vector<int> rows = s[c];
    std::sort(rows.begin(), rows.end());
    for (std::size_t q = 0; q < count; ++q) paths[q][c] = rows[q];
  }
  return paths;
}

bool in_model(const Support& s, int h, int w, Index column_sparsity, Index budget) {
  if (static_cast<int>(s.size()) != w) return false;
  for (const auto& col : s) {
    if (static_cast<Index>(col.size()) != column_sparsity) return false;
    std::vector<int> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    if (std::unique(sorted.begin(), sorted.end()) != sorted.end()) return false;
    for (int r : sorted)
      if (r < 0 || r >= h) return false;
  }
  return support_emd(s) <= budget;
}

FlowNetwork build_flow_network(const GridSignal& x, Index column_sparsity, double lambda) {
  require(lambda >= 0, "lambda must be nonnegative");
  require(column_sparsity >= 1 && column_sparsity <= x.h, "infeasible column sparsity");
  FlowNetwork g;
  g.h = x.h;
  g.w = x.w;
  g.supply = column_sparsity;
  g.adj.resize(2 + 2 * static_cast<std::size_t>(x.n()));

  auto add_edge = [&](int from, int to, int cap, double cost) {
    g.adj[static_cast<std::size_t>(from)].push_back(
        {to, cap, cost, 0, static_cast<int>(g.adj[static_cast<std::size_t>(to)].size())});
    g.adj[static_cast<std::size_t>(to)].push_back(
        {from, 0, -cost, 0, static_cast<int>(g.adj[static_cast<std::size_t>(from)].size()) - 1});
  };

  // split edges first so split_edge() can address them at position 0
  for (int c = 0; c < x.w; ++c)
    for (int r = 0; r < x.h; ++r) add_edge(g.in_node(r, c), g.out_node(r, c), 1, -powered(x, r, c));
  for (int r = 0; r < x.h; ++r) add_edge(g.source, g.in_node(r, 0), 1, 0.0);
  for (int c = 0; c + 1 < x.w; ++c)
    for (int r1 = 0; r1 < x.h; ++r1)
      for (int r2 = 0; r2 < x.h; ++r2)
        add_edge(g.out_node(r1, c), g.in_node(r2, c + 1), 1, lambda * std::abs(r1 - r2));
  for (int r = 0; r < x.h; ++r) add_edge(g.out_node(r, x.w - 1), g.sink, 1, 0.0);
  return g;
}

SupportResult min_cost_flow(FlowNetwork& g, const GridSignal& x) {
  require(g.supply <= g.h, "infeasible supply");
  const std::size_t n = g.adj.size();
  const double kInf = std::numeric_limits<double>::infinity();

  // initial potentials: one pass over the layered DAG in construction order
  std::vector<double> pot(n, kInf);
  pot[static_cast<std::size_t>(g.source)] = 0;
  {
    // topological order: source, then columns left to right, in-nodes of a
    // column before its out-nodes
    std::vector<int> topo{g.source};
    for (int c = 0; c < g.w; ++c) {
      for (int r = 0; r < g.h; ++r) topo.push_back(g.in_node(r, c));
      for (int r = 0; r < g.h; ++r) topo.push_back(g.out_node(r, c));
    }
    topo.push_back(g.sink);
    for (int u : topo) {
      if (pot[static_cast<std::size_t>(u)] == kInf) continue;
      for (const auto& e : g.adj[static_cast<std::size_t>(u)])
        if (e.cap > e.flow)
          pot[static_cast<std::size_t>(e.to)] =
              std::min(pot[static_cast<std::size_t>(e.to)], pot[static_cast<std::size_t>(u)] + e.cost);
    }
  }

  std::vector<double> dist(n);
  std::vector<char> settled(n);
  std::vector<int> prev_node(n), prev_edge(n);
  for (Index unit = 0; unit < g.supply; ++unit) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(settled.begin(), settled.end(), char{0});
    dist[static_cast<std::size_t>(g.source)] = 0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.push({0.0, g.source});
    while (!pq.empty()) {
      auto [d, u] = pq.top();
      pq.pop();
      if (settled[static_cast<std::size_t>(u)]) continue;
      settled[static_cast<std::size_t>(u)] = 1;
      for (std::size_t i = 0; i < g.adj[static_cast<std::size_t>(u)].size(); ++i) {
        const auto& e = g.adj[static_cast<std::size_t>(u)][i];
        if (e.cap <= e.flow || settled[static_cast<std::size_t>(e.to)] ||
            pot[static_cast<std::size_t>(e.to)] == kInf)
          continue;
        // reduced costs are nonnegative up to rounding; clamping keeps the
        // settled order valid under float noise
        double nd = d + std::max(0.0, e.cost + pot[static_cast<std::size_t>(u)] -
                                          pot[static_cast<std::size_t>(e.to)]);
        if (nd < dist[static_cast<std::size_t>(e.to)]) {
          dist[static_cast<std::size_t>(e.to)] = nd;
          prev_node[static_cast<std::size_t>(e.to)] = u;
          prev_edge[static_cast<std::size_t>(e.to)] = static_cast<int>(i);
          pq.push({nd, e.to});
        }
      }
    }
    require(dist[static_cast<std::size_t>(g.sink)] < kInf, "flow network disconnected");
    for (std::size_t v = 0; v < n; ++v)
      if (dist[v] < kInf) pot[v] += dist[v];
    // augment one unit along the shortest path
    for (int v = g.sink; v != g.source; v = prev_node[static_cast<std::size_t>(v)]) {
      auto& e = g.adj[static_cast<std::size_t>(prev_node[static_cast<std::size_t>(v)])]
                     [static_cast<std::size_t>(prev_edge[static_cast<std::size_t>(v)])];
      e.flow += 1;
      g.adj[static_cast<std::size_t>(v)][static_cast<std::size_t>(e.rev)].flow -= 1;
    }
  }

  Support sup(static_cast<std::size_t>(g.w));
  for (int c = 0; c < g.w; ++c)
    for (int r = 0; r < g.h; ++r)
      if (g.split_edge(r, c).flow > 0) sup[static_cast<std::size_t>(c)].push_back(r);
  for (auto& col : sup) {
    require(static_cast<Index>(col.size()) == g.supply, "flow does not cover the column sparsity");
  }
  return finish(x, std::move(sup), "min-cost-flow");
}

LambdaSearchResult lambda_search(const GridSignal& x, const CemdParams& params) {
  validate(x, params);
  Index s = params.column_sparsity(x.w);
  LambdaSearchResult res;

  double x_min = std::numeric_limits<double>::infinity(), x_max = 0;
  for (int r = 0; r < x.h; ++r)
    for (int c = 0; c < x.w; ++c) {
      double v = powered(x, r, c);
      if (v > 0) x_min = std::min(x_min, v);
      x_max = std::max(x_max, v);
    }
  if (x_max == 0) {
    // all-zero signal: the zero-EMD support directly
    res.omega_l = finish(x, best_constant_rows(x, s), "lambda-search");
    res.omega_r = res.omega_l;
    res.bracket.collapsed = true;
    return res;
  }

  auto solve = [&](double lambda) {
    FlowNetwork g = build_flow_network(x, s, lambda);
    SupportResult r = min_cost_flow(g, x);
    return r;
  };

  SupportResult omega0 = solve(0.0);
  if (omega0.emd <= params.budget) {
    res.omega_l = omega0;
    res.omega_r = omega0;
    res.bracket.collapsed = true;
    res.omega_l.flow_calls = 1;
    return res;
  }
  double lambda_hi = x_max * x.h * x.w;
  res.omega_l = solve(lambda_hi);
  res.omega_r = std::move(omega0);
  double lo = lambda_hi, hi = 0.0;  // lo carries emd <= B, hi carries emd >= B

  double width_target = params.delta * x_min / (static_cast<double>(x.w) * x.h * x.h);
  int iter = 0;
  const int kMaxIter = 60;
  while (lo - hi > width_target && iter < kMaxIter) {
    double mid = 0.5 * (lo + hi);
    SupportResult m = solve(mid);
    if (m.emd <= params.budget) {
      lo = mid;
      res.omega_l = std::move(m);
    } else {
      hi = mid;
      res.omega_r = std::move(m);
    }
    ++iter;
    // bracket invariant
    assert(res.omega_l.emd <= params.budget && res.omega_r.emd >= params.budget);
  }
  res.bracket.lo = lo;
  res.bracket.hi = hi;
  res.bracket.iterations = iter;
  res.omega_l.flow_calls = iter + 2;
  return res;
}

Index path_emd(const Path& p) {
  Index total = 0;
  for (std::size_t c = 0; c + 1 < p.size(); ++c) total += std::abs(p[c] - p[c + 1]);
  return total;
}

double path_head(const GridSignal& x, const Path& p) {
  double total = 0;
  for (int c = 0; c < static_cast<int>(p.size()); ++c) total += powered(x, p[static_cast<std::size_t>(c)], c);
  return total;
}

Path path_decompose(const Path& p, Index d, const GridSignal& x) {
  require(d >= 1, "decomposition divisor must be positive");
  const Index orig_emd = path_emd(p);
  const double orig_head = path_head(x, p);
  if (d == 1 || orig_emd == 0) return p;

  Path cur = p;
  Index dd = d;
  auto clamp_below = [](const Path& q, int t) {
    Path out = q;
    for (int& r : out) r = std::min(r, t);
    return out;
  };
  auto clamp_above = [](const Path& q, int t) {
    Path out = q;
    for (int& r : out) r = std::max(r, t);
    return out;
  };

  Path result;
  while (true) {
    Index cur_emd = path_emd(cur);
    double cur_head = path_head(x, cur);
    if (dd == 1 || cur_emd == 0) {
      result = cur;
      break;
    }
    int lo_row = *std::min_element(cur.begin(), cur.end());
    int hi_row = *std::max_element(cur.begin(), cur.end());
    int t = lo_row;
    while (t + 1 <= hi_row && path_emd(clamp_below(cur, t + 1)) * dd <= cur_emd) ++t;
    // the decomposition inequalities at the chosen cut
    Path below = clamp_below(cur, t), above = clamp_above(cur, t + 1);
    assert(path_emd(below) + path_emd(above) <= cur_emd);
    assert(path_head(x, below) + path_head(x, above) >=
           cur_head - 1e-9 * std::max(1.0, cur_head));
    if (2 * dd * path_head(x, below) >= cur_head) {
      result = below;
      break;
    }
    Path level(cur.size(), t + 1);
    if (2 * dd * path_head(x, level) >= cur_head) {
      result = level;
      break;
    }
    cur = clamp_above(cur, t + 1);
    dd -= 1;
  }
  // guarantees against the original path
  require(path_emd(result) * d <= orig_emd, "path decomposition EMD bound violated");
  require(2 * d * path_head(x, result) >= orig_head - 1e-9 * std::max(1.0, orig_head),
          "path decomposition head bound violated");
  return result;
}

SupportResult cemd_head_projection(const GridSignal& x, const CemdParams& params) {
  validate(x, params);
  Index s = params.column_sparsity(x.w);
  const char* kAlg = "cemd-head";

  LambdaSearchResult ls = lambda_search(x, params);
  std::vector<SupportResult> candidates;
  candidates.push_back(finish(x, best_constant_rows(x, s), kAlg));  // zero-EMD anchor
  if (ls.omega_l.emd <= params.budget) candidates.push_back(ls.omega_l);
  if (ls.omega_r.emd <= params.budget) candidates.push_back(ls.omega_r);

  if (ls.omega_r.emd > params.budget && params.budget >= 1) {
    Index d = ls.omega_r.emd / params.budget;
    std::vector<Path> paths = support_paths(ls.omega_r.columns);
    std::vector<Path> decomposed;
    for (const Path& p : paths) decomposed.push_back(path_decompose(p, d + 1, x));

    // union of the decomposed paths; collisions leave columns short
    Support sup(static_cast<std::size_t>(x.w));
    for (int c = 0; c < x.w; ++c) {
      std::vector<int> rows;
      for (const Path& p : decomposed) rows.push_back(p[static_cast<std::size_t>(c)]);
      std::sort(rows.begin(), rows.end());
      rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
      sup[static_cast<std::size_t>(c)] = std::move(rows);
    }
    // repair: fill short columns with the heaviest free rows
    for (int c = 0; c < x.w; ++c) {
      auto& col = sup[static_cast<std::size_t>(c)];
      while (static_cast<Index>(col.size()) < s) {
        int best = -1;
        double best_v = -1;
        for (int r = 0; r < x.h; ++r) {
          if (std::find(col.begin(), col.end(), r) != col.end()) continue;
          double v = powered(x, r, c);
          if (v > best_v) {
            best_v = v;
            best = r;
          }
        }
        col.push_back(best);
      }
      std::sort(col.begin(), col.end());
    }
    if (in_model(sup, x.h, x.w, s, params.budget)) candidates.push_back(finish(x, sup, kAlg));
  }

  SupportResult best = std::move(candidates.front());
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (candidates[i].head > best.head) best = std::move(candidates[i]);
  best.algorithm = kAlg;
  best.flow_calls = ls.bracket.iterations + 2;
  return best;
}

SupportResult cemd_tail_projection(const GridSignal& x, const CemdParams& params) {
  validate(x, params);
  Index s = params.column_sparsity(x.w);
  Index budget2 = 2 * params.budget;
  const char* kAlg = "cemd-tail";

  double x_min = std::numeric_limits<double>::infinity(), x_max = 0;
  for (double v : x.values) {
    double pv = std::pow(std::abs(v), x.norm_p);
    if (pv > 0) x_min = std::min(x_min, pv);
    x_max = std::max(x_max, pv);
  }
  SupportResult best = finish(x, best_constant_rows(x, s), kAlg);
  if (x_max == 0) return best;

  // fixed lambda grid independent of the budget: candidates only grow with B,
  // so the achieved tail is monotone in the budget
  double lambda_hi = x_max * x.h * x.w;
  int levels = std::min(
      60, static_cast<int>(std::ceil(std::log2(
              std::max(2.0, lambda_hi * x.w * x.h * x.h / (params.delta * x_min))))));
  int calls = 0;
  for (int j = 0; j <= levels + 1; ++j) {
    double lambda = j <= levels ? lambda_hi * std::pow(0.5, j) : 0.0;
    FlowNetwork g = build_flow_network(x, s, lambda);
    SupportResult r = min_cost_flow(g, x);
    ++calls;
    if (r.emd <= budget2 && r.head > best.head) best = std::move(r);
  }
  best.algorithm = kAlg;
  best.flow_calls = calls;
  return best;
}

}  // namespace ssp::cemd

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ssp/cemd.hpp"

using namespace ssp;
using namespace ssp::cemd;

namespace {

GridSignal make_grid(int h, int w, std::vector<double> vals, double p = 1.0) {
  return GridSignal{h, w, std::move(vals), p};
}

GridSignal random_grid(std::mt19937_64& rng, int h, int w, int vmax = 9) {
  std::vector<double> v(static_cast<std::size_t>(h) * w);
  for (auto& x : v) x = static_cast<double>(rng() % (vmax + 1));
  return make_grid(h, w, std::move(v));
}

// Brute-force EMD: all bijections.
Index brute_emd(std::vector<int> a, std::vector<int> b) {
  std::sort(b.begin(), b.end());
  Index best = std::numeric_limits<Index>::max();
  do {
    Index cost = 0;
    for (std::size_t i = 0; i < a.size(); ++i) cost += std::abs(a[i] - b[i]);
    best = std::min(best, cost);
  } while (std::next_permutation(b.begin(), b.end()));
  return best;
}

// Enumerate every per-column s-subset assignment.
template <class Fn>
void enum_supports(int h, int w, Index s, Fn&& fn) {
  std::vector<std::vector<int>> combos;
  std::vector<int> cur;
  std::function<void(int)> gen = [&](int start) {
    if (static_cast<Index>(cur.size()) == s) {
      combos.push_back(cur);
      return;
    }
    for (int r = start; r < h; ++r) {
      cur.push_back(r);
      gen(r + 1);
      cur.pop_back();
    }
  };
  gen(0);
  Support sup(static_cast<std::size_t>(w));
  std::function<void(int)> walk = [&](int c) {
    if (c == w) {
      fn(sup);
      return;
    }
    for (const auto& combo : combos) {
      sup[static_cast<std::size_t>(c)] = combo;
      walk(c + 1);
    }
  };
  walk(0);
}

double exhaustive_opt_head(const GridSignal& x, Index s, Index budget) {
  double best = 0;
  enum_supports(x.h, x.w, s, [&](const Support& sup) {
    if (support_emd(sup) <= budget) best = std::max(best, head_value(x, sup));
  });
  return best;
}

double exhaustive_min_objective(const GridSignal& x, Index s, double lambda) {
  double best = std::numeric_limits<double>::infinity();
  enum_supports(x.h, x.w, s, [&](const Support& sup) {
    best = std::min(best, -head_value(x, sup) + lambda * static_cast<double>(support_emd(sup)));
  });
  return best;
}

// All monotone column-by-column paths.
template <class Fn>
void enum_paths(int h, int w, Fn&& fn) {
  Path p(static_cast<std::size_t>(w));
  std::function<void(int)> walk = [&](int c) {
    if (c == w) {
      fn(p);
      return;
    }
    for (int r = 0; r < h; ++r) {
      p[static_cast<std::size_t>(c)] = r;
      walk(c + 1);
    }
  };
  walk(0);
}

}  // namespace

TEST_CASE("emd worked examples and brute force") {
  CHECK(emd({1, 2}, {1, 2}) == 0);
  CHECK(emd({1, 3}, {2, 4}) == 2);
  CHECK(emd({1}, {5}) == 4);
  CHECK_THROWS_AS(emd({1}, {1, 2}), std::invalid_argument);

  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t m = 1 + rng() % 6;
    std::vector<int> a(m), b(m);
    for (auto& v : a) v = static_cast<int>(rng() % 12);
    for (auto& v : b) v = static_cast<int>(rng() % 12);
    CHECK(emd(a, b) == brute_emd(a, b));
  }
}

TEST_CASE("support emd") {
  CHECK(support_emd({{2}}) == 0);
  // columns {1}, {3}, {1} in one-based rows, stored zero-based
  CHECK(support_emd({{0}, {2}, {0}}) == 4);
  CHECK(support_emd({{1, 3}, {1, 3}, {1, 3}}) == 0);
  CHECK_THROWS_AS(support_emd({{1}, {1, 2}}), std::invalid_argument);
}

TEST_CASE("flow network layout matches the definition") {
  GridSignal x = make_grid(3, 3, {1, 1, 4, 3, 2, 0, 0, 2, 3});
  double lambda = 7.0;
  FlowNetwork g = build_flow_network(x, 1, lambda);
  // the value-3 entry sits at row 1, column 0; its split edge carries -3
  CHECK(g.split_edge(1, 0).cost == -3.0);
  CHECK(g.split_edge(1, 0).cap == 1);
  // edges out of the value-1 node (0,0) toward column 1 cost 0, lambda, 2*lambda
  const auto& out = g.adj[static_cast<std::size_t>(g.out_node(0, 0))];
  std::vector<double> costs;
  for (const auto& e : out)
    if (e.cap == 1) costs.push_back(e.cost);
  REQUIRE(costs.size() == 3);
  CHECK(costs[0] == 0.0);
  CHECK(costs[1] == lambda);
  CHECK(costs[2] == 2.0 * lambda);

  // 1x1 grid: source -> node -> sink
  GridSignal tiny = make_grid(1, 1, {5});
  FlowNetwork g1 = build_flow_network(tiny, 1, 0.0);
  SupportResult r1 = min_cost_flow(g1, tiny);
  CHECK(r1.head == 5);
  CHECK(r1.emd == 0);
}

TEST_CASE("min cost flow equals exhaustive objective") {
  GridSignal two = make_grid(2, 2, {5, 5, 1, 1});
  for (double lambda : {0.0, 1.0, 100.0}) {
    FlowNetwork g = build_flow_network(two, 1, lambda);
    SupportResult r = min_cost_flow(g, two);
    CHECK(r.columns == Support{{0}, {0}});
    CHECK(r.head == 10);
    CHECK(r.emd == 0);
  }

  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 150; ++rep) {
    int h = 2 + static_cast<int>(rng() % 4);  // up to 5
    int w = 1 + static_cast<int>(rng() % 4);  // up to 4
    Index s = 1 + static_cast<Index>(rng() % 2);
    if (s > h) s = h;
    GridSignal x = random_grid(rng, h, w);
    for (double lambda : {0.0, 1.0, 5.0}) {
      FlowNetwork g = build_flow_network(x, s, lambda);
      SupportResult r = min_cost_flow(g, x);
      for (const auto& col : r.columns) CHECK(static_cast<Index>(col.size()) == s);
      double obj = -r.head + lambda * static_cast<double>(r.emd);
      CHECK(obj == doctest::Approx(exhaustive_min_objective(x, s, lambda)).epsilon(1e-9));
    }
  }
}

TEST_CASE("large lambda forces zero EMD") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 30; ++rep) {
    GridSignal x = random_grid(rng, 4, 3);
    double lambda = 9.0 * 4 * 3 + 1;
    FlowNetwork g = build_flow_network(x, 2, lambda);
    SupportResult r = min_cost_flow(g, x);
    CHECK(r.emd == 0);
  }
}

TEST_CASE("lambda search brackets the budget") {
  GridSignal two = make_grid(2, 2, {5, 5, 1, 1});
  CemdParams p{2, 0, 0.05};
  LambdaSearchResult ls = lambda_search(two, p);
  CHECK(ls.bracket.collapsed);
  CHECK(ls.omega_l.head == 10);
  CHECK(ls.omega_l.emd == 0);

  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 40; ++rep) {
    GridSignal x = random_grid(rng, 4, 3);
    CemdParams params{3, static_cast<Index>(rng() % 5), 0.05};
    LambdaSearchResult ls2 = lambda_search(x, params);
    CHECK(ls2.omega_l.emd <= params.budget);
    if (!ls2.bracket.collapsed) CHECK(ls2.omega_r.emd >= params.budget);
  }
}

TEST_CASE("path decomposition examples") {
  GridSignal x = make_grid(4, 4, std::vector<double>(16, 1.0));
  Path p{0, 3, 1, 2};
  CHECK(path_decompose(p, 1, x) == p);
  Path flat{2, 2, 2, 2};
  CHECK(path_decompose(flat, 3, x) == flat);
}

TEST_CASE("path decomposition bounds on random grids") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 500; ++rep) {
    int h = 3 + static_cast<int>(rng() % 4);  // up to 6
    int w = 2 + static_cast<int>(rng() % 5);  // up to 6
    GridSignal x = random_grid(rng, h, w);
    Path p(static_cast<std::size_t>(w));
    for (auto& r : p) r = static_cast<int>(rng() % h);
    for (Index d : {Index{1}, Index{2}, Index{3}, Index{4}}) {
      Path q = path_decompose(p, d, x);
      CHECK(path_emd(q) * d <= path_emd(p));
      CHECK(2 * d * path_head(x, q) >= path_head(x, p) - 1e-9);
    }
  }
}

TEST_CASE("path decomposition against exhaustive search") {
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 60; ++rep) {
    int h = 3 + static_cast<int>(rng() % 2);  // up to 4
    int w = 3 + static_cast<int>(rng() % 2);  // up to 4
    GridSignal x = random_grid(rng, h, w);
    Path p(static_cast<std::size_t>(w));
    for (auto& r : p) r = static_cast<int>(rng() % h);
    for (Index d : {Index{2}, Index{3}}) {
      Path q = path_decompose(p, d, x);
      // exhaustive: the best head among monotone paths within the EMD bound
      double best = -1;
      enum_paths(h, w, [&](const Path& cand) {
        if (path_emd(cand) * d <= path_emd(p)) best = std::max(best, path_head(x, cand));
      });
      CHECK(best >= path_head(x, q) - 1e-9);            // ours is feasible
      CHECK(2 * d * best >= path_head(x, p) - 1e-9);    // the bound is achievable
    }
  }
}

TEST_CASE("head projection worked example") {
  GridSignal two = make_grid(2, 2, {5, 5, 1, 1});
  SupportResult r = cemd_head_projection(two, {2, 0, 0.05});
  CHECK(r.head == 10);
  CHECK(r.emd == 0);
  CHECK_THROWS_AS(cemd_head_projection(two, {2, -1, 0.05}), std::invalid_argument);
}

TEST_CASE("head projection guarantee against exhaustive OPT") {
  std::mt19937_64 rng(23);
  double delta = 0.05;
  for (double p : {1.0, 2.0}) {
    for (int rep = 0; rep < 60; ++rep) {
      int h = 3 + static_cast<int>(rng() % 3);  // up to 5
      int w = 2 + static_cast<int>(rng() % 2);  // up to 3
      Index s = 1 + static_cast<Index>(rng() % 2);
      GridSignal x = random_grid(rng, h, w);
      x.norm_p = p;
      Index budget = static_cast<Index>(rng() % 5);
      CemdParams params{s * w, budget, delta};
      SupportResult r = cemd_head_projection(x, params);
      REQUIRE(in_model(r.columns, h, w, s, budget));
      double opt = exhaustive_opt_head(x, s, budget);
      CHECK(r.head >= (0.25 - delta) * opt - 1e-9);
    }
  }
}

TEST_CASE("head projection with slack budget returns the unconstrained optimum") {
  std::mt19937_64 rng(29);
  for (int rep = 0; rep < 30; ++rep) {
    GridSignal x = random_grid(rng, 4, 3);
    Index s = 2;
    Index budget = static_cast<Index>(x.h) * x.w * s;  // never binds
    SupportResult r = cemd_head_projection(x, {s * x.w, budget, 0.05});
    double unconstrained = exhaustive_opt_head(x, s, budget);
    CHECK(r.head == doctest::Approx(unconstrained).epsilon(1e-12));
  }
}

TEST_CASE("tail projection plumbing") {
  // zero noise outside an in-model support
  GridSignal x = make_grid(3, 3, {7, 0, 0, 0, 8, 0, 0, 0, 9});
  SupportResult r = cemd_tail_projection(x, {3, 2, 0.05});
  double total = 7 + 8 + 9;
  CHECK(r.head == total);  // tail = 0
  CHECK(r.emd <= 4);

  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 30; ++rep) {
    GridSignal g = random_grid(rng, 4, 3);
    // budget monotonicity
    SupportResult t1 = cemd_tail_projection(g, {6, 1, 0.05});
    SupportResult t2 = cemd_tail_projection(g, {6, 2, 0.05});
    CHECK(t2.head >= t1.head - 1e-12);
    // huge budget reaches the unconstrained per-column optimum
    SupportResult t3 = cemd_tail_projection(g, {6, 100, 0.05});
    CHECK(t3.head == doctest::Approx(exhaustive_opt_head(g, 2, 200)).epsilon(1e-12));
  }
}

TEST_CASE("support paths are node disjoint and canonical") {
  Support s{{0, 2}, {1, 3}, {0, 1}};
  auto paths = support_paths(s);
  REQUIRE(paths.size() == 2);
  CHECK(paths[0] == Path{0, 1, 0});
  CHECK(paths[1] == Path{2, 3, 1});
  CHECK(path_emd(paths[0]) + path_emd(paths[1]) == support_emd(s));
}

TEST_CASE("head projection stress across shapes and weight styles") {
  std::mt19937_64 rng(777);
  for (int rep = 0; rep < 1500; ++rep) {
    int h = 2 + static_cast<int>(rng() % 6);
    int w = 2 + static_cast<int>(rng() % 3);
    Index s = 1 + static_cast<Index>(rng() % 3);
    if (s > h) s = h;
    GridSignal g{h, w, {}, (rep % 2) ? 1.0 : 2.0};
    g.values.resize(static_cast<std::size_t>(h) * w);
    int style = rep % 4;
    for (auto& v : g.values) {
      if (style == 0) v = static_cast<double>(rng() % 10);
      else if (style == 1) v = static_cast<double>(rng() % 3);
      else if (style == 2) v = std::exp(std::uniform_real_distribution<double>(-9, 9)(rng));
      else v = std::uniform_real_distribution<double>(0, 1)(rng);
    }
    Index budget = static_cast<Index>(rng() % 9);
    SupportResult res = cemd_head_projection(g, {s * w, budget, 0.05});
    REQUIRE(in_model(res.columns, h, w, s, budget));
    long combs = 1;
    for (Index i = 0; i < s; ++i) combs = combs * (h - static_cast<int>(i)) / (static_cast<int>(i) + 1);
    double count = std::pow(static_cast<double>(combs), w);
    if (count <= 2000) {
      double opt = 0;
      enum_supports(h, w, s, [&](const Support& sup) {
        if (support_emd(sup) <= budget) opt = std::max(opt, head_value(g, sup));
      });
      CHECK(res.head >= (0.25 - 0.05) * opt - 1e-9 * std::max(1.0, opt));
    }
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "ssp/tree.hpp"

using namespace ssp;
using namespace ssp::tree;

namespace {

TreeSignal make_tree(std::vector<double> w, int b = 2, double p = 1.0) {
  return TreeSignal{std::move(w), b, p};
}

// Independent oracle: enumerate every rooted subtree of size <= k.
// Children are added in increasing id order to visit each subtree once.
struct BruteForce {
  const TreeSignal* t;
  Index k;
  double best_head = 0;

  void run() {
    std::vector<Index> frontier;
    push_children(0, frontier);
    double x0 = std::abs(t->weights[0]);
    best_head = 0;
    if (k >= 1) grow(pow_w(0), 1, frontier, 0);
    (void)x0;
  }

  double pow_w(Index id) const { return std::pow(std::abs(t->weights[static_cast<std::size_t>(id)]), t->norm_p); }

  void push_children(Index id, std::vector<Index>& f) const {
    for (int c = 0; c < t->arity; ++c) {
      Index ch = static_cast<Index>(t->arity) * id + 1 + c;
      if (ch < t->size()) f.push_back(ch);
    }
  }

  void grow(double head, Index size, std::vector<Index>& frontier, std::size_t from) {
    best_head = std::max(best_head, head);
    if (size == k) return;
    for (std::size_t i = from; i < frontier.size(); ++i) {
      Index id = frontier[i];
      std::size_t old = frontier.size();
      push_children(id, frontier);
      grow(head + pow_w(id), size + 1, frontier, i + 1);
      frontier.resize(old);
    }
  }
};

double brute_head(const TreeSignal& t, Index k) {
  BruteForce bf{&t, std::min<Index>(k, t.size())};
  bf.run();
  return bf.best_head;
}

double brute_tail(const TreeSignal& t, Index k) {
  double total = 0;
  for (double w : t.weights) total += std::pow(std::abs(w), t.norm_p);
  return total - brute_head(t, k);
}

bool is_rooted_subtree(const std::vector<Index>& support, int arity, Index n) {
  if (support.empty()) return false;
  std::set<Index> s(support.begin(), support.end());
  if (!s.count(0)) return false;
  for (Index id : support) {
    if (id < 0 || id >= n) return false;
    if (id != 0 && !s.count((id - 1) / arity)) return false;
  }
  return true;
}

TreeSignal random_tree(std::mt19937_64& rng, Index n, int wmax = 100) {
  std::uniform_int_distribution<int> w(0, wmax);
  std::vector<double> ws(static_cast<std::size_t>(n));
  for (auto& x : ws) x = w(rng);
  return make_tree(std::move(ws));
}

// conservation is bit-exact for integral weights; float weights can differ
// by an ulp in head + (total - head)
void check_solution(const TreeSignal& t, const SubtreeSolution& sol, Index k,
                    bool exact_conservation = true) {
  REQUIRE(is_rooted_subtree(sol.support, t.arity, t.size()));
  CHECK(static_cast<Index>(sol.support.size()) <= k);
  double total = 0;
  for (double w : t.weights) total += std::pow(std::abs(w), t.norm_p);
  if (exact_conservation)
    CHECK(sol.head_value + sol.tail_value == total);
  else
    CHECK(sol.head_value + sol.tail_value == doctest::Approx(total).epsilon(1e-12));
  double head = 0;
  for (Index id : sol.support) head += std::pow(std::abs(t.weights[static_cast<std::size_t>(id)]), t.norm_p);
  CHECK(sol.head_value == doctest::Approx(head).epsilon(1e-12));
}

}  // namespace

TEST_CASE("exact projection on the worked example") {
  TreeSignal t = make_tree({1, 4, 2});
  SubtreeSolution tail = exact_tree_projection(t, 2, Objective::kTail);
  CHECK(tail.support == std::vector<Index>{0, 1});
  CHECK(tail.tail_value == 2);
  SubtreeSolution head = exact_tree_projection(t, 2, Objective::kHead);
  CHECK(head.head_value == 5);
  SubtreeSolution full = exact_tree_projection(t, 3, Objective::kTail);
  CHECK(full.tail_value == 0);
  CHECK(full.support.size() == 3);
  CHECK_THROWS_AS(exact_tree_projection(t, 0, Objective::kTail), std::invalid_argument);
}

TEST_CASE("exact projection matches brute force") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 60; ++rep) {
    Index n = (rep % 2) ? 15 : 7;
    TreeSignal t = random_tree(rng, n, 20);
    for (Index k : {Index{1}, Index{3}, Index{5}, n}) {
      SubtreeSolution sol = exact_tree_projection(t, k, Objective::kHead);
      check_solution(t, sol, k);
      CHECK(sol.head_value == brute_head(t, k));
    }
  }
}

TEST_CASE("exact projection on ternary trees") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    TreeSignal t = random_tree(rng, 13, 15);
    t.arity = 3;
    for (Index k : {Index{1}, Index{4}, Index{7}}) {
      SubtreeSolution sol = exact_tree_projection(t, k, Objective::kHead);
      REQUIRE(is_rooted_subtree(sol.support, 3, t.size()));
      CHECK(sol.head_value == brute_head(t, k));
    }
  }
}

TEST_CASE("tail baseline worked example and bound") {
  TreeSignal t = make_tree({1, 4, 2});
  auto [sol, w] = tail_baseline(t, 2);
  CHECK(sol.support == std::vector<Index>{0, 1});
  CHECK(w == 2);

  auto [all, w0] = tail_baseline(make_tree({3, 3, 3}), 3);
  CHECK(w0 == 0);

  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    TreeSignal t2 = random_tree(rng, 15);
    Index k = 1 + static_cast<Index>(rng() % 15);
    auto [bsol, bw] = tail_baseline(t2, k);
    REQUIRE(is_rooted_subtree(bsol.support, 2, 15));
    CHECK(static_cast<Index>(bsol.support.size()) <= k);
    double opt = brute_tail(t2, k);
    double H = std::log2(16.0);
    CHECK(bw >= opt - 1e-9);
    CHECK(bw <= H * opt + 1e-9);
  }
}

TEST_CASE("head baseline worked example and bound") {
  TreeSignal t = make_tree({1, 4, 2});
  auto [sol, w] = head_baseline(t, 2);
  CHECK(sol.support == std::vector<Index>{0, 1});
  CHECK(w == 5);

  auto [single, ws] = head_baseline(make_tree({7}), 1);
  CHECK(ws == 7);
  CHECK(single.support == std::vector<Index>{0});

  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    TreeSignal t2 = random_tree(rng, 15);
    Index k = 1 + static_cast<Index>(rng() % 15);
    auto [bsol, bw] = head_baseline(t2, k);
    REQUIRE(is_rooted_subtree(bsol.support, 2, 15));
    CHECK(static_cast<Index>(bsol.support.size()) <= k);
    double opt = brute_head(t2, k);
    double H = std::log2(16.0);
    CHECK(bw <= opt + 1e-9);
    CHECK(opt < (2.0 * H + 1.0) * bw + 1e-9);
  }
}

TEST_CASE("discretization maps") {
  DiscretizationContext head;
  head.kind = DiscretizationContext::Kind::kHead;
  head.baseline = 10;
  head.epsilon = 0.5;
  head.k = 4;
  CHECK(head.map(3) == 2);  // floor(4*3 / (0.5*10))

  DiscretizationContext tail;
  tail.kind = DiscretizationContext::Kind::kTail;
  tail.baseline = 5;
  tail.epsilon = 0.5;
  tail.n = 7;
  tail.height = 3;
  CHECK(tail.map(0) == 0);
  CHECK(tail.map(6) == tail.tail_sentinel());
  CHECK(tail.tail_sentinel() == std::ceil(7.0 * 3 / 0.5) + 7);
  CHECK(tail.map(5) == std::ceil(5.0 * 7 * 3 / (0.5 * 5)));
}

TEST_CASE("lp transform") {
  TreeSignal t = make_tree({1, 2, 3});
  CHECK(lp_transform(t, 1.0).weights == std::vector<double>{1, 2, 3});
  CHECK(lp_transform(t, 2.0).weights == std::vector<double>{1, 4, 9});
}

TEST_CASE("lookup table equals direct DP") {
  LookupTable tail_table(Objective::kTail);
  const auto& zero = tail_table.lookup({0, 0, 0}, 2);
  CHECK(zero.array == DenseArray{0, 0, 0, 0});
  const auto& leaf = tail_table.lookup({5}, 2);
  CHECK(leaf.array == DenseArray{0, 5});
  CHECK(leaf.mask[0] == 1);

  // random tuples against an exact enumeration oracle
  std::mt19937_64 rng(13);
  LookupTable head_table(Objective::kHead);
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<double> w(7);
    for (auto& x : w) x = static_cast<double>(rng() % 9);
    const auto& te = tail_table.lookup(w, 2);
    const auto& he = head_table.lookup(w, 2);
    TreeSignal t = make_tree(std::vector<double>(w));
    double total = 0;
    for (double x : w) total += x;
    for (Index keep = 0; keep <= 7; ++keep) {
      double bh = keep == 0 ? 0.0 : brute_head(t, keep);
      CHECK(he.array[static_cast<std::size_t>(keep)] == bh);
      CHECK(te.array[static_cast<std::size_t>(7 - keep)] == total - bh);
      // masks reproduce the stored values
      double hm = 0;
      int bits = 0;
      for (int r = 0; r < 7; ++r)
        if (he.mask[static_cast<std::size_t>(keep)] & (1ULL << r)) {
          hm += w[static_cast<std::size_t>(r)];
          ++bits;
        }
      CHECK(hm == he.array[static_cast<std::size_t>(keep)]);
      CHECK(bits <= keep);
    }
  }
}

TEST_CASE("fast tail tree trivial and oracle-checked") {
  std::mt19937_64 rng(17);

  // k = n keeps everything
  TreeSignal t0 = random_tree(rng, 15);
  SubtreeSolution whole = fast_tail_tree(t0, {15, 0.5, 0.5});
  CHECK(whole.tail_value == 0);
  CHECK(whole.support.size() == 15);

  // monotone weights: top levels are exactly optimal
  {
    std::vector<double> w(127);
    PerfectTree pt = pad_to_perfect(make_tree(std::vector<double>(127, 1.0)));
    for (Index id = 0; id < 127; ++id)
      w[static_cast<std::size_t>(id)] = 100.0 / (1 << (pt.depth - pt.level_of(id)));
    TreeSignal t = make_tree(std::move(w));
    SubtreeSolution sol = fast_tail_tree(t, {15, 0.5, 0.5});
    check_solution(t, sol, 15);
    SubtreeSolution opt = exact_tree_projection(t, 15, Objective::kTail);
    CHECK(sol.tail_value == doctest::Approx(opt.tail_value));
  }

  for (Index n : {Index{127}, Index{255}}) {
    for (double eps : {0.1, 0.5}) {
      for (int rep = 0; rep < 8; ++rep) {
        TreeSignal t = random_tree(rng, n);
        Index k = std::max<Index>(static_cast<Index>(std::log2(n + 1)),
                                  static_cast<Index>(rng() % (n / 2) + 1));
        SubtreeSolution sol = fast_tail_tree(t, {k, eps, 0.5});
        check_solution(t, sol, k);
        SubtreeSolution opt = exact_tree_projection(t, k, Objective::kTail);
        CHECK(sol.tail_value <= (1.0 + eps) * opt.tail_value + 1e-9);
      }
    }
  }
}

TEST_CASE("linear tail tree oracle-checked") {
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 10; ++rep) {
    TreeSignal t = random_tree(rng, 255);
    SubtreeSolution sol = linear_tail_tree(t, {8, 0.5, 0.5});
    check_solution(t, sol, 8);
    SubtreeSolution opt = exact_tree_projection(t, 8, Objective::kTail);
    CHECK(sol.tail_value <= 1.5 * opt.tail_value + 1e-9);
  }

  // k = 1 keeps only the root
  TreeSignal t1 = random_tree(rng, 255);
  SubtreeSolution root_only = linear_tail_tree(t1, {1, 0.5, 0.5});
  CHECK(root_only.support == std::vector<Index>{0});

  // too-large k falls back to the general algorithm
  TreeSignal t2 = random_tree(rng, 255);
  SubtreeSolution fb = linear_tail_tree(t2, {100, 0.5, 0.5});
  CHECK(fb.fell_back_to_fast);
  check_solution(t2, fb, 100);
}

TEST_CASE("linear tail equals fast tail when mass is concentrated") {
  // all weight lives in a handful of eta subtrees; the optimum avoids every
  // deleted subtree, so pruning is lossless
  std::mt19937_64 rng(23);
  std::vector<double> w(1023, 0.0);
  for (Index id = 0; id < 31; ++id) w[static_cast<std::size_t>(id)] = 50 + rng() % 50;
  TreeSignal t = make_tree(std::move(w));
  SubtreeSolution lin = linear_tail_tree(t, {31, 0.4, 0.5});
  SubtreeSolution fast = fast_tail_tree(t, {31, 0.4, 0.5});
  SubtreeSolution opt = exact_tree_projection(t, 31, Objective::kTail);
  CHECK(lin.tail_value == doctest::Approx(opt.tail_value));
  CHECK(fast.tail_value == doctest::Approx(opt.tail_value));
}

TEST_CASE("linear head tree oracle-checked") {
  std::mt19937_64 rng(29);

  TreeSignal tiny = make_tree({1, 4, 2});
  SubtreeSolution th = linear_head_tree(tiny, {2, 0.5, 0.5});
  CHECK(th.head_value >= 0.5 * 5);

  TreeSignal t0 = random_tree(rng, 255);
  SubtreeSolution whole = linear_head_tree(t0, {255, 0.5, 0.5});
  CHECK(whole.head_value == doctest::Approx(whole.head_value + whole.tail_value));

  for (Index n : {Index{127}, Index{255}}) {
    for (double eps : {0.1, 0.5}) {
      for (int rep = 0; rep < 8; ++rep) {
        TreeSignal t = random_tree(rng, n);
        Index k = std::max<Index>(static_cast<Index>(std::log2(n + 1)),
                                  static_cast<Index>(rng() % (n / 2) + 1));
        SubtreeSolution sol = linear_head_tree(t, {k, eps, 0.5});
        check_solution(t, sol, k);
        SubtreeSolution opt = exact_tree_projection(t, k, Objective::kHead);
        CHECK(sol.head_value >= (1.0 - eps) * opt.head_value - 1e-9);
      }
    }
  }
}

TEST_CASE("head projection under p = 2") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    TreeSignal t = random_tree(rng, 15, 9);
    t.norm_p = 2.0;
    SubtreeSolution sol = linear_head_tree(t, {5, 0.5, 0.5});
    TreeSignal sq = lp_transform(t, 2.0);
    sq.norm_p = 1.0;
    double opt = brute_head(sq, 5);
    CHECK(sol.head_value >= (1.0 - 0.5) * opt - 1e-9);
  }
}

TEST_CASE("per-node sandwich during fast tail tree") {
  std::mt19937_64 rng(37);
  for (int rep = 0; rep < 4; ++rep) {
    TreeSignal t = random_tree(rng, 255);
    detail::TailTrace trace;
    SubtreeSolution sol = detail::fast_tail_tree_impl(t, {20, 0.4, 0.5}, &trace);
    check_solution(t, sol, 20);

    // independent exact min-plus DP on the traced working weights
    const PerfectTree& pt = trace.pt;
    std::vector<DenseArray> exact(static_cast<std::size_t>(pt.size()));
    for (Index id = pt.size() - 1; id >= 0; --id) {
      double x = trace.work[static_cast<std::size_t>(id)];
      if (pt.is_leaf(id)) {
        exact[static_cast<std::size_t>(id)] = {0.0, x};
        continue;
      }
      DenseArray acc{0.0};
      for (int c = 0; c < pt.arity; ++c) {
        const DenseArray& cb = exact[static_cast<std::size_t>(pt.child(id, c))];
        DenseArray nxt(acc.size() + cb.size() - 1, std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < acc.size(); ++i)
          for (std::size_t j = 0; j < cb.size(); ++j) nxt[i + j] = std::min(nxt[i + j], acc[i] + cb[j]);
        acc = std::move(nxt);
      }
      acc.push_back(x + acc.back());
      exact[static_cast<std::size_t>(id)] = std::move(acc);
    }

    for (Index id = 0; id < pt.size(); ++id) {
      const auto& stages = trace.node_stages[static_cast<std::size_t>(id)];
      if (stages.empty()) continue;
      int level = pt.level_of(id);
      double factor = trace.level_factor[static_cast<std::size_t>(level)];
      DenseArray compl_arr = completion(stages.back());
      const DenseArray& ex = exact[static_cast<std::size_t>(id)];
      REQUIRE(compl_arr.size() == ex.size());
      for (std::size_t l = 0; l < ex.size(); ++l) {
        CHECK(compl_arr[l] >= ex[l] - 1e-9 * std::max(1.0, ex[l]));
        CHECK(compl_arr[l] <= factor * ex[l] + 1e-9 * std::max(1.0, ex[l]));
      }
    }
  }
}

TEST_CASE("find tree boundaries") {
  std::mt19937_64 rng(41);
  // strictly positive weights so "discard none" is the unique zero-tail entry
  TreeSignal t = random_tree(rng, 255);
  for (auto& w : t.weights) w += 1;
  detail::TailTrace trace;
  SubtreeSolution sol = detail::fast_tail_tree_impl(t, {30, 0.5, 0.5}, &trace);

  // L = n: whole-tree discarded sentinel, empty support
  CHECK(detail::find_tree(trace, trace.pt.size()).empty());
  // L = 0: keep everything
  std::vector<Index> full = detail::find_tree(trace, 0);
  CHECK(static_cast<Index>(full.size()) == trace.pt.size());

  // the picked entry reproduces a support whose recomputed tail stays below
  // the claimed value, across instances and selection indices
  for (int inst = 0; inst < 10; ++inst) {
    TreeSignal ti = random_tree(rng, 255);
    detail::TailTrace tr;
    (void)detail::fast_tail_tree_impl(ti, {20 + inst, 0.4, 0.5}, &tr);
    double total = 0;
    for (double w : tr.work) total += w;
    for (int rep = 0; rep < 10; ++rep) {
      Index L = static_cast<Index>(rng() % (tr.pt.size() + 1));
      std::vector<Index> sup = detail::find_tree(tr, L);
      CHECK(static_cast<Index>(sup.size()) <= tr.pt.size() - L);
      double kept = 0;
      for (Index id : sup) kept += tr.work[static_cast<std::size_t>(id)];
      const RepSeq& root = tr.node_stages[0].back();
      std::size_t pick = 0;
      while (pick < root.entries.size() && root.entries[pick].index < L) ++pick;
      if (pick < root.entries.size())
        CHECK(total - kept <= root.entries[pick].value + 1e-6 * std::max(1.0, total));
    }
  }
}

TEST_CASE("bary convolve") {
  std::mt19937_64 rng(43);
  auto rand_rs = [&](double alpha) {
    RepSeq s;
    s.alpha = alpha;
    Index idx = 0;
    double v = (rng() % 2) ? 0.0 : 1.0 + static_cast<double>(rng() % 5);
    for (int i = 0; i < 6; ++i) {
      s.entries.emplace_back(idx, v);
      idx += 1 + static_cast<Index>(rng() % 4);
      v = std::max(1.0, v) * (1.0 + alpha) * (1.0 + 0.3 * static_cast<double>(rng() % 3));
      if (v > 1e5) break;
    }
    return s;
  };

  for (int rep = 0; rep < 50; ++rep) {
    double alpha = 0.5, beta = 0.25;
    std::vector<RepSeq> kids{rand_rs(alpha), rand_rs(alpha), rand_rs(alpha)};
    // two children: identical to a single pairwise convolution
    RepSeq two = bary_convolve({kids[0], kids[1]}, alpha, beta, Objective::kTail, {});
    RepSeq direct = fast_rs_minplus(alpha, beta, kids[0], kids[1]);
    REQUIRE(two.entries.size() == direct.entries.size());
    for (std::size_t i = 0; i < two.entries.size(); ++i) {
      CHECK(two.entries[i].index == direct.entries[i].index);
      CHECK(two.entries[i].value == direct.entries[i].value);
    }
    // three children: completion sandwiches the exact triple convolution
    RepSeq three = bary_convolve(kids, alpha, beta, Objective::kTail, {});
    DenseArray exact = exact_minplus(exact_minplus(completion(kids[0]), completion(kids[1])),
                                     completion(kids[2]));
    DenseArray approx = completion(three);
    REQUIRE(approx.size() == exact.size());
    for (std::size_t i = 0; i < exact.size(); ++i) {
      CHECK(approx[i] >= exact[i] - 1e-9);
      CHECK(approx[i] <= (1.0 + beta) * (1.0 + beta) * exact[i] + 1e-9);
    }
  }
}

TEST_CASE("ternary tree projections through the full pipeline") {
  std::mt19937_64 rng(47);
  // 121 nodes: five full ternary levels, deep enough to avoid the exact route
  for (int rep = 0; rep < 5; ++rep) {
    TreeSignal t = random_tree(rng, 121);
    t.arity = 3;
    SubtreeSolution tail = fast_tail_tree(t, {20, 0.5, 0.5});
    REQUIRE(is_rooted_subtree(tail.support, 3, t.size()));
    CHECK(static_cast<Index>(tail.support.size()) <= 20);
    SubtreeSolution opt_t = exact_tree_projection(t, 20, Objective::kTail);
    CHECK(tail.tail_value <= 1.5 * opt_t.tail_value + 1e-9);

    SubtreeSolution head = linear_head_tree(t, {20, 0.5, 0.5});
    REQUIRE(is_rooted_subtree(head.support, 3, t.size()));
    SubtreeSolution opt_h = exact_tree_projection(t, 20, Objective::kHead);
    CHECK(head.head_value >= 0.5 * opt_h.head_value - 1e-9);
  }
}

TEST_CASE("deterministic across thread settings") {
  std::mt19937_64 rng(53);
  TreeSignal t = random_tree(rng, 511);
  SubtreeSolution a = fast_tail_tree(t, {40, 0.3, 0.5});
  SubtreeSolution b = fast_tail_tree(t, {40, 0.3, 0.5});
  CHECK(a.support == b.support);
  CHECK(a.tail_value == b.tail_value);
}

TEST_CASE("projection stress under extreme weight profiles") {
  std::mt19937_64 rng(31337);
  for (int rep = 0; rep < 250; ++rep) {
    Index n = (rep % 3 == 0) ? 127 : (rep % 3 == 1 ? 255 : 511);
    TreeSignal t;
    t.arity = 2;
    t.norm_p = (rep % 5 == 0) ? 2.0 : 1.0;
    t.weights.resize(static_cast<std::size_t>(n));
    int style = rep % 5;
    for (auto& w : t.weights) {
      if (style == 0) w = std::exp(std::uniform_real_distribution<double>(-20, 20)(rng));
      else if (style == 1)
        w = (rng() % 4 == 0) ? 0.0 : std::exp(std::uniform_real_distribution<double>(-10, 10)(rng));
      else if (style == 2) w = static_cast<double>(rng() % 3);
      else if (style == 3) w = 1.0;
      else w = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    }
    if (rep % 7 == 0) {
      for (auto& w : t.weights) w = 0;
      for (int i = 0; i < 12; ++i)
        t.weights[rng() % static_cast<std::size_t>(n)] =
            std::exp(std::uniform_real_distribution<double>(-15, 15)(rng));
    }
    Index k = 1 + static_cast<Index>(rng() % (n / 2));
    double eps = (rep % 2) ? 0.1 : 0.4;
    SubtreeSolution opt_t = exact_tree_projection(t, k, Objective::kTail);
    SubtreeSolution opt_h = exact_tree_projection(t, k, Objective::kHead);
    SubtreeSolution fast = fast_tail_tree(t, {k, eps, 0.5});
    check_solution(t, fast, k, false);
    CHECK(fast.tail_value <= (1 + eps) * opt_t.tail_value + 1e-9 * std::max(1.0, opt_t.tail_value));
    SubtreeSolution lin = linear_tail_tree(t, {k, eps, 0.5});
    check_solution(t, lin, k, false);
    CHECK(lin.tail_value <= (1 + eps) * opt_t.tail_value + 1e-9 * std::max(1.0, opt_t.tail_value));
    SubtreeSolution head = linear_head_tree(t, {k, eps, 0.5});
    check_solution(t, head, k, false);
    CHECK(head.head_value >= (1 - eps) * opt_h.head_value - 1e-9 * std::max(1.0, opt_h.head_value));
  }
}

TEST_CASE("quaternary trees and general exponents") {
  std::mt19937_64 rng(99);
  TreeSignal q;
  q.arity = 4;
  q.norm_p = 1.0;
  q.weights.resize(341);
  for (auto& w : q.weights) w = static_cast<double>(rng() % 100);
  SubtreeSolution e = exact_tree_projection(q, 30, Objective::kTail);
  SubtreeSolution f = fast_tail_tree(q, {30, 0.4, 0.5});
  REQUIRE(is_rooted_subtree(f.support, 4, q.size()));
  CHECK(f.tail_value <= 1.4 * e.tail_value + 1e-9);

  TreeSignal c;
  c.arity = 2;
  c.norm_p = 3.0;
  c.weights.resize(255);
  for (auto& w : c.weights) w = std::uniform_real_distribution<double>(0, 4)(rng);
  SubtreeSolution e3 = exact_tree_projection(c, 20, Objective::kTail);
  SubtreeSolution f3 = fast_tail_tree(c, {20, 0.2, 0.5});
  CHECK(f3.tail_value <= 1.2 * e3.tail_value + 1e-6 * e3.tail_value);
}

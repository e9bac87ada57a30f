#include "ssp/tree.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "ssp/parallel.hpp"

namespace ssp::tree {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double checked_weight(double w) {
  require(std::isfinite(w) && w >= 0, "tree weights must be finite and nonnegative");
  return w;
}

Index perfect_size(int arity, int depth) {
  Index s = 0, pow = 1;
  for (int d = 0; d < depth; ++d) {
    s += pow;
    pow *= arity;
  }
  return s;
}

double total_weight(const std::vector<double>& w) {
  return std::accumulate(w.begin(), w.end(), 0.0);
}

// Sum of |x|^p over a support, plus the complementary tail.
void fill_values(const PerfectTree& pt, SubtreeSolution& sol) {
  double total = total_weight(pt.weights);
  double head = 0;
  for (Index id : sol.support) head += pt.weights[static_cast<std::size_t>(id)];
  sol.head_value = head;
  sol.tail_value = total - head;
}

void strip_padding(SubtreeSolution& sol, Index n_orig) {
  std::erase_if(sol.support, [&](Index id) { return id >= n_orig; });
}

}  // namespace

Index PerfectTree::level_subtree_size(int level) const {
  return perfect_size(arity, level);
}

Index PerfectTree::level_first_id(int level) const {
  return perfect_size(arity, depth - level);
}

Index PerfectTree::level_node_count(int level) const {
  Index pow = 1;
  for (int d = 0; d < depth - level; ++d) pow *= arity;
  return pow;
}

int PerfectTree::level_of(Index id) const {
  Index first = 0, pow = 1;
  for (int d = 0; d < depth; ++d) {
    if (id < first + pow) return depth - d;
    first += pow;
    pow *= arity;
  }
  return 1;
}

PerfectTree pad_to_perfect(const TreeSignal& t) {
  require(t.arity >= 2, "tree arity must be at least 2");
  require(!t.weights.empty(), "tree must be nonempty");
  PerfectTree pt;
  pt.arity = t.arity;
  pt.n_orig = t.size();
  pt.depth = 1;
  while (perfect_size(t.arity, pt.depth) < t.size()) ++pt.depth;
  pt.weights.assign(static_cast<std::size_t>(perfect_size(t.arity, pt.depth)), 0.0);
  for (std::size_t i = 0; i < t.weights.size(); ++i) pt.weights[i] = checked_weight(t.weights[i]);
  return pt;
}

std::vector<Index> subtree_ids(const PerfectTree& t, Index root) {
  std::vector<Index> out{root};
  for (std::size_t q = 0; q < out.size(); ++q)
    for (int c = 0; c < t.arity; ++c) {
      Index ch = t.child(out[q], c);
      if (ch < t.size()) out.push_back(ch);
    }
  return out;
}

TreeSignal lp_transform(const TreeSignal& t, double p) {
  require(p >= 1.0, "norm exponent must be at least 1");
  TreeSignal out = t;
  out.norm_p = 1.0;
  if (p != 1.0)
    for (double& w : out.weights) w = std::pow(std::abs(w), p);
  else
    for (double& w : out.weights) w = std::abs(w);
  return out;
}

// ---------------------------------------------------------------------------
// Exact O(nk) projection (the oracle).

namespace {

DenseArray maxconv_trunc(const DenseArray& a, const DenseArray& b, Index cap) {
  Index out_len = std::min<Index>(static_cast<Index>(a.size() + b.size()) - 2, cap) + 1;
  DenseArray out(static_cast<std::size_t>(out_len), -1.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (static_cast<Index>(i) > cap) break;
    for (std::size_t j = 0; j < b.size(); ++j) {
      Index t = static_cast<Index>(i + j);
      if (t > cap) break;
      out[static_cast<std::size_t>(t)] = std::max(out[static_cast<std::size_t>(t)], a[i] + b[j]);
    }
  }
  return out;
}

struct ExactDp {
  const PerfectTree* pt;
  Index k;
  std::vector<DenseArray> rows;  // rows[id][c] = best head keeping <= c nodes in T_id

  explicit ExactDp(const PerfectTree& t, Index budget) : pt(&t), k(budget) {
    rows.resize(static_cast<std::size_t>(t.size()));
    for (Index id = t.size() - 1; id >= 0; --id) {
      Index cap = std::min<Index>(k, t.level_subtree_size(t.level_of(id)));
      double x = t.weights[static_cast<std::size_t>(id)];
      if (t.is_leaf(id)) {
        rows[static_cast<std::size_t>(id)] = {0.0, x};
        continue;
      }
      DenseArray acc{0.0};
      for (int c = 0; c < t.arity; ++c)
        acc = maxconv_trunc(acc, rows[static_cast<std::size_t>(t.child(id, c))], cap - 1);
      DenseArray row(static_cast<std::size_t>(cap) + 1);
      row[0] = 0.0;
      for (Index l = 1; l <= cap; ++l)
        row[static_cast<std::size_t>(l)] =
            x + acc[static_cast<std::size_t>(std::min<Index>(l - 1, static_cast<Index>(acc.size()) - 1))];
      rows[static_cast<std::size_t>(id)] = std::move(row);
    }
  }

  void reconstruct(Index id, Index keep, std::vector<Index>& out) const {
    if (keep <= 0) return;
    const DenseArray& row = rows[static_cast<std::size_t>(id)];
    keep = std::min<Index>(keep, static_cast<Index>(row.size()) - 1);
    // smallest count achieving the value
    while (keep > 0 && row[static_cast<std::size_t>(keep - 1)] == row[static_cast<std::size_t>(keep)])
      --keep;
    if (keep == 0) return;
    out.push_back(id);
    if (pt->is_leaf(id)) return;
    // redo the fold to find the split among children
    Index budget = keep - 1;
    std::vector<DenseArray> accs{{0.0}};
    for (int c = 0; c < pt->arity; ++c)
      accs.push_back(maxconv_trunc(accs.back(), rows[static_cast<std::size_t>(pt->child(id, c))],
                                   budget));
    double target = accs.back()[static_cast<std::size_t>(
        std::min<Index>(budget, static_cast<Index>(accs.back().size()) - 1))];
    Index t = std::min<Index>(budget, static_cast<Index>(accs.back().size()) - 1);
    for (int c = pt->arity - 1; c >= 0; --c) {
      const DenseArray& prev = accs[static_cast<std::size_t>(c)];
      const DenseArray& child_row = rows[static_cast<std::size_t>(pt->child(id, c))];
      for (Index j = std::min<Index>(t, static_cast<Index>(child_row.size()) - 1); j >= 0; --j) {
        Index i = t - j;
        if (i >= static_cast<Index>(prev.size())) continue;
        if (prev[static_cast<std::size_t>(i)] + child_row[static_cast<std::size_t>(j)] == target) {
          reconstruct(pt->child(id, c), j, out);
          target = prev[static_cast<std::size_t>(i)];
          t = i;
          break;
        }
      }
    }
  }
};

}  // namespace

SubtreeSolution exact_tree_projection(const TreeSignal& t, Index k, Objective obj) {
  require(k >= 1, "k must be at least 1");
  TreeSignal powered = lp_transform(t, t.norm_p);
  PerfectTree pt = pad_to_perfect(powered);
  ExactDp dp(pt, std::min<Index>(k, pt.size()));

  SubtreeSolution sol;
  sol.algorithm = obj == Objective::kTail ? "exact-tail" : "exact-head";
  Index cap = static_cast<Index>(dp.rows[0].size()) - 1;
  dp.reconstruct(0, cap, sol.support);
  if (sol.support.empty()) sol.support.push_back(0);
  std::sort(sol.support.begin(), sol.support.end());
  strip_padding(sol, pt.n_orig);
  fill_values(pt, sol);
  return sol;
}

// ---------------------------------------------------------------------------
// Baselines and discretization (the weight-conditioning stage).

namespace {

std::vector<double> subtree_sums(const PerfectTree& pt, const std::vector<double>& w) {
  std::vector<double> u(w.begin(), w.end());
  for (Index id = pt.size() - 1; id > 0; --id)
    u[static_cast<std::size_t>((id - 1) / pt.arity)] += u[static_cast<std::size_t>(id)];
  return u;
}

}  // namespace

std::pair<SubtreeSolution, double> tail_baseline(const TreeSignal& t, Index k) {
  require(k >= 1, "k must be at least 1");
  TreeSignal powered = lp_transform(t, t.norm_p);
  PerfectTree pt = pad_to_perfect(powered);
  Index k_eff = std::min<Index>(k, pt.n_orig);

  std::vector<double> u = subtree_sums(pt, pt.weights);
  SubtreeSolution sol;
  sol.algorithm = "tail-baseline";
  if (k_eff >= pt.n_orig) {
    sol.support.resize(static_cast<std::size_t>(pt.n_orig));
    std::iota(sol.support.begin(), sol.support.end(), Index{0});
  } else {
    std::vector<double> vals(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(pt.n_orig));
    std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(k_eff - 1),
                     vals.end(), std::greater<>());
    double cut = vals[static_cast<std::size_t>(k_eff - 1)];
    Index above = 0;
    for (Index id = 0; id < pt.n_orig; ++id)
      if (u[static_cast<std::size_t>(id)] > cut) ++above;
    Index ties = k_eff - above;
    for (Index id = 0; id < pt.n_orig && static_cast<Index>(sol.support.size()) < k_eff; ++id) {
      if (u[static_cast<std::size_t>(id)] > cut)
        sol.support.push_back(id);
      else if (u[static_cast<std::size_t>(id)] == cut && ties > 0) {
        sol.support.push_back(id);
        --ties;
      }
    }
  }
  fill_values(pt, sol);
  // W as the direct sum of the discarded weights: a nonnegative float sum is
  // never below its largest term, so the discretization boundary x > W cannot
  // misclassify a discarded node as oversized
  std::vector<char> kept(static_cast<std::size_t>(pt.size()), 0);
  for (Index id : sol.support) kept[static_cast<std::size_t>(id)] = 1;
  double w_direct = 0;
  for (Index id = 0; id < pt.size(); ++id)
    if (!kept[static_cast<std::size_t>(id)]) w_direct += pt.weights[static_cast<std::size_t>(id)];
  return {sol, w_direct};
}

std::pair<SubtreeSolution, double> head_baseline(const TreeSignal& t, Index k) {
  require(k >= 1, "k must be at least 1");
  TreeSignal powered = lp_transform(t, t.norm_p);
  PerfectTree pt = pad_to_perfect(powered);
  Index k_eff = std::min<Index>(k, pt.n_orig);

  // nodes deeper than k can never sit in a feasible support
  auto depth_of = [&](Index id) { return pt.depth - pt.level_of(id); };
  int height = std::min<int>(pt.depth, static_cast<int>(k_eff));
  Index q = std::max<Index>(1, k_eff / height);

  std::vector<Index> cand;
  for (Index id = 0; id < pt.n_orig; ++id)
    if (depth_of(id) < static_cast<int>(k_eff)) cand.push_back(id);
  std::nth_element(cand.begin(),
                   cand.begin() + std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(q) - 1,
                                                           static_cast<std::ptrdiff_t>(cand.size()) - 1),
                   cand.end(), [&](Index a, Index b) {
                     double wa = pt.weights[static_cast<std::size_t>(a)];
                     double wb = pt.weights[static_cast<std::size_t>(b)];
                     return wa > wb || (wa == wb && a < b);
                   });
  if (static_cast<Index>(cand.size()) > q) cand.resize(static_cast<std::size_t>(q));

  std::vector<char> in(static_cast<std::size_t>(pt.size()), 0);
  for (Index id : cand)
    for (Index cur = id;; cur = (cur - 1) / pt.arity) {
      in[static_cast<std::size_t>(cur)] = 1;
      if (cur == 0) break;
    }
  SubtreeSolution sol;
  sol.algorithm = "head-baseline";
  for (Index id = 0; id < pt.size(); ++id)
    if (in[static_cast<std::size_t>(id)]) sol.support.push_back(id);
  strip_padding(sol, pt.n_orig);
  fill_values(pt, sol);
  return {sol, sol.head_value};
}

double DiscretizationContext::tail_sentinel() const {
  if (sentinel) return *sentinel;
  return std::ceil(static_cast<double>(n) * height / epsilon) + static_cast<double>(n);
}

double DiscretizationContext::map(double x) const {
  switch (kind) {
    case Kind::kTail:
      if (x > baseline) return tail_sentinel();
      return std::ceil(x * static_cast<double>(n) * height / (epsilon * baseline));
    case Kind::kHead:
      return std::floor(static_cast<double>(k) * x / (epsilon * baseline));
    case Kind::kHeadLocal:
      return std::floor(x * height * height / (epsilon * baseline));
  }
  return 0;
}

double DiscretizationContext::scale() const {
  switch (kind) {
    case Kind::kTail:
      return epsilon * baseline / (static_cast<double>(n) * height);
    case Kind::kHead:
      return epsilon * baseline / static_cast<double>(k);
    case Kind::kHeadLocal:
      return epsilon * baseline / (height * height);
  }
  return 1;
}

TreeSignal discretize(const TreeSignal& t, const DiscretizationContext& ctx) {
  require(ctx.baseline > 0, "discretization needs a positive baseline value");
  TreeSignal out = t;
  for (double& w : out.weights) w = ctx.map(w);
  return out;
}

// ---------------------------------------------------------------------------
// Level schedules: xi/eta cut levels with geometric
// eps decay above eta); the stage magnitudes are budgeted so the composed
// approximation factor provably stays within the user epsilon.

double LevelSchedule::eps_at(int level) const {
  if (level < eta) return eps_schedule_base;
  return eps_schedule_base * std::pow(3.0, -(level - eta) / 4.0);
}

double LevelSchedule::band_factor(int level_from_xi) const {
  return std::pow(1.0 + eps_prime, level_from_xi + 1);
}

namespace {

double schedule_weight(int depth, int eta) {
  double c = 0;
  for (int j = 0; j <= depth - eta; ++j) c += std::pow(3.0, -j / 4.0);
  return c;
}

}  // namespace

LevelSchedule tail_schedule(int depth, double n_real, double epsilon, bool linear_variant) {
  require(epsilon > 0, "epsilon must be positive");
  LevelSchedule s;
  double l2n = std::log2(std::max(2.0, n_real));
  double ll = std::log2(std::max(2.0, l2n));
  double lll = std::log2(std::max(2.0, ll));
  if (linear_variant) {
    s.eta = static_cast<int>(std::ceil(2.0 * ll));
    s.xi = 1;
  } else {
    s.xi = static_cast<int>(std::ceil(ll - std::log2(1.0 / epsilon) - lll));
    s.eta = static_cast<int>(std::ceil(ll + std::log2(1.0 / epsilon)));
  }
  s.xi = std::clamp(s.xi, 1, depth);
  s.eta = std::clamp(s.eta, s.xi, depth);

  // multiplicative budget: (1+eps_d)(1+eps_lut)(band)(pruning)(schedule)
  // <= 1+eps. The cheap scalar stages get 5% of ln(1+eps) each; the level
  // schedule, which dictates sequence lengths, gets the bulk.
  double ln_total = std::log1p(epsilon);
  int band_len = s.eta - s.xi + 1;
  if (linear_variant) {
    s.eps_prime = 0;  // below eta is exact
    s.eps_schedule_base = 0.75 * ln_total / schedule_weight(depth, s.eta);
  } else {
    s.eps_prime = std::expm1(0.20 * ln_total / band_len);
    s.eps_schedule_base = 0.70 * ln_total / schedule_weight(depth, s.eta);
  }
  return s;
}

LevelSchedule head_schedule(int depth, double n_real, double epsilon) {
  require(epsilon > 0, "epsilon must be positive");
  LevelSchedule s;
  double l2n = std::log2(std::max(2.0, n_real));
  double ll = std::log2(std::max(2.0, l2n));
  double lll = std::log2(std::max(2.0, ll));
  s.xi = static_cast<int>(std::ceil(ll - std::log2(1.0 / epsilon) - lll));
  s.eta = static_cast<int>(std::ceil(ll + std::log2(1.0 / epsilon)));
  s.xi = std::clamp(s.xi, 1, depth);
  s.eta = std::clamp(s.eta, s.xi, depth);

  // additive budget: eps_d + eps_lut + band + schedule + local <= eps; the
  // head side composes as products of (1 - eps_i)
  int band_events = 2 * (s.eta - s.xi) + 1;
  s.eps_prime = 0.20 * epsilon / band_events;
  s.eps_schedule_base = 0.60 * epsilon / (2.0 * schedule_weight(depth, s.eta));
  return s;
}

// ---------------------------------------------------------------------------
// Lookup table: memoized exact DP arrays for small subtrees.

const LookupTable::Entry& LookupTable::lookup(const std::vector<double>& weights, int arity) {
  require(weights.size() <= 64, "lookup table subtree too large");
  std::scoped_lock lock(mutex_);
  auto it = table_.find(weights);
  if (it != table_.end()) return it->second;

  const auto m = static_cast<Index>(weights.size());
  std::vector<DenseArray> arr(static_cast<std::size_t>(m));
  std::vector<std::vector<std::uint64_t>> msk(static_cast<std::size_t>(m));
  for (Index r = m - 1; r >= 0; --r) {
    double x = weights[static_cast<std::size_t>(r)];
    std::uint64_t self = 1ULL << r;
    bool leaf = static_cast<Index>(arity) * r + 1 >= m;
    if (leaf) {
      if (objective_ == Objective::kTail) {
        arr[static_cast<std::size_t>(r)] = {0.0, x};
        msk[static_cast<std::size_t>(r)] = {self, 0};
      } else {
        arr[static_cast<std::size_t>(r)] = {0.0, x};
        msk[static_cast<std::size_t>(r)] = {0, self};
      }
      continue;
    }
    // fold children
    DenseArray acc{0.0};
    std::vector<std::uint64_t> accm{0};
    for (int c = 0; c < arity; ++c) {
      Index ch = static_cast<Index>(arity) * r + 1 + c;
      const DenseArray& cb = arr[static_cast<std::size_t>(ch)];
      const auto& cm = msk[static_cast<std::size_t>(ch)];
      DenseArray nxt(acc.size() + cb.size() - 1,
                     objective_ == Objective::kTail ? std::numeric_limits<double>::infinity()
                                                    : -1.0);
      std::vector<std::uint64_t> nxtm(nxt.size(), 0);
      for (std::size_t i = 0; i < acc.size(); ++i)
        for (std::size_t j = 0; j < cb.size(); ++j) {
          double v = acc[i] + cb[j];
          std::size_t tIdx = i + j;
          bool better = objective_ == Objective::kTail ? v < nxt[tIdx] : v > nxt[tIdx];
          if (better) {
            nxt[tIdx] = v;
            nxtm[tIdx] = accm[i] | cm[j];
          }
        }
      acc = std::move(nxt);
      accm = std::move(nxtm);
    }
    if (objective_ == Objective::kTail) {
      // index = discarded count; the last slot discards the root too
      DenseArray row(acc.size() + 1);
      std::vector<std::uint64_t> rowm(acc.size() + 1);
      for (std::size_t l = 0; l < acc.size(); ++l) {
        row[l] = acc[l];
        rowm[l] = accm[l] | self;
      }
      double sum = x;
      for (double v : acc) (void)v;
      sum = x + acc.back();  // acc.back() = all descendants discarded
      row[acc.size()] = sum;
      rowm[acc.size()] = 0;
      arr[static_cast<std::size_t>(r)] = std::move(row);
      msk[static_cast<std::size_t>(r)] = std::move(rowm);
    } else {
      // index = kept count; keeping anything forces the root in
      DenseArray row(acc.size() + 1);
      std::vector<std::uint64_t> rowm(acc.size() + 1);
      row[0] = 0;
      rowm[0] = 0;
      for (std::size_t l = 0; l < acc.size(); ++l) {
        row[l + 1] = x + acc[l];
        rowm[l + 1] = accm[l] | self;
      }
      // enforce monotonicity: value at <= l kept
      for (std::size_t l = 1; l < row.size(); ++l)
        if (row[l] < row[l - 1]) {
          row[l] = row[l - 1];
          rowm[l] = rowm[l - 1];
        }
      arr[static_cast<std::size_t>(r)] = std::move(row);
      msk[static_cast<std::size_t>(r)] = std::move(rowm);
    }
  }
  Entry e;
  e.array = std::move(arr[0]);
  e.mask = std::move(msk[0]);
  return table_.emplace(weights, std::move(e)).first->second;
}

RepSeq bary_convolve(const std::vector<RepSeq>& children, double alpha, double beta,
                     Objective obj, const std::vector<Index>& cardinalities) {
  require(!children.empty(), "bary_convolve needs at least one child");
  RepSeq acc = children.front();
  Index card = cardinalities.empty() ? acc.max_index() : cardinalities.front();
  double alpha_cur = alpha;
  for (std::size_t c = 1; c < children.size(); ++c) {
    if (obj == Objective::kTail) {
      acc = fast_rs_minplus(alpha_cur, beta, acc, children[c]);
    } else {
      Index card_c = c < cardinalities.size() ? cardinalities[c] : children[c].max_index();
      acc = fast_rs_maxplus(alpha_cur, beta, acc, children[c], card, card_c);
      card += card_c;
    }
    alpha_cur = beta;  // the accumulator is only a beta-RS from here on
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Shared pipeline machinery: per-node fold stages, boundary sequences at the
// eta level, and the backpointer descent that reconstructs supports.

namespace {

using Stages = std::vector<RepSeq>;

struct DescendCtx {
  const PerfectTree* pt = nullptr;
  int xi_level = 0;  // level whose kDense entries resolve through the table
  std::function<const Stages*(Index)> stages_of;
  std::function<const LookupTable::Entry*(Index)> table_ref;
  // when set, entries of nodes at exactly this level are handed to `boundary`
  int boundary_level = 0;
  std::function<const RepSeq*(Index)> boundary_seq_of;
  std::function<void(Index, const SeqEntry&, std::vector<Index>&)> boundary;
};

void descend(const DescendCtx& ctx, Index node, int stage, const SeqEntry& e,
             std::vector<Index>& out);

void descend_into(const DescendCtx& ctx, Index node, std::int32_t pos, std::vector<Index>& out) {
  if (ctx.boundary_level > 0 && ctx.pt->level_of(node) == ctx.boundary_level) {
    const RepSeq* bs = ctx.boundary_seq_of(node);
    require(bs != nullptr, "missing boundary sequence");
    ctx.boundary(node, bs->entries[static_cast<std::size_t>(pos)], out);
    return;
  }
  const Stages* st = ctx.stages_of(node);
  require(st && !st->empty(), "dangling reconstruction pointer");
  int last = static_cast<int>(st->size()) - 1;
  descend(ctx, node, last, (*st)[static_cast<std::size_t>(last)].entries[static_cast<std::size_t>(pos)],
          out);
}

void descend(const DescendCtx& ctx, Index node, int stage, const SeqEntry& e,
             std::vector<Index>& out) {
  switch (e.tag) {
    case EntryTag::kSentinel:
      return;
    case EntryTag::kBase:
      out.push_back(node);
      return;
    case EntryTag::kDense: {
      const LookupTable::Entry* te = ctx.table_ref(node);
      require(te != nullptr, "dangling lookup-table reference");
      std::uint64_t mask = te->mask[static_cast<std::size_t>(e.left)];
      std::vector<Index> ids = subtree_ids(*ctx.pt, node);
      for (std::size_t r = 0; r < ids.size(); ++r)
        if (mask & (1ULL << r)) out.push_back(ids[r]);
      return;
    }
    case EntryTag::kPair: {
      const Stages* st = ctx.stages_of(node);
      require(st != nullptr, "dangling reconstruction pointer");
      int last = static_cast<int>(st->size()) - 1;
      if (stage == last) out.push_back(node);
      if (e.left >= 0) {
        if (stage == 0)
          descend_into(ctx, ctx.pt->child(node, 0), e.left, out);
        else
          descend(ctx, node, stage - 1,
                  (*st)[static_cast<std::size_t>(stage - 1)].entries[static_cast<std::size_t>(e.left)],
                  out);
      }
      if (e.right >= 0) descend_into(ctx, ctx.pt->child(node, stage + 1), e.right, out);
      return;
    }
    case EntryTag::kNone:
      require(false, "entry without reconstruction info");
  }
}

// Apply the tail index window: entries below subtree_size - k can never take
// part in a feasible root selection.
void tail_window(RepSeq& seq, Index subtree_size, Index k) {
  if (subtree_size > k) truncate_tail_window(seq, subtree_size - k);
}

// Append the inflated whole-subtree-discarded sentinel, keeping the RS gap
// structurally valid under floating rounding.
void append_tail_sentinel(RepSeq& seq, Index subtree_size, double value, double beta) {
  if (!seq.entries.empty()) value = std::max(value, seq.entries.back().value * (1.0 + beta));
  seq.entries.emplace_back(subtree_size, value, -1, -1, EntryTag::kSentinel);
}

struct TailBandResult {
  std::unordered_map<Index, Stages> stages;
  std::unordered_map<Index, const LookupTable::Entry*> table_refs;
};

struct TailPipelineCtx {
  const PerfectTree* pt;
  const std::vector<double>* work;       // weights the sequences are built on
  const std::vector<double>* work_sums;  // subtree sums of work
  LevelSchedule sched;
  Index k;
  LookupTable* table;
};

// Exact band for one eta-subtree of FastTailTree: lookup-table arrays at
// level xi, (eps', eps') RS convolutions up to eta.
TailBandResult run_tail_band(const TailPipelineCtx& c, Index f) {
  TailBandResult res;
  std::vector<Index> ids = subtree_ids(*c.pt, f);
  for (auto it = ids.rbegin(); it != ids.rend(); ++it) {
    Index id = *it;
    int level = c.pt->level_of(id);
    if (level < c.sched.xi) continue;
    if (level == c.sched.xi) {
      std::vector<Index> sub = subtree_ids(*c.pt, id);
      std::vector<double> key(sub.size());
      for (std::size_t r = 0; r < sub.size(); ++r)
        key[r] = (*c.work)[static_cast<std::size_t>(sub[r])];
      const LookupTable::Entry& te = c.table->lookup(key, c.pt->arity);
      RepSeq seq = thin_array_tail(te.array, c.sched.eps_prime);
      tail_window(seq, c.pt->level_subtree_size(level), c.k);
      res.table_refs[id] = &te;
      res.stages[id] = {std::move(seq)};
      continue;
    }
    Stages stages;
    double alpha_cur = c.sched.eps_prime;
    RepSeq acc = res.stages[c.pt->child(id, 0)].back();
    for (int ch = 1; ch < c.pt->arity; ++ch) {
      acc = fast_rs_minplus(alpha_cur, c.sched.eps_prime, acc,
                            res.stages[c.pt->child(id, ch)].back());
      alpha_cur = c.sched.eps_prime;
      stages.push_back(acc);
    }
    RepSeq& fin = stages.back();
    tail_window(fin, c.pt->level_subtree_size(level), c.k);
    append_tail_sentinel(fin, c.pt->level_subtree_size(level),
                         c.sched.band_factor(level - c.sched.xi) *
                             (*c.work_sums)[static_cast<std::size_t>(id)],
                         c.sched.eps_prime);
    res.stages[id] = std::move(stages);
  }
  return res;
}

// Exact dense tail arrays for a whole subtree (LinearTailTree survivors).
std::unordered_map<Index, DenseArray> exact_tail_arrays(const PerfectTree& pt,
                                                        const std::vector<double>& w, Index f) {
  std::unordered_map<Index, DenseArray> arr;
  std::vector<Index> ids = subtree_ids(pt, f);
  for (auto it = ids.rbegin(); it != ids.rend(); ++it) {
    Index id = *it;
    double x = w[static_cast<std::size_t>(id)];
    if (pt.is_leaf(id)) {
      arr[id] = {0.0, x};
      continue;
    }
    DenseArray acc{0.0};
    for (int ch = 0; ch < pt.arity; ++ch) {
      const DenseArray& cb = arr[pt.child(id, ch)];
      DenseArray nxt(acc.size() + cb.size() - 1, std::numeric_limits<double>::infinity());
      for (std::size_t i = 0; i < acc.size(); ++i)
        for (std::size_t j = 0; j < cb.size(); ++j)
          nxt[i + j] = std::min(nxt[i + j], acc[i] + cb[j]);
      acc = std::move(nxt);
    }
    acc.push_back(x + acc.back());  // discard the root too
    arr[id] = std::move(acc);
  }
  return arr;
}

// Walk an exact tail array family: at node `id`, discard `l` inside T_id.
void walk_tail_arrays(const PerfectTree& pt, const std::vector<double>& w,
                      const std::unordered_map<Index, DenseArray>& arr, Index id, Index l,
                      std::vector<Index>& out) {
  const DenseArray& a = arr.at(id);
  Index size = static_cast<Index>(a.size()) - 1;
  if (l >= size) return;  // whole subtree discarded
  out.push_back(id);
  if (pt.is_leaf(id)) return;
  // find the split among children by rescanning
  std::vector<const DenseArray*> rows;
  for (int ch = 0; ch < pt.arity; ++ch) rows.push_back(&arr.at(pt.child(id, ch)));
  // fold accumulators
  std::vector<DenseArray> accs{{0.0}};
  for (const DenseArray* r : rows) {
    const DenseArray& prev = accs.back();
    DenseArray nxt(prev.size() + r->size() - 1, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < prev.size(); ++i)
      for (std::size_t j = 0; j < r->size(); ++j)
        nxt[i + j] = std::min(nxt[i + j], prev[i] + (*r)[j]);
    accs.push_back(std::move(nxt));
  }
  Index t = l;
  for (int ch = pt.arity - 1; ch >= 0; --ch) {
    const DenseArray& prev = accs[static_cast<std::size_t>(ch)];
    const DenseArray& row = *rows[static_cast<std::size_t>(ch)];
    const DenseArray& cur = accs[static_cast<std::size_t>(ch) + 1];
    for (Index j = std::min<Index>(t, static_cast<Index>(row.size()) - 1); j >= 0; --j) {
      Index i = t - j;
      if (i >= static_cast<Index>(prev.size())) continue;
      if (prev[static_cast<std::size_t>(i)] + row[static_cast<std::size_t>(j)] ==
          cur[static_cast<std::size_t>(t)]) {
        walk_tail_arrays(pt, w, arr, pt.child(id, ch), j, out);
        t = i;
        break;
      }
    }
  }
}

struct UpperStore {
  const PerfectTree* pt = nullptr;
  Index boundary_first = 0;
  std::vector<Stages> stages;    // ids < boundary_first
  std::vector<RepSeq> boundary;  // id - boundary_first
};

const RepSeq& node_seq(const UpperStore& st, Index id) {
  if (id >= st.boundary_first) return st.boundary[static_cast<std::size_t>(id - st.boundary_first)];
  return st.stages[static_cast<std::size_t>(id)].back();
}

// Upward pass shared by the three algorithms: fold children with the
// scheduled RS convolution per level, post-process the node sequence, and
// keep everything for reconstruction.
template <class FoldFn>
void run_upper_levels(const PerfectTree& pt, int eta, UpperStore& st, FoldFn&& fold) {
  for (int level = eta + 1; level <= pt.depth; ++level) {
    Index first = pt.level_first_id(level);
    Index count = pt.level_node_count(level);
#pragma omp parallel for schedule(dynamic, 16) if (parallel_enabled() && count > 64)
    for (Index j = 0; j < count; ++j) {
      Index id = first + j;
      st.stages[static_cast<std::size_t>(id)] = fold(id, level);
    }
  }
}

SubtreeSolution finish_exact_route(const TreeSignal& t, Index k, Objective obj,
                                   const char* algorithm) {
  SubtreeSolution sol = exact_tree_projection(t, k, obj);
  sol.algorithm = algorithm;
  sol.fell_back_to_exact = true;
  return sol;
}

SubtreeSolution full_tree_solution(const PerfectTree& pt, const char* algorithm) {
  SubtreeSolution sol;
  sol.algorithm = algorithm;
  sol.support.resize(static_cast<std::size_t>(pt.n_orig));
  std::iota(sol.support.begin(), sol.support.end(), Index{0});
  fill_values(pt, sol);
  return sol;
}

double bucket_up(double x, double eps) {
  if (x <= 0) return 0;
  if (x <= 1) return 1;
  return std::pow(1.0 + eps, std::ceil(std::log(x) / std::log1p(eps)));
}

double bucket_down(double x, double eps) {
  if (x <= 0) return 0;
  return std::pow(1.0 + eps, std::floor(std::log(x) / std::log1p(eps)));
}

}  // namespace

// ---------------------------------------------------------------------------
// FastTailTree.

SubtreeSolution detail::fast_tail_tree_impl(const TreeSignal& t, const ProjectionBudget& budget,
                                            detail::TailTrace* trace) {
  require(budget.k >= 1, "k must be at least 1");
  require(budget.epsilon > 0, "epsilon must be positive");
  TreeSignal powered = lp_transform(t, t.norm_p);
  PerfectTree pt = pad_to_perfect(powered);
  const char* kAlg = "fast-tail-tree";
  if (budget.k >= pt.n_orig) return full_tree_solution(pt, kAlg);
  if (pt.size() <= 63 || budget.k < pt.depth)
    return finish_exact_route(t, budget.k, Objective::kTail, kAlg);

  auto [base_sol, W] = tail_baseline(t, budget.k);
  if (W == 0) {
    base_sol.algorithm = kAlg;
    return base_sol;
  }

  double n_real = static_cast<double>(pt.size());
  double height = pt.depth;
  LevelSchedule sched = tail_schedule(pt.depth, n_real, budget.epsilon, false);
  double eps_d = std::expm1(0.05 * std::log1p(budget.epsilon));
  double eps_lut = std::expm1(0.05 * std::log1p(budget.epsilon));

  DiscretizationContext ctx;
  ctx.kind = DiscretizationContext::Kind::kTail;
  ctx.baseline = W;
  ctx.epsilon = eps_d;
  ctx.k = budget.k;
  ctx.n = pt.size();
  ctx.height = height;
  // raised so that even a (1+eps)-approximate solution can never afford to
  // drop an above-W node (a bare ceil(n*H/eps)+n sentinel only guards the exact
  // optimum)
  ctx.sentinel = std::ceil((1.0 + budget.epsilon) *
                           (n_real * height / eps_d + n_real)) + 1.0;

  std::vector<double> work(static_cast<std::size_t>(pt.size()));
  for (Index i = 0; i < pt.size(); ++i)
    work[static_cast<std::size_t>(i)] =
        bucket_up(ctx.map(pt.weights[static_cast<std::size_t>(i)]), eps_lut);
  std::vector<double> sums = subtree_sums(pt, work);

  auto table = std::make_shared<LookupTable>(Objective::kTail);
  Index window_k = trace ? pt.size() : budget.k;  // tracing keeps full windows
  TailPipelineCtx pc{&pt, &work, &sums, sched, window_k, table.get()};
  if (trace) trace->table = table;

  UpperStore store;
  store.pt = &pt;
  store.boundary_first = pt.level_first_id(sched.eta);
  store.stages.resize(static_cast<std::size_t>(store.boundary_first));
  Index m_eta = pt.level_node_count(sched.eta);
  store.boundary.resize(static_cast<std::size_t>(m_eta));

  if (trace) {
    trace->node_stages.assign(static_cast<std::size_t>(pt.size()), {});
    trace->level_factor.assign(static_cast<std::size_t>(pt.depth) + 1, 1.0);
  }

  // band pass: one exact-table band per eta subtree, rethinned at eta
#pragma omp parallel for schedule(dynamic, 4) if (parallel_enabled() && m_eta > 16)
  for (Index j = 0; j < m_eta; ++j) {
    Index f = store.boundary_first + j;
    TailBandResult band = run_tail_band(pc, f);
    RepSeq eta_seq = rethin_tail(band.stages[f].back(), sched.eps_at(sched.eta));
    tail_window(eta_seq, pt.level_subtree_size(sched.eta), window_k);
    store.boundary[static_cast<std::size_t>(j)] = std::move(eta_seq);
    if (trace) {
#pragma omp critical
      {
        for (auto& [id, stg] : band.stages) trace->node_stages[static_cast<std::size_t>(id)] = stg;
        for (auto& [id, te] : band.table_refs) trace->table_refs[id] = te;
        trace->node_stages[static_cast<std::size_t>(f)].back() =
            store.boundary[static_cast<std::size_t>(j)];
      }
    }
  }

  // schedule factors: the sentinel inflation doubles as the per-level bound
  std::vector<double> sent_factor(static_cast<std::size_t>(pt.depth) + 1, 1.0);
  {
    double acc = sched.band_factor(sched.eta - sched.xi);
    for (int level = sched.eta; level <= pt.depth; ++level) {
      acc *= 1.0 + sched.eps_at(level);
      sent_factor[static_cast<std::size_t>(level)] = acc;
    }
  }
  if (trace) {
    for (int level = sched.xi; level < sched.eta; ++level)
      trace->level_factor[static_cast<std::size_t>(level)] = sched.band_factor(level - sched.xi);
    for (int level = sched.eta; level <= pt.depth; ++level)
      trace->level_factor[static_cast<std::size_t>(level)] = sent_factor[static_cast<std::size_t>(level)];
  }

  run_upper_levels(pt, sched.eta, store, [&](Index id, int level) {
    Stages stages;
    double alpha_cur = sched.eps_at(level - 1);
    RepSeq acc = node_seq(store, pt.child(id, 0));
    for (int ch = 1; ch < pt.arity; ++ch) {
      acc = fast_rs_minplus(alpha_cur, sched.eps_at(level), acc, node_seq(store, pt.child(id, ch)));
      alpha_cur = sched.eps_at(level);
      stages.push_back(acc);
    }
    RepSeq& fin = stages.back();
    tail_window(fin, pt.level_subtree_size(level), window_k);
    append_tail_sentinel(fin, pt.level_subtree_size(level),
                         sent_factor[static_cast<std::size_t>(level)] *
                             sums[static_cast<std::size_t>(id)],
                         sched.eps_at(level));
    return stages;
  });

  if (trace) {
    for (Index id = 0; id < store.boundary_first; ++id)
      trace->node_stages[static_cast<std::size_t>(id)] = store.stages[static_cast<std::size_t>(id)];
    trace->pt = pt;
    trace->work = work;
    trace->schedule = sched;
    trace->window_k = budget.k;
  }

  // selection and reconstruction
  DescendCtx dctx;
  dctx.pt = &pt;
  dctx.xi_level = sched.xi;
  dctx.stages_of = [&](Index id) -> const Stages* {
    return id < store.boundary_first ? &store.stages[static_cast<std::size_t>(id)] : nullptr;
  };
  dctx.table_ref = [](Index) -> const LookupTable::Entry* { return nullptr; };
  dctx.boundary_level = sched.eta;
  dctx.boundary_seq_of = [&](Index id) -> const RepSeq* {
    return &store.boundary[static_cast<std::size_t>(id - store.boundary_first)];
  };
  dctx.boundary = [&](Index f, const SeqEntry& e, std::vector<Index>& out) {
    TailBandResult band = run_tail_band(pc, f);
    DescendCtx inner;
    inner.pt = &pt;
    inner.xi_level = sched.xi;
    inner.stages_of = [&](Index id) -> const Stages* {
      auto it = band.stages.find(id);
      return it == band.stages.end() ? nullptr : &it->second;
    };
    inner.table_ref = [&](Index id) -> const LookupTable::Entry* {
      auto it = band.table_refs.find(id);
      return it == band.table_refs.end() ? nullptr : it->second;
    };
    descend(inner, f, static_cast<int>(band.stages[f].size()) - 1, e, out);
  };

  const RepSeq& root = sched.eta == pt.depth ? store.boundary[0] : store.stages[0].back();
  Index threshold = pt.size() - budget.k;
  std::size_t pick = 0;
  while (pick < root.entries.size() && root.entries[pick].index < threshold) ++pick;
  require(pick < root.entries.size(), "root sequence misses the sentinel");
  const SeqEntry& chosen = root.entries[pick];
  if (trace) {
    trace->selected_index = chosen.index;
    trace->selected_value = chosen.value;
  }

  SubtreeSolution sol;
  sol.algorithm = kAlg;
  if (sched.eta == pt.depth)
    dctx.boundary(0, chosen, sol.support);
  else
    descend(dctx, 0, static_cast<int>(store.stages[0].size()) - 1, chosen, sol.support);
  if (sol.support.empty()) sol.support.push_back(0);
  std::sort(sol.support.begin(), sol.support.end());
  strip_padding(sol, pt.n_orig);
  fill_values(pt, sol);
  return sol;
}

SubtreeSolution fast_tail_tree(const TreeSignal& t, const ProjectionBudget& budget) {
  return detail::fast_tail_tree_impl(t, budget, nullptr);
}

// ---------------------------------------------------------------------------
// LinearTailTree: prune light eta subtrees, exact DP below eta on survivors.

SubtreeSolution linear_tail_tree(const TreeSignal& t, const ProjectionBudget& budget) {
  require(budget.k >= 1, "k must be at least 1");
  require(budget.epsilon > 0, "epsilon must be positive");
  require(budget.delta > 0 && budget.delta < 1, "delta must lie in (0,1)");
  TreeSignal powered = lp_transform(t, t.norm_p);
  PerfectTree pt = pad_to_perfect(powered);
  const char* kAlg = "linear-tail-tree";
  if (budget.k >= pt.n_orig) return full_tree_solution(pt, kAlg);
  double n_pow = std::pow(static_cast<double>(pt.n_orig), 1.0 - budget.delta);
  if (static_cast<double>(budget.k) > n_pow) {
    SubtreeSolution sol = fast_tail_tree(t, budget);
    sol.algorithm = kAlg;
    sol.fell_back_to_fast = true;
    return sol;
  }
  if (pt.size() <= 63 || budget.k < pt.depth)
    return finish_exact_route(t, budget.k, Objective::kTail, kAlg);

  auto [base_sol, W] = tail_baseline(t, budget.k);
  if (W == 0) {
    base_sol.algorithm = kAlg;
    return base_sol;
  }

  double n_real = static_cast<double>(pt.size());
  double height = pt.depth;
  LevelSchedule sched = tail_schedule(pt.depth, n_real, budget.epsilon, true);
  double eps_d = std::expm1(0.05 * std::log1p(budget.epsilon));
  double eps_pr = std::expm1(0.20 * std::log1p(budget.epsilon));

  DiscretizationContext ctx;
  ctx.kind = DiscretizationContext::Kind::kTail;
  ctx.baseline = W;
  ctx.epsilon = eps_d;
  ctx.k = budget.k;
  ctx.n = pt.size();
  ctx.height = height;
  ctx.sentinel = std::ceil((1.0 + budget.epsilon) *
                           (n_real * height / eps_d + n_real)) + 1.0;

  std::vector<double> work(static_cast<std::size_t>(pt.size()));
  for (Index i = 0; i < pt.size(); ++i)
    work[static_cast<std::size_t>(i)] = ctx.map(pt.weights[static_cast<std::size_t>(i)]);
  std::vector<double> sums = subtree_sums(pt, work);

  UpperStore store;
  store.pt = &pt;
  store.boundary_first = pt.level_first_id(sched.eta);
  store.stages.resize(static_cast<std::size_t>(store.boundary_first));
  Index m_eta = pt.level_node_count(sched.eta);
  store.boundary.resize(static_cast<std::size_t>(m_eta));

  // survivor selection: keep the c* heaviest eta subtrees (BFS tie break)
  Index keep_count = static_cast<Index>(
      std::ceil((1.0 + eps_pr) * std::pow(n_real, 1.0 - budget.delta) / eps_pr));
  std::vector<Index> order(static_cast<std::size_t>(m_eta));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    double ua = sums[static_cast<std::size_t>(store.boundary_first + a)];
    double ub = sums[static_cast<std::size_t>(store.boundary_first + b)];
    return ua > ub || (ua == ub && a < b);
  });
  std::vector<char> survives(static_cast<std::size_t>(m_eta), 0);
  for (Index r = 0; r < std::min<Index>(keep_count, m_eta); ++r)
    survives[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = 1;

  Index s_eta = pt.level_subtree_size(sched.eta);
#pragma omp parallel for schedule(dynamic, 4) if (parallel_enabled() && m_eta > 16)
  for (Index j = 0; j < m_eta; ++j) {
    Index f = store.boundary_first + j;
    if (!survives[static_cast<std::size_t>(j)]) {
      RepSeq del;
      del.alpha = sched.eps_at(sched.eta);
      del.entries.emplace_back(s_eta, sums[static_cast<std::size_t>(f)], -1, -1,
                               EntryTag::kSentinel);
      store.boundary[static_cast<std::size_t>(j)] = std::move(del);
      continue;
    }
    auto arrays = exact_tail_arrays(pt, work, f);
    RepSeq seq = thin_array_tail(arrays[f], sched.eps_at(sched.eta));
    tail_window(seq, s_eta, budget.k);
    store.boundary[static_cast<std::size_t>(j)] = std::move(seq);
  }

  std::vector<double> sent_factor(static_cast<std::size_t>(pt.depth) + 1, 1.0);
  {
    double acc = 1.0;
    for (int level = sched.eta; level <= pt.depth; ++level) {
      acc *= 1.0 + sched.eps_at(level);
      sent_factor[static_cast<std::size_t>(level)] = acc;
    }
  }

  run_upper_levels(pt, sched.eta, store, [&](Index id, int level) {
    Stages stages;
    double alpha_cur = sched.eps_at(level - 1);
    RepSeq acc = node_seq(store, pt.child(id, 0));
    for (int ch = 1; ch < pt.arity; ++ch) {
      acc = fast_rs_minplus(alpha_cur, sched.eps_at(level), acc, node_seq(store, pt.child(id, ch)));
      alpha_cur = sched.eps_at(level);
      stages.push_back(acc);
    }
    RepSeq& fin = stages.back();
    tail_window(fin, pt.level_subtree_size(level), budget.k);
    append_tail_sentinel(fin, pt.level_subtree_size(level),
                         sent_factor[static_cast<std::size_t>(level)] *
                             sums[static_cast<std::size_t>(id)],
                         sched.eps_at(level));
    return stages;
  });

  DescendCtx dctx;
  dctx.pt = &pt;
  dctx.stages_of = [&](Index id) -> const Stages* {
    return id < store.boundary_first ? &store.stages[static_cast<std::size_t>(id)] : nullptr;
  };
  dctx.table_ref = [](Index) -> const LookupTable::Entry* { return nullptr; };
  dctx.boundary_level = sched.eta;
  dctx.boundary_seq_of = [&](Index id) -> const RepSeq* {
    return &store.boundary[static_cast<std::size_t>(id - store.boundary_first)];
  };
  dctx.boundary = [&](Index f, const SeqEntry& e, std::vector<Index>& out) {
    if (e.tag == EntryTag::kSentinel) return;
    require(e.tag == EntryTag::kDense, "unexpected boundary entry");
    auto arrays = exact_tail_arrays(pt, work, f);
    walk_tail_arrays(pt, work, arrays, f, e.left, out);
  };

  const RepSeq& root = sched.eta == pt.depth ? store.boundary[0] : store.stages[0].back();
  Index threshold = pt.size() - budget.k;
  std::size_t pick = 0;
  while (pick < root.entries.size() && root.entries[pick].index < threshold) ++pick;
  require(pick < root.entries.size(), "root sequence misses the sentinel");

  SubtreeSolution sol;
  sol.algorithm = kAlg;
  if (sched.eta == pt.depth)
    dctx.boundary(0, root.entries[pick], sol.support);
  else
    descend(dctx, 0, static_cast<int>(store.stages[0].size()) - 1, root.entries[pick], sol.support);
  if (sol.support.empty()) sol.support.push_back(0);
  std::sort(sol.support.begin(), sol.support.end());
  strip_padding(sol, pt.n_orig);
  fill_values(pt, sol);
  return sol;
}

// ---------------------------------------------------------------------------
// LinearHeadTree.

namespace {

// node sequence from the children fold: shift indices by one, add the node
// weight, keep the keep-nothing entry reconstructible
RepSeq head_node_seq(const RepSeq& conv, double x, double beta) {
  RepSeq out;
  out.alpha = beta;
  out.entries.emplace_back(0, 0.0, -1, -1, EntryTag::kSentinel);
  for (const SeqEntry& e : conv.entries)
    out.entries.emplace_back(e.index + 1, e.value + x, e.left, e.right, EntryTag::kPair);
  return rethin_head(out, beta);
}

struct HeadPipelineCtx {
  const PerfectTree* pt;
  LevelSchedule sched;
  Index k;
  Index c1;
  LookupTable* table;
  const std::vector<double>* disc;  // head-discretized integer weights
  const std::vector<double>* wb;    // bucketed-down copy used by case 1
  double eps_loc;
};

// Case 1: head arrays truncated to the first c1 entries, exact (max,+)
// convolutions over the lookup-table arrays at level xi.
std::unordered_map<Index, DenseArray> case1_arrays(
    const HeadPipelineCtx& c, Index f,
    std::unordered_map<Index, const LookupTable::Entry*>* refs) {
  const PerfectTree& pt = *c.pt;
  std::unordered_map<Index, DenseArray> arr;
  std::vector<Index> ids = subtree_ids(pt, f);
  for (auto it = ids.rbegin(); it != ids.rend(); ++it) {
    Index id = *it;
    int level = pt.level_of(id);
    if (level < c.sched.xi) continue;
    if (level == c.sched.xi) {
      std::vector<Index> sub = subtree_ids(pt, id);
      std::vector<double> key(sub.size());
      for (std::size_t r = 0; r < sub.size(); ++r)
        key[r] = (*c.wb)[static_cast<std::size_t>(sub[r])];
      const LookupTable::Entry& te = c.table->lookup(key, pt.arity);
      DenseArray a = te.array;
      if (static_cast<Index>(a.size()) > c.c1) a.resize(static_cast<std::size_t>(c.c1));
      if (refs) (*refs)[id] = &te;
      arr[id] = std::move(a);
      continue;
    }
    DenseArray acc{0.0};
    for (int ch = 0; ch < pt.arity; ++ch)
      acc = maxconv_trunc(acc, arr[pt.child(id, ch)], c.c1 - 1);
    DenseArray row(std::min<std::size_t>(acc.size() + 1, static_cast<std::size_t>(c.c1)));
    row[0] = 0;
    for (std::size_t l = 1; l < row.size(); ++l)
      row[l] = (*c.wb)[static_cast<std::size_t>(id)] + acc[l - 1];
    arr[id] = std::move(row);
  }
  return arr;
}

void walk_case1(const HeadPipelineCtx& c,
                const std::unordered_map<Index, DenseArray>& arr,
                const std::unordered_map<Index, const LookupTable::Entry*>& refs, Index id,
                Index keep, std::vector<Index>& out) {
  const PerfectTree& pt = *c.pt;
  const DenseArray& a = arr.at(id);
  keep = std::min<Index>(keep, static_cast<Index>(a.size()) - 1);
  while (keep > 0 && a[static_cast<std::size_t>(keep - 1)] == a[static_cast<std::size_t>(keep)])
    --keep;
  if (keep <= 0) return;
  if (pt.level_of(id) == c.sched.xi) {
    const LookupTable::Entry* te = refs.at(id);
    std::uint64_t mask = te->mask[static_cast<std::size_t>(keep)];
    std::vector<Index> ids = subtree_ids(pt, id);
    for (std::size_t r = 0; r < ids.size(); ++r)
      if (mask & (1ULL << r)) out.push_back(ids[r]);
    return;
  }
  out.push_back(id);
  Index budget = keep - 1;
  std::vector<DenseArray> accs{{0.0}};
  for (int ch = 0; ch < pt.arity; ++ch)
    accs.push_back(maxconv_trunc(accs.back(), arr.at(pt.child(id, ch)), budget));
  Index t = std::min<Index>(budget, static_cast<Index>(accs.back().size()) - 1);
  double target = accs.back()[static_cast<std::size_t>(t)];
  for (int ch = pt.arity - 1; ch >= 0; --ch) {
    const DenseArray& prev = accs[static_cast<std::size_t>(ch)];
    const DenseArray& row = arr.at(pt.child(id, ch));
    for (Index j = std::min<Index>(t, static_cast<Index>(row.size()) - 1); j >= 0; --j) {
      Index i = t - j;
      if (i >= static_cast<Index>(prev.size())) continue;
      if (prev[static_cast<std::size_t>(i)] + row[static_cast<std::size_t>(j)] == target) {
        walk_case1(c, arr, refs, pt.child(id, ch), j, out);
        target = prev[static_cast<std::size_t>(i)];
        t = i;
        break;
      }
    }
  }
}

struct HeadBandResult {
  std::unordered_map<Index, Stages> stages;
  std::unordered_map<Index, const LookupTable::Entry*> table_refs;
  double sigma = 1.0;
};

// Case 2: the locally rescaled RS pipeline for one eta subtree.
HeadBandResult run_head_band(const HeadPipelineCtx& c, Index f) {
  const PerfectTree& pt = *c.pt;
  HeadBandResult res;
  std::vector<Index> ids = subtree_ids(pt, f);
  double xmax = 0;
  for (Index id : ids) xmax = std::max(xmax, (*c.disc)[static_cast<std::size_t>(id)]);
  Index s_eta = pt.level_subtree_size(pt.level_of(f));
  res.sigma = std::max(1.0, c.eps_loc * xmax / static_cast<double>(s_eta));
  auto local = [&](Index id) { return std::floor((*c.disc)[static_cast<std::size_t>(id)] / res.sigma); };

  for (auto it = ids.rbegin(); it != ids.rend(); ++it) {
    Index id = *it;
    int level = pt.level_of(id);
    if (level < c.sched.xi) continue;
    Index hi = std::min<Index>(c.k, pt.level_subtree_size(level));
    if (level == c.sched.xi) {
      std::vector<Index> sub = subtree_ids(pt, id);
      std::vector<double> key(sub.size());
      for (std::size_t r = 0; r < sub.size(); ++r) key[r] = local(sub[r]);
      const LookupTable::Entry& te = c.table->lookup(key, pt.arity);
      RepSeq seq = thin_array_head(te.array, c.sched.eps_prime);
      truncate_head_window(seq, hi);
      res.table_refs[id] = &te;
      res.stages[id] = {std::move(seq)};
      continue;
    }
    Stages stages;
    double alpha_cur = c.sched.eps_prime;
    RepSeq acc = res.stages[pt.child(id, 0)].back();
    for (int ch = 1; ch < pt.arity; ++ch) {
      const RepSeq& rhs = res.stages[pt.child(id, ch)].back();
      acc = fast_rs_maxplus(alpha_cur, c.sched.eps_prime, acc, rhs, acc.max_index(),
                            rhs.max_index());
      alpha_cur = c.sched.eps_prime;
      stages.push_back(acc);
    }
    RepSeq fin = head_node_seq(stages.back(), local(id), c.sched.eps_prime);
    truncate_head_window(fin, hi);
    stages.back() = std::move(fin);
    res.stages[id] = std::move(stages);
  }
  return res;
}

}  // namespace

SubtreeSolution linear_head_tree(const TreeSignal& t, const ProjectionBudget& budget) {
  require(budget.k >= 1, "k must be at least 1");
  require(budget.epsilon > 0 && budget.epsilon <= 0.9, "epsilon must lie in (0, 0.9]");
  TreeSignal powered = lp_transform(t, t.norm_p);
  PerfectTree pt = pad_to_perfect(powered);
  const char* kAlg = "linear-head-tree";
  if (budget.k >= pt.n_orig) return full_tree_solution(pt, kAlg);
  if (pt.size() <= 63 || budget.k < pt.depth)
    return finish_exact_route(t, budget.k, Objective::kHead, kAlg);

  auto [base_sol, W] = head_baseline(t, budget.k);
  if (W == 0) {
    SubtreeSolution sol;
    sol.algorithm = kAlg;
    sol.support = {0};
    fill_values(pt, sol);
    return sol;
  }

  double n_real = static_cast<double>(pt.size());
  double height = pt.depth;
  // big-weight closure: oversized nodes are forced into the solution; with a baseline
  // that contains the maximum weight it cannot fire, but honor the rule
  std::vector<Index> forced;
  for (Index id = 0; id < pt.n_orig; ++id)
    if (pt.weights[static_cast<std::size_t>(id)] >= 3.0 * height * W) forced.push_back(id);
  std::vector<char> forced_in(static_cast<std::size_t>(pt.size()), 0);
  Index k_eff = budget.k;
  if (!forced.empty()) {
    for (Index id : forced)
      for (Index cur = id;; cur = (cur - 1) / pt.arity) {
        forced_in[static_cast<std::size_t>(cur)] = 1;
        if (cur == 0) break;
      }
    Index closure = static_cast<Index>(std::count(forced_in.begin(), forced_in.end(), char{1}));
    k_eff = budget.k - closure;
    if (k_eff < 1) {
      SubtreeSolution sol;
      sol.algorithm = kAlg;
      for (Index id = 0; id < pt.size(); ++id)
        if (forced_in[static_cast<std::size_t>(id)]) sol.support.push_back(id);
      if (static_cast<Index>(sol.support.size()) > budget.k)
        sol.support.resize(static_cast<std::size_t>(budget.k));
      strip_padding(sol, pt.n_orig);
      fill_values(pt, sol);
      return sol;
    }
  }

  LevelSchedule sched = head_schedule(pt.depth, n_real, budget.epsilon);
  double eps_d = 0.05 * budget.epsilon;
  double eps_lut = 0.05 * budget.epsilon;
  double eps_loc = 0.10 * budget.epsilon;

  DiscretizationContext ctx;
  ctx.kind = DiscretizationContext::Kind::kHead;
  ctx.baseline = W;
  ctx.epsilon = eps_d;
  ctx.k = k_eff;
  ctx.n = pt.size();
  ctx.height = height;

  std::vector<double> disc(static_cast<std::size_t>(pt.size()));
  std::vector<double> wb(static_cast<std::size_t>(pt.size()));
  for (Index i = 0; i < pt.size(); ++i) {
    double x = forced_in[static_cast<std::size_t>(i)] ? 0.0
                                                      : pt.weights[static_cast<std::size_t>(i)];
    disc[static_cast<std::size_t>(i)] = ctx.map(x);
    wb[static_cast<std::size_t>(i)] = bucket_down(disc[static_cast<std::size_t>(i)], eps_lut);
  }

  double l2n = std::log2(std::max(2.0, n_real));
  double ll = std::log2(std::max(2.0, l2n));
  Index s_eta = pt.level_subtree_size(sched.eta);
  Index cap = std::min<Index>(s_eta, k_eff);
  Index c1 = std::clamp<Index>(std::max<Index>(static_cast<Index>(std::ceil(2.0 * ll)),
                                               sched.eta),
                               1, cap + 1);

  auto table = std::make_shared<LookupTable>(Objective::kHead);
  HeadPipelineCtx pc{&pt, sched, k_eff, c1, table.get(), &disc, &wb, eps_loc};

  UpperStore store;
  store.pt = &pt;
  store.boundary_first = pt.level_first_id(sched.eta);
  store.stages.resize(static_cast<std::size_t>(store.boundary_first));
  Index m_eta = pt.level_node_count(sched.eta);
  store.boundary.resize(static_cast<std::size_t>(m_eta));
  std::vector<std::vector<std::int32_t>> boundary_src(static_cast<std::size_t>(m_eta));

#pragma omp parallel for schedule(dynamic, 4) if (parallel_enabled() && m_eta > 16)
  for (Index j = 0; j < m_eta; ++j) {
    Index f = store.boundary_first + j;
    auto arrays1 = case1_arrays(pc, f, nullptr);
    const DenseArray& a1 = arrays1[f];
    DenseArray combined(static_cast<std::size_t>(cap) + 1, 0.0);
    std::vector<std::int32_t> src(static_cast<std::size_t>(cap) + 1, 0);
    for (Index l = 0; l <= cap && l < c1; ++l) {
      combined[static_cast<std::size_t>(l)] =
          a1[static_cast<std::size_t>(std::min<Index>(l, static_cast<Index>(a1.size()) - 1))];
      src[static_cast<std::size_t>(l)] = static_cast<std::int32_t>(l);
    }
    if (cap >= c1) {
      HeadBandResult band = run_head_band(pc, f);
      const RepSeq& fin = band.stages[f].back();
      DenseArray hc = head_completion(fin, s_eta);
      for (Index l = c1; l <= cap; ++l) {
        combined[static_cast<std::size_t>(l)] =
            band.sigma * hc[static_cast<std::size_t>(std::min<Index>(l, s_eta))];
        src[static_cast<std::size_t>(l)] = static_cast<std::int32_t>(l);
      }
    }
    for (std::size_t l = 1; l < combined.size(); ++l)
      if (combined[l] < combined[l - 1]) {
        combined[l] = combined[l - 1];
        src[l] = src[l - 1];
      }
    RepSeq seq = thin_array_head(combined, sched.eps_at(sched.eta));
    for (SeqEntry& e : seq.entries) e.left = src[static_cast<std::size_t>(e.left)];
    store.boundary[static_cast<std::size_t>(j)] = std::move(seq);
    boundary_src[static_cast<std::size_t>(j)] = std::move(src);
  }

  run_upper_levels(pt, sched.eta, store, [&](Index id, int level) {
    Stages stages;
    double alpha_cur = sched.eps_at(level - 1);
    RepSeq acc = node_seq(store, pt.child(id, 0));
    for (int ch = 1; ch < pt.arity; ++ch) {
      const RepSeq& rhs = node_seq(store, pt.child(id, ch));
      acc = fast_rs_maxplus(alpha_cur, sched.eps_at(level), acc, rhs, acc.max_index(),
                            rhs.max_index());
      alpha_cur = sched.eps_at(level);
      stages.push_back(acc);
    }
    RepSeq fin = head_node_seq(stages.back(), disc[static_cast<std::size_t>(id)],
                               sched.eps_at(level));
    truncate_head_window(fin, std::min<Index>(k_eff, pt.level_subtree_size(level)));
    stages.back() = std::move(fin);
    return stages;
  });

  DescendCtx dctx;
  dctx.pt = &pt;
  dctx.stages_of = [&](Index id) -> const Stages* {
    return id < store.boundary_first ? &store.stages[static_cast<std::size_t>(id)] : nullptr;
  };
  dctx.table_ref = [](Index) -> const LookupTable::Entry* { return nullptr; };
  dctx.boundary_level = sched.eta;
  dctx.boundary_seq_of = [&](Index id) -> const RepSeq* {
    return &store.boundary[static_cast<std::size_t>(id - store.boundary_first)];
  };
  dctx.boundary = [&](Index f, const SeqEntry& e, std::vector<Index>& out) {
    if (e.tag == EntryTag::kSentinel) return;
    require(e.tag == EntryTag::kDense, "unexpected boundary entry");
    Index l = e.left;
    if (l < c1) {
      std::unordered_map<Index, const LookupTable::Entry*> refs;
      auto arrays1 = case1_arrays(pc, f, &refs);
      walk_case1(pc, arrays1, refs, f, l, out);
      return;
    }
    HeadBandResult band = run_head_band(pc, f);
    const RepSeq& fin = band.stages[f].back();
    // entry covering l in the head completion
    std::size_t pos = 0;
    for (std::size_t q = 0; q < fin.entries.size(); ++q)
      if (fin.entries[q].index <= l) pos = q;
    DescendCtx inner;
    inner.pt = &pt;
    inner.stages_of = [&](Index id) -> const Stages* {
      auto it = band.stages.find(id);
      return it == band.stages.end() ? nullptr : &it->second;
    };
    inner.table_ref = [&](Index id) -> const LookupTable::Entry* {
      auto it = band.table_refs.find(id);
      return it == band.table_refs.end() ? nullptr : it->second;
    };
    descend(inner, f, static_cast<int>(band.stages[f].size()) - 1, fin.entries[pos], out);
  };

  const RepSeq& root = sched.eta == pt.depth ? store.boundary[0] : store.stages[0].back();
  std::size_t pick = 0;
  for (std::size_t q = 0; q < root.entries.size(); ++q)
    if (root.entries[q].index <= k_eff) pick = q;

  SubtreeSolution sol;
  sol.algorithm = kAlg;
  const SeqEntry& chosen = root.entries[pick];
  if (chosen.tag != EntryTag::kSentinel) {
    if (sched.eta == pt.depth)
      dctx.boundary(0, chosen, sol.support);
    else
      descend(dctx, 0, static_cast<int>(store.stages[0].size()) - 1, chosen, sol.support);
  }
  for (Index id = 0; id < pt.size(); ++id)
    if (forced_in[static_cast<std::size_t>(id)]) sol.support.push_back(id);
  if (sol.support.empty()) sol.support.push_back(0);
  std::sort(sol.support.begin(), sol.support.end());
  sol.support.erase(std::unique(sol.support.begin(), sol.support.end()), sol.support.end());
  strip_padding(sol, pt.n_orig);
  fill_values(pt, sol);
  return sol;
}

// ---------------------------------------------------------------------------
// Traced reconstruction (the FindTree surface used by tests).

std::vector<Index> detail::find_tree(const detail::TailTrace& trace, Index L) {
  DescendCtx dctx;
  dctx.pt = &trace.pt;
  dctx.xi_level = trace.schedule.xi;
  dctx.stages_of = [&](Index id) -> const Stages* {
    const auto& st = trace.node_stages[static_cast<std::size_t>(id)];
    return st.empty() ? nullptr : &st;
  };
  dctx.table_ref = [&](Index id) -> const LookupTable::Entry* {
    auto it = trace.table_refs.find(id);
    return it == trace.table_refs.end() ? nullptr : it->second;
  };
  const Stages& root_stages = trace.node_stages[0];
  const RepSeq& root = root_stages.back();
  std::size_t pick = 0;
  while (pick < root.entries.size() && root.entries[pick].index < L) ++pick;
  std::vector<Index> out;
  if (pick == root.entries.size()) return out;
  descend(dctx, 0, static_cast<int>(root_stages.size()) - 1, root.entries[pick], out);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ssp::tree

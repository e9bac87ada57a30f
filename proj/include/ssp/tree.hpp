#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssp/rs.hpp"

namespace ssp::tree {

// Weighted complete b-ary tree in heap layout (level order, children of node
// j are b*j+1 .. b*j+b). Weights are the raw signal magnitudes; projections
// operate on |x|^p internally and report head/tail in the p-powered domain.
struct TreeSignal {
  std::vector<double> weights;
  int arity = 2;
  double norm_p = 1.0;

  Index size() const { return static_cast<Index>(weights.size()); }
};

struct ProjectionBudget {
  Index k = 1;
  double epsilon = 0.1;
  double delta = 0.5;  // pruned path applies when k <= n^(1-delta)
};

enum class Objective { kHead, kTail };

struct SubtreeSolution {
  std::vector<Index> support;  // node ids, sorted ascending; contains the root
  double head_value = 0;       // sum of |x|^p over the support
  double tail_value = 0;       // total - head, exact in the powered domain
  std::string algorithm;
  bool fell_back_to_exact = false;  // tiny instance or k below the tree height
  bool fell_back_to_fast = false;   // linear tail route refused (k too large)
};

// Internal padded view: weights extended with zeros to a perfect b-ary tree.
struct PerfectTree {
  std::vector<double> weights;  // |x|^p, padded
  Index n_orig = 0;
  int arity = 2;
  int depth = 1;  // number of levels; leaves are level 1, root is level `depth`

  Index size() const { return static_cast<Index>(weights.size()); }
  Index child(Index id, int c) const { return static_cast<Index>(arity) * id + 1 + c; }
  bool is_leaf(Index id) const { return child(id, 0) >= size(); }
  // subtree size of any node at the given level
  Index level_subtree_size(int level) const;
  // ids of the first node at each depth
  Index level_first_id(int level) const;
  Index level_node_count(int level) const;
  int level_of(Index id) const;
};

PerfectTree pad_to_perfect(const TreeSignal& t);
// nodes of the subtree rooted at `root`, in local level order (BFS)
std::vector<Index> subtree_ids(const PerfectTree& t, Index root);

// |x|^p weight map; p = 1 is the identity.
TreeSignal lp_transform(const TreeSignal& t, double p);

// Exact model projection via the O(nk) truncated-convolution DP. Serves as
// the oracle for every approximate algorithm.
SubtreeSolution exact_tree_projection(const TreeSignal& t, Index k, Objective obj);

// log n-approximate tail baseline (largest subtree sums, BFS tie break).
// Returns the solution and its tail value W.
std::pair<SubtreeSolution, double> tail_baseline(const TreeSignal& t, Index k);
// 1/(3 log n)-style head baseline (top floor(k/H) weights closed to the root).
// Returns the solution and its head value W.
std::pair<SubtreeSolution, double> head_baseline(const TreeSignal& t, Index k);

struct DiscretizationContext {
  enum class Kind { kTail, kHead, kHeadLocal };
  Kind kind = Kind::kTail;
  double baseline = 0;  // W (tail/head) or x_max (head-local)
  double epsilon = 0.1;
  Index k = 1;
  Index n = 1;       // padded node count
  double height = 1; // tree height in levels, the "log n" of the weight maps
  // tail only: value assigned to weights above W; defaults to ceil(n*H/eps)+n
  std::optional<double> sentinel;

  double tail_sentinel() const;
  double map(double x) const;    // one weight through the discretization
  double scale() const;          // multiply a discretized value back
};

TreeSignal discretize(const TreeSignal& t, const DiscretizationContext& ctx);

// Level schedule shared by the three approximate algorithms. eps_prime and
// eps_at are stage-budgeted so the composed factor provably stays within the
// user epsilon; the geometric decay above eta is what makes the upper
// levels cheap.
struct LevelSchedule {
  int xi = 1;
  int eta = 1;
  double eps_prime = 0;            // band parameter between xi and eta
  double eps_schedule_base = 0;    // eps_at(eta)
  double eps_at(int level) const;  // eps_schedule_base * 3^{-(level-eta)/4}
  double band_factor(int level_from_xi) const;  // (1+eps')^(level-xi+1)
};

LevelSchedule tail_schedule(int depth, double n_real, double epsilon, bool linear_variant);
LevelSchedule head_schedule(int depth, double n_real, double epsilon);

// Memoized exact DP arrays for small subtrees, keyed by the canonical tuple
// of discretized weights. One entry also stores, per array index, the support
// mask used for reconstruction. Thread safe.
class LookupTable {
 public:
  struct Entry {
    DenseArray array;                 // tail: value by discarded count;
                                      // head: value by kept count
    std::vector<std::uint64_t> mask;  // kept nodes, bit r = local rank r
  };

  explicit LookupTable(Objective obj) : objective_(obj) {}
  // weights in local level order; subtree must have at most 64 nodes
  const Entry& lookup(const std::vector<double>& weights, int arity);
  std::size_t size() const { return table_.size(); }

 private:
  Objective objective_;
  std::map<std::vector<double>, Entry> table_;
  std::mutex mutex_;
};

// Left fold of pairwise RS convolutions over b children, the b-ary extension
// hook. Cardinalities are the children's head-completion domains (max side).
RepSeq bary_convolve(const std::vector<RepSeq>& children, double alpha, double beta,
                     Objective obj, const std::vector<Index>& cardinalities);

// The three approximation algorithms.
SubtreeSolution fast_tail_tree(const TreeSignal& t, const ProjectionBudget& budget);
SubtreeSolution linear_tail_tree(const TreeSignal& t, const ProjectionBudget& budget);
SubtreeSolution linear_head_tree(const TreeSignal& t, const ProjectionBudget& budget);

namespace detail {

// White-box trace used by tests: working weights, retained sequences per
// node, and the completion bound factor per level.
struct TailTrace {
  PerfectTree pt;
  std::vector<double> work;                      // bucketed weights the run used
  std::vector<std::vector<RepSeq>> node_stages;  // by node id; back() = node seq
  std::vector<double> level_factor;              // by level, completion bound factor
  std::unordered_map<Index, const LookupTable::Entry*> table_refs;
  std::shared_ptr<LookupTable> table;
  LevelSchedule schedule;
  Index window_k = 0;
  Index selected_index = 0;
  double selected_value = 0;
};

SubtreeSolution fast_tail_tree_impl(const TreeSignal& t, const ProjectionBudget& budget,
                                    TailTrace* trace);

// Backtracking over traced sequences: picks the first root entry with index
// at least L and rebuilds the support from the stored pointers.
std::vector<Index> find_tree(const TailTrace& trace, Index L);

}  // namespace detail

}  // namespace ssp::tree

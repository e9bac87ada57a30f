#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ssp {

using Index = std::int64_t;
using Value = double;

// Provenance of a sequence entry, used by subtree reconstruction.
enum class EntryTag : std::uint8_t {
  kNone = 0,   // no reconstruction info (raw sequences, tests)
  kPair,       // convolution pair: (left, right) are entry positions in the inputs
  kBase,       // keep this node, nothing below (leaf entries)
  kSentinel,   // whole subtree discarded (tail) / nothing kept (head)
  kDense,      // refers into a dense per-node array; left holds the array index
};

struct SeqEntry {
  Index index = 0;
  Value value = 0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  EntryTag tag = EntryTag::kNone;

  SeqEntry() = default;
  SeqEntry(Index i, Value v) : index(i), value(v) {}
  SeqEntry(Index i, Value v, std::int32_t l, std::int32_t r, EntryTag t)
      : index(i), value(v), left(l), right(r), tag(t) {}
};

// An alpha-representative sequence: entries with strictly increasing indices
// whose values satisfy value[v+1] >= (1+alpha)*value[v] >= 0.
struct RepSeq {
  double alpha = 0;
  std::vector<SeqEntry> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
  const SeqEntry& front() const { return entries.front(); }
  const SeqEntry& back() const { return entries.back(); }
  Index max_index() const { return entries.back().index; }
  Value max_value() const { return entries.back().value; }
};

using DenseArray = std::vector<Value>;

// The RS gap predicate. All thinning code and all tests use this exact
// expression so the invariant is decidable without tolerances.
inline bool rs_gap_ok(Value lo, Value hi, double beta) { return lo * (1.0 + beta) <= hi; }

// True if `seq` is a valid beta-RS (indices strictly increasing, gap holds).
bool is_valid_rs(const RepSeq& seq, double beta);

// Dense staircase reconstructions (tail rounds up, head rounds down).
DenseArray completion(const RepSeq& seq);
DenseArray head_completion(const RepSeq& seq, Index cardinality);

// Exact tropical convolutions, naive quadratic loop.
DenseArray exact_minplus(const DenseArray& a, const DenseArray& b);
DenseArray exact_maxplus(const DenseArray& a, const DenseArray& b);
// Split-recording variants: splits[t] = i achieving the optimum at t.
DenseArray exact_minplus_splits(const DenseArray& a, const DenseArray& b,
                                std::vector<std::int32_t>* splits);
DenseArray exact_maxplus_splits(const DenseArray& a, const DenseArray& b,
                                std::vector<std::int32_t>* splits);

// Thin a non-decreasing dense array into a beta-RS. Entries are tagged kDense
// and carry the source array index in `left`. Tail thinning preserves
// s[t] <= completion[t] <= (1+beta) s[t]; head thinning preserves
// (1-beta) s[t] <= head_completion[t] <= s[t].
RepSeq thin_array_tail(const DenseArray& a, double beta);
RepSeq thin_array_head(const DenseArray& a, double beta);

// Re-thin an existing sequence to a coarser beta-RS. Surviving entries keep
// their provenance.
RepSeq rethin_tail(const RepSeq& seq, double beta);
RepSeq rethin_head(const RepSeq& seq, double beta);

// Simple (alpha,beta)-RS (min,+)-convolution: all pairwise sums, per-index
// minima, backward thinning. O(m^2 log m).
RepSeq rs_minplus(double alpha, double beta, const RepSeq& a, const RepSeq& b);
// Max-side counterpart over head-completions (pair sums plus one-sided
// contributions, prefix maxima, forward thinning).
RepSeq rs_maxplus(double alpha, double beta, const RepSeq& a, const RepSeq& b);

// Fast (alpha,beta)-RS (min,+)-convolution. Dispatches between the hash-table
// descent and the dense sequential variant on min{log_{1+beta} U, M}.
// Requires 0 < beta <= alpha <= 1 and every value 0 or >= 1.
RepSeq fast_rs_minplus(double alpha, double beta, const RepSeq& a, const RepSeq& b);
RepSeq fast_rs_minplus_hash(double alpha, double beta, const RepSeq& a, const RepSeq& b);
RepSeq fast_rs_minplus_dense(double alpha, double beta, const RepSeq& a, const RepSeq& b);

// Fast (alpha,beta)-RS (max,+)-convolution over head-completions of
// cardinality m1 and m2. Same preconditions as the min side.
RepSeq fast_rs_maxplus(double alpha, double beta, const RepSeq& a, const RepSeq& b,
                       Index m1, Index m2);
RepSeq fast_rs_maxplus_hash(double alpha, double beta, const RepSeq& a, const RepSeq& b,
                            Index m1, Index m2);
RepSeq fast_rs_maxplus_dense(double alpha, double beta, const RepSeq& a, const RepSeq& b,
                             Index m1, Index m2);

// Drop entries outside the index window, keeping completions intact inside it.
// Tail: entries below `lo` can never be selected and are removed outright.
// Head: keeps the last entry at or below `hi` as the floor of the staircase.
void truncate_tail_window(RepSeq& seq, Index lo);
void truncate_head_window(RepSeq& seq, Index hi);

}  // namespace ssp

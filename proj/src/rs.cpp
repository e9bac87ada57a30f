#include "ssp/rs.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdlib>

namespace ssp {

namespace {

constexpr Value kInf = std::numeric_limits<Value>::infinity();

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_fast_preconditions(double alpha, double beta, const RepSeq& a, const RepSeq& b) {
  require(beta > 0 && beta <= alpha && alpha <= 1.0, "fast RS convolution needs 0 < beta <= alpha <= 1");
  require(!a.empty() && !b.empty(), "RS convolution inputs must be nonempty");
  for (const RepSeq* s : {&a, &b})
    for (const SeqEntry& e : s->entries)
      require(e.value == 0 || e.value >= 1.0, "RS values must be 0 or >= 1");
}

// Largest-position-with-value-<=bound over the entries of one sequence,
// backed by the (1+beta)^key step table. Lookups follow the two-key rule
// (ceil, then floor); short correction loops absorb log/pow rounding.
struct StepDownTable {
  const std::vector<SeqEntry>* entries;
  double log_base;
  int key_min = -1;
  int key_max = -1;
  std::vector<std::int32_t> pos;  // pos[key - key_min]

  StepDownTable(const std::vector<SeqEntry>& ents, double beta) : entries(&ents) {
    log_base = std::log1p(beta);
    Value top = ents.back().value;
    key_max = top >= 1.0 ? static_cast<int>(std::ceil(std::log(top) / log_base)) : -1;
    if (key_max < key_min) key_max = key_min;
    pos.assign(static_cast<std::size_t>(key_max - key_min + 1), -1);
    std::int32_t p = -1;
    const auto m = static_cast<std::int32_t>(ents.size());
    for (int key = key_min; key <= key_max; ++key) {
      Value threshold = std::exp(log_base * key);
      while (p + 1 < m && ents[static_cast<std::size_t>(p + 1)].value <= threshold) ++p;
      pos[static_cast<std::size_t>(key - key_min)] = p;
    }
  }

  std::int32_t largest_le(Value bound) const {
    const auto& ents = *entries;
    if (bound < 0) return -1;
    std::int32_t p;
    if (bound < 1.0) {
      p = pos.front();  // key -1 bucket: only zero values qualify
    } else {
      int key = static_cast<int>(std::ceil(std::log(bound) / log_base));
      key = std::clamp(key, key_min, key_max);
      p = pos[static_cast<std::size_t>(key - key_min)];
    }
    while (p >= 0 && ents[static_cast<std::size_t>(p)].value > bound) --p;
    const auto m = static_cast<std::int32_t>(ents.size());
    while (p + 1 < m && ents[static_cast<std::size_t>(p + 1)].value <= bound) ++p;
    return p;
  }
};

// Binary-search fallback used when building the value hash would dominate
// (log_{1+beta} U larger than the index range). Same query contracts as the
// step tables.
struct BinSearchDown {
  const std::vector<SeqEntry>* entries;
  BinSearchDown(const std::vector<SeqEntry>& ents, double) : entries(&ents) {}
  std::int32_t largest_le(Value bound) const {
    const auto& es = *entries;
    auto it = std::partition_point(es.begin(), es.end(),
                                   [&](const SeqEntry& e) { return e.value <= bound; });
    return static_cast<std::int32_t>(it - es.begin()) - 1;
  }
};

struct BinSearchUp {
  const std::vector<SeqEntry>* entries;
  BinSearchUp(const std::vector<SeqEntry>& ents, double) : entries(&ents) {}
  std::int32_t smallest_ge(Value bound) const {
    const auto& es = *entries;
    auto it = std::partition_point(es.begin(), es.end(),
                                   [&](const SeqEntry& e) { return e.value < bound; });
    return it == es.end() ? -1 : static_cast<std::int32_t>(it - es.begin());
  }
};

// Mirror table: smallest position with value >= bound.
struct StepUpTable {
  const std::vector<SeqEntry>* entries;
  double log_base;
  int key_min = -1;
  int key_max = -1;
  std::vector<std::int32_t> pos;

  StepUpTable(const std::vector<SeqEntry>& ents, double beta) : entries(&ents) {
    log_base = std::log1p(beta);
    Value top = ents.back().value;
    key_max = top >= 1.0 ? static_cast<int>(std::ceil(std::log(top) / log_base)) : -1;
    if (key_max < key_min) key_max = key_min;
    pos.assign(static_cast<std::size_t>(key_max - key_min + 1), -1);
    const auto m = static_cast<std::int32_t>(ents.size());
    std::int32_t p = m;
    for (int key = key_max; key >= key_min; --key) {
      Value threshold = std::exp(log_base * key);
      while (p - 1 >= 0 && ents[static_cast<std::size_t>(p - 1)].value >= threshold) --p;
      pos[static_cast<std::size_t>(key - key_min)] = (p < m) ? p : -1;
    }
  }

  std::int32_t smallest_ge(Value bound) const {
    const auto& ents = *entries;
    const auto m = static_cast<std::int32_t>(ents.size());
    if (bound <= 0) {
      return 0;  // every value is >= 0
    }
    std::int32_t p;
    if (bound <= 1.0) {
      p = pos.front();
    } else {
      int key = static_cast<int>(std::floor(std::log(bound) / log_base));
      key = std::clamp(key, key_min, key_max);
      p = pos[static_cast<std::size_t>(key - key_min)];
    }
    if (p < 0) p = m;
    while (p < m && ents[static_cast<std::size_t>(p)].value < bound) ++p;
    while (p - 1 >= 0 && ents[static_cast<std::size_t>(p - 1)].value >= bound) --p;
    return p < m ? p : -1;
  }
};

// Backward thinning shared by rs_minplus, the dense min variant and
// thin/rethin helpers. Input entries sorted by strictly increasing index
// (values need not be monotone; inversions are dropped). Keeps the top entry,
// then an entry only when value*(1+beta) <= previously kept value. Stops
// after keeping a zero.
std::vector<SeqEntry> thin_backward(const std::vector<SeqEntry>& sorted, double beta) {
  std::vector<SeqEntry> rev;
  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
    if (rev.empty() || rs_gap_ok(it->value, rev.back().value, beta)) {
      rev.push_back(*it);
      if (it->value <= 0) break;
    }
  }
  std::reverse(rev.begin(), rev.end());
  return rev;
}

// Forward thinning for the head side. Keeps a leading zero entry when the
// input starts with one, then grows values by at least (1+beta).
std::vector<SeqEntry> thin_forward(const std::vector<SeqEntry>& sorted, double beta) {
  std::vector<SeqEntry> out;
  for (const SeqEntry& e : sorted) {
    if (e.value <= 0) {
      if (out.empty()) out.push_back(e);
      continue;
    }
    if (out.empty() || out.back().value <= 0 || rs_gap_ok(out.back().value, e.value, beta))
      out.push_back(e);
  }
  if (out.empty() && !sorted.empty()) out.push_back(sorted.front());
  return out;
}

}  // namespace

bool is_valid_rs(const RepSeq& seq, double beta) {
  for (std::size_t v = 0; v + 1 < seq.entries.size(); ++v) {
    if (seq.entries[v + 1].index <= seq.entries[v].index) return false;
    if (seq.entries[v].value < 0) return false;
    if (!rs_gap_ok(seq.entries[v].value, seq.entries[v + 1].value, beta)) return false;
  }
  return !seq.empty() && seq.entries.back().value >= 0;
}

DenseArray completion(const RepSeq& seq) {
  require(!seq.empty(), "completion of an empty sequence");
  DenseArray out(static_cast<std::size_t>(seq.max_index()) + 1);
  std::size_t pos = 0;
  for (Index t = 0; t <= seq.max_index(); ++t) {
    while (seq.entries[pos].index < t) ++pos;
    out[static_cast<std::size_t>(t)] = seq.entries[pos].value;
  }
  return out;
}

DenseArray head_completion(const RepSeq& seq, Index cardinality) {
  require(!seq.empty(), "head completion of an empty sequence");
  require(cardinality >= seq.max_index(), "head completion cardinality below max index");
  DenseArray out(static_cast<std::size_t>(cardinality) + 1, 0.0);
  std::size_t pos = 0;
  for (Index t = seq.entries.front().index; t <= cardinality; ++t) {
    while (pos + 1 < seq.entries.size() && seq.entries[pos + 1].index <= t) ++pos;
    out[static_cast<std::size_t>(t)] = seq.entries[pos].value;
  }
  return out;
}

DenseArray exact_minplus_splits(const DenseArray& a, const DenseArray& b,
                                std::vector<std::int32_t>* splits) {
  require(!a.empty() && !b.empty(), "convolution of empty arrays");
  const auto na = a.size(), nb = b.size();
  DenseArray out(na + nb - 1, kInf);
  if (splits) splits->assign(na + nb - 1, 0);
  for (std::size_t t = 0; t < out.size(); ++t) {
    std::size_t ilo = t >= nb ? t - nb + 1 : 0;
    std::size_t ihi = std::min(t, na - 1);
    for (std::size_t i = ilo; i <= ihi; ++i) {
      Value v = a[i] + b[t - i];
      if (v < out[t]) {
        out[t] = v;
        if (splits) (*splits)[t] = static_cast<std::int32_t>(i);
      }
    }
  }
  return out;
}

DenseArray exact_maxplus_splits(const DenseArray& a, const DenseArray& b,
                                std::vector<std::int32_t>* splits) {
  require(!a.empty() && !b.empty(), "convolution of empty arrays");
  const auto na = a.size(), nb = b.size();
  DenseArray out(na + nb - 1, -kInf);
  if (splits) splits->assign(na + nb - 1, 0);
  for (std::size_t t = 0; t < out.size(); ++t) {
    std::size_t ilo = t >= nb ? t - nb + 1 : 0;
    std::size_t ihi = std::min(t, na - 1);
    for (std::size_t i = ilo; i <= ihi; ++i) {
      Value v = a[i] + b[t - i];
      if (v > out[t]) {
        out[t] = v;
        if (splits) (*splits)[t] = static_cast<std::int32_t>(i);
      }
    }
  }
  return out;
}

DenseArray exact_minplus(const DenseArray& a, const DenseArray& b) {
  return exact_minplus_splits(a, b, nullptr);
}

DenseArray exact_maxplus(const DenseArray& a, const DenseArray& b) {
  return exact_maxplus_splits(a, b, nullptr);
}

RepSeq thin_array_tail(const DenseArray& a, double beta) {
  require(!a.empty(), "thinning an empty array");
  std::vector<SeqEntry> all(a.size());
  for (std::size_t t = 0; t < a.size(); ++t)
    all[t] = SeqEntry(static_cast<Index>(t), a[t], static_cast<std::int32_t>(t), -1, EntryTag::kDense);
  RepSeq out;
  out.alpha = beta;
  out.entries = thin_backward(all, beta);
  return out;
}

RepSeq thin_array_head(const DenseArray& a, double beta) {
  require(!a.empty(), "thinning an empty array");
  std::vector<SeqEntry> all(a.size());
  for (std::size_t t = 0; t < a.size(); ++t)
    all[t] = SeqEntry(static_cast<Index>(t), a[t], static_cast<std::int32_t>(t), -1, EntryTag::kDense);
  RepSeq out;
  out.alpha = beta;
  out.entries = thin_forward(all, beta);
  return out;
}

RepSeq rethin_tail(const RepSeq& seq, double beta) {
  RepSeq out;
  out.alpha = beta;
  out.entries = thin_backward(seq.entries, beta);
  return out;
}

RepSeq rethin_head(const RepSeq& seq, double beta) {
  RepSeq out;
  out.alpha = beta;
  out.entries = thin_forward(seq.entries, beta);
  return out;
}

RepSeq rs_minplus(double alpha, double beta, const RepSeq& a, const RepSeq& b) {
  (void)alpha;
  require(!a.empty() && !b.empty(), "RS convolution inputs must be nonempty");
  std::vector<SeqEntry> sums;
  sums.reserve(a.size() * b.size());
  for (std::size_t v = 0; v < a.size(); ++v)
    for (std::size_t t = 0; t < b.size(); ++t)
      sums.emplace_back(a.entries[v].index + b.entries[t].index,
                        a.entries[v].value + b.entries[t].value,
                        static_cast<std::int32_t>(v), static_cast<std::int32_t>(t),
                        EntryTag::kPair);
  std::sort(sums.begin(), sums.end(), [](const SeqEntry& x, const SeqEntry& y) {
    return x.index < y.index || (x.index == y.index && x.value < y.value);
  });
  std::vector<SeqEntry> mins;  // per-index minimum
  for (const SeqEntry& e : sums)
    if (mins.empty() || mins.back().index != e.index) mins.push_back(e);
  RepSeq out;
  out.alpha = beta;
  out.entries = thin_backward(mins, beta);
  return out;
}

template <class DownTable>
RepSeq minplus_descent(double alpha, double beta, const RepSeq& a, const RepSeq& b) {
  const auto& ea = a.entries;
  const auto& eb = b.entries;
  const Index tau = static_cast<Index>(std::ceil(1.0 / alpha));

  DownTable hash_a(ea, beta);
  DownTable hash_b(eb, beta);

  std::vector<SeqEntry> rev;
  rev.emplace_back(ea.back().index + eb.back().index, ea.back().value + eb.back().value,
                   static_cast<std::int32_t>(ea.size() - 1),
                   static_cast<std::int32_t>(eb.size() - 1), EntryTag::kPair);
  Value theta = rev.back().value / (1.0 + beta);
  const Value min_sum = ea.front().value + eb.front().value;
  const Value top = rev.back().value;
  long guard = 4 + 2 * static_cast<long>(std::ceil(std::log(2.0 * top + 2.0) / std::log1p(beta)));

  while (theta > min_sum && guard-- > 0) {
    Index prev_index = rev.back().index;
    Index best_l = -1;
    Value best_v = kInf;
    std::int32_t bp_a = -1, bp_b = -1;
    auto consider = [&](std::int32_t pa, std::int32_t pb) {
      if (pa < 0 || pb < 0) return;
      Index l = ea[static_cast<std::size_t>(pa)].index + eb[static_cast<std::size_t>(pb)].index;
      Value v = ea[static_cast<std::size_t>(pa)].value + eb[static_cast<std::size_t>(pb)].value;
      if (l >= prev_index) return;
      if (l > best_l || (l == best_l && v < best_v)) {
        best_l = l;
        best_v = v;
        bp_a = pa;
        bp_b = pb;
      }
    };

    // Both windows start at Delta = 0. The published listing starts the first
    // loop at Delta = 1 and pairs j_t with the first entry of A only, which
    // misses the pair (largest a <= theta - b[j_t], j_t) that its own
    // correctness argument relies on; that variant demonstrably violates the
    // (1+beta) sandwich.
    std::int32_t jt = hash_b.largest_le(theta - ea.front().value);
    consider(0, jt);
    for (Index d = 0; d <= std::min<Index>(jt, tau); ++d) {
      std::int32_t jd = jt - static_cast<std::int32_t>(d);
      Value slack = theta - eb[static_cast<std::size_t>(jd)].value;
      consider(hash_a.largest_le(slack), jd);
    }
    std::int32_t iv = hash_a.largest_le(theta - eb.front().value);
    for (Index d = 0; d <= std::min<Index>(iv, tau); ++d) {
      std::int32_t id = iv - static_cast<std::int32_t>(d);
      Value slack = theta - ea[static_cast<std::size_t>(id)].value;
      consider(id, hash_b.largest_le(slack));
    }

    if (best_l < 0) break;
    rev.emplace_back(best_l, best_v, bp_a, bp_b, EntryTag::kPair);
    if (best_v <= 0) break;
    theta = best_v / (1.0 + beta);
  }

  std::reverse(rev.begin(), rev.end());
  RepSeq out;
  out.alpha = beta;
  out.entries = std::move(rev);
  return out;
}

RepSeq rs_maxplus(double alpha, double beta, const RepSeq& a, const RepSeq& b) {
  (void)alpha;
  require(!a.empty() && !b.empty(), "RS convolution inputs must be nonempty");
  std::vector<SeqEntry> sums;
  sums.reserve(a.size() * b.size() + a.size() + b.size());
  for (std::size_t v = 0; v < a.size(); ++v)
    for (std::size_t t = 0; t < b.size(); ++t)
      sums.emplace_back(a.entries[v].index + b.entries[t].index,
                        a.entries[v].value + b.entries[t].value,
                        static_cast<std::int32_t>(v), static_cast<std::int32_t>(t),
                        EntryTag::kPair);
  // one-sided contributions: below the other side's first entry the
  // head-completion is zero
  for (std::size_t v = 0; v < a.size(); ++v)
    sums.emplace_back(a.entries[v].index, a.entries[v].value, static_cast<std::int32_t>(v), -1,
                      EntryTag::kPair);
  for (std::size_t t = 0; t < b.size(); ++t)
    sums.emplace_back(b.entries[t].index, b.entries[t].value, -1, static_cast<std::int32_t>(t),
                      EntryTag::kPair);
  std::sort(sums.begin(), sums.end(), [](const SeqEntry& x, const SeqEntry& y) {
    return x.index < y.index || (x.index == y.index && x.value > y.value);
  });
  std::vector<SeqEntry> maxima;  // per-index maximum, then running prefix max
  for (const SeqEntry& e : sums)
    if (maxima.empty() || maxima.back().index != e.index) maxima.push_back(e);
  for (std::size_t i = 1; i < maxima.size(); ++i)
    if (maxima[i].value < maxima[i - 1].value) {
      Index idx = maxima[i].index;
      maxima[i] = maxima[i - 1];
      maxima[i].index = idx;
    }
  RepSeq out;
  out.alpha = beta;
  out.entries = thin_forward(maxima, beta);
  return out;
}

namespace {

// Pair enumeration bucketed by output index: the exact convolution values on
// the reachable indices, thinned afterwards. No sorting, no value hashing;
// cost m1*m2 + index range, independent of alpha and beta.
RepSeq minplus_bucket(double beta, const RepSeq& a, const RepSeq& b) {
  const auto& ea = a.entries;
  const auto& eb = b.entries;
  Index lo = ea.front().index + eb.front().index;
  Index hi = ea.back().index + eb.back().index;
  std::vector<SeqEntry> best(static_cast<std::size_t>(hi - lo) + 1);
  for (std::size_t i = 0; i < best.size(); ++i) {
    best[i].index = lo + static_cast<Index>(i);
    best[i].value = kInf;
  }
  for (std::size_t u = 0; u < ea.size(); ++u)
    for (std::size_t w = 0; w < eb.size(); ++w) {
      Index l = ea[u].index + eb[w].index;
      Value v = ea[u].value + eb[w].value;
      SeqEntry& s = best[static_cast<std::size_t>(l - lo)];
      if (v < s.value) {
        s.value = v;
        s.left = static_cast<std::int32_t>(u);
        s.right = static_cast<std::int32_t>(w);
        s.tag = EntryTag::kPair;
      }
    }
  RepSeq out;
  out.alpha = beta;
  out.entries = thin_backward(best, beta);
  return out;
}

RepSeq maxplus_bucket(double beta, const RepSeq& a, const RepSeq& b) {
  const auto& ea = a.entries;
  const auto& eb = b.entries;
  Index hi = ea.back().index + eb.back().index;
  std::vector<SeqEntry> best(static_cast<std::size_t>(hi) + 1);
  for (std::size_t i = 0; i < best.size(); ++i) {
    best[i].index = static_cast<Index>(i);
    best[i].value = -1;
  }
  auto put = [&](Index l, Value v, std::int32_t pu, std::int32_t pw) {
    SeqEntry& s = best[static_cast<std::size_t>(l)];
    if (v > s.value) {
      s.value = v;
      s.left = pu;
      s.right = pw;
      s.tag = EntryTag::kPair;
    }
  };
  for (std::size_t u = 0; u < ea.size(); ++u)
    for (std::size_t w = 0; w < eb.size(); ++w)
      put(ea[u].index + eb[w].index, ea[u].value + eb[w].value, static_cast<std::int32_t>(u),
          static_cast<std::int32_t>(w));
  for (std::size_t u = 0; u < ea.size(); ++u)
    put(ea[u].index, ea[u].value, static_cast<std::int32_t>(u), -1);
  for (std::size_t w = 0; w < eb.size(); ++w)
    put(eb[w].index, eb[w].value, -1, static_cast<std::int32_t>(w));
  for (std::size_t i = 0; i + 1 < best.size(); ++i)
    if (best[i + 1].value < best[i].value) {
      Index idx = best[i + 1].index;
      best[i + 1] = best[i];
      best[i + 1].index = idx;
    }
  for (SeqEntry& s : best)
    if (s.value < 0) {
      s.value = 0;
      s.tag = EntryTag::kPair;
      s.left = s.right = -1;
    }
  RepSeq out;
  out.alpha = beta;
  out.entries = thin_forward(best, beta);
  return out;
}

// Operation-count dispatch between the bucketed pairwise construction and the
// value-stepping descent/climb. Both meet the same output contract.
bool prefer_pairwise(double alpha, double beta, const RepSeq& a, const RepSeq& b) {
  double m1 = static_cast<double>(a.size()), m2 = static_cast<double>(b.size());
  double range = static_cast<double>(a.max_index() + b.max_index() + 1);
  double pairwise = m1 * m2 + range;
  double top = a.max_value() + b.max_value();
  double steps = top >= 1.0 ? std::log(top + 2.0) / std::log1p(beta) : 1.0;
  double probes = 2.0 * (std::ceil(1.0 / alpha) + 2.0) * std::max(1.0, std::log2(m1 + m2));
  return pairwise < steps * probes;
}

}  // namespace

RepSeq fast_rs_minplus_hash(double alpha, double beta, const RepSeq& a, const RepSeq& b) {
  check_fast_preconditions(alpha, beta, a, b);
  return minplus_descent<StepDownTable>(alpha, beta, a, b);
}

// Hash-free variant for the log_{1+beta} U > M regime: the same value-anchored
// descent with binary-search lookups over the (sorted) entry values. The
// index-anchored sequential scan would pay another (1+beta) before
// thinning, which would break the Def-7 sandwich, so it is not used.
RepSeq fast_rs_minplus_dense(double alpha, double beta, const RepSeq& a, const RepSeq& b) {
  check_fast_preconditions(alpha, beta, a, b);
  return minplus_descent<BinSearchDown>(alpha, beta, a, b);
}

RepSeq fast_rs_minplus(double alpha, double beta, const RepSeq& a, const RepSeq& b) {
  check_fast_preconditions(alpha, beta, a, b);
  if (prefer_pairwise(alpha, beta, a, b)) return minplus_bucket(beta, a, b);
  Value u = std::max(a.max_value(), b.max_value());
  Index m = std::max(a.max_index(), b.max_index());
  double keys = u >= 1.0 ? std::ceil(std::log(u) / std::log1p(beta)) : 0.0;
  return keys < static_cast<double>(m) ? fast_rs_minplus_hash(alpha, beta, a, b)
                                       : fast_rs_minplus_dense(alpha, beta, a, b);
}

template <class UpTable>
RepSeq maxplus_climb(double alpha, double beta, const RepSeq& a, const RepSeq& b) {
  const auto& ea = a.entries;
  const auto& eb = b.entries;
  const Index tau = static_cast<Index>(std::ceil(1.0 / alpha));
  const Value top = ea.back().value + eb.back().value;

  std::vector<SeqEntry> kept;
  auto first_positive = [](const std::vector<SeqEntry>& es) {
    for (std::size_t i = 0; i < es.size(); ++i)
      if (es[i].value > 0) return static_cast<std::int32_t>(i);
    return static_cast<std::int32_t>(-1);
  };
  std::int32_t fa = first_positive(ea), fb = first_positive(eb);
  if (fa < 0 && fb < 0) {
    RepSeq out;
    out.alpha = beta;
    out.entries = {SeqEntry(ea.front().index + eb.front().index, 0.0, 0, 0, EntryTag::kPair)};
    return out;
  }

  UpTable up_a(ea, beta);
  UpTable up_b(eb, beta);

  // Bottom of the staircase: the cheaper of the two first-positive singletons.
  SeqEntry bottom(0, -1);
  if (fa >= 0)
    bottom = SeqEntry(ea[static_cast<std::size_t>(fa)].index,
                      ea[static_cast<std::size_t>(fa)].value, fa, -1, EntryTag::kPair);
  if (fb >= 0) {
    const SeqEntry& cand = eb[static_cast<std::size_t>(fb)];
    if (bottom.value < 0 || cand.index < bottom.index ||
        (cand.index == bottom.index && cand.value > bottom.value))
      bottom = SeqEntry(cand.index, cand.value, -1, fb, EntryTag::kPair);
  }
  // Leading zero entry keeps the "keep nothing" option reconstructible.
  if (ea.front().value <= 0 && eb.front().value <= 0) {
    Index zero_idx = ea.front().index + eb.front().index;
    if (zero_idx < bottom.index) kept.emplace_back(zero_idx, 0.0, 0, 0, EntryTag::kPair);
  }
  kept.push_back(bottom);

  Value theta = kept.back().value * (1.0 + beta);
  long guard = 8 + 2 * static_cast<long>(std::ceil(std::log(2.0 * top + 2.0) / std::log1p(beta))) +
               static_cast<long>(ea.size() + eb.size());

  while (theta <= top && guard-- > 0) {
    Index best_l = std::numeric_limits<Index>::max();
    Value best_v = -1;
    std::int32_t bp_a = -1, bp_b = -1;
    auto consider = [&](std::int32_t pa, std::int32_t pb) {
      Index l = 0;
      Value v = 0;
      if (pa >= 0) {
        l += ea[static_cast<std::size_t>(pa)].index;
        v += ea[static_cast<std::size_t>(pa)].value;
      }
      if (pb >= 0) {
        l += eb[static_cast<std::size_t>(pb)].index;
        v += eb[static_cast<std::size_t>(pb)].value;
      }
      if (v < theta) return;
      if (l < best_l || (l == best_l && v > best_v)) {
        best_l = l;
        best_v = v;
        bp_a = pa;
        bp_b = pb;
      }
    };

    consider(up_a.smallest_ge(theta), -1);
    consider(-1, up_b.smallest_ge(theta));
    std::int32_t tb = up_b.smallest_ge(theta / 2.0);
    if (tb >= 0)
      for (Index d = 0; d <= tau; ++d) {
        std::int32_t p = tb + static_cast<std::int32_t>(d);
        if (p >= static_cast<std::int32_t>(eb.size())) break;
        Value need = theta - eb[static_cast<std::size_t>(p)].value;
        std::int32_t w = need <= 0 ? -1 : up_a.smallest_ge(need);
        if (need <= 0) continue;  // b alone suffices; singleton already considered
        if (w >= 0) consider(w, p);
      }
    std::int32_t ta = up_a.smallest_ge(theta / 2.0);
    if (ta >= 0)
      for (Index d = 0; d <= tau; ++d) {
        std::int32_t p = ta + static_cast<std::int32_t>(d);
        if (p >= static_cast<std::int32_t>(ea.size())) break;
        Value need = theta - ea[static_cast<std::size_t>(p)].value;
        std::int32_t w = need <= 0 ? -1 : up_b.smallest_ge(need);
        if (need <= 0) continue;
        if (w >= 0) consider(p, w);
      }

    if (best_v < theta) break;  // nothing reaches theta: staircase exhausted
    if (!kept.empty() && kept.back().index == best_l) {
      kept.back() = SeqEntry(best_l, best_v, bp_a, bp_b, EntryTag::kPair);
    } else if (!kept.empty() && kept.back().index > best_l) {
      break;  // defensive; cannot happen with exact window search
    } else {
      kept.emplace_back(best_l, best_v, bp_a, bp_b, EntryTag::kPair);
    }
    theta = best_v * (1.0 + beta);
  }

  RepSeq out;
  out.alpha = beta;
  out.entries = std::move(kept);
  return out;
}

RepSeq fast_rs_maxplus_hash(double alpha, double beta, const RepSeq& a, const RepSeq& b,
                            Index m1, Index m2) {
  check_fast_preconditions(alpha, beta, a, b);
  require(m1 >= a.max_index() && m2 >= b.max_index(), "head completion cardinality below max index");
  return maxplus_climb<StepUpTable>(alpha, beta, a, b);
}

RepSeq fast_rs_maxplus_dense(double alpha, double beta, const RepSeq& a, const RepSeq& b,
                             Index m1, Index m2) {
  check_fast_preconditions(alpha, beta, a, b);
  require(m1 >= a.max_index() && m2 >= b.max_index(), "head completion cardinality below max index");
  return maxplus_climb<BinSearchUp>(alpha, beta, a, b);
}

RepSeq fast_rs_maxplus(double alpha, double beta, const RepSeq& a, const RepSeq& b,
                       Index m1, Index m2) {
  check_fast_preconditions(alpha, beta, a, b);
  require(m1 >= a.max_index() && m2 >= b.max_index(), "head completion cardinality below max index");
  if (prefer_pairwise(alpha, beta, a, b)) return maxplus_bucket(beta, a, b);
  Value u = std::max(a.max_value(), b.max_value());
  Index m = std::max(a.max_index(), b.max_index());
  double keys = u >= 1.0 ? std::ceil(std::log(u) / std::log1p(beta)) : 0.0;
  return keys < static_cast<double>(m) ? fast_rs_maxplus_hash(alpha, beta, a, b, m1, m2)
                                       : fast_rs_maxplus_dense(alpha, beta, a, b, m1, m2);
}

void truncate_tail_window(RepSeq& seq, Index lo) {
  auto& es = seq.entries;
  std::size_t keep_from = 0;
  while (keep_from < es.size() && es[keep_from].index < lo) ++keep_from;
  if (keep_from > 0) es.erase(es.begin(), es.begin() + static_cast<std::ptrdiff_t>(keep_from));
}

void truncate_head_window(RepSeq& seq, Index hi) {
  auto& es = seq.entries;
  std::size_t keep_to = es.size();
  while (keep_to > 0 && es[keep_to - 1].index > hi) --keep_to;
  if (keep_to == 0) keep_to = 1;  // keep the floor entry
  if (keep_to < es.size()) es.resize(keep_to);
}

}  // namespace ssp

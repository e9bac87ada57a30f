// Serial vs OpenMP comparison of the level-parallel projection kernels.
// The algorithms are deterministic for a fixed input regardless of the
// thread count; this harness measures the speedup and checks the outputs
// match bit for bit.

#include <chrono>
#include <cstdio>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ssp/parallel.hpp"
#include "ssp/tree.hpp"

using namespace ssp;

namespace {

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

tree::TreeSignal random_tree(std::mt19937_64& rng, Index n) {
  tree::TreeSignal t;
  t.weights.resize(static_cast<std::size_t>(n));
  for (auto& w : t.weights) w = static_cast<double>(rng() % 101);
  return t;
}

struct Timing {
  double tail_s = 0, head_s = 0;
  tree::SubtreeSolution tail, head;
};

Timing run(const tree::TreeSignal& t, Index k, double eps, int threads) {
#ifdef _OPENMP
  omp_set_num_threads(threads);
#else
  (void)threads;
#endif
  Timing out;
  double t0 = now_s();
  out.tail = tree::fast_tail_tree(t, {k, eps, 0.5});
  out.tail_s = now_s() - t0;
  t0 = now_s();
  out.head = tree::linear_head_tree(t, {k, eps, 0.5});
  out.head_s = now_s() - t0;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  double eps = argc > 1 ? std::atof(argv[1]) : 0.2;
#ifdef _OPENMP
  int max_threads = omp_get_max_threads();
#else
  int max_threads = 1;
#endif
  std::printf("%10s %8s %12s %12s %12s %12s %8s %6s\n", "n", "k", "tail_1t", "tail_par",
              "head_1t", "head_par", "speedup", "match");
  std::mt19937_64 rng(1);
  for (int logn : {14, 16, 18, 20}) {
    Index n = (Index{1} << logn) - 1;
    Index k = Index{1} << (logn / 2);
    tree::TreeSignal t = random_tree(rng, n);
    Timing serial = run(t, k, eps, 1);
    Timing par = run(t, k, eps, max_threads);
    bool match = serial.tail.support == par.tail.support &&
                 serial.head.support == par.head.support &&
                 serial.tail.tail_value == par.tail.tail_value &&
                 serial.head.head_value == par.head.head_value;
    double speedup = (serial.tail_s + serial.head_s) / std::max(par.tail_s + par.head_s, 1e-9);
    std::printf("%10lld %8lld %12.3f %12.3f %12.3f %12.3f %7.2fx %6s\n",
                static_cast<long long>(n), static_cast<long long>(k), serial.tail_s, par.tail_s,
                serial.head_s, par.head_s, speedup, match ? "yes" : "NO");
    if (!match) return 1;
  }
  return 0;
}

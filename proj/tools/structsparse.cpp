// Command line front end: model projections, synthetic recovery runs, and
// benchmark suites. See README.md for examples.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssp/cemd.hpp"
#include "ssp/io.hpp"
#include "ssp/parallel.hpp"
#include "ssp/recovery.hpp"
#include "ssp/tree.hpp"

using nlohmann::json;
using namespace ssp;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void emit(const json& j, const std::string& output) {
  if (output.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(output);
  if (!out) throw io::ParseError("cannot open " + output + " for writing");
  out << j.dump(2) << "\n";
}

json tree_result(const tree::SubtreeSolution& sol, const std::string& objective, double elapsed) {
  json j;
  j["algorithm"] = sol.algorithm;
  j["objective"] = objective;
  j["support"] = sol.support;
  j["value"] = io::value_to_string(objective == "tail" ? sol.tail_value : sol.head_value);
  j["elapsed_ms"] = elapsed;
  j["metadata"] = {{"head_value", io::value_to_string(sol.head_value)},
                   {"tail_value", io::value_to_string(sol.tail_value)},
                   {"fell_back_to_exact", sol.fell_back_to_exact},
                   {"fell_back_to_fast", sol.fell_back_to_fast}};
  return j;
}

json cemd_result(const cemd::SupportResult& res, const std::string& objective, double total,
                 double elapsed) {
  json j;
  j["algorithm"] = res.algorithm;
  j["objective"] = objective;
  json support = json::array();
  for (int c = 0; c < static_cast<int>(res.columns.size()); ++c)
    for (int r : res.columns[static_cast<std::size_t>(c)]) support.push_back({r, c});
  j["support"] = support;
  j["value"] = io::value_to_string(objective == "tail" ? total - res.head : res.head);
  j["elapsed_ms"] = elapsed;
  j["metadata"] = {{"head_value", io::value_to_string(res.head)},
                   {"emd", res.emd},
                   {"flow_calls", res.flow_calls}};
  return j;
}

// ---------------------------------------------------------------------------
// project

struct ProjectArgs {
  std::string subcommand;
  std::string input, output;
  Index k = 1;
  double eps = 0.1;
  double delta = 0.05;
  double tree_delta = 0.5;
  int b = 2;
  double p = 1.0;
  Index budget = 0;
  std::string algorithm = "fast";
  std::uint64_t seed = 1;
};

int run_project(const ProjectArgs& a) {
  io::Signal sig = io::load_signal(a.input);
  json params = {{"k", a.k},        {"eps", a.eps},   {"delta", a.delta}, {"b", a.b},
                 {"p", a.p},        {"B", a.budget},  {"algorithm", a.algorithm},
                 {"input", a.input}};

  json out;
  double t0 = now_ms();
  if (a.subcommand == "tree-tail" || a.subcommand == "tree-head") {
    if (sig.kind != io::Signal::Kind::kTree) throw io::ParseError("input is not a tree signal");
    tree::TreeSignal t = sig.tree;
    if (a.b != 2 || t.arity == 2) t.arity = a.b;
    if (a.p != 1.0) t.norm_p = a.p;
    tree::ProjectionBudget budget{a.k, a.eps, a.tree_delta};
    tree::SubtreeSolution sol;
    if (a.subcommand == "tree-tail") {
      if (a.algorithm == "exact")
        sol = tree::exact_tree_projection(t, a.k, tree::Objective::kTail);
      else if (a.algorithm == "linear")
        sol = tree::linear_tail_tree(t, budget);
      else
        sol = tree::fast_tail_tree(t, budget);
      out = tree_result(sol, "tail", now_ms() - t0);
    } else {
      if (a.algorithm == "exact")
        sol = tree::exact_tree_projection(t, a.k, tree::Objective::kHead);
      else
        sol = tree::linear_head_tree(t, budget);
      out = tree_result(sol, "head", now_ms() - t0);
    }
  } else {
    if (sig.kind != io::Signal::Kind::kGrid) throw io::ParseError("input is not a grid signal");
    cemd::GridSignal g = sig.grid;
    if (a.p != 1.0) g.norm_p = a.p;
    cemd::CemdParams params_c{a.k, a.budget, a.delta};
    double total = 0;
    for (double v : g.values) total += std::pow(std::abs(v), g.norm_p);
    if (a.subcommand == "cemd-head") {
      cemd::SupportResult res = cemd::cemd_head_projection(g, params_c);
      out = cemd_result(res, "head", total, now_ms() - t0);
    } else {
      cemd::SupportResult res = cemd::cemd_tail_projection(g, params_c);
      out = cemd_result(res, "tail", total, now_ms() - t0);
    }
  }
  out["params"] = params;
  emit(out, a.output);
  return 0;
}

// ---------------------------------------------------------------------------
// recover

struct RecoverArgs {
  std::string model = "tree";
  Index n = 255;
  int h = 8, w = 8;
  Index k = 16;
  Index budget = 8;
  double m_factor = 6.0;
  double noise = 0.0;
  int iters = 50;
  std::uint64_t seed = 1;
  double eps = 0.1;
  std::string algorithm = "fast";
  std::string output;
};

int run_recover(const RecoverArgs& a) {
  recovery::InstanceParams p;
  Index m;
  if (a.model == "tree") {
    p.model = recovery::Model::kTree;
    p.tree = {a.n, 2, a.k, a.eps, 0.5};
    m = static_cast<Index>(std::ceil(a.m_factor * static_cast<double>(a.k)));
  } else if (a.model == "cemd") {
    p.model = recovery::Model::kCemd;
    p.cemd = {a.h, a.w, a.k, a.budget, 0.05};
    double lg = std::log2(std::max(2.0, static_cast<double>(a.budget) / static_cast<double>(a.k)));
    m = static_cast<Index>(std::ceil(a.m_factor * static_cast<double>(a.k) * std::max(1.0, lg))) +
        a.k;
  } else {
    throw io::ParseError("unknown model " + a.model);
  }
  m = std::clamp<Index>(m, a.k + 1, p.dimension());

  double t0 = now_ms();
  auto [x, sys] = recovery::generate_instance(p, m, a.noise, a.seed);
  recovery::RecoveryConfig cfg;
  cfg.params = p;
  cfg.max_iters = a.iters;
  cfg.exact_oracles = a.algorithm == "exact";
  recovery::RecoveryResult res = recovery::am_iht(sys, cfg);

  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - res.estimate[i]) * (x[i] - res.estimate[i]);
    den += x[i] * x[i];
  }
  double rel = std::sqrt(num / std::max(den, 1e-300));

  json out;
  out["algorithm"] = "am-iht";
  out["model"] = a.model;
  out["relative_error"] = rel;
  out["residual"] = res.residual;
  out["iterations"] = res.iterations;
  out["in_model_every_iteration"] = res.in_model_every_iteration;
  out["m"] = m;
  out["elapsed_ms"] = now_ms() - t0;
  out["params"] = {{"n", p.dimension()}, {"k", a.k},       {"B", a.budget},
                   {"m_factor", a.m_factor}, {"noise", a.noise}, {"iters", a.iters},
                   {"seed", a.seed},     {"eps", a.eps}};
  emit(out, a.output);
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string suite = "tree";
  std::vector<Index> sizes;
  int seeds = 3;
  double eps = 0.2;
  std::string output;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

RepSeq random_rs_for_bench(std::mt19937_64& rng, Index imax) {
  RepSeq s;
  s.alpha = 0.5;
  Index idx = 0;
  double v = 0;
  std::uniform_int_distribution<Index> gap(1, std::max<Index>(1, imax / 64));
  while (idx <= imax) {
    s.entries.emplace_back(idx, v);
    idx += gap(rng);
    v = std::max(1.0, v) * 1.5 * (1.0 + 0.2 * static_cast<double>(rng() % 4));
    if (v > 1e12) break;
  }
  return s;
}

int run_bench(const BenchArgs& a) {
  json report;
  report["suite"] = a.suite;
  json rows = json::array();
  std::printf("suite=%s threads=%d\n", a.suite.c_str(), thread_limit());

  if (a.suite == "conv") {
    std::printf("%10s %14s %14s %10s\n", "m", "exact_ms", "fast_ms", "ratio_ok");
    for (Index m : a.sizes) {
      std::vector<double> te, tf;
      bool ratio_ok = true;
      for (int seed = 0; seed < a.seeds; ++seed) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed) * 77 + 1);
        RepSeq A = random_rs_for_bench(rng, m);
        RepSeq B = random_rs_for_bench(rng, m);
        double beta = 0.25;
        DenseArray ca = completion(A), cb = completion(B);
        double t0 = now_ms();
        DenseArray exact = exact_minplus(ca, cb);
        te.push_back(now_ms() - t0);
        t0 = now_ms();
        RepSeq fast = fast_rs_minplus(0.5, beta, A, B);
        tf.push_back(now_ms() - t0);
        if (m <= 1 << 14) {
          DenseArray approx = completion(fast);
          for (std::size_t t = 0; t < exact.size(); ++t)
            if (!(exact[t] <= approx[t] && approx[t] <= (1 + beta) * exact[t] + 1e-9))
              ratio_ok = false;
        }
      }
      std::printf("%10lld %14.2f %14.2f %10s\n", static_cast<long long>(m), median(te), median(tf),
                  ratio_ok ? "yes" : "NO");
      rows.push_back({{"m", m}, {"exact_ms", median(te)}, {"fast_ms", median(tf)},
                      {"ratio_ok", ratio_ok}});
    }
  } else if (a.suite == "tree") {
    std::printf("%10s %8s %12s %12s %12s %12s %10s\n", "n", "k", "tail_ms", "head_ms",
                "tail_ratio", "head_ratio", "oracle");
    for (Index n : a.sizes) {
      Index k = std::max<Index>(4, static_cast<Index>(std::sqrt(static_cast<double>(n))));
      std::vector<double> tt, th;
      double worst_tail = 0, worst_head = 1;
      bool oracled = n <= (1 << 16);
      for (int seed = 0; seed < a.seeds; ++seed) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed) * 131 + 7);
        tree::TreeSignal t;
        t.weights.resize(static_cast<std::size_t>(n));
        for (auto& w : t.weights) w = static_cast<double>(rng() % 101);
        double t0 = now_ms();
        tree::SubtreeSolution tail = tree::fast_tail_tree(t, {k, a.eps, 0.5});
        tt.push_back(now_ms() - t0);
        t0 = now_ms();
        tree::SubtreeSolution head = tree::linear_head_tree(t, {k, a.eps, 0.5});
        th.push_back(now_ms() - t0);
        if (oracled) {
          tree::SubtreeSolution et = tree::exact_tree_projection(t, k, tree::Objective::kTail);
          tree::SubtreeSolution eh = tree::exact_tree_projection(t, k, tree::Objective::kHead);
          if (et.tail_value > 0) worst_tail = std::max(worst_tail, tail.tail_value / et.tail_value);
          if (eh.head_value > 0) worst_head = std::min(worst_head, head.head_value / eh.head_value);
        }
      }
      if (oracled)
        std::printf("%10lld %8lld %12.2f %12.2f %12.4f %12.4f %10s\n", static_cast<long long>(n),
                    static_cast<long long>(k), median(tt), median(th), worst_tail, worst_head,
                    "yes");
      else
        std::printf("%10lld %8lld %12.2f %12.2f %12s %12s %10s\n", static_cast<long long>(n),
                    static_cast<long long>(k), median(tt), median(th), "-", "-", "-");
      json row = {{"n", n}, {"k", k}, {"tail_ms", median(tt)}, {"head_ms", median(th)},
                  {"oracle_checked", oracled}};
      if (oracled) {
        row["tail_ratio"] = worst_tail;
        row["head_ratio"] = worst_head;
      }
      rows.push_back(row);
    }
  } else if (a.suite == "cemd") {
    std::printf("%8s %8s %12s %12s\n", "h", "w", "head_ms", "flow_calls");
    for (Index n : a.sizes) {
      int side = std::max(2, static_cast<int>(std::sqrt(static_cast<double>(n))));
      std::vector<double> th;
      int calls = 0;
      for (int seed = 0; seed < a.seeds; ++seed) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed) * 57 + 3);
        cemd::GridSignal g{side, side, {}, 1.0};
        g.values.resize(static_cast<std::size_t>(side) * side);
        for (auto& v : g.values) v = static_cast<double>(rng() % 100);
        Index s = std::max<Index>(1, side / 4);
        double t0 = now_ms();
        cemd::SupportResult res =
            cemd::cemd_head_projection(g, {s * side, static_cast<Index>(side), 0.05});
        th.push_back(now_ms() - t0);
        calls = res.flow_calls;
      }
      std::printf("%8d %8d %12.2f %12d\n", side, side, median(th), calls);
      rows.push_back({{"h", side}, {"w", side}, {"head_ms", median(th)}, {"flow_calls", calls}});
    }
  } else {
    throw io::ParseError("unknown suite " + a.suite);
  }
  report["rows"] = rows;
  if (!a.output.empty())
    emit(report, a.output);
  else
    std::cout << report.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structured sparsity projections and recovery"};
  app.require_subcommand(1);

  ProjectArgs pa;
  CLI::App* project = app.add_subcommand("project", "model projection on a signal file");
  project->require_subcommand(1);
  for (const char* name : {"tree-tail", "tree-head", "cemd-head", "cemd-tail"}) {
    CLI::App* sub = project->add_subcommand(name);
    sub->add_option("--input", pa.input, "signal file (.json or .csv)")->required();
    sub->add_option("--k", pa.k, "sparsity")->required();
    sub->add_option("--eps", pa.eps, "approximation parameter");
    sub->add_option("--delta", pa.delta, "lambda search tolerance (cemd)");
    sub->add_option("--tree-delta", pa.tree_delta, "pruned-path exponent (tree)");
    sub->add_option("--b", pa.b, "tree arity");
    sub->add_option("--p", pa.p, "norm exponent");
    sub->add_option("--B", pa.budget, "EMD budget (cemd)");
    sub->add_option("--algorithm", pa.algorithm, "exact | fast | linear");
    sub->add_option("--output", pa.output, "result file (default stdout)");
    sub->add_option("--seed", pa.seed, "unused for projections");
    sub->callback([&pa, name] { pa.subcommand = name; });
  }

  RecoverArgs ra;
  CLI::App* recover = app.add_subcommand("recover", "synthetic AM-IHT recovery run");
  recover->set_help_flag("--help", "print help");  // frees -h / --h for grid rows
  recover->add_option("--model", ra.model, "tree | cemd")->required();
  recover->add_option("--n", ra.n, "tree dimension");
  recover->add_option("--h", ra.h, "grid rows");
  recover->add_option("--w", ra.w, "grid columns");
  recover->add_option("--k", ra.k, "sparsity")->required();
  recover->add_option("--B", ra.budget, "EMD budget");
  recover->add_option("--m-factor", ra.m_factor, "measurement factor");
  recover->add_option("--noise", ra.noise, "noise l2 norm");
  recover->add_option("--iters", ra.iters, "iteration cap");
  recover->add_option("--seed", ra.seed, "instance seed");
  recover->add_option("--eps", ra.eps, "oracle approximation parameter");
  recover->add_option("--algorithm", ra.algorithm, "exact | fast oracles");
  recover->add_option("--output", ra.output, "result file (default stdout)");

  BenchArgs ba;
  CLI::App* bench = app.add_subcommand("bench", "benchmark suites");
  bench->add_option("--suite", ba.suite, "conv | tree | cemd")->required();
  bench->add_option("--sizes", ba.sizes, "problem sizes")->required()->delimiter(',');
  bench->add_option("--seeds", ba.seeds, "instances per size");
  bench->add_option("--eps", ba.eps, "approximation parameter");
  bench->add_option("--output", ba.output, "JSON report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (project->parsed()) return run_project(pa);
    if (recover->parsed()) return run_recover(ra);
    if (bench->parsed()) return run_bench(ba);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "ssp/cemd.hpp"
#include "ssp/tree.hpp"

namespace ssp::recovery {

enum class Model { kTree, kCemd };

struct TreeModelParams {
  Index n = 15;
  int arity = 2;
  Index k = 4;
  double epsilon = 0.1;
  double delta = 0.5;
};

struct CemdModelParams {
  int h = 4;
  int w = 4;
  Index k = 4;  // w divides k
  Index budget = 0;
  double delta = 0.05;
};

struct InstanceParams {
  Model model = Model::kTree;
  TreeModelParams tree;
  CemdModelParams cemd;
  Index dimension() const {
    return model == Model::kTree ? tree.n : static_cast<Index>(cemd.h) * cemd.w;
  }
};

struct MeasurementSystem {
  Index m = 0, n = 0;
  std::vector<double> A;  // row major, m x n
  std::vector<double> y;
  std::vector<double> e;
};

struct RecoveryConfig {
  InstanceParams params;
  int max_iters = 50;
  double tol = 1e-9;           // relative residual improvement cutoff
  bool exact_oracles = false;  // tree model only
};

struct RecoveryResult {
  std::vector<double> estimate;
  int iterations = 0;
  double residual = 0;  // ||y - A x_hat||_2
  bool in_model_every_iteration = true;
  std::vector<double> residual_history;
};

// Random in-model signal with standard normal nonzeros.
std::vector<double> generate_signal(const InstanceParams& params, std::mt19937_64& rng);

// Complete synthetic instance: x, Gaussian A scaled by 1/sqrt(m), noise of the
// requested l2 norm, and y = A x + e.
std::pair<std::vector<double>, MeasurementSystem> generate_instance(const InstanceParams& params,
                                                                    Index m, double noise_norm,
                                                                    std::uint64_t seed);

RecoveryResult am_iht(const MeasurementSystem& sys, const RecoveryConfig& config);

// Model membership checks used by the harness and tests.
bool tree_support_valid(const std::vector<Index>& support, const TreeModelParams& p);
bool cemd_estimate_valid(const std::vector<double>& estimate, const CemdModelParams& p);

}  // namespace ssp::recovery

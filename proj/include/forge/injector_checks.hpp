// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "forge/ref_injector.hpp"

namespace forge::injector {

inline constexpr double kEmptyReferenceTol = 1e-12;
inline constexpr double kRowSumTol = 1e-12;
inline constexpr double kGradientRelTol = 1e-4;
inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kLowRankRelTol = 1e-6;
inline constexpr double kScaleTol = 1e-10;

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0;
  double tolerance = 0;
  std::string detail;
};

struct SeedReport {
  std::uint64_t seed = 0;
  std::vector<CheckResult> checks;

  bool passed() const;
};

/// softmax(q k^T / sqrt(d)) v with textbook loops; no reference tokens.
Tensor3 vanilla_attention(const Tensor3& q, const Tensor3& k,
                          const Tensor3& v);

/// Central-difference gradient of f at x, perturbing each entry in place.
std::vector<double> central_difference(std::vector<double>& x,
                                       const std::function<double()>& f,
                                       double step);

/// ||a - b|| / max(||a||, ||b||); 0 when both are zero.
double relative_error(const std::vector<double>& a,
                      const std::vector<double>& b);

/// Singular values of the (B*L) x d token matrix, descending.
std::vector<double> singular_values(const Tensor3& t);

/// Random instance with finite values in [-1, 1] and weights in
/// [-0.5, 0.5] (non-zero up-projections so every gradient is exercised).
struct RandomInstance {
  AttentionInputs inputs;
  InjectorWeights weights;
};
RandomInstance random_instance(std::uint64_t seed, std::size_t batch,
                               std::size_t lq, std::size_t lk,
                               std::size_t l_ref, std::size_t dim,
                               std::size_t rank);

/// Runs every property on instances derived from `seed`.
SeedReport run_injector_checks(std::uint64_t seed,
                               double tolerance_scale = 1.0);

}  // namespace forge::injector

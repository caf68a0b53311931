// SPDX-License-Identifier: Apache-2.0
//
// Reference (float64, single-head) implementation of low-rank reference
// injection into attention:
//
//   K_ref = h_ref W_down_k^T W_up_k^T      V_ref = h_ref W_down_v^T W_up_v^T
//   K~ = [K ; K_ref]    V~ = [V ; V_ref]    (concatenated along the sequence)
//   out = softmax(Q K~^T / sqrt(d)) V~
//
// plus the analytic backward pass of <upstream, out> with respect to every
// input and weight. Sizes are desk-scale; nothing here is optimized.
#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace forge::injector {

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// batch x length x dim tensor, row-major. length may be 0.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t batch, std::size_t length, std::size_t dim,
          double fill = 0.0)
      : batch_(batch), length_(length), dim_(dim),
        data_(batch * length * dim, fill) {}

  std::size_t batch() const { return batch_; }
  std::size_t length() const { return length_; }
  std::size_t dim() const { return dim_; }

  double& operator()(std::size_t b, std::size_t t, std::size_t f) {
    return data_[(b * length_ + t) * dim_ + f];
  }
  double operator()(std::size_t b, std::size_t t, std::size_t f) const {
    return data_[(b * length_ + t) * dim_ + f];
  }
  const double* row(std::size_t b, std::size_t t) const {
    return data_.data() + (b * length_ + t) * dim_;
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t batch_ = 0;
  std::size_t length_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct InjectorWeights {
  Matrix w_down_k;  // r x d
  Matrix w_up_k;    // d x r
  Matrix w_down_v;  // r x d
  Matrix w_up_v;    // d x r

  std::size_t rank() const { return w_down_k.rows(); }
  std::size_t dim() const { return w_down_k.cols(); }

  /// Shapes agree, 0 < r <= d, all values finite.
  void validate() const;

  /// LoRA convention: down-projections uniform(-0.1, 0.1), up-projections 0.
  static InjectorWeights lora_init(std::size_t dim, std::size_t rank,
                                   std::uint64_t seed);
};

struct AttentionInputs {
  Tensor3 q;      // B x Lq x d
  Tensor3 k;      // B x Lk x d
  Tensor3 v;      // B x Lk x d
  Tensor3 h_ref;  // B x L_ref x d, L_ref may be 0
};

/// out_t = w_up (w_down h_t) for every token.
Tensor3 lora_project(const Tensor3& h, const Matrix& w_down,
                     const Matrix& w_up);

/// Concatenates along the sequence axis; `a` tokens come first.
Tensor3 concat_sequence(const Tensor3& a, const Tensor3& b);
/// Inverse of concat_sequence: tokens [0, at) and [at, length).
std::pair<Tensor3, Tensor3> split_sequence(const Tensor3& t, std::size_t at);

std::pair<Tensor3, Tensor3> concat_kv(const Tensor3& k, const Tensor3& v,
                                      const Tensor3& k_ref,
                                      const Tensor3& v_ref);

struct AttentionTrace {
  Tensor3 output;         // B x Lq x d
  Tensor3 probabilities;  // B x Lq x (Lk + L_ref)
  Tensor3 k_ref;          // B x L_ref x d
  Tensor3 v_ref;
};

/// Softmax uses row-max subtraction. The reductions over key positions run
/// in an order fixed by the (logit, value row) contents rather than by
/// position, so permuting key/value pairs leaves the result bit-identical.
AttentionTrace attention_forward_traced(const AttentionInputs& inputs,
                                        const InjectorWeights& weights);

Tensor3 attention_forward(const AttentionInputs& inputs,
                          const InjectorWeights& weights);

struct InjectorGradients {
  Tensor3 q, k, v, h_ref;
  Matrix w_down_k, w_up_k, w_down_v, w_up_v;
};

/// Gradients of <upstream, attention_forward(inputs, weights)>.
InjectorGradients attention_backward(const AttentionInputs& inputs,
                                     const InjectorWeights& weights,
                                     const Tensor3& upstream);

}  // namespace forge::injector

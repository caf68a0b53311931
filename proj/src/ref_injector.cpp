// SPDX-License-Identifier: Apache-2.0
#include "forge/ref_injector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "forge/error.hpp"
#include "forge/rng.hpp"

namespace forge::injector {

namespace {

std::string shape(const Tensor3& t) {
  return std::to_string(t.batch()) + "x" + std::to_string(t.length()) + "x" +
         std::to_string(t.dim());
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] void shape_error(const std::string& what) {
  throw Error(ErrorKind::kDimensionMismatch, what);
}

void require_finite(const std::vector<double>& values, const char* name) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::kNonFinite,
                  std::string(name) + " contains non-finite values");
    }
  }
}

void validate_inputs(const AttentionInputs& in, const InjectorWeights& w) {
  w.validate();
  const std::size_t b = in.q.batch();
  const std::size_t d = in.q.dim();
  if (b == 0 || d == 0 || in.q.length() == 0) {
    shape_error("q must have positive extents, got " + shape(in.q));
  }
  if (in.k.batch() != b || in.v.batch() != b || in.h_ref.batch() != b) {
    shape_error("batch mismatch: q " + shape(in.q) + ", k " + shape(in.k) +
                ", v " + shape(in.v) + ", h_ref " + shape(in.h_ref));
  }
  if (in.k.dim() != d || in.v.dim() != d || in.h_ref.dim() != d) {
    shape_error("feature dim mismatch: q " + shape(in.q) + ", k " +
                shape(in.k) + ", v " + shape(in.v) + ", h_ref " +
                shape(in.h_ref));
  }
  if (in.k.length() != in.v.length()) {
    shape_error("k and v lengths differ: " + shape(in.k) + " vs " +
                shape(in.v));
  }
  if (in.k.length() + in.h_ref.length() == 0) {
    shape_error("attention needs at least one key");
  }
  if (w.dim() != d) {
    shape_error("weights are for dim " + std::to_string(w.dim()) +
                ", inputs have dim " + std::to_string(d));
  }
  require_finite(in.q.data(), "q");
  require_finite(in.k.data(), "k");
  require_finite(in.v.data(), "v");
  require_finite(in.h_ref.data(), "h_ref");
}

// Z = h W_down^T, the rank-r latent of every token (B x L x r).
Tensor3 down_project(const Tensor3& h, const Matrix& w_down) {
  Tensor3 z(h.batch(), h.length(), w_down.rows());
  for (std::size_t b = 0; b < h.batch(); ++b) {
    for (std::size_t t = 0; t < h.length(); ++t) {
      const double* x = h.row(b, t);
      for (std::size_t r = 0; r < w_down.rows(); ++r) {
        double acc = 0;
        for (std::size_t f = 0; f < h.dim(); ++f) acc += w_down(r, f) * x[f];
        z(b, t, r) = acc;
      }
    }
  }
  return z;
}

Tensor3 up_project(const Tensor3& z, const Matrix& w_up) {
  Tensor3 out(z.batch(), z.length(), w_up.rows());
  for (std::size_t b = 0; b < z.batch(); ++b) {
    for (std::size_t t = 0; t < z.length(); ++t) {
      const double* x = z.row(b, t);
      for (std::size_t f = 0; f < w_up.rows(); ++f) {
        double acc = 0;
        for (std::size_t r = 0; r < w_up.cols(); ++r) acc += w_up(f, r) * x[r];
        out(b, t, f) = acc;
      }
    }
  }
  return out;
}

// Backpropagates d(out)/d(K_ref or V_ref) through one low-rank branch.
void lora_backward(const Tensor3& h, const Matrix& w_down, const Matrix& w_up,
                   const Tensor3& d_proj, Matrix& d_w_down, Matrix& d_w_up,
                   Tensor3& d_h) {
  const std::size_t rank = w_down.rows();
  const std::size_t dim = w_down.cols();
  const Tensor3 z = down_project(h, w_down);
  std::vector<double> dz(rank);
  for (std::size_t b = 0; b < h.batch(); ++b) {
    for (std::size_t t = 0; t < h.length(); ++t) {
      const double* g = d_proj.row(b, t);
      for (std::size_t f = 0; f < dim; ++f) {
        for (std::size_t r = 0; r < rank; ++r) d_w_up(f, r) += g[f] * z(b, t, r);
      }
      for (std::size_t r = 0; r < rank; ++r) {
        double acc = 0;
        for (std::size_t f = 0; f < dim; ++f) acc += g[f] * w_up(f, r);
        dz[r] = acc;
      }
      for (std::size_t r = 0; r < rank; ++r) {
        for (std::size_t f = 0; f < dim; ++f) {
          d_w_down(r, f) += dz[r] * h(b, t, f);
          d_h(b, t, f) += dz[r] * w_down(r, f);
        }
      }
    }
  }
}

}  // namespace

void InjectorWeights::validate() const {
  const std::size_t r = w_down_k.rows();
  const std::size_t d = w_down_k.cols();
  if (r == 0 || d == 0 || r > d) {
    throw Error(ErrorKind::kInvalidArgument,
                "LoRA rank must satisfy 0 < r <= d, got r=" +
                    std::to_string(r) + " d=" + std::to_string(d));
  }
  if (w_down_v.rows() != r || w_down_v.cols() != d || w_up_k.rows() != d ||
      w_up_k.cols() != r || w_up_v.rows() != d || w_up_v.cols() != r) {
    shape_error("inconsistent LoRA shapes: down_k " + shape(w_down_k) +
                ", up_k " + shape(w_up_k) + ", down_v " + shape(w_down_v) +
                ", up_v " + shape(w_up_v));
  }
  require_finite(w_down_k.data(), "w_down_k");
  require_finite(w_up_k.data(), "w_up_k");
  require_finite(w_down_v.data(), "w_down_v");
  require_finite(w_up_v.data(), "w_up_v");
}

InjectorWeights InjectorWeights::lora_init(std::size_t dim, std::size_t rank,
                                           std::uint64_t seed) {
  Rng rng(seed);
  InjectorWeights w{Matrix(rank, dim), Matrix(dim, rank), Matrix(rank, dim),
                    Matrix(dim, rank)};
  for (auto& x : w.w_down_k.data()) x = rng.uniform(-0.1, 0.1);
  for (auto& x : w.w_down_v.data()) x = rng.uniform(-0.1, 0.1);
  w.validate();
  return w;
}

Tensor3 lora_project(const Tensor3& h, const Matrix& w_down,
                     const Matrix& w_up) {
  if (w_down.cols() != h.dim() || w_up.cols() != w_down.rows() ||
      w_up.rows() != h.dim()) {
    shape_error("lora_project: h " + shape(h) + ", w_down " + shape(w_down) +
                ", w_up " + shape(w_up));
  }
  return up_project(down_project(h, w_down), w_up);
}

Tensor3 concat_sequence(const Tensor3& a, const Tensor3& b) {
  if (a.batch() != b.batch() || a.dim() != b.dim()) {
    shape_error("concat: " + shape(a) + " vs " + shape(b));
  }
  Tensor3 out(a.batch(), a.length() + b.length(), a.dim());
  for (std::size_t n = 0; n < a.batch(); ++n) {
    for (std::size_t t = 0; t < a.length(); ++t) {
      std::copy_n(a.row(n, t), a.dim(), &out(n, t, 0));
    }
    for (std::size_t t = 0; t < b.length(); ++t) {
      std::copy_n(b.row(n, t), b.dim(), &out(n, a.length() + t, 0));
    }
  }
  return out;
}

std::pair<Tensor3, Tensor3> split_sequence(const Tensor3& t, std::size_t at) {
  if (at > t.length()) {
    shape_error("split at " + std::to_string(at) + " beyond " + shape(t));
  }
  Tensor3 head(t.batch(), at, t.dim());
  Tensor3 tail(t.batch(), t.length() - at, t.dim());
  for (std::size_t n = 0; n < t.batch(); ++n) {
    for (std::size_t i = 0; i < t.length(); ++i) {
      double* dst = i < at ? &head(n, i, 0) : &tail(n, i - at, 0);
      std::copy_n(t.row(n, i), t.dim(), dst);
    }
  }
  return {std::move(head), std::move(tail)};
}

std::pair<Tensor3, Tensor3> concat_kv(const Tensor3& k, const Tensor3& v,
                                      const Tensor3& k_ref,
                                      const Tensor3& v_ref) {
  if (k.length() != v.length() || k_ref.length() != v_ref.length()) {
    shape_error("concat_kv: key/value lengths differ");
  }
  return {concat_sequence(k, k_ref), concat_sequence(v, v_ref)};
}

AttentionTrace attention_forward_traced(const AttentionInputs& in,
                                        const InjectorWeights& w) {
  validate_inputs(in, w);
  AttentionTrace trace;
  trace.k_ref = lora_project(in.h_ref, w.w_down_k, w.w_up_k);
  trace.v_ref = lora_project(in.h_ref, w.w_down_v, w.w_up_v);
  auto [k_tilde, v_tilde] = concat_kv(in.k, in.v, trace.k_ref, trace.v_ref);

  const std::size_t batch = in.q.batch();
  const std::size_t lq = in.q.length();
  const std::size_t lt = k_tilde.length();
  const std::size_t d = in.q.dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  trace.output = Tensor3(batch, lq, d);
  trace.probabilities = Tensor3(batch, lq, lt);
  std::vector<double> logits(lt);
  std::vector<double> weights(lt);
  std::vector<std::size_t> order(lt);

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < lq; ++i) {
      const double* q = in.q.row(b, i);
      for (std::size_t j = 0; j < lt; ++j) {
        const double* k = k_tilde.row(b, j);
        double dot = 0;
        for (std::size_t f = 0; f < d; ++f) dot += q[f] * k[f];
        logits[j] = dot * scale;
      }

      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (logits[x] != logits[y]) return logits[x] < logits[y];
        return std::lexicographical_compare(v_tilde.row(b, x),
                                            v_tilde.row(b, x) + d,
                                            v_tilde.row(b, y),
                                            v_tilde.row(b, y) + d);
      });

      const double max_logit = logits[order.back()];
      double denom = 0;
      for (std::size_t j : order) {
        weights[j] = std::exp(logits[j] - max_logit);
        denom += weights[j];
      }
      for (std::size_t j = 0; j < lt; ++j) {
        weights[j] /= denom;
        trace.probabilities(b, i, j) = weights[j];
      }
      for (std::size_t f = 0; f < d; ++f) {
        double acc = 0;
        for (std::size_t j : order) acc += weights[j] * v_tilde(b, j, f);
        trace.output(b, i, f) = acc;
      }
    }
  }
  return trace;
}

Tensor3 attention_forward(const AttentionInputs& inputs,
                          const InjectorWeights& weights) {
  return attention_forward_traced(inputs, weights).output;
}

InjectorGradients attention_backward(const AttentionInputs& in,
                                     const InjectorWeights& w,
                                     const Tensor3& upstream) {
  const AttentionTrace trace = attention_forward_traced(in, w);
  if (upstream.batch() != trace.output.batch() ||
      upstream.length() != trace.output.length() ||
      upstream.dim() != trace.output.dim()) {
    shape_error("upstream gradient " + shape(upstream) +
                " does not match output " + shape(trace.output));
  }
  require_finite(upstream.data(), "upstream");

  auto [k_tilde, v_tilde] = concat_kv(in.k, in.v, trace.k_ref, trace.v_ref);
  const std::size_t batch = in.q.batch();
  const std::size_t lq = in.q.length();
  const std::size_t lt = k_tilde.length();
  const std::size_t d = in.q.dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const Tensor3& p = trace.probabilities;

  InjectorGradients g;
  g.q = Tensor3(batch, lq, d);
  Tensor3 d_k_tilde(batch, lt, d);
  Tensor3 d_v_tilde(batch, lt, d);
  std::vector<double> d_p(lt);
  std::vector<double> d_s(lt);

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < lq; ++i) {
      const double* gi = upstream.row(b, i);
      double row_dot = 0;
      for (std::size_t j = 0; j < lt; ++j) {
        double acc = 0;
        for (std::size_t f = 0; f < d; ++f) acc += gi[f] * v_tilde(b, j, f);
        d_p[j] = acc;
        row_dot += p(b, i, j) * acc;
        for (std::size_t f = 0; f < d; ++f) {
          d_v_tilde(b, j, f) += p(b, i, j) * gi[f];
        }
      }
      // Softmax Jacobian: dS = P * (dP - <P, dP>).
      for (std::size_t j = 0; j < lt; ++j) {
        d_s[j] = p(b, i, j) * (d_p[j] - row_dot) * scale;
      }
      for (std::size_t j = 0; j < lt; ++j) {
        for (std::size_t f = 0; f < d; ++f) {
          g.q(b, i, f) += d_s[j] * k_tilde(b, j, f);
          d_k_tilde(b, j, f) += d_s[j] * in.q(b, i, f);
        }
      }
    }
  }

  const std::size_t lk = in.k.length();
  auto [d_k, d_k_ref] = split_sequence(d_k_tilde, lk);
  auto [d_v, d_v_ref] = split_sequence(d_v_tilde, lk);
  g.k = std::move(d_k);
  g.v = std::move(d_v);

  g.h_ref = Tensor3(batch, in.h_ref.length(), d);
  g.w_down_k = Matrix(w.rank(), d);
  g.w_up_k = Matrix(d, w.rank());
  g.w_down_v = Matrix(w.rank(), d);
  g.w_up_v = Matrix(d, w.rank());
  lora_backward(in.h_ref, w.w_down_k, w.w_up_k, d_k_ref, g.w_down_k, g.w_up_k,
                g.h_ref);
  lora_backward(in.h_ref, w.w_down_v, w.w_up_v, d_v_ref, g.w_down_v, g.w_up_v,
                g.h_ref);
  return g;
}

}  // namespace forge::injector

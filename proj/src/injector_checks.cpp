// SPDX-License-Identifier: Apache-2.0
#include "forge/injector_checks.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "forge/rng.hpp"

namespace forge::injector {

namespace {

void fill(std::vector<double>& values, Rng& rng, double lo, double hi) {
  for (auto& x : values) x = rng.uniform(lo, hi);
}

double max_abs_diff(const Tensor3& a, const Tensor3& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  }
  return m;
}

double inner(const Tensor3& a, const Tensor3& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    acc += a.data()[i] * b.data()[i];
  }
  return acc;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

CheckResult at_most(std::string name, double measured, double tol,
                    std::string detail = {}) {
  return {std::move(name), measured <= tol, measured, tol, std::move(detail)};
}

CheckResult below(std::string name, double measured, double tol,
                  std::string detail = {}) {
  return {std::move(name), measured < tol, measured, tol, std::move(detail)};
}

std::string dims_of(const RandomInstance& inst) {
  const auto& in = inst.inputs;
  return "B=" + std::to_string(in.q.batch()) +
         " Lq=" + std::to_string(in.q.length()) +
         " Lk=" + std::to_string(in.k.length()) +
         " Lref=" + std::to_string(in.h_ref.length()) +
         " d=" + std::to_string(in.q.dim()) +
         " r=" + std::to_string(inst.weights.rank());
}

}  // namespace

bool SeedReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.passed; });
}

Tensor3 vanilla_attention(const Tensor3& q, const Tensor3& k,
                          const Tensor3& v) {
  const std::size_t d = q.dim();
  Tensor3 out(q.batch(), q.length(), d);
  for (std::size_t b = 0; b < q.batch(); ++b) {
    for (std::size_t i = 0; i < q.length(); ++i) {
      std::vector<double> s(k.length());
      for (std::size_t j = 0; j < k.length(); ++j) {
        double dot = 0;
        for (std::size_t f = 0; f < d; ++f) dot += q(b, i, f) * k(b, j, f);
        s[j] = dot / std::sqrt(double(d));
      }
      const double m = *std::max_element(s.begin(), s.end());
      double z = 0;
      for (auto& x : s) {
        x = std::exp(x - m);
        z += x;
      }
      for (std::size_t j = 0; j < k.length(); ++j) {
        for (std::size_t f = 0; f < d; ++f) out(b, i, f) += s[j] / z * v(b, j, f);
      }
    }
  }
  return out;
}

std::vector<double> central_difference(std::vector<double>& x,
                                       const std::function<double()>& f,
                                       double step) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f();
    x[i] = saved - step;
    const double down = f();
    x[i] = saved;
    grad[i] = (up - down) / (2 * step);
  }
  return grad;
}

double relative_error(const std::vector<double>& a,
                      const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  if (denom == 0) return 0;
  return std::sqrt(diff) / denom;
}

std::vector<double> singular_values(const Tensor3& t) {
  const auto rows = static_cast<Eigen::Index>(t.batch() * t.length());
  const auto cols = static_cast<Eigen::Index>(t.dim());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      m(t.data().data(), rows, cols);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  return {s.data(), s.data() + s.size()};
}

RandomInstance random_instance(std::uint64_t seed, std::size_t batch,
                               std::size_t lq, std::size_t lk,
                               std::size_t l_ref, std::size_t dim,
                               std::size_t rank) {
  Rng rng(seed);
  RandomInstance inst{
      {Tensor3(batch, lq, dim), Tensor3(batch, lk, dim),
       Tensor3(batch, lk, dim), Tensor3(batch, l_ref, dim)},
      {Matrix(rank, dim), Matrix(dim, rank), Matrix(rank, dim),
       Matrix(dim, rank)}};
  fill(inst.inputs.q.data(), rng, -1, 1);
  fill(inst.inputs.k.data(), rng, -1, 1);
  fill(inst.inputs.v.data(), rng, -1, 1);
  fill(inst.inputs.h_ref.data(), rng, -1, 1);
  fill(inst.weights.w_down_k.data(), rng, -0.5, 0.5);
  fill(inst.weights.w_up_k.data(), rng, -0.5, 0.5);
  fill(inst.weights.w_down_v.data(), rng, -0.5, 0.5);
  fill(inst.weights.w_up_v.data(), rng, -0.5, 0.5);
  return inst;
}

SeedReport run_injector_checks(std::uint64_t seed, double tolerance_scale) {
  SeedReport report;
  report.seed = seed;
  Rng shapes(mix_seed(seed, 0));
  auto pick = [&](std::int64_t lo, std::int64_t hi) {
    return static_cast<std::size_t>(shapes.uniform_int(lo, hi));
  };

  auto tol = [&](double t) { return t * tolerance_scale; };

  const std::size_t dim = pick(2, 8);
  RandomInstance inst =
      random_instance(mix_seed(seed, 1), pick(1, 2), pick(1, 4), pick(1, 4),
                      pick(2, 5), dim, pick(1, dim - 1));
  const std::string dims = dims_of(inst);

  // Empty reference reduces to plain attention.
  {
    AttentionInputs empty = inst.inputs;
    empty.h_ref = Tensor3(empty.q.batch(), 0, dim);
    const double err =
        max_abs_diff(attention_forward(empty, inst.weights),
                     vanilla_attention(empty.q, empty.k, empty.v));
    report.checks.push_back(
        at_most("empty_reference_equivalence", err, tol(kEmptyReferenceTol), dims));
  }

  // Reference tokens permuted (same permutation in every batch item).
  {
    AttentionInputs permuted = inst.inputs;
    const std::size_t l_ref = permuted.h_ref.length();
    std::vector<std::size_t> perm(l_ref);
    for (std::size_t i = 0; i < l_ref; ++i) perm[i] = i;
    for (std::size_t i = l_ref; i > 1; --i) {
      std::swap(perm[i - 1], perm[pick(0, i - 1)]);
    }
    if (std::is_sorted(perm.begin(), perm.end())) std::swap(perm[0], perm[1]);
    for (std::size_t b = 0; b < permuted.h_ref.batch(); ++b) {
      for (std::size_t t = 0; t < l_ref; ++t) {
        for (std::size_t f = 0; f < dim; ++f) {
          permuted.h_ref(b, t, f) = inst.inputs.h_ref(b, perm[t], f);
        }
      }
    }
    const double err =
        max_abs_diff(attention_forward(inst.inputs, inst.weights),
                     attention_forward(permuted, inst.weights));
    report.checks.push_back(
        at_most("reference_permutation_invariance", err, 0.0, "exact"));
  }

  // Attention rows are distributions.
  {
    const auto trace = attention_forward_traced(inst.inputs, inst.weights);
    const auto& p = trace.probabilities;
    double worst = 0;
    for (std::size_t b = 0; b < p.batch(); ++b) {
      for (std::size_t i = 0; i < p.length(); ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < p.dim(); ++j) sum += p(b, i, j);
        worst = std::max(worst, std::abs(sum - 1.0));
      }
    }
    report.checks.push_back(at_most("softmax_row_sums", worst, tol(kRowSumTol)));
  }

  // Analytic gradients against central differences, one row per tensor.
  {
    RandomInstance work = inst;
    Rng grad_rng(mix_seed(seed, 2));
    Tensor3 upstream(work.inputs.q.batch(), work.inputs.q.length(), dim);
    fill(upstream.data(), grad_rng, -1, 1);
    const InjectorGradients analytic =
        attention_backward(work.inputs, work.weights, upstream);
    auto loss = [&] {
      return inner(upstream, attention_forward(work.inputs, work.weights));
    };
    struct Target {
      const char* name;
      std::vector<double>* values;
      const std::vector<double>* grad;
    };
    const Target targets[] = {
        {"grad_q", &work.inputs.q.data(), &analytic.q.data()},
        {"grad_k", &work.inputs.k.data(), &analytic.k.data()},
        {"grad_v", &work.inputs.v.data(), &analytic.v.data()},
        {"grad_h_ref", &work.inputs.h_ref.data(), &analytic.h_ref.data()},
        {"grad_w_down_k", &work.weights.w_down_k.data(),
         &analytic.w_down_k.data()},
        {"grad_w_up_k", &work.weights.w_up_k.data(), &analytic.w_up_k.data()},
        {"grad_w_down_v", &work.weights.w_down_v.data(),
         &analytic.w_down_v.data()},
        {"grad_w_up_v", &work.weights.w_up_v.data(), &analytic.w_up_v.data()},
    };
    for (const auto& t : targets) {
      const auto numeric =
          central_difference(*t.values, loss, kFiniteDifferenceStep);
      report.checks.push_back(below(t.name, relative_error(*t.grad, numeric),
                                    tol(kGradientRelTol), "h=1e-5"));
    }
  }

  // Projected reference keys/values have rank <= r.
  {
    const std::size_t d = pick(4, 8);
    const std::size_t r = pick(1, d - 1);
    const RandomInstance wide =
        random_instance(mix_seed(seed, 3), 2, 1, 1, d + 2, d, r);
    double worst = 0;
    for (const Matrix* pair : {&wide.weights.w_down_k, &wide.weights.w_down_v}) {
      const bool is_k = pair == &wide.weights.w_down_k;
      const Tensor3 proj = lora_project(
          wide.inputs.h_ref, *pair,
          is_k ? wide.weights.w_up_k : wide.weights.w_up_v);
      const auto s = singular_values(proj);
      for (std::size_t i = r; i < s.size(); ++i) {
        worst = std::max(worst, s[i] / s[0]);
      }
    }
    report.checks.push_back(below("low_rank_bound", worst, tol(kLowRankRelTol),
                                  "d=" + std::to_string(d) +
                                      " r=" + std::to_string(r)));
  }

  // h_ref * lambda with W_up / lambda leaves the output unchanged.
  {
    Rng scale_rng(mix_seed(seed, 4));
    const double lambda = scale_rng.uniform(0.25, 4.0);
    RandomInstance scaled = inst;
    for (auto& x : scaled.inputs.h_ref.data()) x *= lambda;
    for (auto& x : scaled.weights.w_up_k.data()) x /= lambda;
    for (auto& x : scaled.weights.w_up_v.data()) x /= lambda;
    const double err =
        max_abs_diff(attention_forward(inst.inputs, inst.weights),
                     attention_forward(scaled.inputs, scaled.weights));
    report.checks.push_back(
        at_most("scale_consistency", err, tol(kScaleTol), "lambda=" + sci(lambda)));
  }

  return report;
}

}  // namespace forge::injector

#pragma once

// Soft-margin kernel SVM trained by sequential minimal optimisation.
//
// The solver works on the dual
//     maximise   sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
//     subject to 0 <= a_i <= C,  sum_i a_i y_i = 0
// selecting the maximal violating pair at every step and stopping once the
// pair's KKT gap drops below `tol`. Every returned model therefore satisfies
// the margin conditions y_i f(x_i) >= 1 - tol (a_i = 0), |y_i f(x_i) - 1| <= tol
// (0 < a_i < C) and y_i f(x_i) <= 1 + tol (a_i = C).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lesion {

// Dense row-major matrix of doubles.
struct RowMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  RowMatrix() = default;
  RowMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  friend bool operator==(const RowMatrix&, const RowMatrix&) = default;
};

struct KernelSpec {
  enum class Kind : std::uint8_t { Linear = 0, Rbf = 1 };

  Kind kind = Kind::Rbf;
  double gamma = 1.0;  // RBF only; must be > 0

  static KernelSpec linear() { return {Kind::Linear, 0.0}; }
  static KernelSpec rbf(double gamma) { return {Kind::Rbf, gamma}; }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

// Throws ValidationError on a dimension mismatch or non-positive RBF gamma.
double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> z);

struct KernelSvmModel {
  RowMatrix support_vectors;
  std::vector<double> dual_coeffs;  // a_i * y_i for each stored vector
  double bias = 0.0;
  KernelSpec kernel;
  double C = 1.0;

  friend bool operator==(const KernelSvmModel&, const KernelSvmModel&) = default;
};

// f(x) = sum_i dual_coeffs_i K(sv_i, x) + bias.
double decision_value(const KernelSvmModel& model, std::span<const double> x);

struct SmoOptions {
  double C = 1.0;
  KernelSpec kernel;
  double tol = 1e-3;  // accepted range [1e-6, 1e-2]
  std::size_t max_iterations = 10'000'000;
  std::size_t cache_bytes = std::size_t{256} << 20;
};

struct SmoResult {
  KernelSvmModel model;
  std::vector<double> alpha;  // one per training row
  double dual_objective = 0.0;
  double final_gap = 0.0;  // maximal-violating-pair gap at exit
  std::size_t iterations = 0;
  std::size_t kernel_evaluations = 0;
};

// y entries must be -1 or +1 with both present. Throws ValidationError on bad
// input and ConvergenceError (carrying the remaining gap) when the iteration
// cap is reached. Deterministic for a fixed row order.
SmoResult smo_train(const RowMatrix& x, std::span<const int> y, const SmoOptions& options);

// Dual objective evaluated directly in O(n^2) kernel calls.
double dual_objective(const RowMatrix& x, std::span<const int> y, std::span<const double> alpha,
                      const KernelSpec& kernel);

// Largest violation of the margin conditions listed at the top of this file,
// using the model's own decision function on every training row.
double kkt_violation(const RowMatrix& x, std::span<const int> y, std::span<const double> alpha,
                     const KernelSvmModel& model);

}  // namespace lesion

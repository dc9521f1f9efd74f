#include "lesion/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <string>

#include "lesion/error.hpp"
#include "lesion/simd.hpp"

namespace lesion {

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> z) {
  if (x.size() != z.size()) {
    throw ValidationError("kernel arguments differ in length (" + std::to_string(x.size()) + " vs " +
                          std::to_string(z.size()) + ")");
  }
  if (spec.kind == KernelSpec::Kind::Linear) return simd::dot(x, z);
  if (!(spec.gamma > 0.0)) throw ValidationError("RBF gamma must be positive");
  return std::exp(-spec.gamma * simd::squared_distance(x, z));
}

double decision_value(const KernelSvmModel& model, std::span<const double> x) {
  if (model.support_vectors.rows > 0 && x.size() != model.support_vectors.cols) {
    throw ValidationError("decision_value: input has " + std::to_string(x.size()) + " features, model expects " +
                          std::to_string(model.support_vectors.cols));
  }
  double f = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.rows; ++i) {
    f += model.dual_coeffs[i] * kernel_eval(model.kernel, model.support_vectors.row(i), x);
  }
  return f;
}

namespace {

constexpr double kTau = 1e-12;

// LRU cache of kernel matrix rows K(x_i, .).
class KernelRowCache {
 public:
  KernelRowCache(const RowMatrix& x, const KernelSpec& kernel, std::size_t cache_bytes)
      : x_(x), kernel_(kernel), slots_(x.rows, lru_.end()) {
    const std::size_t row_bytes = std::max<std::size_t>(1, x.rows * sizeof(double));
    capacity_ = std::max<std::size_t>(2, cache_bytes / row_bytes);
  }

  const std::vector<double>& row(std::size_t i) {
    if (slots_[i] != lru_.end()) {
      lru_.splice(lru_.begin(), lru_, slots_[i]);
      return lru_.front().values;
    }
    if (lru_.size() >= capacity_) {
      slots_[lru_.back().index] = lru_.end();
      lru_.pop_back();
    }
    Entry e{i, std::vector<double>(x_.rows)};
    const auto xi = x_.row(i);
    for (std::size_t j = 0; j < x_.rows; ++j) e.values[j] = kernel_eval(kernel_, xi, x_.row(j));
    evaluations_ += x_.rows;
    lru_.push_front(std::move(e));
    slots_[i] = lru_.begin();
    return lru_.front().values;
  }

  std::size_t evaluations() const { return evaluations_; }
  void count(std::size_t n) { evaluations_ += n; }

 private:
  struct Entry {
    std::size_t index;
    std::vector<double> values;
  };

  const RowMatrix& x_;
  KernelSpec kernel_;
  std::list<Entry> lru_;
  std::vector<std::list<Entry>::iterator> slots_;
  std::size_t capacity_ = 2;
  std::size_t evaluations_ = 0;
};

void validate_inputs(const RowMatrix& x, std::span<const int> y, const SmoOptions& opt) {
  if (x.rows < 2) throw ValidationError("SVM training needs at least two rows");
  if (y.size() != x.rows) throw ValidationError("label count does not match row count");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) {
      pos = true;
    } else if (v == -1) {
      neg = true;
    } else {
      throw ValidationError("SVM labels must be -1 or +1");
    }
  }
  if (!pos || !neg) throw ValidationError("SVM training data contains a single class");
  if (!(opt.C > 0.0) || !std::isfinite(opt.C)) throw ValidationError("C must be positive and finite");
  if (!(opt.tol >= 1e-6 && opt.tol <= 1e-2)) throw ValidationError("tol must lie in [1e-6, 1e-2]");
  if (opt.kernel.kind == KernelSpec::Kind::Rbf && !(opt.kernel.gamma > 0.0 && std::isfinite(opt.kernel.gamma))) {
    throw ValidationError("RBF gamma must be positive and finite");
  }
  for (double v : x.data) {
    if (!std::isfinite(v)) throw ValidationError("SVM features contain non-finite values");
  }
}

}  // namespace

SmoResult smo_train(const RowMatrix& x, std::span<const int> y, const SmoOptions& opt) {
  validate_inputs(x, y, opt);
  const std::size_t n = x.rows;
  const double c = opt.C;

  KernelRowCache cache(x, opt.kernel, opt.cache_bytes);
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = kernel_eval(opt.kernel, x.row(i), x.row(i));
  cache.count(n);

  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);  // gradient of 1/2 a'Qa - sum a
  auto in_up = [&](std::size_t t) { return y[t] > 0 ? alpha[t] < c : alpha[t] > 0.0; };
  auto in_low = [&](std::size_t t) { return y[t] > 0 ? alpha[t] > 0.0 : alpha[t] < c; };

  std::size_t iter = 0;
  double gap = 0.0;
  while (true) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    gap = gmax - gmin;
    if (i == n || j == n || gap < opt.tol) break;
    if (iter >= opt.max_iterations) {
      throw ConvergenceError("SMO did not converge within " + std::to_string(opt.max_iterations) + " iterations",
                             gap);
    }
    ++iter;

    const std::vector<double>& ki = cache.row(i);
    const std::vector<double>& kj = cache.row(j);
    const double kij = ki[j];
    const double old_ai = alpha[i], old_aj = alpha[j];

    if (y[i] != y[j]) {
      double quad = diag[i] + diag[j] - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = diag[i] + diag[j] - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    // Q_tk = y_t y_k K_tk.
    const double di = (alpha[i] - old_ai) * y[i];
    const double dj = (alpha[j] - old_aj) * y[j];
    for (std::size_t t = 0; t < n; ++t) grad[t] += y[t] * (ki[t] * di + kj[t] * dj);
  }

  // Bias from the free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] < 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else {
      free_sum += yg;
      ++free_count;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : (ub + lb) / 2.0;

  SmoResult result;
  result.alpha = alpha;
  result.iterations = iter;
  result.final_gap = gap;
  result.kernel_evaluations = cache.evaluations();
  double obj = 0.0;
  for (std::size_t t = 0; t < n; ++t) obj += alpha[t] - 0.5 * alpha[t] * (grad[t] + 1.0);
  result.dual_objective = obj;

  KernelSvmModel& m = result.model;
  m.kernel = opt.kernel;
  m.C = c;
  m.bias = -rho;
  std::size_t sv = 0;
  for (double a : alpha) sv += a > 0.0 ? 1 : 0;
  m.support_vectors = RowMatrix(sv, x.cols);
  m.dual_coeffs.reserve(sv);
  std::size_t k = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] <= 0.0) continue;
    std::copy(x.row(t).begin(), x.row(t).end(), m.support_vectors.row(k).begin());
    m.dual_coeffs.push_back(alpha[t] * y[t]);
    ++k;
  }
  return result;
}

double dual_objective(const RowMatrix& x, std::span<const int> y, std::span<const double> alpha,
                      const KernelSpec& kernel) {
  double linear = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    linear += alpha[i];
    if (alpha[i] == 0.0) continue;
    for (std::size_t j = 0; j < x.rows; ++j) {
      if (alpha[j] == 0.0) continue;
      quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel_eval(kernel, x.row(i), x.row(j));
    }
  }
  return linear - 0.5 * quad;
}

double kkt_violation(const RowMatrix& x, std::span<const int> y, std::span<const double> alpha,
                     const KernelSvmModel& model) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double margin = y[i] * decision_value(model, x.row(i));
    double v = 0.0;
    if (alpha[i] <= 0.0) {
      v = std::max(0.0, 1.0 - margin);
    } else if (alpha[i] >= model.C) {
      v = std::max(0.0, margin - 1.0);
    } else {
      v = std::abs(margin - 1.0);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace lesion

#include "lesion/platt.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lesion/error.hpp"

namespace lesion {
namespace {

constexpr int kMaxIterations = 200;
constexpr double kGradTol = 1e-8;
constexpr double kMinStep = 1e-10;
constexpr double kRidge = 1e-12;
constexpr double kClip = 35.0;

// log(1 + exp(z)) without overflow.
double log1pexp(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// 1 / (1 + exp(z)) without overflow.
double sigmoid_neg(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

struct Targets {
  double pos, neg;
};

Targets smoothed_targets(std::span<const int> labels) {
  double np = 0.0, nn = 0.0;
  for (int y : labels) (y > 0 ? np : nn) += 1.0;
  return {(np + 1.0) / (np + 2.0), 1.0 / (nn + 2.0)};
}

// Negative smoothed log-likelihood: sum_i log(1 + e^z_i) - (1 - t_i) z_i.
double objective(double a, double b, std::span<const double> s, std::span<const int> y, const Targets& t) {
  double f = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double z = a * s[i] + b;
    const double ti = y[i] > 0 ? t.pos : t.neg;
    f += log1pexp(z) - (1.0 - ti) * z;
  }
  return f;
}

double gradient_norm(double a, double b, std::span<const double> s, std::span<const int> y, const Targets& t) {
  double g1 = 0.0, g2 = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = (y[i] > 0 ? t.pos : t.neg) - sigmoid_neg(a * s[i] + b);
    g1 += s[i] * d;
    g2 += d;
  }
  return std::max(std::abs(g1), std::abs(g2));
}

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("Platt fit: score and label counts differ");
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw ValidationError("Platt fit: scores must be finite");
    if (labels[i] == 1) {
      pos = true;
    } else if (labels[i] == -1) {
      neg = true;
    } else {
      throw ValidationError("Platt fit: labels must be -1 or +1");
    }
  }
  if (!pos || !neg) throw ValidationError("Platt fit needs at least one example of each label");
}

}  // namespace

double platt_log_likelihood(const PlattCalibrator& cal, std::span<const double> scores, std::span<const int> labels) {
  return -objective(cal.A, cal.B, scores, labels, smoothed_targets(labels));
}

PlattCalibrator fit_platt(std::span<const double> scores, std::span<const int> labels, PlattFitInfo* info) {
  check_inputs(scores, labels);
  const Targets t = smoothed_targets(labels);
  double np = 0.0, nn = 0.0;
  for (int y : labels) (y > 0 ? np : nn) += 1.0;

  double a = 0.0;
  double b = std::log((nn + 1.0) / (np + 1.0));
  double fval = objective(a, b, scores, labels, t);
  double gnorm = 0.0;

  for (int iter = 0; iter <= kMaxIterations; ++iter) {
    double h11 = kRidge, h22 = kRidge, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double s = scores[i];
      const double p = sigmoid_neg(a * s + b);
      const double ti = labels[i] > 0 ? t.pos : t.neg;
      const double w = p * (1.0 - p);
      h11 += s * s * w;
      h22 += w;
      h21 += s * w;
      const double d = ti - p;
      g1 += s * d;
      g2 += d;
    }
    gnorm = std::max(std::abs(g1), std::abs(g2));
    if (gnorm < kGradTol) {
      if (info != nullptr) *info = {iter, gnorm, -fval};
      return {a, b};
    }
    if (iter == kMaxIterations) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double slope = g1 * da + g2 * db;

    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb, scores, labels, t);
      // Near the optimum the objective change falls below its rounding
      // error; a full Newton step that halves the gradient is accepted then.
      const bool armijo = nf < fval + 1e-4 * step * slope;
      const bool full_step_ok = step == 1.0 && nf <= fval + 1e-12 * std::abs(fval) &&
                                gradient_norm(na, nb, scores, labels, t) < 0.5 * gnorm;
      if (armijo || full_step_ok) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) {
      throw ConvergenceError("Platt fit line search failed", gnorm);
    }
  }
  throw ConvergenceError("Platt fit did not converge in " + std::to_string(kMaxIterations) + " iterations", gnorm);
}

double apply_platt(const PlattCalibrator& cal, double f) {
  const double z = std::clamp(cal.A * f + cal.B, -kClip, kClip);
  return 1.0 / (1.0 + std::exp(z));
}

}  // namespace lesion

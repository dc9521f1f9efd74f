#pragma once

#include <span>

namespace lesion {

// Sigmoid p(f) = 1 / (1 + exp(A f + B)) mapping an SVM margin to a probability.
struct PlattCalibrator {
  double A = 0.0;
  double B = 0.0;

  friend bool operator==(const PlattCalibrator&, const PlattCalibrator&) = default;
};

struct PlattFitInfo {
  int iterations = 0;
  double gradient_norm = 0.0;  // infinity norm at exit
  double log_likelihood = 0.0;
};

// Maximum-likelihood fit with Platt's smoothed targets
// t+ = (N+ + 1)/(N+ + 2), t- = 1/(N- + 2), by Newton's method with a
// backtracking line search. Stops when the gradient infinity norm drops
// below 1e-8; throws ConvergenceError after 200 iterations or a failed line
// search. Labels are -1/+1; both must occur. Scores must be finite.
PlattCalibrator fit_platt(std::span<const double> scores, std::span<const int> labels,
                          PlattFitInfo* info = nullptr);

// Sigmoid argument clipped to [-35, 35], so the result lies strictly in (0, 1).
double apply_platt(const PlattCalibrator& cal, double f);

// Smoothed-target log-likelihood sum_i t_i log p_i + (1 - t_i) log(1 - p_i)
// evaluated in log space.
double platt_log_likelihood(const PlattCalibrator& cal, std::span<const double> scores, std::span<const int> labels);

}  // namespace lesion

#include <cmath>
#include <vector>

#include "doctest.h"
#include "lesion/error.hpp"
#include "lesion/platt.hpp"
#include "lesion/rng.hpp"
#include "oracles.hpp"

using namespace lesion;

TEST_SUITE("platt") {
  TEST_CASE("apply_platt basics") {
    CHECK(apply_platt({0.0, 0.0}, 123.0) == 0.5);
    CHECK(apply_platt({-1.0, 0.0}, 0.0) == 0.5);
    const PlattCalibrator c{-1.0, 0.0};
    double prev = 0.0;
    for (double f = -30.0; f <= 30.0; f += 0.5) {
      const double p = apply_platt(c, f);
      CHECK(p > prev);
      CHECK(p < 1.0);
      prev = p;
    }
    for (double f : {-1e300, -1e6, 1e6, 1e300}) {
      const double p = apply_platt(c, f);
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }

  TEST_CASE("symmetric equal-count case is centred") {
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 10; ++i) {
      s.push_back(-1.0);
      y.push_back(-1);
      s.push_back(1.0);
      y.push_back(1);
    }
    PlattFitInfo info;
    const auto c = fit_platt(s, y, &info);
    CHECK(std::abs(c.B) < 1e-6);
    CHECK(c.A < 0.0);
    CHECK(std::abs(apply_platt(c, 0.0) - 0.5) < 1e-6);
    CHECK(info.gradient_norm < 1e-8);
    // The smoothed targets 11/12 and 1/12 are matched exactly at +-1.
    CHECK(apply_platt(c, 1.0) == doctest::Approx(11.0 / 12.0).epsilon(1e-8));
    CHECK(info.log_likelihood >= oracle::platt_grid_best(s, y, -20, 20, 200) - 1e-6);
  }

  TEST_CASE("Newton beats every point of the oracle grid") {
    Xoshiro256 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 4 + static_cast<int>(rng.below(40));
      std::vector<double> s(n);
      std::vector<int> y(n);
      const double sep = rng.uniform() * 3.0;
      for (int i = 0; i < n; ++i) {
        y[i] = i < 2 ? (i == 0 ? 1 : -1) : (rng.uniform() < 0.4 ? 1 : -1);
        s[i] = rng.normal() + sep * y[i];
      }
      CAPTURE(trial);
      PlattFitInfo info;
      const auto c = fit_platt(s, y, &info);
      const double ll = oracle::platt_ll(c.A, c.B, s, y);
      CHECK(std::abs(ll - info.log_likelihood) < 1e-9 * (1 + std::abs(ll)));
      CHECK(std::abs(ll - platt_log_likelihood(c, s, y)) < 1e-9 * (1 + std::abs(ll)));
      CHECK(ll >= oracle::platt_grid_best(s, y, -20, 20, 200) - 1e-6);
    }
  }

  TEST_CASE("identical scores give the smoothed base rate") {
    std::vector<int> y(12, -1);
    for (int i = 0; i < 4; ++i) y[i] = 1;
    // Stationarity in B with a common p: p is the mean target
    // (4 * 5/6 + 8 * 1/10) / 12.
    const double base = (4.0 * 5.0 / 6.0 + 8.0 * 0.1) / 12.0;

    // All-zero scores: A has no gradient and stays at 0, so the map is flat.
    const auto flat = fit_platt(std::vector<double>(12, 0.0), y);
    CHECK(flat.A == 0.0);
    for (double f : {-5.0, 0.0, 3.0}) CHECK(apply_platt(flat, f) == doctest::Approx(base).epsilon(1e-9));

    // A shared nonzero score only pins down A * s + B.
    const auto shifted = fit_platt(std::vector<double>(12, 0.7), y);
    CHECK(apply_platt(shifted, 0.7) == doctest::Approx(base).epsilon(1e-9));
  }

  TEST_CASE("separated scores give a finite increasing map") {
    std::vector<double> s{-3, -2.5, -2, 2, 2.5, 3};
    std::vector<int> y{-1, -1, -1, 1, 1, 1};
    const auto c = fit_platt(s, y);
    CHECK(std::isfinite(c.A));
    CHECK(std::isfinite(c.B));
    CHECK(c.A < 0.0);
    CHECK(apply_platt(c, -1.0) < apply_platt(c, 1.0));
  }

  TEST_CASE("label flip mirrors the probabilities") {
    Xoshiro256 rng(23);
    std::vector<double> s(30), sm(30);
    std::vector<int> y(30), ym(30);
    for (int i = 0; i < 30; ++i) {
      y[i] = i % 3 == 0 ? 1 : -1;
      s[i] = rng.normal() + 0.8 * y[i];
      sm[i] = -s[i];
      ym[i] = -y[i];
    }
    const auto c = fit_platt(s, y), m = fit_platt(sm, ym);
    for (double f = -4.0; f <= 4.0; f += 0.25) {
      CHECK(std::abs(apply_platt(m, -f) - (1.0 - apply_platt(c, f))) < 1e-8);
    }
  }

  TEST_CASE("invalid input is rejected") {
    const std::vector<double> s{0.1, 0.2};
    CHECK_THROWS_AS(fit_platt(s, std::vector<int>{1, 1}), ValidationError);
    CHECK_THROWS_AS(fit_platt(s, std::vector<int>{1, 0}), ValidationError);
    CHECK_THROWS_AS(fit_platt(s, std::vector<int>{1}), ValidationError);
    CHECK_THROWS_AS(fit_platt(std::vector<double>{0.1, INFINITY}, std::vector<int>{1, -1}), ValidationError);
  }
}

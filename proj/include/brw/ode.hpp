#pragma once

#include "brw/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>

namespace brw::ode {

struct Options {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  double initial_step = 1e-4;
  double min_step = 1e-14;
  std::int64_t max_steps = 200'000'000;
};

struct Stats {
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t rhs_evals = 0;
};

// Adaptive Dormand-Prince 5(4) integration of y' = rhs(t, y).
//
// rhs has signature void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt);
// on_sample(k, t_grid[k], y) is invoked at every grid time, including k = 0.
// The grid must be strictly increasing.
template <class Rhs, class Sampler>
Stats integrate(Rhs&& rhs, Eigen::VectorXd y, std::span<const double> t_grid, Sampler&& on_sample,
                const Options& opt = {}) {
  using Eigen::VectorXd;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;

  if (t_grid.empty()) return {};
  Stats stats;
  const Eigen::Index n = y.size();
  VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);

  double t = t_grid[0];
  on_sample(0, t, y);
  rhs(t, y, k1);
  ++stats.rhs_evals;
  double h = opt.initial_step;

  for (std::size_t g = 1; g < t_grid.size(); ++g) {
    const double tg = t_grid[g];
    if (!(tg > t)) throw std::invalid_argument("ode::integrate: grid must be strictly increasing");
    while (t < tg) {
      const bool clipped = t + h >= tg;
      const double hs = clipped ? tg - t : h;
      if (stats.accepted + stats.rejected > opt.max_steps)
        throw NumericalError("ode::integrate: step budget exhausted");

      ytmp = y + hs * (a21 * k1);
      rhs(t + c2 * hs, ytmp, k2);
      ytmp = y + hs * (a31 * k1 + a32 * k2);
      rhs(t + c3 * hs, ytmp, k3);
      ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
      rhs(t + c4 * hs, ytmp, k4);
      ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      rhs(t + c5 * hs, ytmp, k5);
      ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      rhs(t + hs, ytmp, k6);
      ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      rhs(t + hs, ynew, k7);
      stats.rhs_evals += 6;

      // Scaled RMS norm of the embedded 4th/5th order error estimate.
      double err_sq = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double err_i = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                   e6 * k6[i] + e7 * k7[i]);
        const double scale = opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        const double q = err_i / scale;
        err_sq += q * q;
      }
      const double err = std::sqrt(err_sq / double(n));

      if (err <= 1.0 || hs <= opt.min_step) {
        t = clipped ? tg : t + hs;
        y.swap(ynew);
        k1.swap(k7);  // FSAL
        ++stats.accepted;
        const double grow = err > 0 ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0) : 5.0;
        if (!clipped) h = hs * grow;
        else h = std::max(h, hs * grow);
      } else {
        ++stats.rejected;
        h = hs * std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
        if (h < opt.min_step)
          throw NumericalError("ode::integrate: step size underflow at t = " + std::to_string(t));
      }
    }
    on_sample(g, tg, y);
  }
  return stats;
}

}  // namespace brw::ode

#include "brw/analysis.hpp"

#include "brw/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace brw {

const char* regime_name(Regime regime) {
  switch (regime) {
    case Regime::supercritical: return "supercritical";
    case Regime::critical: return "near-critical";
    case Regime::subcritical: return "subcritical";
  }
  return "?";
}

std::string GrowthForm::to_string() const {
  char buf[96];
  if (exponential()) {
    std::snprintf(buf, sizeof buf, "exp(%d*lambda0*t)", exp_multiplier);
    return buf;
  }
  std::string out;
  if (t_power != 0) {
    std::snprintf(buf, sizeof buf, "t^%g", t_power);
    out = buf;
  }
  if (log_power != 0) {
    std::snprintf(buf, sizeof buf, "log(t)^%d", log_power);
    if (!out.empty()) out += "*";
    out += buf;
  }
  return out.empty() ? "1" : out;
}

GrowthLaw predicted_growth_law(Regime regime, int dimension, int order) {
  if (dimension < 1) throw std::invalid_argument("predicted_growth_law: dimension must be >= 1");
  if (order < 1) throw std::invalid_argument("predicted_growth_law: order must be >= 1");
  const int n = order;
  GrowthLaw law{regime, dimension, order, {}, {}};
  switch (regime) {
    case Regime::supercritical:
      law.u = {0, 0, n};
      law.v = {0, 0, n};
      return law;
    case Regime::critical:
      switch (dimension) {
        case 1:
          law.u = {(n - 1) / 2.0, n - 1, 0};
          law.v = {(n - 1) / 2.0, 0, 0};
          return law;
        case 2:
          law.u = {-1, 0, 0};
          law.v = {0, n - 1, 0};
          return law;
        case 3:
          law.u = {-0.5, n - 1, 0};
          law.v = {n - 0.5, 0, 0};
          return law;
        case 4:
          law.u = {n - 1.0, 1 - 2 * n, 0};
          law.v = {2 * n - 1.0, 1 - 2 * n, 0};
          return law;
        default:
          law.u = {2 * n - 1.0, 0, 0};
          law.v = {2 * n - 1.0, 0, 0};
          return law;
      }
    case Regime::subcritical:
      switch (dimension) {
        case 1:
          law.u = {-1.5, 0, 0};
          law.v = {-0.5, 0, 0};
          return law;
        case 2:
          law.u = {-1, -2, 0};
          law.v = {0, -1, 0};
          return law;
        default:
          law.u = {-dimension / 2.0, 0, 0};
          law.v = {0, 0, 0};
          return law;
      }
  }
  throw std::invalid_argument("predicted_growth_law: unknown regime");
}

DualityReport duality_check(const BrwModel& model, const LatticeBox& box,
                            std::span<const double> grid, double tolerance,
                            const ode::Options& opt) {
  const MomentField forward = evolve_forward_first_moment(model, box, grid, opt);
  const MomentField backward = evolve_first_moment(model, box, Flavor::total, std::nullopt, grid, opt);

  DualityReport report;
  report.times.assign(grid.begin(), grid.end());
  report.sites.reserve(std::size_t(box.size()));
  for (Eigen::Index i = 0; i < box.size(); ++i) report.sites.push_back(box.point_of(i));
  report.forward = forward.values;
  report.backward = backward.values;
  report.gap = (forward.values - backward.values).cwiseAbs();
  report.max_gap = report.gap.maxCoeff();
  report.tolerance = tolerance;
  report.pass = report.max_gap < tolerance;
  return report;
}

RegimeReport classify_regime(const BrwModel& model, std::span<const int> box_schedule) {
  if (box_schedule.empty()) throw std::invalid_argument("classify_regime: empty box schedule");
  RegimeReport report;
  report.beta = model.beta();
  report.box_schedule.assign(box_schedule.begin(), box_schedule.end());
  report.criticality = critical_intensity(model, box_schedule);
  report.beta_c = report.criticality.beta_c;

  Eigen::VectorXd warm;
  for (int half_width : box_schedule) {
    const LatticeBox box(model.kernel.dim(), half_width);
    EigenOptions opt;
    if (warm.size() > 0) opt.warm_start = &warm;
    const EigenResult res = principal_eigenvalue(build_operator(model, box, true), opt);
    if (!res.converged)
      throw NumericalError("classify_regime: eigen-iteration did not converge after " +
                           std::to_string(res.iterations) + " matvecs at L = " +
                           std::to_string(half_width));
    report.lambda0_per_box.push_back(res.value);
    warm = res.vector;
  }
  report.lambda0 = richardson_extrapolate(report.box_schedule, report.lambda0_per_box);

  if (report.lambda0 > kEigenvaluePositiveThreshold)
    report.regime = Regime::supercritical;
  else if (report.beta < report.beta_c - kCriticalBandWidth)
    report.regime = Regime::subcritical;
  else
    report.regime = Regime::critical;
  return report;
}

GrowthFit fit_growth_rate(std::span<const double> times, std::span<const double> values,
                          double t1, double t2, const GrowthForm& form) {
  if (times.size() != values.size())
    throw std::invalid_argument("fit_growth_rate: times/values size mismatch");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    if (t < t1 || t > t2) continue;
    if (!(values[i] > 0))
      throw std::invalid_argument("fit_growth_rate: nonpositive value inside the fit window");
    if (form.exponential()) {
      xs.push_back(t);
    } else {
      if (!(t > 0))
        throw std::invalid_argument("fit_growth_rate: power-law fit needs t > 0 in the window");
      if (form.log_power != 0 && !(t > 1))
        throw std::invalid_argument("fit_growth_rate: log-corrected fit needs t > 1 in the window");
      xs.push_back(std::log(t));
    }
    double y = std::log(values[i]);
    if (!form.exponential() && form.log_power != 0) y -= form.log_power * std::log(std::log(t));
    ys.push_back(y);
  }
  const int n = int(xs.size());
  if (n < 3) throw std::invalid_argument("fit_growth_rate: need at least three points in the window");

  double sx = 0, sy = 0;
  for (int i = 0; i < n; ++i) {
    sx += xs[std::size_t(i)];
    sy += ys[std::size_t(i)];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    const double dx = xs[std::size_t(i)] - mx;
    const double dy = ys[std::size_t(i)] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0)) throw std::invalid_argument("fit_growth_rate: degenerate window");
  const double slope = sxy / sxx;
  const double rss = std::max(0.0, syy - slope * sxy);
  const double sigma2 = n > 2 ? rss / (n - 2) : 0.0;

  GrowthFit fit;
  fit.estimate = slope;
  fit.stderr_ = std::sqrt(sigma2 / sxx);
  fit.r_squared = syy > 0 ? 1.0 - rss / syy : 1.0;
  fit.points = n;
  return fit;
}

int recommended_half_width(double total_rate, double t_max, int dimension) {
  const double bound = 3.0 * std::sqrt(total_rate * t_max * double(dimension));
  return std::max(1, int(std::ceil(bound)));
}

}  // namespace brw

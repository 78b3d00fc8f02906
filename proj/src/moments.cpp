#include "brw/moments.hpp"

#include "brw/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace brw {

const char* flavor_name(Flavor flavor) {
  switch (flavor) {
    case Flavor::total: return "total";
    case Flavor::local: return "local";
    case Flavor::forward_infinite: return "forward";
  }
  return "?";
}

std::vector<double> uniform_grid(double t_max, int steps) {
  if (t_max < 0) throw std::invalid_argument("uniform_grid: t_max must be >= 0");
  if (steps < 1) throw std::invalid_argument("uniform_grid: steps must be >= 1");
  if (t_max == 0) return {0.0};
  std::vector<double> grid(std::size_t(steps) + 1);
  for (int i = 0; i <= steps; ++i) grid[std::size_t(i)] = t_max * double(i) / double(steps);
  return grid;
}

namespace {

void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("time grid is empty");
  if (grid[0] != 0.0) throw std::invalid_argument("time grid must start at t = 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("time grid must be increasing");
}

double binomial(int n, int k) {
  double value = 1;
  for (int j = 1; j <= k; ++j) value = value * double(n - k + j) / double(j);
  return value;
}

// sum over compositions (i_1..i_parts), i_j >= 1, sum = remaining, of
// n!/(i_1!..i_parts!) * prod lower[i_j - 1], accumulated via running binomials.
double weighted_composition_sum(std::span<const double> lower, int remaining, int parts) {
  if (parts == 0) return remaining == 0 ? 1.0 : 0.0;
  double sum = 0;
  const int max_part = std::min(remaining - (parts - 1), int(lower.size()));
  for (int i = 1; i <= max_part; ++i)
    sum += binomial(remaining, i) * lower[std::size_t(i - 1)] *
           weighted_composition_sum(lower, remaining - i, parts - 1);
  return sum;
}

Site resolved_y(const LatticeBox& box, Flavor flavor, const std::optional<Site>& y) {
  Site site = y.value_or(origin_site(box.dim()));
  if (flavor == Flavor::local && !box.contains(site))
    throw std::invalid_argument("local flavor: y outside the box");
  return site;
}

Eigen::VectorXd initial_slice(const LatticeBox& box, Flavor flavor, const Site& y) {
  const Eigen::Index n = box.size();
  if (flavor == Flavor::local) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    v[box.index_of(y)] = 1.0;
    return v;
  }
  return Eigen::VectorXd::Ones(n);
}

}  // namespace

double g_n(const OffspringLaw& law, std::span<const double> lower_moments) {
  const int n = int(lower_moments.size()) + 1;
  if (n < 2) throw std::invalid_argument("g_n: order must be >= 2");
  double total = 0;
  double r_factorial = 1;
  for (int r = 2; r <= n; ++r) {
    r_factorial *= r;
    const double beta_r = law.factorial_moment(r);
    if (beta_r == 0) continue;
    total += beta_r / r_factorial * weighted_composition_sum(lower_moments, n, r);
  }
  return total;
}

std::vector<MomentField> evolve_higher_moments(const BrwModel& model, const LatticeBox& box,
                                               Flavor flavor, std::optional<Site> y, int max_order,
                                               std::span<const double> grid, const ode::Options& opt) {
  if (max_order < 1) throw std::invalid_argument("evolve_higher_moments: order must be >= 1");
  if (flavor == Flavor::forward_infinite) {
    if (max_order > 1)
      throw std::invalid_argument("forward-infinite moments are available for order 1 only");
    return {evolve_forward_first_moment(model, box, grid, opt)};
  }
  check_grid(grid);
  const Site ysite = resolved_y(box, flavor, y);
  const TruncatedOperator op = build_operator(model, box, true);
  const Eigen::Index n = box.size();
  const Eigen::Index origin = op.origin;

  Eigen::VectorXd state(n * max_order);
  const Eigen::VectorXd slice0 = initial_slice(box, flavor, ysite);
  for (int k = 0; k < max_order; ++k) state.segment(Eigen::Index(k) * n, n) = slice0;

  std::vector<MomentField> fields(static_cast<std::size_t>(max_order));
  for (int k = 0; k < max_order; ++k) {
    fields[std::size_t(k)] = MomentField{k + 1, flavor, ysite, box,
                                         std::vector<double>(grid.begin(), grid.end()),
                                         Eigen::MatrixXd(n, Eigen::Index(grid.size()))};
  }

  std::vector<double> lower(std::size_t(std::max(max_order - 1, 1)));
  auto rhs = [&](double, const Eigen::VectorXd& s, Eigen::VectorXd& ds) {
    for (int k = 0; k < max_order; ++k) {
      const Eigen::Index off = Eigen::Index(k) * n;
      apply_operator(op, s.segment(off, n), ds.segment(off, n));
      if (k >= 1) {
        for (int j = 0; j < k; ++j) lower[std::size_t(j)] = s[Eigen::Index(j) * n + origin];
        ds[off + origin] += g_n(model.law, std::span<const double>(lower.data(), std::size_t(k)));
      }
    }
  };
  ode::integrate(rhs, state, grid, [&](std::size_t gi, double, const Eigen::VectorXd& s) {
    for (int k = 0; k < max_order; ++k)
      fields[std::size_t(k)].values.col(Eigen::Index(gi)) = s.segment(Eigen::Index(k) * n, n);
  }, opt);
  return fields;
}

MomentField evolve_first_moment(const BrwModel& model, const LatticeBox& box, Flavor flavor,
                                std::optional<Site> y, std::span<const double> grid,
                                const ode::Options& opt) {
  return std::move(evolve_higher_moments(model, box, flavor, std::move(y), 1, grid, opt).front());
}

MomentField evolve_forward_first_moment(const BrwModel& model, const LatticeBox& box,
                                        std::span<const double> grid, const ode::Options& opt) {
  check_grid(grid);
  const TruncatedOperator op = build_operator(model, box, true);
  const auto adjoint = adjoint_walk_matrix(op);
  const Eigen::Index n = box.size();
  const double beta = op.beta;
  const Eigen::Index origin = op.origin;

  MomentField field{1, Flavor::forward_infinite, origin_site(box.dim()), box,
                    std::vector<double>(grid.begin(), grid.end()),
                    Eigen::MatrixXd(n, Eigen::Index(grid.size()))};

  auto rhs = [&](double, const Eigen::VectorXd& s, Eigen::VectorXd& ds) {
    ds.noalias() = adjoint * s;
    ds[origin] += beta * s[origin];
  };
  ode::integrate(rhs, Eigen::VectorXd::Ones(n), grid,
                 [&](std::size_t gi, double, const Eigen::VectorXd& s) {
                   field.values.col(Eigen::Index(gi)) = s;
                 },
                 opt);
  return field;
}

namespace {

// Quadrature weights for int_0^{i h} sampled at grid points 0..i: composite
// Simpson, closing odd prefixes with a 3/8 tail (single intervals fall back to
// the trapezoid rule).
std::vector<double> quad_weights(int i, double h) {
  std::vector<double> w(std::size_t(i) + 1, 0.0);
  if (i == 0) return w;
  if (i == 1) {
    w[0] = w[1] = h / 2;
    return w;
  }
  int m = i;
  if (m % 2 == 1) m -= 3;
  if (m >= 2) {
    w[0] += h / 3;
    w[std::size_t(m)] += h / 3;
    for (int j = 1; j < m; ++j) w[std::size_t(j)] += (j % 2 == 1 ? 4.0 : 2.0) * h / 3;
  }
  if (m != i) {
    w[std::size_t(m)] += 3 * h / 8;
    w[std::size_t(m) + 1] += 9 * h / 8;
    w[std::size_t(m) + 2] += 9 * h / 8;
    w[std::size_t(m) + 3] += 3 * h / 8;
  }
  return w;
}

}  // namespace

MomentField integral_moment_oracle(const BrwModel& model, const LatticeBox& box, Flavor flavor,
                                   std::optional<Site> y, int order, std::span<const double> grid,
                                   const ode::Options& opt) {
  if (order < 1) throw std::invalid_argument("integral_moment_oracle: order must be >= 1");
  if (flavor == Flavor::forward_infinite)
    throw std::invalid_argument("integral_moment_oracle: backward flavors only");
  check_grid(grid);

  MomentField m1 = evolve_first_moment(model, box, flavor, y, grid, opt);
  if (order == 1) return m1;

  const std::size_t points = grid.size();
  if (points < 5)
    throw std::invalid_argument("integral_moment_oracle: grid too coarse for the Simpson rule");
  const double h = grid[1] - grid[0];
  for (std::size_t i = 1; i < points; ++i)
    if (std::abs(grid[i] - grid[0] - double(i) * h) > 1e-9 * std::max(1.0, grid.back()))
      throw std::invalid_argument("integral_moment_oracle: grid must be uniform");

  const Site ysite = resolved_y(box, flavor, y);
  const Site origin = origin_site(box.dim());
  const bool reuse_m1 = flavor == Flavor::local && same_site(ysite, origin);
  const MomentField local0 =
      reuse_m1 ? m1 : evolve_first_moment(model, box, Flavor::local, origin, grid, opt);

  const Eigen::Index origin_row = box.origin_index();
  // Lower-order moments at the origin, built by the same integral recursion so
  // that only M_1 is shared with the differential route.
  Eigen::MatrixXd lower(order - 1, Eigen::Index(points));
  lower.row(0) = m1.values.row(origin_row);
  const Eigen::VectorXd kernel_at_origin = local0.values.row(origin_row).transpose();

  std::vector<double> args(std::size_t(order - 1));
  auto g_series = [&](int target_order, Eigen::Index ti) {
    for (int j = 0; j < target_order - 1; ++j) args[std::size_t(j)] = lower(j, ti);
    return g_n(model.law, std::span<const double>(args.data(), std::size_t(target_order - 1)));
  };

  for (int m = 2; m < order; ++m) {
    std::vector<double> gs(points);
    for (std::size_t ti = 0; ti < points; ++ti) gs[ti] = g_series(m, Eigen::Index(ti));
    for (std::size_t ti = 0; ti < points; ++ti) {
      const auto w = quad_weights(int(ti), h);
      double acc = lower(0, Eigen::Index(ti));
      for (std::size_t j = 0; j <= ti; ++j)
        acc += w[j] * gs[j] * kernel_at_origin[Eigen::Index(ti - j)];
      lower(m - 1, Eigen::Index(ti)) = acc;
    }
  }

  MomentField out{order, flavor, ysite, box, std::vector<double>(grid.begin(), grid.end()),
                  Eigen::MatrixXd(box.size(), Eigen::Index(points))};
  std::vector<double> gs(points);
  for (std::size_t ti = 0; ti < points; ++ti) gs[ti] = g_series(order, Eigen::Index(ti));
  for (std::size_t ti = 0; ti < points; ++ti) {
    const auto w = quad_weights(int(ti), h);
    out.values.col(Eigen::Index(ti)) = m1.values.col(Eigen::Index(ti));
    for (std::size_t j = 0; j <= ti; ++j)
      out.values.col(Eigen::Index(ti)) += w[j] * gs[j] * local0.values.col(Eigen::Index(ti - j));
  }
  return out;
}

GeneratingFunctionField solve_generating_function(const BrwModel& model, const LatticeBox& box,
                                                  ZParam z, Flavor flavor, std::optional<Site> y,
                                                  std::span<const double> grid,
                                                  const ode::Options& opt) {
  if (flavor == Flavor::forward_infinite)
    throw std::invalid_argument("solve_generating_function: backward flavors only");
  if (!z.infinite && z.value < -1e-3)
    throw std::invalid_argument(
        "solve_generating_function: z must be >= 0 (small negative derivative probes down to "
        "-1e-3 are allowed)");
  check_grid(grid);

  const Site ysite = resolved_y(box, flavor, y);
  const TruncatedOperator op = build_operator(model, box, false);
  const Eigen::Index n = box.size();
  const Eigen::Index origin = op.origin;

  Eigen::VectorXd f0;
  if (z.infinite) {
    if (flavor == Flavor::total) {
      f0 = Eigen::VectorXd::Zero(n);
    } else {
      f0 = Eigen::VectorXd::Ones(n);
      f0[box.index_of(ysite)] = 0.0;
    }
  } else {
    const double e = std::exp(-z.value);
    if (flavor == Flavor::total) {
      f0 = Eigen::VectorXd::Constant(n, e);
    } else {
      f0 = Eigen::VectorXd::Ones(n);
      f0[box.index_of(ysite)] = e;
    }
  }

  GeneratingFunctionField field{z, flavor, ysite, box,
                                std::vector<double>(grid.begin(), grid.end()),
                                Eigen::MatrixXd(n, Eigen::Index(grid.size()))};

  const double range_tol = 1e-10;
  const double lo = (z.infinite || z.value >= 0) ? -range_tol : 1.0 - range_tol;
  const double hi = (z.infinite || z.value >= 0) ? 1.0 + range_tol : 2.0;

  auto rhs = [&](double, const Eigen::VectorXd& s, Eigen::VectorXd& ds) {
    ds.noalias() = (*op.walk) * s;
    ds[origin] += model.law.eval_f_unchecked(s[origin]);
  };
  ode::integrate(rhs, f0, grid, [&](std::size_t gi, double t, const Eigen::VectorXd& s) {
    const double vmin = s.minCoeff();
    const double vmax = s.maxCoeff();
    if (vmin < lo || vmax > hi)
      throw NumericalError("solve_generating_function: values escaped the admissible range at t = " +
                           std::to_string(t) + " (min " + std::to_string(vmin) + ", max " +
                           std::to_string(vmax) + ")");
    field.values.col(Eigen::Index(gi)) = s;
  }, opt);
  return field;
}

}  // namespace brw

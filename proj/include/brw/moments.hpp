#pragma once

#include "brw/lattice.hpp"
#include "brw/model.hpp"
#include "brw/ode.hpp"
#include "brw/operators.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace brw {

enum class Flavor {
  total,             // M_n(t, x) = E eta_{x,t}^n, field over the starting site x
  local,             // M_n(t, x, y) = E eta_{x,t}(y)^n, field over x with y fixed
  forward_infinite,  // M_{inf,1}(t, y), field over y, all-sites initial condition
};

const char* flavor_name(Flavor flavor);

// Time-indexed moment arrays over the box sites; one column per grid time.
struct MomentField {
  int order = 1;
  Flavor flavor = Flavor::total;
  Site y;  // meaningful for the local flavor
  LatticeBox box{1, 1};
  std::vector<double> times;
  Eigen::MatrixXd values;  // box.size() x times.size()

  double at(Eigen::Index time_index, const Site& x) const {
    return values(box.index_of(x), time_index);
  }
  Eigen::VectorXd series_at(const Site& x) const {
    return values.row(box.index_of(x)).transpose();
  }
};

// Laplace-transform parameter; z = +infinity is a dedicated flag, never a
// large float.
struct ZParam {
  double value = 0;
  bool infinite = false;

  static ZParam finite(double z) { return {z, false}; }
  static ZParam inf() { return {0, true}; }
};

struct GeneratingFunctionField {
  ZParam z;
  Flavor flavor = Flavor::total;
  Site y;
  LatticeBox box{1, 1};
  std::vector<double> times;
  Eigen::MatrixXd values;

  double at(Eigen::Index time_index, const Site& x) const {
    return values(box.index_of(x), time_index);
  }
};

// Branching inhomogeneity of the order-n moment equation:
//   g_n = sum_{r=2..n} (beta_r / r!) sum_{i_1+..+i_r=n, i_j>0}
//         n!/(i_1! .. i_r!) M_{i_1} .. M_{i_r}.
// The r = 1 term is excluded: it equals beta M_n and is already carried by H.
// lower_moments holds M_1 .. M_{n-1}; the order is lower_moments.size() + 1.
double g_n(const OffspringLaw& law, std::span<const double> lower_moments);

// Both sides of the composition/partition identity behind the Faa di Bruno
// reduction; exact in integer arithmetic for integer T.
//   composition_form = sum over (i_1..i_r), i_j >= 1, sum = n of x_{i_1}..x_{i_r}
//   partition_form   = sum over i_1+..+i_n = r with i_1+2i_2+..+n i_n = n of
//                      r!/(i_1!..i_n!) x_1^{i_1}..x_n^{i_n}
template <class T>
T composition_form(std::span<const T> x, int n, int r);
template <class T>
T partition_form(std::span<const T> x, int n, int r);

// Joint cascade of the moment equations up to max_order:
//   d/dt M_n = H M_n + delta_0 g_n(M_1,..,M_{n-1}),
// with the flavor's initial condition. Returns fields for orders 1..max_order.
std::vector<MomentField> evolve_higher_moments(const BrwModel& model, const LatticeBox& box,
                                               Flavor flavor, std::optional<Site> y, int max_order,
                                               std::span<const double> grid,
                                               const ode::Options& opt = {});

MomentField evolve_first_moment(const BrwModel& model, const LatticeBox& box, Flavor flavor,
                                std::optional<Site> y, std::span<const double> grid,
                                const ode::Options& opt = {});

// Forward equation for the all-sites initial condition:
//   d/dt M = A* M + beta Delta_0 M, M(0,.) = 1.
MomentField evolve_forward_first_moment(const BrwModel& model, const LatticeBox& box,
                                        std::span<const double> grid, const ode::Options& opt = {});

// Duhamel-form integral equation on a uniform grid (composite Simpson with a
// 3/8 tail on odd prefixes):
//   M_n(t, x) = M_1(t, x) + int_0^t M_1(t-q, x, 0) g_n(M_1(q,0),..,M_{n-1}(q,0)) dq.
// Lower orders are obtained from the same recursion, so the route shares only
// M_1 with the ODE cascade.
MomentField integral_moment_oracle(const BrwModel& model, const LatticeBox& box, Flavor flavor,
                                   std::optional<Site> y, int order, std::span<const double> grid,
                                   const ode::Options& opt = {});

// Nonlinear generating-function equation
//   dF/dt = A F + Delta_0 f(F),
// with initial condition exp(-z) (total) or exp(-z delta_x(y)) (local); at
// z = +infinity the initial condition degenerates to the extinction indicator.
// Small negative z (>= -1e-3) is admitted for derivative probes.
GeneratingFunctionField solve_generating_function(const BrwModel& model, const LatticeBox& box,
                                                  ZParam z, Flavor flavor, std::optional<Site> y,
                                                  std::span<const double> grid,
                                                  const ode::Options& opt = {});

std::vector<double> uniform_grid(double t_max, int steps);

namespace detail {

template <class T>
T composition_form_rec(std::span<const T> x, int remaining, int parts) {
  if (parts == 0) return remaining == 0 ? T(1) : T(0);
  T sum{0};
  const int max_part = std::min(remaining - (parts - 1), int(x.size()));
  for (int i = 1; i <= max_part; ++i)
    sum += x[std::size_t(i - 1)] * composition_form_rec(x, remaining - i, parts - 1);
  return sum;
}

inline long long integer_binomial(int n, int k) {
  long long value = 1;
  for (int j = 1; j <= k; ++j) value = value * (n - k + j) / j;
  return value;
}

template <class T>
T partition_form_rec(std::span<const T> x, int j, int parts_left, int weight_left,
                     long long coeff, T prod) {
  const int n = int(x.size());
  if (j > n) return (parts_left == 0 && weight_left == 0) ? T(coeff) * prod : T(0);
  T sum{0};
  const int max_mult = std::min(parts_left, weight_left / j);
  T power{1};
  for (int mult = 0; mult <= max_mult; ++mult) {
    sum += partition_form_rec(x, j + 1, parts_left - mult, weight_left - mult * j,
                              coeff * integer_binomial(parts_left, mult), prod * power);
    power = power * x[std::size_t(j - 1)];
  }
  return sum;
}

}  // namespace detail

template <class T>
T composition_form(std::span<const T> x, int n, int r) {
  if (n < 1 || r < 1 || int(x.size()) < n)
    throw std::invalid_argument("composition_form: need n, r >= 1 and x_1..x_n");
  return detail::composition_form_rec(x, n, r);
}

template <class T>
T partition_form(std::span<const T> x, int n, int r) {
  if (n < 1 || r < 1 || int(x.size()) < n)
    throw std::invalid_argument("partition_form: need n, r >= 1 and x_1..x_n");
  return detail::partition_form_rec(x, 1, r, n, 1, T(1));
}

}  // namespace brw

#pragma once

#include "brw/lattice.hpp"
#include "brw/model.hpp"
#include "brw/moments.hpp"
#include "brw/operators.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace brw {

enum class Regime { supercritical, critical, subcritical };

const char* regime_name(Regime regime);

// Parametric asymptotic form  t^p (ln t)^q exp(c lambda_0 t).
struct GrowthForm {
  double t_power = 0;
  int log_power = 0;
  int exp_multiplier = 0;  // coefficient of lambda_0 in the exponent

  bool exponential() const { return exp_multiplier != 0; }
  std::string to_string() const;
};

// One row of the long-time moment asymptotics: u_n for the local moments
// M_n(t, x, y), v_n for the subpopulation totals M_n(t, x).
struct GrowthLaw {
  Regime regime = Regime::supercritical;
  int dimension = 1;
  int order = 1;
  GrowthForm u;
  GrowthForm v;
};

GrowthLaw predicted_growth_law(Regime regime, int dimension, int order);

struct DualityReport {
  std::vector<double> times;
  std::vector<Site> sites;
  Eigen::MatrixXd forward;   // M_{inf,1}(t, y), sites x times
  Eigen::MatrixXd backward;  // m_1(t, y), sites x times
  Eigen::MatrixXd gap;       // absolute differences
  double max_gap = 0;
  double tolerance = 1e-9;
  bool pass = false;
};

// Checks M_{inf,1}(t, y) == m_1(t, y): the forward all-sites first moment
// against the backward subpopulation total read at x = y.
DualityReport duality_check(const BrwModel& model, const LatticeBox& box,
                            std::span<const double> grid, double tolerance = 1e-9,
                            const ode::Options& opt = {});

inline constexpr double kCriticalBandWidth = 1e-3;  // resolution on beta

struct RegimeReport {
  Regime regime = Regime::subcritical;
  double beta = 0;
  double lambda0 = 0;  // Richardson-extrapolated over the schedule
  double beta_c = 0;
  std::vector<int> box_schedule;
  std::vector<double> lambda0_per_box;
  CriticalityResult criticality;
};

RegimeReport classify_regime(const BrwModel& model, std::span<const int> box_schedule);

struct GrowthFit {
  double estimate = 0;  // slope: growth rate for exponential forms, power otherwise
  double stderr_ = 0;
  double r_squared = 0;
  int points = 0;
};

// Least-squares fit of log M over the window [t1, t2]: against t for
// exponential forms, against log t otherwise (with the form's fixed
// log-correction subtracted first).
GrowthFit fit_growth_rate(std::span<const double> times, std::span<const double> values,
                          double t1, double t2, const GrowthForm& form);

// Box half-width keeping boundary leakage below fit noise for supercritical
// horizons.
int recommended_half_width(double total_rate, double t_max, int dimension);

}  // namespace brw

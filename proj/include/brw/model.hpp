#pragma once

#include "brw/lattice.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace brw {

// Transition intensities a(z) of a homogeneous random walk on Z^d.
// Only the off-origin rates are stored; a(0) = -sum of them.
class WalkKernel {
 public:
  // Nearest-neighbour kernel: a(z) = total_rate / (2d) for |z| = 1.
  static WalkKernel simple(int dim, double total_rate);

  // Arbitrary finite-support kernel. No symmetry or irreducibility check is
  // performed here; use validate_model to obtain a report.
  static WalkKernel from_offsets(int dim, std::vector<std::pair<Site, double>> jumps);

  int dim() const { return dim_; }
  const std::vector<std::pair<Site, double>>& jumps() const { return jumps_; }
  double total_rate() const { return total_rate_; }  // |a(0)|
  double diagonal() const { return -total_rate_; }   // a(0)
  double rate(const Site& z) const;                  // a(z) for z != 0, 0 if absent
  int support_radius() const;                        // max |z|_inf over the support

 private:
  int dim_ = 0;
  double total_rate_ = 0;
  std::vector<std::pair<Site, double>> jumps_;
};

// Branching intensities b_0, b_2, ..., b_N. b_1 is always derived from the
// conservation identity sum_n b_n = 0 and never supplied by the caller.
class OffspringLaw {
 public:
  // rates_except_b1 maps n -> b_n for n != 1; missing entries are zero.
  static OffspringLaw from_rates(const std::map<int, double>& rates_except_b1);
  static OffspringLaw binary(double b0, double b2);

  // Unchecked constructor taking all rates including b_1. Intended for
  // building deliberately broken laws in validation tests.
  static OffspringLaw from_raw(std::vector<double> all_rates);

  int max_offspring() const { return int(rates_.size()) - 1; }
  double rate(int n) const { return n >= 0 && n < int(rates_.size()) ? rates_[n] : 0.0; }
  const std::vector<double>& rates() const { return rates_; }

  double mean_rate() const;              // beta = f'(1)
  double factorial_moment(int r) const;  // beta_r = f^(r)(1), r >= 1
  double eval_f(double u) const;         // f(u) = sum b_n u^n, requires u in [0,1]
  double eval_f_unchecked(double u) const;

  bool is_zero() const;

 private:
  std::vector<double> rates_;  // index n holds b_n
};

// A walk plus a single branching source at the origin.
struct BrwModel {
  WalkKernel kernel;
  OffspringLaw law;

  double beta() const { return law.mean_rate(); }
  // Exponential holding parameter at the source: -(a(0) + b_1).
  double source_holding_rate() const { return kernel.total_rate() - law.rate(1); }
};

// Report-only validation: one message per violated admissibility constraint,
// empty iff the model is admissible.
std::vector<std::string> validate_model(const BrwModel& model);

double eval_generating_function(const OffspringLaw& law, double u);

inline constexpr double kRateClosureTol = 1e-12;

}  // namespace brw

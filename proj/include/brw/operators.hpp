#pragma once

#include "brw/lattice.hpp"
#include "brw/model.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace brw {

// Dirichlet truncation of the walk generator A to a finite box, with an
// optional rank-one branching perturbation beta at the origin:
//   H = A + beta * Delta_0.
// Couplings leaving the box are dropped; the diagonal keeps the full a(0).
struct TruncatedOperator {
  LatticeBox box;
  std::shared_ptr<const Eigen::SparseMatrix<double, Eigen::RowMajor>> walk;
  Eigen::Index origin = 0;
  bool branching = false;
  double beta = 0.0;

  Eigen::Index size() const { return walk->rows(); }
  // Estimate of the spectral spread, used to scale convergence thresholds.
  double scale() const;
};

TruncatedOperator build_operator(const BrwModel& model, const LatticeBox& box, bool include_branching);
TruncatedOperator with_branching_weight(const TruncatedOperator& op, double beta);

// y = (A + beta Delta_0) x
void apply_operator(const TruncatedOperator& op, const Eigen::Ref<const Eigen::VectorXd>& x,
                    Eigen::Ref<Eigen::VectorXd> y);

Eigen::MatrixXd dense_operator(const TruncatedOperator& op);

// Dirichlet truncation of the adjoint walk generator (A^T); identical to A
// for symmetric kernels.
Eigen::SparseMatrix<double, Eigen::RowMajor> adjoint_walk_matrix(const TruncatedOperator& op);

// p(t, x, y) = exp(tA) on the box. Requires an operator without branching and
// a box small enough for dense computation.
Eigen::MatrixXd transition_probabilities(const TruncatedOperator& op, double t);

// Eigenvalues below this threshold are treated as nonpositive when the sign
// of lambda_0 decides criticality.
inline constexpr double kEigenvaluePositiveThreshold = 1e-9;

struct EigenOptions {
  double rel_tol = 1e-10;
  int block = 40;          // Lanczos basis size per restart
  std::int64_t max_matvecs = 2'000'000;
  const Eigen::VectorXd* warm_start = nullptr;
  // Optional early exits for sign queries: stop as soon as the Ritz value
  // certifies lambda_0 > stop_above, or theta + residual < stop_below.
  double stop_above = std::numeric_limits<double>::infinity();
  double stop_below = -std::numeric_limits<double>::infinity();
};

struct EigenResult {
  double value = 0;
  Eigen::VectorXd vector;
  std::int64_t iterations = 0;  // operator applications
  double residual = 0;
  bool converged = false;
  bool early_exit = false;
};

// Largest eigenvalue of H by restarted Lanczos with full reorthogonalization
// inside each restart block.
EigenResult principal_eigenvalue(const TruncatedOperator& op, const EigenOptions& opt = {});

struct GreenResult {
  double value = 0;
  std::int64_t iterations = 0;
  Eigen::VectorXd solution;
};

// G_lambda(0,0): origin entry of (lambda I - A)^{-1} e_origin, by conjugate
// gradients. Requires an operator without branching and lambda above the top
// of spec(A); an indefinite solve is reported as a NumericalError.
GreenResult green_function_at_origin(const TruncatedOperator& op, double lambda, double tol = 1e-13);

struct BoxCriticality {
  int half_width = 0;
  double beta_c_bisection = 0;  // sign change of lambda_0(beta)
  double beta_c_green = 0;      // 1 / G_0(0,0)
};

struct CriticalityResult {
  std::vector<BoxCriticality> per_box;
  double beta_c = 0;        // Richardson-extrapolated bisection estimate
  double beta_c_green = 0;  // Richardson-extrapolated Green estimate
};

// Bisection on beta of the sign of lambda_0 over a schedule of boxes, with the
// Green's-function estimator carried along as an independent cross-check.
CriticalityResult critical_intensity(const BrwModel& model, std::span<const int> box_schedule,
                                     double beta_tol = 1e-6);

// First-order Richardson extrapolation in 1/L from the last two entries.
double richardson_extrapolate(std::span<const int> widths, std::span<const double> values);

}  // namespace brw

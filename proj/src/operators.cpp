#include "brw/operators.hpp"

#include "brw/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace brw {

double TruncatedOperator::scale() const {
  const double a00 = std::abs(walk->coeff(origin, origin));
  return 2.0 * a00 + std::abs(branching ? beta : 0.0);
}

TruncatedOperator build_operator(const BrwModel& model, const LatticeBox& box, bool include_branching) {
  if (box.dim() != model.kernel.dim())
    throw std::invalid_argument("build_operator: box and kernel dimension mismatch");
  if (box.half_width() < model.kernel.support_radius())
    throw std::invalid_argument("build_operator: box smaller than the kernel support");

  const Eigen::Index n = box.size();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(std::size_t(n) * (model.kernel.jumps().size() + 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Site x = box.point_of(i);
    entries.emplace_back(i, i, model.kernel.diagonal());
    for (const auto& [z, rate] : model.kernel.jumps()) {
      const Eigen::Index j = box.index_if_inside(Site(x + z));
      if (j >= 0) entries.emplace_back(i, j, rate);
    }
  }
  auto matrix = std::make_shared<Eigen::SparseMatrix<double, Eigen::RowMajor>>(n, n);
  matrix->setFromTriplets(entries.begin(), entries.end());
  matrix->makeCompressed();

  TruncatedOperator op{box, std::move(matrix), box.origin_index(), include_branching,
                       include_branching ? model.beta() : 0.0};
  return op;
}

TruncatedOperator with_branching_weight(const TruncatedOperator& op, double beta) {
  TruncatedOperator out = op;
  out.branching = true;
  out.beta = beta;
  return out;
}

void apply_operator(const TruncatedOperator& op, const Eigen::Ref<const Eigen::VectorXd>& x,
                    Eigen::Ref<Eigen::VectorXd> y) {
  y.noalias() = (*op.walk) * x;
  if (op.branching) y[op.origin] += op.beta * x[op.origin];
}

Eigen::MatrixXd dense_operator(const TruncatedOperator& op) {
  Eigen::MatrixXd dense = Eigen::MatrixXd(*op.walk);
  if (op.branching) dense(op.origin, op.origin) += op.beta;
  return dense;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> adjoint_walk_matrix(const TruncatedOperator& op) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> adj = op.walk->transpose();
  adj.makeCompressed();
  return adj;
}

Eigen::MatrixXd transition_probabilities(const TruncatedOperator& op, double t) {
  if (op.branching)
    throw std::invalid_argument("transition_probabilities: defined for the pure walk operator");
  if (t < 0) throw std::invalid_argument("transition_probabilities: t must be >= 0");
  if (op.size() > 5000)
    throw std::invalid_argument("transition_probabilities: box too large for a dense exponential");
  Eigen::MatrixXd generator = t * Eigen::MatrixXd(*op.walk);
  return generator.exp();
}

namespace {

Eigen::VectorXd deterministic_start_vector(Eigen::Index n, Eigen::Index origin) {
  std::mt19937_64 gen(0x9e3779b97f4a7c15ull ^ std::uint64_t(n));
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v[i] = double(gen() >> 11) * 0x1.0p-53 - 0.5;
  v[origin] += 1.0;  // guarantee overlap with source-localized modes
  v.normalize();
  return v;
}

}  // namespace

EigenResult principal_eigenvalue(const TruncatedOperator& op, const EigenOptions& opt) {
  const Eigen::Index n = op.size();
  const int m = int(std::min<Eigen::Index>(opt.block, n));
  const double scale = op.scale();
  const double tol = opt.rel_tol * scale;

  Eigen::VectorXd v0 = (opt.warm_start && opt.warm_start->size() == n)
                           ? opt.warm_start->normalized()
                           : deterministic_start_vector(n, op.origin);

  Eigen::MatrixXd basis(n, m);
  Eigen::VectorXd alpha(m), offdiag(m), w(n);
  EigenResult result;

  while (true) {
    basis.col(0) = v0;
    int k = m;
    bool exhausted = false;
    for (int j = 0; j < m; ++j) {
      apply_operator(op, basis.col(j), w);
      ++result.iterations;
      alpha[j] = basis.col(j).dot(w);
      w -= alpha[j] * basis.col(j);
      if (j > 0) w -= offdiag[j - 1] * basis.col(j - 1);
      // One full reorthogonalization pass keeps the block numerically orthogonal.
      w -= basis.leftCols(j + 1) * (basis.leftCols(j + 1).transpose() * w).eval();
      offdiag[j] = w.norm();
      if (offdiag[j] < 1e-14 * scale) {
        k = j + 1;
        exhausted = true;
        break;
      }
      if (j + 1 < m) basis.col(j + 1) = w / offdiag[j];
    }

    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(k, k);
    for (int j = 0; j < k; ++j) {
      tri(j, j) = alpha[j];
      if (j + 1 < k) tri(j, j + 1) = tri(j + 1, j) = offdiag[j];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
    const Eigen::Index top = k - 1;
    const double theta = es.eigenvalues()[top];
    const Eigen::VectorXd s = es.eigenvectors().col(top);
    result.value = theta;
    result.vector.noalias() = basis.leftCols(k) * s;
    result.residual = exhausted ? 0.0 : std::abs(offdiag[k - 1] * s[k - 1]);

    if (result.residual <= tol || exhausted) {
      result.converged = true;
      return result;
    }
    if (theta > opt.stop_above) {  // theta never exceeds lambda_0
      result.early_exit = true;
      return result;
    }
    if (theta + result.residual < opt.stop_below) {
      result.early_exit = true;
      return result;
    }
    if (result.iterations >= opt.max_matvecs) return result;  // converged = false
    v0 = result.vector.normalized();
  }
}

GreenResult green_function_at_origin(const TruncatedOperator& op, double lambda, double tol) {
  if (op.branching)
    throw std::invalid_argument("green_function_at_origin: defined for the pure walk operator");
  if (lambda < 0) throw std::invalid_argument("green_function_at_origin: lambda must be >= 0");

  const Eigen::Index n = op.size();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
  r[op.origin] = 1.0;
  Eigen::VectorXd p = r, q(n);
  double rr = r.squaredNorm();
  const double stop = tol * tol;  // ||b|| = 1

  const std::int64_t max_iters = std::min<std::int64_t>(20 * n + 1000, 4'000'000);
  GreenResult result;
  for (std::int64_t it = 0; it < max_iters; ++it) {
    if (rr <= stop) {
      result.value = x[op.origin];
      result.iterations = it;
      result.solution = std::move(x);
      return result;
    }
    q.noalias() = lambda * p - (*op.walk) * p;
    const double curvature = p.dot(q);
    if (!(curvature > 0))
      throw NumericalError("green_function_at_origin: (lambda I - A) is not positive definite");
    const double step = rr / curvature;
    x += step * p;
    r -= step * q;
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  throw NumericalError("green_function_at_origin: CG did not converge within " +
                       std::to_string(max_iters) + " iterations");
}

double richardson_extrapolate(std::span<const int> widths, std::span<const double> values) {
  if (widths.size() != values.size() || values.empty())
    throw std::invalid_argument("richardson_extrapolate: mismatched or empty inputs");
  if (values.size() == 1) return values[0];
  const double l1 = widths[widths.size() - 2];
  const double l2 = widths[widths.size() - 1];
  const double v1 = values[values.size() - 2];
  const double v2 = values[values.size() - 1];
  if (l2 <= l1) throw std::invalid_argument("richardson_extrapolate: widths must increase");
  return (l2 * v2 - l1 * v1) / (l2 - l1);
}

CriticalityResult critical_intensity(const BrwModel& model, std::span<const int> box_schedule,
                                     double beta_tol) {
  if (box_schedule.empty()) throw std::invalid_argument("critical_intensity: empty box schedule");
  CriticalityResult result;
  std::vector<double> bisected, green;

  for (int half_width : box_schedule) {
    const LatticeBox box(model.kernel.dim(), half_width);
    const TruncatedOperator walk_op = build_operator(model, box, false);
    const double green_value = green_function_at_origin(walk_op, 0.0).value;
    const double beta_c_green = 1.0 / green_value;

    Eigen::VectorXd warm;
    auto supercritical = [&](double beta) {
      EigenOptions opt;
      opt.stop_above = kEigenvaluePositiveThreshold;
      opt.stop_below = kEigenvaluePositiveThreshold;
      if (warm.size() > 0) opt.warm_start = &warm;
      const EigenResult res = principal_eigenvalue(with_branching_weight(walk_op, beta), opt);
      if (res.vector.size() > 0) warm = res.vector;
      return res.value > kEigenvaluePositiveThreshold;
    };

    double lo = 0.0;  // lambda_0(A) < 0 under Dirichlet truncation
    double hi = 1.0;
    while (!supercritical(hi)) {
      hi *= 2;
      if (hi > 1e6)
        throw NumericalError("critical_intensity: failed to bracket beta_c below 1e6");
    }
    while (hi - lo > beta_tol) {
      const double mid = 0.5 * (lo + hi);
      (supercritical(mid) ? hi : lo) = mid;
    }
    const double beta_c_bisect = 0.5 * (lo + hi);

    result.per_box.push_back({half_width, beta_c_bisect, beta_c_green});
    bisected.push_back(beta_c_bisect);
    green.push_back(beta_c_green);
  }

  std::vector<int> widths(box_schedule.begin(), box_schedule.end());
  result.beta_c = std::max(0.0, richardson_extrapolate(widths, bisected));
  result.beta_c_green = std::max(0.0, richardson_extrapolate(widths, green));
  return result;
}

}  // namespace brw

#include "brw/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace brw {

namespace {

// |covolume| of the integer lattice spanned by the given vectors, via column
// Euclidean elimination. Equals 1 iff the vectors generate all of Z^d.
long long lattice_covolume(int dim, const std::vector<Site>& generators) {
  std::vector<std::vector<long long>> col;
  for (const Site& z : generators) {
    std::vector<long long> c(dim);
    for (int k = 0; k < dim; ++k) c[k] = z[k];
    col.push_back(std::move(c));
  }
  long long det = 1;
  for (int i = 0; i < dim; ++i) {
    std::size_t pivot = i;
    while (pivot < col.size() && col[pivot][i] == 0) ++pivot;
    if (pivot >= col.size()) return 0;  // rank deficient
    std::swap(col[i], col[pivot]);
    for (std::size_t j = i + 1; j < col.size(); ++j) {
      while (col[j][i] != 0) {
        const long long q = col[i][i] / col[j][i];
        for (int k = i; k < dim; ++k) col[i][k] -= q * col[j][k];
        std::swap(col[i], col[j]);
      }
    }
    det *= col[i][i];
  }
  return std::llabs(det);
}

}  // namespace

WalkKernel WalkKernel::simple(int dim, double total_rate) {
  if (dim < 1) throw std::invalid_argument("WalkKernel::simple: dimension must be >= 1");
  if (!(total_rate > 0)) throw std::invalid_argument("WalkKernel::simple: total rate must be > 0");
  std::vector<std::pair<Site, double>> jumps;
  const double per_neighbour = total_rate / (2.0 * dim);
  for (int k = 0; k < dim; ++k) {
    for (int s : {-1, +1}) {
      Site z = origin_site(dim);
      z[k] = s;
      jumps.emplace_back(z, per_neighbour);
    }
  }
  return from_offsets(dim, std::move(jumps));
}

WalkKernel WalkKernel::from_offsets(int dim, std::vector<std::pair<Site, double>> jumps) {
  if (dim < 1 || dim > kMaxDimension)
    throw std::invalid_argument("WalkKernel: dimension must be in 1.." + std::to_string(kMaxDimension));
  WalkKernel kernel;
  kernel.dim_ = dim;
  for (auto& [z, rate] : jumps) {
    if (z.size() != dim) throw std::invalid_argument("WalkKernel: offset dimension mismatch");
    if ((z == 0).all()) throw std::invalid_argument("WalkKernel: offset 0 is implicit and cannot be given");
    if (rate < 0) throw std::invalid_argument("WalkKernel: negative jump rate");
    if (rate == 0) continue;
    for (const auto& [z2, r2] : kernel.jumps_)
      if (same_site(z, z2)) throw std::invalid_argument("WalkKernel: duplicate offset");
    kernel.jumps_.emplace_back(z, rate);
    kernel.total_rate_ += rate;
  }
  if (kernel.jumps_.empty()) throw std::invalid_argument("WalkKernel: empty support");
  // Canonical offset order makes enumeration-dependent output reproducible.
  std::sort(kernel.jumps_.begin(), kernel.jumps_.end(), [](const auto& a, const auto& b) {
    return std::lexicographical_compare(a.first.data(), a.first.data() + a.first.size(),
                                        b.first.data(), b.first.data() + b.first.size());
  });
  return kernel;
}

double WalkKernel::rate(const Site& z) const {
  for (const auto& [off, r] : jumps_)
    if (same_site(off, z)) return r;
  return 0.0;
}

int WalkKernel::support_radius() const {
  int radius = 0;
  for (const auto& [z, r] : jumps_) radius = std::max(radius, z.abs().maxCoeff());
  return radius;
}

OffspringLaw OffspringLaw::from_rates(const std::map<int, double>& rates_except_b1) {
  int max_n = 0;
  for (const auto& [n, b] : rates_except_b1) {
    if (n < 0) throw std::invalid_argument("OffspringLaw: offspring count must be >= 0");
    if (n == 1) throw std::invalid_argument("OffspringLaw: b_1 is derived, not user-supplied");
    if (b < 0) throw std::invalid_argument("OffspringLaw: branching rates must be >= 0");
    if (b > 0) max_n = std::max(max_n, n);
  }
  std::vector<double> rates(std::size_t(std::max(max_n, 1)) + 1, 0.0);
  double sum = 0;
  for (const auto& [n, b] : rates_except_b1) {
    rates[std::size_t(n)] = b;
    sum += b;
  }
  rates[1] = -sum;
  return from_raw(std::move(rates));
}

OffspringLaw OffspringLaw::binary(double b0, double b2) {
  return from_rates({{0, b0}, {2, b2}});
}

OffspringLaw OffspringLaw::from_raw(std::vector<double> all_rates) {
  if (all_rates.size() < 2) all_rates.resize(2, 0.0);
  OffspringLaw law;
  law.rates_ = std::move(all_rates);
  return law;
}

double OffspringLaw::mean_rate() const {
  double beta = 0;
  for (std::size_t n = 1; n < rates_.size(); ++n) beta += double(n) * rates_[n];
  return beta;
}

double OffspringLaw::factorial_moment(int r) const {
  if (r < 1) throw std::invalid_argument("OffspringLaw: factorial moment order must be >= 1");
  double moment = 0;
  for (std::size_t n = std::size_t(r); n < rates_.size(); ++n) {
    double falling = 1;
    for (int k = 0; k < r; ++k) falling *= double(n - std::size_t(k));
    moment += falling * rates_[n];
  }
  return moment;
}

double OffspringLaw::eval_f(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("OffspringLaw: f(u) defined on [0,1]");
  return eval_f_unchecked(u);
}

double OffspringLaw::eval_f_unchecked(double u) const {
  double value = 0;
  for (std::size_t n = rates_.size(); n-- > 0;) value = value * u + rates_[n];
  return value;
}

bool OffspringLaw::is_zero() const {
  return std::all_of(rates_.begin(), rates_.end(), [](double b) { return b == 0.0; });
}

double eval_generating_function(const OffspringLaw& law, double u) {
  return law.eval_f(u);
}

std::vector<std::string> validate_model(const BrwModel& model) {
  std::vector<std::string> issues;
  const WalkKernel& kernel = model.kernel;

  for (const auto& [z, r] : kernel.jumps()) {
    const double mirror = kernel.rate(Site(-z));
    if (std::abs(r - mirror) > kRateClosureTol) {
      issues.push_back("kernel symmetry violated at offset " + site_to_string(z) + ": a(z)=" +
                       std::to_string(r) + ", a(-z)=" + std::to_string(mirror));
    }
  }

  std::vector<Site> support;
  for (const auto& [z, r] : kernel.jumps()) support.push_back(z);
  if (lattice_covolume(kernel.dim(), support) != 1)
    issues.push_back("kernel support does not generate the integer lattice (walk not irreducible)");

  const auto& b = model.law.rates();
  double sum = 0;
  for (std::size_t n = 0; n < b.size(); ++n) {
    sum += b[n];
    if (n != 1 && b[n] < 0)
      issues.push_back("branching rate b_" + std::to_string(n) + " is negative");
  }
  if (std::abs(sum) > kRateClosureTol)
    issues.push_back("branching rates do not conserve: sum b_n = " + std::to_string(sum));
  if (!model.law.is_zero() && !(model.law.rate(1) < 0))
    issues.push_back("b_1 must be negative for a nonzero law");
  if (!(model.source_holding_rate() > 0))
    issues.push_back("holding rate at the source is not positive");

  return issues;
}

}  // namespace brw

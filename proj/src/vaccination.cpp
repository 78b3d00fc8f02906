#include "brw/vaccination.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace brw {

namespace {

void check_alpha(const VaccinationParams& params) {
  if (!(params.alpha > 0.0 && params.alpha <= 1.0))
    throw std::invalid_argument("vaccination: alpha must lie in (0, 1]");
}

}  // namespace

OffspringLaw vaccinate(const OffspringLaw& law, const VaccinationParams& params) {
  check_alpha(params);
  std::map<int, double> damped;
  damped[0] = law.rate(0);
  for (int n = 2; n <= law.max_offspring(); ++n)
    damped[n] = std::pow(params.alpha, n - 1) * law.rate(n);
  return OffspringLaw::from_rates(damped);
}

double vaccinated_generating_function(const OffspringLaw& law, const VaccinationParams& params,
                                      double u) {
  check_alpha(params);
  if (!(u >= 0.0 && u <= 1.0))
    throw std::invalid_argument("vaccinated_generating_function: u must lie in [0, 1]");
  const double alpha = params.alpha;
  return (law.eval_f(0.0) * (1.0 - u) * (alpha - 1.0) + law.eval_f(alpha * u) -
          u * law.eval_f(alpha)) /
         alpha;
}

BrwModel vaccinated_model(const BrwModel& model, const VaccinationParams& params) {
  return BrwModel{model.kernel, vaccinate(model.law, params)};
}

}  // namespace brw

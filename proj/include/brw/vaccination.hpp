#pragma once

#include "brw/model.hpp"

namespace brw {

// Vaccine effectiveness: reproduction rates b_n, n >= 2, are damped by
// alpha^(n-1) while the death rate b_0 is left untouched.
struct VaccinationParams {
  double alpha = 1.0;  // in (0, 1]; alpha = 1 is the identity transform
};

// b~_0 = b_0, b~_n = alpha^(n-1) b_n for n >= 2, b~_1 rederived so the rates
// conserve. The result is admissible whenever the input is.
OffspringLaw vaccinate(const OffspringLaw& law, const VaccinationParams& params);

// Closed form of the damped generating function,
//   f~(u) = ( f(0)(1-u)(alpha-1) + f(alpha u) - u f(alpha) ) / alpha,
// equal to sum_n b~_n u^n of vaccinate(law).
double vaccinated_generating_function(const OffspringLaw& law, const VaccinationParams& params,
                                      double u);

// Same kernel, damped law; every downstream computation applies unchanged.
BrwModel vaccinated_model(const BrwModel& model, const VaccinationParams& params);

}  // namespace brw

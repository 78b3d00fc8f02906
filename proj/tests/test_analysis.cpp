#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "brw/analysis.hpp"
#include "brw/errors.hpp"
#include "brw/vaccination.hpp"

#include <cmath>
#include <vector>

using namespace brw;

namespace {

BrwModel simple_model(int d, double kappa, double b2, double b0 = 0.0) {
  return BrwModel{WalkKernel::simple(d, kappa), OffspringLaw::from_rates({{0, b0}, {2, b2}})};
}

}  // namespace

TEST_CASE("growth-law table rows") {
  SUBCASE("supercritical: e^{n lambda0 t} for both u and v") {
    const GrowthLaw law = predicted_growth_law(Regime::supercritical, 3, 2);
    CHECK(law.u.exp_multiplier == 2);
    CHECK(law.v.exp_multiplier == 2);
    CHECK(law.u.t_power == 0);
    CHECK(law.u.to_string() == "exp(2*lambda0*t)");
  }
  SUBCASE("subcritical d=2, n=1: u = (t ln^2 t)^{-1}, v = (ln t)^{-1}") {
    const GrowthLaw law = predicted_growth_law(Regime::subcritical, 2, 1);
    CHECK(law.u.t_power == doctest::Approx(-1.0));
    CHECK(law.u.log_power == -2);
    CHECK(law.v.t_power == doctest::Approx(0.0));
    CHECK(law.v.log_power == -1);
  }
  SUBCASE("subcritical d>=3: u = t^{-d/2}, v = 1") {
    const GrowthLaw law = predicted_growth_law(Regime::subcritical, 3, 4);
    CHECK(law.u.t_power == doctest::Approx(-1.5));
    CHECK(law.u.log_power == 0);
    CHECK(law.v.to_string() == "1");
  }
  SUBCASE("critical d=5, n=3: both t^{2n-1} = t^5") {
    const GrowthLaw law = predicted_growth_law(Regime::critical, 5, 3);
    CHECK(law.u.t_power == doctest::Approx(5.0));
    CHECK(law.v.t_power == doctest::Approx(5.0));
  }
  SUBCASE("critical d=1: u = t^{(n-1)/2} (ln t)^{n-1}") {
    const GrowthLaw law = predicted_growth_law(Regime::critical, 1, 3);
    CHECK(law.u.t_power == doctest::Approx(1.0));
    CHECK(law.u.log_power == 2);
    CHECK(law.v.t_power == doctest::Approx(1.0));
    CHECK(law.v.log_power == 0);
  }
  SUBCASE("critical d=3 row is stored verbatim: v = t^{n-1/2}") {
    const GrowthLaw law = predicted_growth_law(Regime::critical, 3, 2);
    CHECK(law.v.t_power == doctest::Approx(1.5));  // n - 1/2 with n = 2
    CHECK(law.u.t_power == doctest::Approx(-0.5));
    CHECK(law.u.log_power == 1);
  }
  SUBCASE("invalid combinations are rejected") {
    CHECK_THROWS_AS(predicted_growth_law(Regime::critical, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(predicted_growth_law(Regime::supercritical, 2, 0), std::invalid_argument);
  }
}

TEST_CASE("growth fitting on synthetic series") {
  std::vector<double> t, exact_exp, exact_pow, logcorr;
  for (int i = 0; i <= 200; ++i) {
    const double ti = 1.0 + 0.2 * i;
    t.push_back(ti);
    exact_exp.push_back(3.0 * std::exp(0.7 * ti));
    exact_pow.push_back(5.0 * std::pow(ti, -1.5));
    logcorr.push_back(2.0 * std::pow(ti, 2.0) * std::pow(std::log(ti), 3.0));
  }

  SUBCASE("exact exponential recovers the rate") {
    const GrowthFit fit = fit_growth_rate(t, exact_exp, 5.0, 30.0, GrowthForm{0, 0, 1});
    CHECK(fit.estimate == doctest::Approx(0.7).epsilon(1e-10));
    CHECK(fit.stderr_ < 1e-10);
    CHECK(fit.r_squared == doctest::Approx(1.0));
  }
  SUBCASE("exact power law recovers the log-log slope") {
    const GrowthFit fit = fit_growth_rate(t, exact_pow, 2.0, 40.0, GrowthForm{-1.5, 0, 0});
    CHECK(fit.estimate == doctest::Approx(-1.5).epsilon(1e-10));
  }
  SUBCASE("fixed log correction is subtracted before the fit") {
    const GrowthFit fit = fit_growth_rate(t, logcorr, 3.0, 40.0, GrowthForm{2.0, 3, 0});
    CHECK(fit.estimate == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("rescaling the series only shifts the intercept") {
    const GrowthFit base = fit_growth_rate(t, exact_exp, 5.0, 30.0, GrowthForm{0, 0, 1});
    std::vector<double> scaled = exact_exp;
    for (double& v : scaled) v *= 17.3;
    const GrowthFit moved = fit_growth_rate(t, scaled, 5.0, 30.0, GrowthForm{0, 0, 1});
    CHECK(base.estimate == doctest::Approx(moved.estimate).epsilon(1e-12));
  }
  SUBCASE("nonpositive values and degenerate windows are rejected") {
    std::vector<double> bad = exact_pow;
    bad[50] = 0.0;
    CHECK_THROWS_AS(fit_growth_rate(t, bad, 2.0, 40.0, GrowthForm{-1.5, 0, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_growth_rate(t, exact_exp, 100.0, 200.0, GrowthForm{0, 0, 1}),
                    std::invalid_argument);
  }
}

TEST_CASE("duality holds for symmetric kernels") {
  SUBCASE("no branching: both sides conserve") {
    const DualityReport rep =
        duality_check(simple_model(1, 1.0, 0.0), LatticeBox(1, 12), uniform_grid(2.0, 10));
    CHECK(rep.pass);
    CHECK(rep.max_gap < 1e-12);
  }
  SUBCASE("supercritical acceptance configuration") {
    const DualityReport rep =
        duality_check(simple_model(1, 1.0, 2.0), LatticeBox(1, 40), uniform_grid(5.0, 25));
    CHECK(rep.pass);
    CHECK(rep.max_gap < 1e-9);
  }
}

TEST_CASE("duality fails for an asymmetric kernel (negative control)") {
  Site plus(1), minus(1);
  plus[0] = 1;
  minus[0] = -1;
  const WalkKernel skew = WalkKernel::from_offsets(1, {{plus, 0.7}, {minus, 0.3}});
  const BrwModel model{skew, OffspringLaw::from_rates({{2, 1.0}})};
  REQUIRE(!validate_model(model).empty());

  const auto grid = uniform_grid(4.0, 8);
  const DualityReport rep = duality_check(model, LatticeBox(1, 20), grid);
  CHECK(!rep.pass);
  CHECK(rep.max_gap > 1e-3);
  // the mismatch grows with time
  const Eigen::Index last = Eigen::Index(grid.size()) - 1;
  CHECK(rep.gap.col(last).maxCoeff() > rep.gap.col(1).maxCoeff());
}

TEST_CASE("duality gap is insensitive to tightening the integrator tolerance") {
  const BrwModel model = simple_model(1, 1.0, 1.0);
  ode::Options loose;  // defaults
  ode::Options tight;
  tight.abs_tol = 1e-12;
  tight.rel_tol = 1e-10;
  const auto grid = uniform_grid(3.0, 12);
  const DualityReport a = duality_check(model, LatticeBox(1, 15), grid, 1e-9, loose);
  const DualityReport b = duality_check(model, LatticeBox(1, 15), grid, 1e-9, tight);
  CHECK(a.pass);
  CHECK(b.pass);
  CHECK(b.max_gap <= a.max_gap + 1e-15);
}

TEST_CASE("regime classification") {
  const std::vector<int> schedule{6, 10};
  SUBCASE("zero branching in d=3 is subcritical") {
    const RegimeReport rep = classify_regime(simple_model(3, 1.0, 0.0), schedule);
    CHECK(rep.regime == Regime::subcritical);
    CHECK(rep.lambda0 <= kEigenvaluePositiveThreshold);
  }
  SUBCASE("beta = 2 / G_0(0,0) in d=3 is supercritical") {
    const BrwModel walk_only{WalkKernel::simple(3, 1.0), OffspringLaw::from_rates({})};
    const double g0 =
        green_function_at_origin(build_operator(walk_only, LatticeBox(3, 10), false), 0.0).value;
    const RegimeReport rep = classify_regime(simple_model(3, 1.0, 2.0 / g0), schedule);
    CHECK(rep.regime == Regime::supercritical);
    CHECK(rep.lambda0 > kEigenvaluePositiveThreshold);
  }
  SUBCASE("any positive beta in d=1 is supercritical") {
    const std::vector<int> schedule1{10, 20};
    const RegimeReport rep = classify_regime(simple_model(1, 1.0, 0.3), schedule1);
    CHECK(rep.regime == Regime::supercritical);
  }
  SUBCASE("beta pinned at the estimated critical point lands in the band") {
    const CriticalityResult crit = critical_intensity(simple_model(3, 1.0, 1.0), schedule);
    const RegimeReport rep = classify_regime(simple_model(3, 1.0, crit.beta_c), schedule);
    CHECK(rep.regime == Regime::critical);
  }
}

TEST_CASE("vaccination sweep transitions monotonically with a single sign change") {
  const LatticeBox box(3, 8);
  const BrwModel walk_only{WalkKernel::simple(3, 1.0), OffspringLaw::from_rates({})};
  const TruncatedOperator walk = build_operator(walk_only, box, false);
  const double beta_c = 1.0 / green_function_at_origin(walk, 0.0).value;
  const OffspringLaw law = OffspringLaw::from_rates({{2, 1.5 * beta_c}});

  std::vector<double> lambdas;
  for (int i = 10; i >= 1; --i) {
    const double beta_tilde = vaccinate(law, {double(i) / 10.0}).mean_rate();
    lambdas.push_back(principal_eigenvalue(with_branching_weight(walk, beta_tilde)).value);
  }
  int sign_changes = 0;
  for (std::size_t i = 1; i < lambdas.size(); ++i) {
    CHECK(lambdas[i] <= lambdas[i - 1] + 1e-9);
    const bool was = lambdas[i - 1] > kEigenvaluePositiveThreshold;
    const bool is = lambdas[i] > kEigenvaluePositiveThreshold;
    if (was && !is) ++sign_changes;
  }
  CHECK(sign_changes == 1);
}

TEST_CASE("recommended box half-width follows the leakage rule") {
  CHECK(recommended_half_width(1.0, 30.0, 1) == 17);  // ceil(3 sqrt(30))
  CHECK(recommended_half_width(1.0, 80.0, 3) == int(std::ceil(3 * std::sqrt(240.0))));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "brw/errors.hpp"
#include "brw/moments.hpp"
#include "brw/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace brw;

namespace {

BrwModel simple_model(int d, double kappa, double b2, double b0 = 0.0) {
  return BrwModel{WalkKernel::simple(d, kappa), OffspringLaw::from_rates({{0, b0}, {2, b2}})};
}

// Asymptotic Kolmogorov-Smirnov p-value.
double ks_pvalue(double d_stat, std::size_t n) {
  const double x = (std::sqrt(double(n)) + 0.12 + 0.11 / std::sqrt(double(n))) * d_stat;
  double p = 0;
  for (int k = 1; k <= 100; ++k) p += 2 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * x * x);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST_CASE("random streams are deterministic and replica-independent") {
  RandomStream a(42, 7), b(42, 7), c(42, 8);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const double ua = a.uniform();
    all_equal = all_equal && ua == b.uniform();
    any_diff = any_diff || ua != c.uniform();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("pure walk events preserve the particle count") {
  const BrwModel model = simple_model(2, 1.0, 0.0);
  ParticleSystem system =
      make_particle_system(model, InitialCondition::single_at(origin_site(2)), 9, 0, 1000);
  for (int i = 0; i < 500; ++i) {
    const EventRecord rec = step(system, model);
    CHECK(!rec.branched);
    CHECK(system.particles.size() == 1);
  }
  CHECK(system.events == 500);
  CHECK(system.time > 0);
}

TEST_CASE("death-only law: every branching event removes the particle") {
  const BrwModel model{WalkKernel::simple(1, 1.0), OffspringLaw::from_rates({{0, 3.0}})};
  int deaths = 0;
  for (std::uint64_t replica = 0; replica < 50; ++replica) {
    ParticleSystem system =
        make_particle_system(model, InitialCondition::single_at(origin_site(1)), 3, replica, 100);
    while (!system.particles.empty()) {
      const std::size_t before = system.particles.size();
      const EventRecord rec = step(system, model);
      if (rec.branched) {
        CHECK(rec.offspring == 0);
        CHECK(system.particles.size() == before - 1);
        ++deaths;
      }
    }
  }
  CHECK(deaths == 50);
}

TEST_CASE("waiting times off the source are Exponential(|a(0)|)") {
  const BrwModel model = simple_model(1, 1.0, 0.0);  // rate 1 everywhere for the zero law
  ParticleSystem system =
      make_particle_system(model, InitialCondition::single_at(origin_site(1)), 2024, 0, 10);
  const std::size_t n = 10000;
  std::vector<double> samples(n);
  double prev = 0;
  for (std::size_t i = 0; i < n; ++i) {
    step(system, model);
    samples[i] = system.time - prev;
    prev = system.time;
  }
  std::sort(samples.begin(), samples.end());
  double d_stat = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double cdf = 1.0 - std::exp(-samples[i]);
    d_stat = std::max(d_stat, std::abs(cdf - double(i + 1) / double(n)));
    d_stat = std::max(d_stat, std::abs(cdf - double(i) / double(n)));
  }
  CHECK(ks_pvalue(d_stat, n) > 0.01);
}

TEST_CASE("aggregate event rate matches the per-particle sum") {
  const BrwModel model = simple_model(1, 1.3, 0.4, 0.2);
  ParticleSystem system = make_particle_system(model, InitialCondition::window(2), 5, 0, 1000);
  // 5 particles: one at the source (rate kappa + |b_1|), four off (rate kappa)
  double expected = 0;
  for (const Particle& p : system.particles)
    expected += (p.pos == 0).all() ? model.source_holding_rate() : model.kernel.total_rate();
  CHECK(total_event_rate(system, model) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(system.at_source == 1);
}

TEST_CASE("stepping an empty system is an error; cap overflow is reported") {
  const BrwModel model = simple_model(1, 1.0, 5.0);
  ParticleSystem system =
      make_particle_system(model, InitialCondition::single_at(origin_site(1)), 1, 0, 4);
  CHECK_THROWS_AS(
      [&] {
        for (int i = 0; i < 100000; ++i) step(system, model);
      }(),
      ParticleCapError);

  ParticleSystem empty =
      make_particle_system(model, InitialCondition::single_at(origin_site(1)), 1, 0, 100);
  empty.particles.clear();
  empty.at_source = 0;
  CHECK_THROWS_AS(step(empty, model), std::logic_error);
}

TEST_CASE("run aborts the batch when more than 1% of replicas hit the cap") {
  const BrwModel model = simple_model(1, 1.0, 20.0);
  RunSpec spec;
  spec.horizon = 5.0;
  spec.replicas = 50;
  spec.seed = 3;
  spec.checkpoints = {5.0};
  spec.particle_cap = 8;
  CHECK_THROWS_AS(run(model, InitialCondition::single_at(origin_site(1)), spec), ParticleCapError);
}

TEST_CASE("horizon zero echoes the initial condition") {
  const BrwModel model = simple_model(2, 1.0, 0.7);
  RunSpec spec;
  spec.horizon = 0.0;
  spec.replicas = 4;
  spec.seed = 1;
  spec.checkpoints = {0.0};
  spec.sites = {origin_site(2)};
  const TrajectoryStatistics single =
      run(model, InitialCondition::single_at(origin_site(2)), spec);
  CHECK((single.population.array() == 1).all());
  CHECK((single.site_counts.array() == 1).all());

  const TrajectoryStatistics window = run(model, InitialCondition::window(2), spec);
  CHECK((window.population.array() == 25).all());
  CHECK((window.site_counts.array() == 1).all());
}

TEST_CASE("walk-only population stays at one in every replica") {
  const BrwModel model = simple_model(1, 1.0, 0.0);
  RunSpec spec;
  spec.horizon = 3.0;
  spec.replicas = 200;
  spec.seed = 5;
  spec.checkpoints = {0.5, 1.5, 3.0};
  const TrajectoryStatistics stats =
      run(model, InitialCondition::single_at(origin_site(1)), spec);
  CHECK((stats.population.array() == 1).all());
}

TEST_CASE("identical runs are bit-identical across thread counts") {
  const BrwModel model = simple_model(1, 1.0, 0.8, 0.3);
  RunSpec spec;
  spec.horizon = 2.0;
  spec.replicas = 500;
  spec.seed = 77;
  spec.checkpoints = {1.0, 2.0};
  spec.sites = {origin_site(1)};
  const InitialCondition ic = InitialCondition::single_at(origin_site(1));

  spec.threads = 1;
  const TrajectoryStatistics a = run(model, ic, spec);
  const TrajectoryStatistics b = run(model, ic, spec);
  spec.threads = 3;
  const TrajectoryStatistics c = run(model, ic, spec);
  CHECK(a.population == b.population);
  CHECK(a.population == c.population);
  CHECK(a.site_counts == b.site_counts);
  CHECK(a.site_counts == c.site_counts);
}

TEST_CASE("single-particle mean population tracks the first-moment equation") {
  const BrwModel model = simple_model(1, 1.0, 0.5);
  RunSpec spec;
  spec.horizon = 2.0;
  spec.replicas = 20000;
  spec.seed = 12;
  spec.checkpoints = {2.0};
  spec.threads = 4;
  const TrajectoryStatistics stats =
      run(model, InitialCondition::single_at(origin_site(1)), spec);

  const LatticeBox box(1, 20);
  const auto fields =
      evolve_higher_moments(model, box, Flavor::total, std::nullopt, 2, uniform_grid(2.0, 8));
  const double m1 = fields[0].values(box.origin_index(), 8);
  const double m2 = fields[1].values(box.origin_index(), 8);

  const MomentEstimate e1 = estimate_population_moment(stats, 0, 1);
  const MomentEstimate e2 = estimate_population_moment(stats, 0, 2);
  CHECK(std::abs(e1.value - m1) < 3 * e1.stderr_);
  CHECK(std::abs(e2.value - m2) < 3 * e2.stderr_);
}

TEST_CASE("local counts from a shifted start match the local moment field") {
  const BrwModel model = simple_model(1, 1.0, 0.5);
  Site start(1);
  start[0] = 2;
  RunSpec spec;
  spec.horizon = 1.5;
  spec.replicas = 20000;
  spec.seed = 21;
  spec.checkpoints = {1.5};
  spec.sites = {origin_site(1)};
  spec.threads = 4;
  const TrajectoryStatistics stats = run(model, InitialCondition::single_at(start), spec);

  const LatticeBox box(1, 20);
  const MomentField local =
      evolve_first_moment(model, box, Flavor::local, origin_site(1), uniform_grid(1.5, 6));
  const double expected = local.values(box.index_of(start), 6);  // M_1(t, x=2, y=0)
  const MomentEstimate est = estimate_site_moment(stats, 0, 0, 1);
  CHECK(std::abs(est.value - expected) < 3 * est.stderr_);
}

TEST_CASE("window initial condition: additivity, symmetry, forward equation") {
  const BrwModel model = simple_model(1, 1.0, 0.8);
  Site y(1), my(1);
  y[0] = 2;
  my[0] = -2;
  RunSpec spec;
  spec.horizon = 2.0;
  spec.replicas = 4000;
  spec.seed = 31;
  spec.checkpoints = {1.0, 2.0};
  spec.sites = {origin_site(1), y, my};
  spec.track_ancestors = true;
  spec.threads = 2;
  const TrajectoryStatistics stats = run(model, InitialCondition::window(12), spec);

  // eta_t(y) = sum over ancestors of eta_{x,t}(y), exactly, replica by replica
  for (std::int64_t r = 0; r < spec.replicas; r += 97) {
    for (Eigen::Index col = 0; col < stats.site_counts.cols(); ++col) {
      const std::int64_t total = stats.site_counts(r, col);
      CHECK(stats.anc_site_counts[std::size_t(r)].col(col).sum() == total);
    }
    CHECK(stats.anc_population[std::size_t(r)].col(1).sum() == stats.population(r, 1));
  }

  // symmetric kernel + symmetric initial condition: counts at y and -y agree
  const MomentEstimate at_y = estimate_site_moment(stats, 1, 1, 1);
  const MomentEstimate at_my = estimate_site_moment(stats, 1, 2, 1);
  CHECK(std::abs(at_y.value - at_my.value) < 3 * (at_y.stderr_ + at_my.stderr_));

  // the origin count tracks the forward equation
  const LatticeBox box(1, 6);
  const MomentField fwd = evolve_forward_first_moment(model, box, uniform_grid(2.0, 8));
  const MomentEstimate at0 = estimate_site_moment(stats, 1, 0, 1);
  CHECK(std::abs(at0.value - fwd.values(box.origin_index(), 8)) < 3 * at0.stderr_);
}

TEST_CASE("doubling the window changes the infinite-IC estimate by less than one SE") {
  const BrwModel model = simple_model(1, 1.0, 0.6);
  RunSpec spec;
  spec.horizon = 2.0;
  spec.replicas = 30000;
  spec.seed = 101;
  spec.checkpoints = {2.0};
  spec.sites = {origin_site(1)};
  spec.threads = 4;
  const TrajectoryStatistics narrow = run(model, InitialCondition::window(10), spec);
  const TrajectoryStatistics wide = run(model, InitialCondition::window(20), spec);
  const MomentEstimate en = estimate_site_moment(narrow, 0, 0, 1);
  const MomentEstimate ew = estimate_site_moment(wide, 0, 0, 1);
  CHECK(std::abs(en.value - ew.value) < std::max(en.stderr_, ew.stderr_));
}

TEST_CASE("moment estimation edge cases") {
  const BrwModel model = simple_model(1, 1.0, 0.0);
  RunSpec spec;
  spec.horizon = 1.0;
  spec.replicas = 100;
  spec.seed = 2;
  spec.checkpoints = {1.0};
  const TrajectoryStatistics stats =
      run(model, InitialCondition::single_at(origin_site(1)), spec);
  const MomentEstimate est = estimate_population_moment(stats, 0, 1);
  CHECK(est.value == 1.0);     // constant data
  CHECK(est.stderr_ == 0.0);   // zero jackknife spread
  CHECK(est.replicas == 100);

  RunSpec one = spec;
  one.replicas = 1;
  const TrajectoryStatistics single =
      run(model, InitialCondition::single_at(origin_site(1)), one);
  CHECK_THROWS_AS(estimate_population_moment(single, 0, 1), std::invalid_argument);
}

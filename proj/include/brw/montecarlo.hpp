#pragma once

#include "brw/lattice.hpp"
#include "brw/model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <vector>

namespace brw {

// Deterministic per-replica random stream. Streams are derived from
// (seed, stream index) through SplitMix64, so replicas are independent and
// reproducible regardless of how they are scheduled onto threads.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  double uniform();  // [0, 1)
  double exponential(double rate);

 private:
  std::mt19937_64 gen_;
};

struct Particle {
  Site pos;
  std::int32_t ancestor = 0;
};

struct InitialCondition {
  enum class Kind { single, window };
  Kind kind = Kind::single;
  Site start;             // single: starting site of the one particle
  int window_half_width = 0;  // window: one particle per site of [-W, W]^d

  static InitialCondition single_at(Site x0);
  static InitialCondition window(int window_half_width);
};

// Event-driven particle state. Particles [0, at_source) sit at the origin.
struct ParticleSystem {
  std::vector<Particle> particles;
  std::size_t at_source = 0;
  double time = 0;
  std::uint64_t events = 0;
  std::size_t cap = 1'000'000;
  RandomStream rng;
  int dim = 1;
};

ParticleSystem make_particle_system(const BrwModel& model, const InitialCondition& ic,
                                    std::uint64_t seed, std::uint64_t replica, std::size_t cap);

// Aggregate exponential race rate: |a(0)| per particle off the source,
// |a(0)| + |b_1| at the source.
double total_event_rate(const ParticleSystem& system, const BrwModel& model);

std::int64_t count_at(const ParticleSystem& system, const Site& y);
std::int64_t subpopulation_size(const ParticleSystem& system, std::int32_t ancestor);

struct EventRecord {
  double dt = 0;
  bool branched = false;
  int offspring = -1;  // meaningful when branched; 0 means death
};

// One exponential-race event: time advance, particle selection, jump or
// branching. Throws ParticleCapError past the cap and std::logic_error on an
// empty system.
EventRecord step(ParticleSystem& system, const BrwModel& model);

struct RunSpec {
  double horizon = 1.0;
  std::int64_t replicas = 1;
  std::uint64_t seed = 1;
  std::vector<double> checkpoints;  // ascending, within [0, horizon]
  std::vector<Site> sites;          // sites whose occupation numbers are recorded
  std::size_t particle_cap = 1'000'000;
  int threads = 1;
  bool track_ancestors = false;  // per-subpopulation tallies (memory-heavy)
};

struct TrajectoryStatistics {
  std::vector<double> checkpoints;
  std::vector<Site> sites;
  int n_ancestors = 1;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> population;   // r x c
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> site_counts;  // r x (c*S + s)
  std::vector<char> capped;
  std::int64_t capped_count = 0;
  // Filled only when track_ancestors: per replica, (a x c) and (a x (c*S+s)).
  std::vector<Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>> anc_population;
  std::vector<Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>> anc_site_counts;
};

// Simulates all replicas to the horizon. Results are bit-identical for a fixed
// (model, ic, spec) regardless of the thread count. Throws ParticleCapError if
// more than 1% of replicas hit the particle cap.
TrajectoryStatistics run(const BrwModel& model, const InitialCondition& ic, const RunSpec& spec);

struct MomentEstimate {
  double value = 0;
  double stderr_ = 0;
  std::int64_t replicas = 0;
};

// Sample mean of count^order with a jackknife standard error.
MomentEstimate estimate_population_moment(const TrajectoryStatistics& stats,
                                          std::size_t checkpoint, int order);
MomentEstimate estimate_site_moment(const TrajectoryStatistics& stats, std::size_t checkpoint,
                                    std::size_t site, int order);

}  // namespace brw

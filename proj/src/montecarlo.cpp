#include "brw/montecarlo.hpp"

#include "brw/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

namespace brw {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed;
  splitmix64(state);
  state ^= 0x517cc1b727220a95ull * (stream + 1);
  gen_.seed(splitmix64(state));
}

double RandomStream::uniform() {
  return double(gen_() >> 11) * 0x1.0p-53;
}

double RandomStream::exponential(double rate) {
  return -std::log1p(-uniform()) / rate;
}

InitialCondition InitialCondition::single_at(Site x0) {
  InitialCondition ic;
  ic.kind = Kind::single;
  ic.start = std::move(x0);
  return ic;
}

InitialCondition InitialCondition::window(int window_half_width) {
  if (window_half_width < 0)
    throw std::invalid_argument("InitialCondition::window: half width must be >= 0");
  InitialCondition ic;
  ic.kind = Kind::window;
  ic.window_half_width = window_half_width;
  return ic;
}

ParticleSystem make_particle_system(const BrwModel& model, const InitialCondition& ic,
                                    std::uint64_t seed, std::uint64_t replica, std::size_t cap) {
  const int dim = model.kernel.dim();
  ParticleSystem system{{}, 0, 0.0, 0, cap, RandomStream(seed, replica), dim};
  if (ic.kind == InitialCondition::Kind::single) {
    Site start = ic.start.size() == 0 ? origin_site(dim) : ic.start;
    if (start.size() != dim)
      throw std::invalid_argument("initial condition: starting site has the wrong dimension");
    system.particles.push_back({start, 0});
  } else {
    const LatticeBox window(dim, std::max(ic.window_half_width, 1));
    system.particles.reserve(std::size_t(window.size()));
    for (Eigen::Index i = 0; i < window.size(); ++i)
      system.particles.push_back({window.point_of(i), std::int32_t(i)});
  }
  // Keep source particles at the front of the list.
  std::size_t s = 0;
  for (std::size_t i = 0; i < system.particles.size(); ++i) {
    if ((system.particles[i].pos == 0).all()) {
      std::swap(system.particles[i], system.particles[s]);
      ++s;
    }
  }
  system.at_source = s;
  if (system.particles.size() > cap)
    throw ParticleCapError("initial condition exceeds the particle cap");
  return system;
}

double total_event_rate(const ParticleSystem& system, const BrwModel& model) {
  const double walk_rate = model.kernel.total_rate();
  const double source_rate = model.source_holding_rate();
  const double off = double(system.particles.size() - system.at_source);
  return off * walk_rate + double(system.at_source) * source_rate;
}

std::int64_t count_at(const ParticleSystem& system, const Site& y) {
  std::int64_t n = 0;
  for (const Particle& p : system.particles) n += same_site(p.pos, y) ? 1 : 0;
  return n;
}

std::int64_t subpopulation_size(const ParticleSystem& system, std::int32_t ancestor) {
  std::int64_t n = 0;
  for (const Particle& p : system.particles) n += p.ancestor == ancestor ? 1 : 0;
  return n;
}

namespace {

double sample_event_time(ParticleSystem& system, const BrwModel& model) {
  return system.rng.exponential(total_event_rate(system, model));
}

Site sample_jump_offset(const BrwModel& model, double u) {
  // u uniform in [0,1); cumulative search over the canonically ordered support
  double target = u * model.kernel.total_rate();
  for (const auto& [z, rate] : model.kernel.jumps()) {
    target -= rate;
    if (target < 0) return z;
  }
  return model.kernel.jumps().back().first;
}

int sample_offspring_count(const OffspringLaw& law, double u) {
  double target = u * (-law.rate(1));
  for (int n = 0; n <= law.max_offspring(); ++n) {
    if (n == 1) continue;
    target -= law.rate(n);
    if (target < 0) return n;
  }
  return 0;
}

// Applies one event; the waiting time has already been consumed.
EventRecord apply_event(ParticleSystem& system, const BrwModel& model, double dt) {
  EventRecord record;
  record.dt = dt;
  system.time += dt;
  ++system.events;

  const double walk_rate = model.kernel.total_rate();
  const double source_rate = model.source_holding_rate();
  const std::size_t n_source = system.at_source;
  const std::size_t n_off = system.particles.size() - n_source;
  const double off_total = double(n_off) * walk_rate;
  const double total = off_total + double(n_source) * source_rate;

  std::size_t idx;
  bool branch_event = false;
  if (system.rng.uniform() * total < off_total) {
    idx = n_source + std::min(n_off - 1, std::size_t(system.rng.uniform() * double(n_off)));
  } else {
    idx = std::min(n_source - 1, std::size_t(system.rng.uniform() * double(n_source)));
    branch_event = system.rng.uniform() * source_rate >= walk_rate;
  }

  if (!branch_event) {
    Particle& p = system.particles[idx];
    const bool was_source = idx < system.at_source;
    p.pos += sample_jump_offset(model, system.rng.uniform());
    const bool now_source = (p.pos == 0).all();
    if (was_source && !now_source) {
      std::swap(system.particles[idx], system.particles[system.at_source - 1]);
      --system.at_source;
    } else if (!was_source && now_source) {
      std::swap(system.particles[idx], system.particles[system.at_source]);
      ++system.at_source;
    }
    return record;
  }

  record.branched = true;
  const int offspring = sample_offspring_count(model.law, system.rng.uniform());
  record.offspring = offspring;
  if (offspring == 0) {
    std::swap(system.particles[idx], system.particles[system.at_source - 1]);
    --system.at_source;
    std::swap(system.particles[system.at_source], system.particles.back());
    system.particles.pop_back();
    return record;
  }
  // The particle itself counts among the offspring; add the other n-1 at the source.
  const Particle parent = system.particles[idx];
  for (int k = 1; k < offspring; ++k) {
    system.particles.push_back(parent);
    std::swap(system.particles[system.at_source], system.particles.back());
    ++system.at_source;
  }
  if (system.particles.size() > system.cap)
    throw ParticleCapError("particle cap of " + std::to_string(system.cap) + " exceeded at t = " +
                           std::to_string(system.time));
  return record;
}

}  // namespace

EventRecord step(ParticleSystem& system, const BrwModel& model) {
  if (system.particles.empty()) throw std::logic_error("step: no particles alive");
  const double dt = sample_event_time(system, model);
  return apply_event(system, model, dt);
}

namespace {

struct ReplicaRecorder {
  const RunSpec* spec;
  TrajectoryStatistics* stats;
  std::int64_t replica;

  void record(const ParticleSystem& system, std::size_t checkpoint) const {
    const std::size_t n_sites = spec->sites.size();
    stats->population(replica, Eigen::Index(checkpoint)) = std::int64_t(system.particles.size());
    for (std::size_t s = 0; s < n_sites; ++s)
      stats->site_counts(replica, Eigen::Index(checkpoint * n_sites + s)) =
          count_at(system, spec->sites[s]);
    if (spec->track_ancestors) {
      auto& anc_pop = stats->anc_population[std::size_t(replica)];
      auto& anc_site = stats->anc_site_counts[std::size_t(replica)];
      for (const Particle& p : system.particles) {
        anc_pop(p.ancestor, Eigen::Index(checkpoint)) += 1;
        for (std::size_t s = 0; s < n_sites; ++s)
          if (same_site(p.pos, spec->sites[s]))
            anc_site(p.ancestor, Eigen::Index(checkpoint * n_sites + s)) += 1;
      }
    }
  }
};

void simulate_replica(const BrwModel& model, const InitialCondition& ic, const RunSpec& spec,
                      TrajectoryStatistics& stats, std::int64_t replica) {
  ParticleSystem system =
      make_particle_system(model, ic, spec.seed, std::uint64_t(replica), spec.particle_cap);
  const ReplicaRecorder recorder{&spec, &stats, replica};
  const std::size_t n_checkpoints = spec.checkpoints.size();
  std::size_t ci = 0;
  try {
    while (ci < n_checkpoints) {
      if (system.particles.empty()) {
        for (; ci < n_checkpoints; ++ci) recorder.record(system, ci);
        break;
      }
      const double dt = sample_event_time(system, model);
      const double t_next = system.time + dt;
      for (; ci < n_checkpoints && spec.checkpoints[ci] <= t_next; ++ci)
        recorder.record(system, ci);
      if (ci >= n_checkpoints) break;
      apply_event(system, model, dt);
    }
  } catch (const ParticleCapError&) {
    stats.capped[std::size_t(replica)] = 1;
    for (; ci < n_checkpoints; ++ci) recorder.record(system, ci);
  }
}

}  // namespace

TrajectoryStatistics run(const BrwModel& model, const InitialCondition& ic, const RunSpec& spec) {
  if (spec.horizon < 0) throw std::invalid_argument("run: horizon must be >= 0");
  if (spec.replicas < 1) throw std::invalid_argument("run: need at least one replica");
  for (std::size_t i = 0; i < spec.checkpoints.size(); ++i) {
    if (spec.checkpoints[i] < 0 || spec.checkpoints[i] > spec.horizon)
      throw std::invalid_argument("run: checkpoints must lie in [0, horizon]");
    if (i > 0 && spec.checkpoints[i] < spec.checkpoints[i - 1])
      throw std::invalid_argument("run: checkpoints must be ascending");
  }

  TrajectoryStatistics stats;
  stats.checkpoints = spec.checkpoints;
  stats.sites = spec.sites;
  stats.n_ancestors = ic.kind == InitialCondition::Kind::single
                          ? 1
                          : int(LatticeBox(model.kernel.dim(), std::max(ic.window_half_width, 1)).size());
  const Eigen::Index r = Eigen::Index(spec.replicas);
  const Eigen::Index cs = Eigen::Index(spec.checkpoints.size());
  stats.population.setZero(r, cs);
  stats.site_counts.setZero(r, cs * Eigen::Index(spec.sites.size()));
  stats.capped.assign(std::size_t(spec.replicas), 0);
  if (spec.track_ancestors) {
    stats.anc_population.assign(
        std::size_t(spec.replicas),
        Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(stats.n_ancestors, cs));
    stats.anc_site_counts.assign(std::size_t(spec.replicas),
                                 Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(
                                     stats.n_ancestors, cs * Eigen::Index(spec.sites.size())));
  }

  const int threads = std::max(1, std::min<int>(spec.threads, int(spec.replicas)));
  if (threads == 1) {
    for (std::int64_t i = 0; i < spec.replicas; ++i) simulate_replica(model, ic, spec, stats, i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(threads));
    for (int w = 0; w < threads; ++w) {
      const std::int64_t lo = spec.replicas * w / threads;
      const std::int64_t hi = spec.replicas * (w + 1) / threads;
      pool.emplace_back([&, lo, hi] {
        for (std::int64_t i = lo; i < hi; ++i) simulate_replica(model, ic, spec, stats, i);
      });
    }
    for (auto& t : pool) t.join();
  }

  stats.capped_count = std::count(stats.capped.begin(), stats.capped.end(), 1);
  if (double(stats.capped_count) > 0.01 * double(spec.replicas))
    throw ParticleCapError("particle cap exceeded in " + std::to_string(stats.capped_count) +
                           " of " + std::to_string(spec.replicas) + " replicas (> 1%)");
  return stats;
}

namespace {

MomentEstimate jackknife_mean(const TrajectoryStatistics& stats,
                              const Eigen::Ref<const Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>>& counts,
                              int order) {
  const Eigen::Index r = counts.size();
  if (r < 2) throw std::invalid_argument("moment estimation needs at least two replicas");
  if (order < 1) throw std::invalid_argument("moment order must be >= 1");
  Eigen::VectorXd x(r);
  for (Eigen::Index i = 0; i < r; ++i) x[i] = std::pow(double(counts[i]), order);
  const double sum = x.sum();
  const double mean = sum / double(r);
  // Leave-one-out means; their spread gives the jackknife standard error.
  double ss = 0;
  for (Eigen::Index i = 0; i < r; ++i) {
    const double loo = (sum - x[i]) / double(r - 1);
    ss += (loo - mean) * (loo - mean);
  }
  const double se = std::sqrt(ss * double(r - 1) / double(r));
  return {mean, se, r};
}

}  // namespace

MomentEstimate estimate_population_moment(const TrajectoryStatistics& stats,
                                          std::size_t checkpoint, int order) {
  return jackknife_mean(stats, stats.population.col(Eigen::Index(checkpoint)), order);
}

MomentEstimate estimate_site_moment(const TrajectoryStatistics& stats, std::size_t checkpoint,
                                    std::size_t site, int order) {
  const std::size_t n_sites = stats.sites.size();
  return jackknife_mean(stats, stats.site_counts.col(Eigen::Index(checkpoint * n_sites + site)),
                        order);
}

}  // namespace brw

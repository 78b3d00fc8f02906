#include "brw/cli.hpp"

#include "brw/analysis.hpp"
#include "brw/config.hpp"
#include "brw/csv.hpp"
#include "brw/errors.hpp"
#include "brw/moments.hpp"
#include "brw/montecarlo.hpp"
#include "brw/operators.hpp"
#include "brw/vaccination.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <thread>

namespace brw::cli {

namespace {

struct CommonOpts {
  std::string config_path;
  std::string output_dir = ".";
  int threads = 0;
  std::optional<std::uint64_t> seed_flag;
};

std::uint64_t resolve_seed(const RunConfig& cfg, const CommonOpts& opts) {
  if (opts.seed_flag) return *opts.seed_flag;
  if (const char* env = std::getenv("BRWLAB_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("BRWLAB_SEED must be an unsigned integer");
    }
  }
  return cfg.seed;
}

int resolve_threads(const CommonOpts& opts) {
  if (opts.threads > 0) return opts.threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

std::string out_path(const CommonOpts& opts, const std::string& file) {
  std::filesystem::create_directories(opts.output_dir);
  return (std::filesystem::path(opts.output_dir) / file).string();
}

std::vector<std::string> coordinate_header(const std::string& prefix, int dim) {
  std::vector<std::string> names;
  for (int k = 0; k < dim; ++k) names.push_back(prefix + std::to_string(k));
  return names;
}

void append_coordinates(std::vector<std::string>& row, const Site& s) {
  for (int k = 0; k < s.size(); ++k) row.push_back(std::to_string(s[k]));
}

void cmd_analyze(const CommonOpts& opts, bool emit_transition) {
  const RunConfig cfg = RunConfig::load(opts.config_path);
  const BrwModel& model = cfg.model;
  const int d = cfg.dimension();

  std::vector<double> betas = cfg.beta_grid;
  if (betas.empty()) {
    const double hi = 2.0 * std::max(model.beta(), 1.0);
    for (int i = 0; i <= 8; ++i) betas.push_back(hi * double(i) / 8.0);
  }

  CsvWriter eig(out_path(opts, "eigenvalue_vs_beta.csv"), {"L", "beta", "lambda0"});
  for (int half_width : cfg.box_schedule) {
    const LatticeBox box(d, half_width);
    const TruncatedOperator walk = build_operator(model, box, false);
    Eigen::VectorXd warm;
    for (double beta : betas) {
      EigenOptions eo;
      if (warm.size() > 0) eo.warm_start = &warm;
      const EigenResult res = principal_eigenvalue(with_branching_weight(walk, beta), eo);
      if (!res.converged)
        throw NumericalError("analyze: eigen-iteration did not converge (beta = " + fmt(beta) +
                             ", L = " + std::to_string(half_width) + ", " +
                             std::to_string(res.iterations) + " matvecs)");
      warm = res.vector;
      eig.row({fmt(half_width), fmt(beta), fmt(res.value)});
    }
  }

  const RegimeReport report = classify_regime(model, cfg.box_schedule);
  CsvWriter summary(out_path(opts, "regime_summary.csv"),
                    {"stage", "L", "beta", "lambda0", "beta_c_bisection", "beta_c_green", "regime"});
  for (std::size_t i = 0; i < report.box_schedule.size(); ++i) {
    summary.row({"box", fmt(report.box_schedule[i]), fmt(report.beta),
                 fmt(report.lambda0_per_box[i]), fmt(report.criticality.per_box[i].beta_c_bisection),
                 fmt(report.criticality.per_box[i].beta_c_green), ""});
  }
  summary.row({"extrapolated", "", fmt(report.beta), fmt(report.lambda0), fmt(report.beta_c),
               fmt(report.criticality.beta_c_green), regime_name(report.regime)});
  std::printf("regime: %s (beta = %.6g, lambda0 = %.6g, beta_c = %.6g)\n",
              regime_name(report.regime), report.beta, report.lambda0, report.beta_c);

  if (emit_transition) {
    const LatticeBox box(d, cfg.box_half_width);
    if (box.size() > 1100)
      throw ConfigError("transition kernel emission is limited to boxes with at most ~1000 sites");
    const TruncatedOperator walk = build_operator(model, box, false);
    std::vector<std::string> header{"t"};
    for (const auto& name : coordinate_header("x", d)) header.push_back(name);
    for (const auto& name : coordinate_header("y", d)) header.push_back(name);
    header.push_back("p");
    CsvWriter tk(out_path(opts, "transition_kernel.csv"), header);
    for (double t : cfg.grid.times()) {
      const Eigen::MatrixXd p = transition_probabilities(walk, t);
      for (Eigen::Index ix = 0; ix < box.size(); ++ix) {
        for (Eigen::Index iy = 0; iy < box.size(); ++iy) {
          std::vector<std::string> row{fmt(t)};
          append_coordinates(row, box.point_of(ix));
          append_coordinates(row, box.point_of(iy));
          row.push_back(fmt(p(ix, iy)));
          tk.row(row);
        }
      }
    }
  }
}

void cmd_moments(const CommonOpts& opts, bool duality, const std::string& oracle,
                 const std::string& extinction, bool fit) {
  const RunConfig cfg = RunConfig::load(opts.config_path);
  const BrwModel& model = cfg.model;
  const int d = cfg.dimension();
  const LatticeBox box(d, cfg.box_half_width);
  const std::vector<double> grid = cfg.grid.times();
  const Flavor flavor = cfg.moments_flavor;
  const std::optional<Site> y = cfg.moments_y;

  if (!oracle.empty() && oracle != "integral")
    throw ConfigError("--oracle supports only 'integral'");

  const auto fields = evolve_higher_moments(model, box, flavor, y, cfg.moments_max_order, grid);
  std::vector<MomentField> oracle_fields;
  if (!oracle.empty()) {
    for (int n = 1; n <= cfg.moments_max_order; ++n)
      oracle_fields.push_back(integral_moment_oracle(model, box, flavor, y, n, grid));
  }

  std::vector<std::string> header{"flavor", "n", "t"};
  for (const auto& name : coordinate_header("x", d)) header.push_back(name);
  header.push_back("value");
  if (!oracle.empty()) {
    header.push_back("value_integral");
    header.push_back("rel_error");
  }
  CsvWriter mm(out_path(opts, "moments.csv"), header);
  double max_rel = 0;
  for (std::size_t n = 0; n < fields.size(); ++n) {
    for (std::size_t ti = 0; ti < grid.size(); ++ti) {
      for (const Site& site : cfg.sites) {
        const double value = fields[n].at(Eigen::Index(ti), site);
        std::vector<std::string> row{flavor_name(flavor), fmt(int(n) + 1), fmt(grid[ti])};
        append_coordinates(row, site);
        row.push_back(fmt(value));
        if (!oracle.empty()) {
          const double ov = oracle_fields[n].at(Eigen::Index(ti), site);
          const double rel = std::abs(value - ov) / std::max(std::abs(value), 1e-12);
          max_rel = std::max(max_rel, rel);
          row.push_back(fmt(ov));
          row.push_back(fmt(rel));
        }
        mm.row(row);
      }
    }
  }
  if (!oracle.empty())
    std::printf("integral-oracle max relative discrepancy on emitted sites: %.3g\n", max_rel);

  if (duality) {
    const DualityReport rep = duality_check(model, box, grid);
    std::vector<std::string> dheader{"t"};
    for (const auto& name : coordinate_header("y", d)) dheader.push_back(name);
    dheader.push_back("m_forward");
    dheader.push_back("m_backward");
    dheader.push_back("gap");
    CsvWriter dr(out_path(opts, "duality_report.csv"), dheader);
    for (std::size_t ti = 0; ti < rep.times.size(); ++ti) {
      for (const Site& site : cfg.sites) {
        const Eigen::Index i = box.index_of(site);
        std::vector<std::string> row{fmt(rep.times[ti])};
        append_coordinates(row, site);
        row.push_back(fmt(rep.forward(i, Eigen::Index(ti))));
        row.push_back(fmt(rep.backward(i, Eigen::Index(ti))));
        row.push_back(fmt(rep.gap(i, Eigen::Index(ti))));
        dr.row(row);
      }
    }
    std::printf("duality max gap over the box: %.3g (%s)\n", rep.max_gap,
                rep.pass ? "pass" : "FAIL");
    if (!rep.pass)
      throw NumericalError("duality check failed: max gap " + fmt(rep.max_gap) + " >= " +
                           fmt(rep.tolerance));
  }

  if (!extinction.empty()) {
    CsvWriter ex(out_path(opts, "extinction.csv"), {"z", "t", "site", "F"});
    std::stringstream zs(extinction);
    std::string ztext;
    const Flavor gf_flavor = flavor == Flavor::forward_infinite ? Flavor::total : flavor;
    while (std::getline(zs, ztext, ',')) {
      const ZParam z = ztext == "inf" ? ZParam::inf() : ZParam::finite(std::stod(ztext));
      const GeneratingFunctionField field =
          solve_generating_function(model, box, z, gf_flavor, y, grid);
      for (std::size_t ti = 0; ti < grid.size(); ++ti)
        for (const Site& site : cfg.sites)
          ex.row({ztext, fmt(grid[ti]), site_to_string(site, ':'),
                  fmt(field.at(Eigen::Index(ti), site))});
    }
  }

  if (fit) {
    const auto window = cfg.fit_window.value_or(std::make_pair(10.0, 30.0));
    const std::vector<int> schedule{cfg.box_half_width};
    const RegimeReport regime = classify_regime(model, schedule);
    CsvWriter gf(out_path(opts, "growth_fit.csv"),
                 {"regime", "d", "n", "predicted_form", "fitted_param", "stderr", "r2"});
    for (std::size_t n = 0; n < fields.size(); ++n) {
      const GrowthLaw law = predicted_growth_law(regime.regime, d, int(n) + 1);
      const GrowthForm& form = flavor == Flavor::local ? law.u : law.v;
      const Eigen::VectorXd series = fields[n].series_at(origin_site(d));
      const GrowthFit fitres =
          fit_growth_rate(grid, std::span<const double>(series.data(), std::size_t(series.size())),
                          window.first, window.second, form);
      gf.row({regime_name(regime.regime), fmt(d), fmt(int(n) + 1), form.to_string(),
              fmt(fitres.estimate), fmt(fitres.stderr_), fmt(fitres.r_squared)});
    }
  }
}

void cmd_simulate(const CommonOpts& opts) {
  const RunConfig cfg = RunConfig::load(opts.config_path);
  const BrwModel& model = cfg.model;

  const InitialCondition ic = cfg.mc_ic == McInitial::single
                                  ? InitialCondition::single_at(cfg.mc_origin)
                                  : InitialCondition::window(cfg.effective_window());
  RunSpec spec;
  spec.horizon = cfg.grid.t_max;
  spec.replicas = cfg.replicas;
  spec.seed = resolve_seed(cfg, opts);
  spec.checkpoints = cfg.grid.times();
  spec.sites = cfg.sites;
  spec.particle_cap = cfg.particle_cap;
  spec.threads = resolve_threads(opts);

  const TrajectoryStatistics stats = run(model, ic, spec);
  const char* ic_name = cfg.mc_ic == McInitial::single ? "single" : "window";

  CsvWriter mc(out_path(opts, "mc_moments.csv"),
               {"ic", "n", "t", "site", "estimate", "stderr", "replicas"});
  for (int n = 1; n <= cfg.mc_max_order; ++n) {
    for (std::size_t ci = 0; ci < spec.checkpoints.size(); ++ci) {
      const MomentEstimate pop = estimate_population_moment(stats, ci, n);
      mc.row({ic_name, fmt(n), fmt(spec.checkpoints[ci]), "population", fmt(pop.value),
              fmt(pop.stderr_), fmt(pop.replicas)});
      for (std::size_t s = 0; s < spec.sites.size(); ++s) {
        const MomentEstimate est = estimate_site_moment(stats, ci, s, n);
        mc.row({ic_name, fmt(n), fmt(spec.checkpoints[ci]), site_to_string(spec.sites[s], ':'),
                fmt(est.value), fmt(est.stderr_), fmt(est.replicas)});
      }
    }
  }
  if (stats.capped_count > 0)
    std::printf("warning: %lld replicas hit the particle cap\n",
                static_cast<long long>(stats.capped_count));
}

void cmd_vaccinate_sweep(const CommonOpts& opts) {
  const RunConfig cfg = RunConfig::load(opts.config_path);
  const BrwModel& model = cfg.model;
  std::vector<double> alphas = cfg.alpha_grid;
  if (alphas.empty())
    for (int i = 10; i >= 1; --i) alphas.push_back(double(i) / 10.0);

  const LatticeBox box(cfg.dimension(), cfg.box_half_width);
  const TruncatedOperator walk = build_operator(model, box, false);
  CsvWriter vs(out_path(opts, "vaccination_sweep.csv"), {"alpha", "beta_tilde", "lambda0"});
  Eigen::VectorXd warm;
  for (double alpha : alphas) {
    const OffspringLaw damped = vaccinate(model.law, {alpha});
    const double beta_tilde = damped.mean_rate();
    EigenOptions eo;
    if (warm.size() > 0) eo.warm_start = &warm;
    const EigenResult res = principal_eigenvalue(with_branching_weight(walk, beta_tilde), eo);
    if (!res.converged)
      throw NumericalError("vaccinate-sweep: eigen-iteration did not converge at alpha = " +
                           fmt(alpha) + " (" + std::to_string(res.iterations) + " matvecs)");
    warm = res.vector;
    vs.row({fmt(alpha), fmt(beta_tilde), fmt(res.value)});
  }
}

void add_common(CLI::App* sub, CommonOpts& opts) {
  sub->add_option("config", opts.config_path, "model/run config file")->required();
  sub->add_option("-o,--output-dir", opts.output_dir, "directory for emitted CSV files");
  sub->add_option("--threads", opts.threads, "worker threads (default: available parallelism)");
  sub->add_option("--seed", opts.seed_flag, "override the config/environment seed");
}

}  // namespace

int run(std::vector<std::string> args) {
  CLI::App app{"branching random walks on Z^d: moment equations, criticality and simulation"};
  app.require_subcommand(1);

  CommonOpts opts;
  bool emit_transition = false;
  bool duality = false;
  bool fit = false;
  std::string oracle;
  std::string extinction;

  CLI::App* analyze = app.add_subcommand("analyze", "criticality report: lambda0 curves and beta_c");
  add_common(analyze, opts);
  analyze->add_flag("--transition", emit_transition, "also emit transition_kernel.csv");

  CLI::App* moments = app.add_subcommand("moments", "moment fields via the backward equations");
  add_common(moments, opts);
  moments->add_flag("--duality", duality, "emit duality_report.csv and verify the identity");
  moments->add_option("--oracle", oracle, "cross-check route; only 'integral' is supported");
  moments->add_option("--extinction", extinction,
                      "comma list of z values ('inf' allowed); emits extinction.csv");
  moments->add_flag("--fit", fit, "fit growth laws on the configured window");

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo particle simulation");
  add_common(simulate, opts);

  CLI::App* sweep = app.add_subcommand("vaccinate-sweep", "lambda0 along a vaccination alpha grid");
  add_common(sweep, opts);

  std::vector<const char*> argv;
  argv.push_back("brwlab");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (analyze->parsed()) cmd_analyze(opts, emit_transition);
    else if (moments->parsed()) cmd_moments(opts, duality, oracle, extinction, fit);
    else if (simulate->parsed()) cmd_simulate(opts);
    else if (sweep->parsed()) cmd_vaccinate_sweep(opts);
    return 0;
  } catch (const ParticleCapError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace brw::cli

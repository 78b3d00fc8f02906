#pragma once

#include "brw/lattice.hpp"
#include "brw/model.hpp"
#include "brw/moments.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace brw {

// Line-based `key = value` text. '#' starts a comment, blank lines are
// ignored. Keys are consumed by the typed readers; anything left over is an
// unknown key and rejected by RunConfig::load.
class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::string& path);
  static KeyValueFile parse_string(const std::string& text);

  // Consumes the unique entry for key; duplicate entries are a ConfigError.
  std::optional<std::string> take(const std::string& key);
  // Consumes every entry for a repeatable key, in file order.
  std::vector<std::string> take_all(const std::string& key);
  // Consumes every entry whose key starts with prefix; returns (suffix, value).
  std::vector<std::pair<std::string, std::string>> take_prefixed(const std::string& prefix);
  std::vector<std::string> remaining_keys() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::vector<bool> used_;
};

struct GridSpec {
  double t_max = 5.0;
  int steps = 100;
  std::vector<double> times() const;
};

enum class McInitial { single, window };

struct RunConfig {
  BrwModel model;
  std::optional<double> vaccination_alpha;

  int box_half_width = 20;
  std::vector<int> box_schedule{10, 20, 40};
  int window_half_width = 0;  // 0 means "use 2 * box_half_width"
  GridSpec grid;
  std::int64_t replicas = 10000;
  std::uint64_t seed = 1;
  std::size_t particle_cap = 1'000'000;

  std::vector<Site> sites;  // observation sites; defaults to the origin

  McInitial mc_ic = McInitial::single;
  Site mc_origin;
  int mc_max_order = 2;

  int moments_max_order = 2;
  Flavor moments_flavor = Flavor::total;
  Site moments_y;

  std::vector<double> beta_grid;   // analyze; empty derives a default
  std::vector<double> alpha_grid;  // vaccinate-sweep
  std::optional<std::pair<double, double>> fit_window;

  int dimension() const { return model.kernel.dim(); }
  int effective_window() const {
    return window_half_width > 0 ? window_half_width : 2 * box_half_width;
  }

  static RunConfig load(const std::string& path);
  static RunConfig from_kv(KeyValueFile kv);
};

Site parse_site(const std::string& text, int dim);
std::vector<Site> parse_site_list(const std::string& text, int dim);

}  // namespace brw

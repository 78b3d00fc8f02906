#include "brw/config.hpp"

#include "brw/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace brw {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream stream(s);
  std::string item;
  while (std::getline(stream, item, sep)) parts.push_back(trim(item));
  if (!s.empty() && s.back() == sep) parts.push_back("");
  return parts;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a number");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as an integer");
  }
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str());
}

KeyValueFile KeyValueFile::parse_string(const std::string& text) {
  KeyValueFile kv;
  std::stringstream stream(text);
  std::string line;
  int lineno = 0;
  while (std::getline(stream, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv.entries_.emplace_back(key, value);
  }
  kv.used_.assign(kv.entries_.size(), false);
  return kv;
}

std::optional<std::string> KeyValueFile::take(const std::string& key) {
  std::optional<std::string> found;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (used_[i] || entries_[i].first != key) continue;
    if (found) throw ConfigError("duplicate config key '" + key + "'");
    found = entries_[i].second;
    used_[i] = true;
  }
  return found;
}

std::vector<std::string> KeyValueFile::take_all(const std::string& key) {
  std::vector<std::string> values;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (used_[i] || entries_[i].first != key) continue;
    values.push_back(entries_[i].second);
    used_[i] = true;
  }
  return values;
}

std::vector<std::pair<std::string, std::string>> KeyValueFile::take_prefixed(
    const std::string& prefix) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (used_[i] || entries_[i].first.rfind(prefix, 0) != 0) continue;
    out.emplace_back(entries_[i].first.substr(prefix.size()), entries_[i].second);
    used_[i] = true;
  }
  return out;
}

std::vector<std::string> KeyValueFile::remaining_keys() const {
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (!used_[i]) keys.push_back(entries_[i].first);
  return keys;
}

std::vector<double> GridSpec::times() const { return uniform_grid(t_max, steps); }

Site parse_site(const std::string& text, int dim) {
  const auto parts = split(text, ',');
  if (int(parts.size()) != dim)
    throw ConfigError("site '" + text + "' does not have " + std::to_string(dim) + " coordinates");
  Site s(dim);
  for (int k = 0; k < dim; ++k) s[k] = int(parse_int("site", parts[std::size_t(k)]));
  return s;
}

std::vector<Site> parse_site_list(const std::string& text, int dim) {
  std::vector<Site> sites;
  for (const std::string& part : split(text, ';'))
    if (!part.empty()) sites.push_back(parse_site(part, dim));
  if (sites.empty()) throw ConfigError("empty site list");
  return sites;
}

RunConfig RunConfig::load(const std::string& path) {
  return from_kv(KeyValueFile::parse_file(path));
}

RunConfig RunConfig::from_kv(KeyValueFile kv) {
  const auto dim_text = kv.take("dimension");
  if (!dim_text) throw ConfigError("config is missing the required key 'dimension'");
  const int dim = int(parse_int("dimension", *dim_text));
  if (dim < 1 || dim > kMaxDimension)
    throw ConfigError("dimension must be in 1.." + std::to_string(kMaxDimension));

  // Kernel: a simple nearest-neighbour rate or explicit offsets.
  std::optional<WalkKernel> kernel;
  if (const auto rate = kv.take("kernel.total_rate")) {
    const double total = parse_double("kernel.total_rate", *rate);
    if (!(total > 0)) throw ConfigError("kernel.total_rate must be > 0");
    kernel = WalkKernel::simple(dim, total);
  }
  const auto offset_lines = kv.take_all("kernel.offset");
  if (!offset_lines.empty()) {
    if (kernel) throw ConfigError("give either kernel.total_rate or kernel.offset lines, not both");
    std::vector<std::pair<Site, double>> jumps;
    for (const std::string& line : offset_lines) {
      const std::size_t colon = line.find(':');
      if (colon == std::string::npos)
        throw ConfigError("kernel.offset expects 'z1,...,zd : rate', got '" + line + "'");
      const Site z = parse_site(trim(line.substr(0, colon)), dim);
      const double rate = parse_double("kernel.offset", trim(line.substr(colon + 1)));
      jumps.emplace_back(z, rate);
    }
    try {
      kernel = WalkKernel::from_offsets(dim, std::move(jumps));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("kernel.offset: ") + e.what());
    }
  }
  if (!kernel) throw ConfigError("config needs kernel.total_rate or kernel.offset lines");

  // Branching law: keys law.b0, law.b2, ...
  std::map<int, double> rates;
  for (const auto& [suffix, value] : kv.take_prefixed("law.b")) {
    int n = -1;
    const auto [ptr, ec] = std::from_chars(suffix.data(), suffix.data() + suffix.size(), n);
    if (ec != std::errc() || ptr != suffix.data() + suffix.size())
      throw ConfigError("unrecognized branching key 'law.b" + suffix + "'");
    if (n == 1) throw ConfigError("law.b1 is derived from conservation and cannot be set");
    const double b = parse_double("law.b" + suffix, value);
    if (b < 0) throw ConfigError("law.b" + suffix + " must be >= 0");
    rates[n] = b;
  }

  RunConfig cfg;
  cfg.model = BrwModel{*kernel, OffspringLaw::from_rates(rates)};

  if (const auto alpha = kv.take("vaccination.alpha")) {
    const double a = parse_double("vaccination.alpha", *alpha);
    if (!(a > 0 && a <= 1)) throw ConfigError("vaccination.alpha must lie in (0, 1]");
    cfg.vaccination_alpha = a;
  }

  if (const auto v = kv.take("box.half_width")) {
    cfg.box_half_width = int(parse_int("box.half_width", *v));
    if (cfg.box_half_width < 1) throw ConfigError("box.half_width must be >= 1");
  }
  if (const auto v = kv.take("box.schedule")) {
    cfg.box_schedule.clear();
    for (const std::string& part : split(*v, ','))
      cfg.box_schedule.push_back(int(parse_int("box.schedule", part)));
    if (cfg.box_schedule.empty()) throw ConfigError("box.schedule is empty");
    for (std::size_t i = 0; i < cfg.box_schedule.size(); ++i) {
      if (cfg.box_schedule[i] < 1) throw ConfigError("box.schedule entries must be >= 1");
      if (i > 0 && cfg.box_schedule[i] <= cfg.box_schedule[i - 1])
        throw ConfigError("box.schedule must be strictly increasing");
    }
  }
  if (const auto v = kv.take("window.half_width")) {
    cfg.window_half_width = int(parse_int("window.half_width", *v));
    if (cfg.window_half_width < 1) throw ConfigError("window.half_width must be >= 1");
  }
  if (const auto v = kv.take("grid.t_max")) {
    cfg.grid.t_max = parse_double("grid.t_max", *v);
    if (cfg.grid.t_max < 0) throw ConfigError("grid.t_max must be >= 0");
  }
  if (const auto v = kv.take("grid.steps")) {
    cfg.grid.steps = int(parse_int("grid.steps", *v));
    if (cfg.grid.steps < 2) throw ConfigError("grid.steps must be >= 2");
  }
  if (const auto v = kv.take("run.replicas")) {
    cfg.replicas = parse_int("run.replicas", *v);
    if (cfg.replicas < 1) throw ConfigError("run.replicas must be >= 1");
  }
  if (const auto v = kv.take("run.seed")) cfg.seed = std::uint64_t(parse_int("run.seed", *v));
  if (const auto v = kv.take("run.cap")) {
    const long long cap = parse_int("run.cap", *v);
    if (cap < 1) throw ConfigError("run.cap must be >= 1");
    cfg.particle_cap = std::size_t(cap);
  }

  cfg.mc_origin = origin_site(dim);
  cfg.moments_y = origin_site(dim);
  if (const auto v = kv.take("sites")) cfg.sites = parse_site_list(*v, dim);
  if (cfg.sites.empty()) cfg.sites.push_back(origin_site(dim));

  if (const auto v = kv.take("simulate.ic")) {
    if (*v == "single") cfg.mc_ic = McInitial::single;
    else if (*v == "window") cfg.mc_ic = McInitial::window;
    else throw ConfigError("simulate.ic must be 'single' or 'window'");
  }
  if (const auto v = kv.take("simulate.origin")) cfg.mc_origin = parse_site(*v, dim);
  if (const auto v = kv.take("simulate.max_order")) {
    cfg.mc_max_order = int(parse_int("simulate.max_order", *v));
    if (cfg.mc_max_order < 1 || cfg.mc_max_order > 4)
      throw ConfigError("simulate.max_order must be in 1..4");
  }

  if (const auto v = kv.take("moments.max_order")) {
    cfg.moments_max_order = int(parse_int("moments.max_order", *v));
    if (cfg.moments_max_order < 1) throw ConfigError("moments.max_order must be >= 1");
  }
  if (const auto v = kv.take("moments.flavor")) {
    if (*v == "total") cfg.moments_flavor = Flavor::total;
    else if (*v == "local") cfg.moments_flavor = Flavor::local;
    else if (*v == "forward") cfg.moments_flavor = Flavor::forward_infinite;
    else throw ConfigError("moments.flavor must be 'total', 'local' or 'forward'");
  }
  if (const auto v = kv.take("moments.y")) cfg.moments_y = parse_site(*v, dim);

  if (const auto v = kv.take("analyze.beta_grid")) {
    for (const std::string& part : split(*v, ','))
      cfg.beta_grid.push_back(parse_double("analyze.beta_grid", part));
  }
  if (const auto v = kv.take("vaccinate.alpha_grid")) {
    for (const std::string& part : split(*v, ',')) {
      const double a = parse_double("vaccinate.alpha_grid", part);
      if (!(a > 0 && a <= 1)) throw ConfigError("vaccinate.alpha_grid entries must lie in (0, 1]");
      cfg.alpha_grid.push_back(a);
    }
  }
  const auto fit1 = kv.take("fit.t1");
  const auto fit2 = kv.take("fit.t2");
  if (fit1.has_value() != fit2.has_value())
    throw ConfigError("fit.t1 and fit.t2 must be given together");
  if (fit1) {
    cfg.fit_window = {parse_double("fit.t1", *fit1), parse_double("fit.t2", *fit2)};
    if (!(cfg.fit_window->first < cfg.fit_window->second))
      throw ConfigError("fit window must satisfy t1 < t2");
  }

  const auto leftovers = kv.remaining_keys();
  if (!leftovers.empty()) throw ConfigError("unknown config key '" + leftovers.front() + "'");

  // Cross-field invariants.
  const int support = cfg.model.kernel.support_radius();
  if (cfg.box_half_width < support)
    throw ConfigError("box.half_width must be >= the kernel support radius (" +
                      std::to_string(support) + ")");
  for (int half_width : cfg.box_schedule)
    if (half_width < support)
      throw ConfigError("box.schedule entries must be >= the kernel support radius");
  if (cfg.mc_ic == McInitial::window && cfg.effective_window() < cfg.box_half_width)
    throw ConfigError("window.half_width must be >= box.half_width for the window initial condition");
  return cfg;
}

}  // namespace brw

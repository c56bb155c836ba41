#include "ipic/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace ipic {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_values(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (std::isspace(static_cast<unsigned char>(s[i])) || s[i] == ',')) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])) && s[j] != ',') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

struct Entry {
  std::string value;
  int line;
};

class Reader {
 public:
  Reader(const std::string& section, std::map<std::string, Entry> entries)
      : section_(section), entries_(std::move(entries)) {}

  double real(const std::string& key, double fallback) {
    auto* e = take(key);
    if (!e) return fallback;
    return parse_real(e->value, e->line);
  }

  long integer(const std::string& key, long fallback) {
    auto* e = take(key);
    if (!e) return fallback;
    auto v = trim(e->value);
    long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
      throw ConfigParseError(e->line, "expected integer for '" + key + "', got '" + e->value + "'");
    return out;
  }

  bool boolean(const std::string& key, bool fallback) {
    auto* e = take(key);
    if (!e) return fallback;
    auto v = trim(e->value);
    if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "off" || v == "no" || v == "0") return false;
    throw ConfigParseError(e->line, "expected boolean for '" + key + "'");
  }

  /// Accepts either one value (broadcast) or three.
  Vec3 triple(const std::string& key, Vec3 fallback) {
    auto* e = take(key);
    if (!e) return fallback;
    auto parts = split_values(e->value);
    if (parts.size() == 1) {
      double v = parse_real(parts[0], e->line);
      return {v, v, v};
    }
    if (parts.size() != 3)
      throw ConfigParseError(e->line, "expected 1 or 3 values for '" + key + "'");
    return {parse_real(parts[0], e->line), parse_real(parts[1], e->line),
            parse_real(parts[2], e->line)};
  }

  std::string word(const std::string& key, const std::string& fallback) {
    auto* e = take(key);
    return e ? std::string(trim(e->value)) : fallback;
  }

  int line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  void expect_consumed() const {
    for (const auto& [k, e] : entries_)
      if (!used_.count(k))
        throw ConfigParseError(e.line, "unknown key '" + k + "' in [" + section_ + "]");
  }

 private:
  static double parse_real(std::string_view text, int line) {
    auto v = trim(text);
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
      throw ConfigParseError(line, "expected number, got '" + std::string(v) + "'");
    return out;
  }

  const Entry* take(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    used_[key] = true;
    return &it->second;
  }

  std::string section_;
  std::map<std::string, Entry> entries_;
  std::map<std::string, bool> used_;
};

template <class Enum>
Enum pick(const std::string& value, int line, const std::string& key,
          std::initializer_list<std::pair<const char*, Enum>> options) {
  for (const auto& [name, e] : options)
    if (value == name) return e;
  throw ConfigParseError(line, "invalid value '" + value + "' for '" + key + "'");
}

}  // namespace

void validate(const SimConfig& config) {
  auto fail = [](const std::string& msg) { throw ConfigValidationError(msg); };
  for (int a = 0; a < 3; ++a) {
    if (config.grid_dims[a] < 4) fail("grid_dims must be at least 4 nodes per axis");
    if (!(config.domain_lengths[a] > 0.0)) fail("domain lengths must be positive");
  }
  if (!(config.dt > 0.0)) fail("dt must be positive");
  if (!(config.c > 0.0)) fail("c must be positive");
  if (config.n_cycles < 0) fail("cycles must be non-negative");
  const auto& cp = config.control_params;
  if (!(cp.theta > 0.0 && cp.theta < 1.0)) fail("theta must lie in (0, 1)");
  if (cp.velocity_bins < 1) fail("control velocity_bins must be at least 1");
  if (cp.target != 0 && cp.target < 2) fail("control target must be at least 2");
  const auto& sp = config.solver_params;
  if (!(sp.tolerance > 0.0)) fail("solver tolerance must be positive");
  if (sp.restart < 1 || sp.max_iterations < 1 || sp.inner_iterations < 0)
    fail("solver restart/max_iterations must be positive");
  if (!(config.mover_params.tolerance > 0.0) || config.mover_params.max_iterations < 1)
    fail("mover tolerance and max_iterations must be positive");
  if (config.compress_params.bins < 1 || config.compress_params.components < 1)
    fail("compress bins and components must be positive");
  if (config.workers < 1) fail("workers must be at least 1");
  for (std::size_t s = 0; s < config.species.size(); ++s) {
    const auto& sp_s = config.species[s];
    const std::string tag = "species." + std::to_string(s) + ": ";
    if (sp_s.particles_per_cell < 1) fail(tag + "particles_per_cell must be at least 1");
    if (!(norm(sp_s.drift_velocity) < config.c)) fail(tag + "|drift_velocity| must be below c");
    if (sp_s.charge_over_mass == 0.0) fail(tag + "charge_over_mass must be non-zero");
    if (!(sp_s.reference_density >= 0.0)) fail(tag + "reference_density must be non-negative");
    for (int a = 0; a < 3; ++a)
      if (sp_s.thermal_velocity[a] < 0.0) fail(tag + "thermal_velocity must be non-negative");
  }
}

SimConfig load_config(std::string_view text) {
  // Pass 1: split into sections of key/value entries.
  std::vector<std::pair<std::string, int>> order;
  std::map<std::string, std::map<std::string, Entry>> sections;
  std::string current;
  int line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigParseError(line_no, "unterminated section header");
      current = std::string(trim(line.substr(1, line.size() - 2)));
      if (current.empty()) throw ConfigParseError(line_no, "empty section name");
      if (sections.count(current)) throw ConfigParseError(line_no, "duplicate section [" + current + "]");
      sections[current];
      order.emplace_back(current, line_no);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigParseError(line_no, "expected key = value");
    if (current.empty()) throw ConfigParseError(line_no, "key outside of any section");
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigParseError(line_no, "empty key");
    for (char ch : key)
      if (!(std::islower(static_cast<unsigned char>(ch)) || std::isdigit(static_cast<unsigned char>(ch)) ||
            ch == '_'))
        throw ConfigParseError(line_no, "keys must be lowercase snake_case: '" + key + "'");
    if (value.empty()) throw ConfigParseError(line_no, "missing value for '" + key + "'");
    auto& sec = sections[current];
    if (sec.count(key)) throw ConfigParseError(line_no, "duplicate key '" + key + "'");
    sec[key] = Entry{value, line_no};
  }

  SimConfig cfg;
  std::map<int, SpeciesParams> species;

  for (const auto& [name, header_line] : order) {
    Reader r(name, sections[name]);
    if (name == "grid") {
      Vec3 dims{double(cfg.grid_dims[0]), double(cfg.grid_dims[1]), double(cfg.grid_dims[2])};
      long nx = r.integer("nx", long(dims.x));
      long ny = r.integer("ny", long(dims.y));
      long nz = r.integer("nz", long(dims.z));
      cfg.grid_dims = {int(nx), int(ny), int(nz)};
      cfg.domain_lengths.x = r.real("lx", cfg.domain_lengths.x);
      cfg.domain_lengths.y = r.real("ly", cfg.domain_lengths.y);
      cfg.domain_lengths.z = r.real("lz", cfg.domain_lengths.z);
    } else if (name == "time") {
      cfg.dt = r.real("dt", cfg.dt);
      cfg.c = r.real("c", cfg.c);
      cfg.n_cycles = int(r.integer("cycles", cfg.n_cycles));
      cfg.rng_seed = std::uint64_t(r.integer("seed", long(cfg.rng_seed)));
      cfg.workers = int(r.integer("workers", cfg.workers));
    } else if (name.rfind("species.", 0) == 0) {
      auto idx_text = name.substr(8);
      int idx = -1;
      auto [p, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
      if (ec != std::errc{} || p != idx_text.data() + idx_text.size() || idx < 0)
        throw ConfigParseError(header_line, "invalid species section [" + name + "]");
      SpeciesParams sp;
      sp.charge_over_mass = r.real("qom", sp.charge_over_mass);
      sp.thermal_velocity = r.triple("vth", sp.thermal_velocity);
      sp.drift_velocity = r.triple("drift", sp.drift_velocity);
      sp.particles_per_cell = int(r.integer("ppc", sp.particles_per_cell));
      sp.reference_density = r.real("density", sp.reference_density);
      auto prof = r.word("profile", "uniform");
      sp.profile = pick<DensityProfile>(prof, r.line_of("profile"), "profile",
                                        {{"uniform", DensityProfile::Uniform},
                                         {"harris", DensityProfile::Harris}});
      species[idx] = sp;
    } else if (name == "solver") {
      auto& s = cfg.solver_params;
      s.tolerance = r.real("tol", s.tolerance);
      s.restart = int(r.integer("restart", s.restart));
      s.max_iterations = int(r.integer("max_iters", s.max_iterations));
      s.inner_iterations = int(r.integer("inner_iters", s.inner_iterations));
      s.abort_on_failure = r.boolean("abort_on_failure", s.abort_on_failure);
      s.smooth_moments = r.boolean("smooth_moments", s.smooth_moments);
    } else if (name == "mover") {
      cfg.mover_params.tolerance = r.real("tol", cfg.mover_params.tolerance);
      cfg.mover_params.max_iterations = int(r.integer("max_iters", cfg.mover_params.max_iterations));
    } else if (name == "control") {
      auto& c = cfg.control_params;
      c.enabled = r.boolean("enabled", c.enabled);
      c.theta = r.real("theta", c.theta);
      c.target = r.integer("target", c.target);
      c.velocity_bins = int(r.integer("velocity_bins", c.velocity_bins));
      auto region = r.word("region", "domain");
      c.trigger_region = pick<RegionGranularity>(region, r.line_of("region"), "region",
                                                 {{"domain", RegionGranularity::WholeDomain},
                                                  {"cell", RegionGranularity::PerCell}});
    } else if (name == "compress") {
      auto& c = cfg.compress_params;
      c.bins = int(r.integer("bins", c.bins));
      c.components = int(r.integer("components", c.components));
      c.every = int(r.integer("every", c.every));
      c.v_max = r.real("v_max", c.v_max);
      auto range = r.word("range", "auto");
      c.range = pick<HistogramRange>(range, r.line_of("range"), "range",
                                     {{"auto", HistogramRange::Auto}, {"fixed", HistogramRange::Fixed}});
    } else if (name == "scenario") {
      auto& s = cfg.scenario;
      auto type = r.word("type", "uniform");
      s.kind = pick<ScenarioKind>(type, r.line_of("type"), "type",
                                  {{"uniform", ScenarioKind::Uniform},
                                   {"gem", ScenarioKind::GemHarris},
                                   {"dipole", ScenarioKind::Dipole}});
      auto bc = r.word("boundary", s.kind == ScenarioKind::Dipole ? "open" : "periodic");
      cfg.boundary_mode = pick<BoundaryMode>(bc, r.line_of("boundary"), "boundary",
                                             {{"periodic", BoundaryMode::Periodic},
                                              {"open", BoundaryMode::OpenInflow}});
      s.background_b = r.triple("b0", s.background_b);
      s.mirror_loading = r.boolean("mirror", s.mirror_loading);
      s.sheet_b0 = r.real("sheet_b0", s.sheet_b0);
      s.sheet_half_width = r.real("sheet_half_width", s.sheet_half_width);
      s.perturbation = r.real("perturbation", s.perturbation);
      s.dipole_moment = r.triple("dipole_moment", s.dipole_moment);
      s.dipole_center = r.triple("dipole_center", s.dipole_center);
      s.core_radius = r.real("core_radius", s.core_radius);
    } else {
      throw ConfigParseError(header_line, "unknown section [" + name + "]");
    }
    r.expect_consumed();
  }

  int expected = 0;
  for (const auto& [idx, sp] : species) {
    if (idx != expected)
      throw ConfigValidationError("species sections must be numbered 0.." +
                                  std::to_string(species.size() - 1));
    cfg.species.push_back(sp);
    ++expected;
  }

  validate(cfg);
  return cfg;
}

SimConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return load_config(ss.str());
}

}  // namespace ipic

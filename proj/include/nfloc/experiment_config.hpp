// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with RF-chain-reduced arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef NFLOC_EXPERIMENT_CONFIG_HPP
#define NFLOC_EXPERIMENT_CONFIG_HPP

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfloc/pipeline.hpp"

namespace nfloc {

/// Configuration problems (malformed file, unknown or missing keys, bad
/// values). The CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SingleRunSpec {
  std::string scheme_label;
  double snr_db = 0.0;
};

/// Everything one CLI invocation needs: the experiment plus per-command
/// sections and verbosity. Mirrors the JSON config one-to-one.
struct RunConfig {
  ExperimentSpec spec;
  std::optional<HeatmapSpec> heatmap;
  std::vector<int> rf_counts;
  std::optional<SingleRunSpec> single_run;
  int verbosity = 1;
  nlohmann::ordered_json resolved;  // defaults filled in, for output headers
};

namespace detail_config {

using json = nlohmann::json;

inline void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config error at " + path + ": " + what);
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) fail(path, "missing required key '" + key + "'");
  return obj.at(key);
}

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                           const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        known = true;
        break;
      }
    if (!known) fail(path, "unknown key '" + it.key() + "'");
  }
}

inline double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

inline int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

inline std::uint64_t as_u64(const json& v, const std::string& path) {
  if (!v.is_number_unsigned() && !v.is_number_integer()) fail(path, "expected an integer");
  return v.get<std::uint64_t>();
}

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

inline double get_double(const json& obj, const std::string& key, const std::string& path) {
  return as_double(require(obj, key, path), path + "." + key);
}

inline int get_int(const json& obj, const std::string& key, const std::string& path) {
  return as_int(require(obj, key, path), path + "." + key);
}

inline double opt_double(const json& obj, const std::string& key, double fallback,
                         const std::string& path) {
  if (!obj.contains(key)) return fallback;
  return as_double(obj.at(key), path + "." + key);
}

inline int opt_int(const json& obj, const std::string& key, int fallback,
                   const std::string& path) {
  if (!obj.contains(key)) return fallback;
  return as_int(obj.at(key), path + "." + key);
}

inline ArchitectureKind parse_architecture(const std::string& s, const std::string& path) {
  if (s == "fully_digital") return ArchitectureKind::FullyDigital;
  if (s == "hybrid") return ArchitectureKind::HybridPhaseShifter;
  if (s == "dma") return ArchitectureKind::Dma;
  fail(path, "unknown architecture '" + s + "' (fully_digital|hybrid|dma)");
  return ArchitectureKind::FullyDigital;
}

inline TuningMethod parse_tuning(const std::string& s, const std::string& path) {
  if (s == "projection") return TuningMethod::Projection;
  if (s == "rcg") return TuningMethod::Rcg;
  if (s == "random") return TuningMethod::Random;
  if (s == "none") return TuningMethod::None;
  fail(path, "unknown tuning method '" + s + "' (projection|rcg|random|none)");
  return TuningMethod::None;
}

inline QMode parse_q_mode(const std::string& s, const std::string& path) {
  if (s == "alternating") return QMode::Alternating;
  if (s == "given_position") return QMode::GivenPosition;
  if (s == "fixed_random") return QMode::FixedRandom;
  fail(path, "unknown q_mode '" + s + "' (alternating|given_position|fixed_random)");
  return QMode::Alternating;
}

inline SourcePosition parse_position(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  reject_unknown(v, {"distance_m", "azimuth_rad", "elevation_rad"}, path);
  SourcePosition p;
  p.distance_m = get_double(v, "distance_m", path);
  p.azimuth_rad = get_double(v, "azimuth_rad", path);
  p.elevation_rad = opt_double(v, "elevation_rad", kPi / 2.0, path);
  if (p.distance_m <= 0.0) fail(path + ".distance_m", "must be > 0");
  return p;
}

inline SchemeConfig parse_scheme(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  reject_unknown(v, {"label", "architecture", "tuning", "q_mode", "n_cols", "col_spacing_m"},
                 path);
  SchemeConfig s;
  s.label = as_string(require(v, "label", path), path + ".label");
  s.architecture =
      parse_architecture(as_string(require(v, "architecture", path), path + ".architecture"),
                         path + ".architecture");
  if (v.contains("tuning"))
    s.tuning = parse_tuning(as_string(v.at("tuning"), path + ".tuning"), path + ".tuning");
  if (v.contains("q_mode"))
    s.q_mode = parse_q_mode(as_string(v.at("q_mode"), path + ".q_mode"), path + ".q_mode");
  s.n_cols_override = opt_int(v, "n_cols", 0, path);
  s.col_spacing_override_m = opt_double(v, "col_spacing_m", 0.0, path);
  return s;
}

inline nlohmann::ordered_json position_json(const SourcePosition& p) {
  return {{"distance_m", p.distance_m},
          {"azimuth_rad", p.azimuth_rad},
          {"elevation_rad", p.elevation_rad}};
}

inline nlohmann::ordered_json scheme_json(const SchemeConfig& s) {
  nlohmann::ordered_json j{{"label", s.label},
                           {"architecture", to_string(s.architecture)},
                           {"tuning", to_string(s.tuning)},
                           {"q_mode", to_string(s.q_mode)}};
  if (s.n_cols_override > 0) j["n_cols"] = s.n_cols_override;
  if (s.col_spacing_override_m > 0.0) j["col_spacing_m"] = s.col_spacing_override_m;
  return j;
}

}  // namespace detail_config

/// Parses and validates a JSON run configuration. Unknown keys anywhere are
/// rejected; parse errors carry the line and column.
inline RunConfig parse_run_config(const std::string& text) {
  using namespace detail_config;

  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::ostringstream os;
    os << "config parse error at line " << line << ", column " << column << ": " << e.what();
    throw ConfigError(os.str());
  }
  if (!root.is_object()) throw ConfigError("config error at $: expected a JSON object");

  reject_unknown(root,
                 {"array", "signal", "waveguide", "users", "search_grid", "estimation",
                  "rcg", "schemes", "heatmap", "rf_sweep", "single_run", "output"},
                 "$");

  RunConfig rc;
  ExperimentSpec& spec = rc.spec;

  {
    const json& a = require(root, "array", "$");
    const std::string path = "$.array";
    reject_unknown(a, {"n_rows", "n_cols", "row_spacing_m", "col_spacing_m", "wavelength_m"},
                   path);
    spec.n_rows = get_int(a, "n_rows", path);
    spec.n_cols = get_int(a, "n_cols", path);
    spec.row_spacing_m = get_double(a, "row_spacing_m", path);
    spec.col_spacing_m = get_double(a, "col_spacing_m", path);
    spec.wavelength_m = get_double(a, "wavelength_m", path);
  }
  {
    const json& s = require(root, "signal", "$");
    const std::string path = "$.signal";
    reject_unknown(
        s, {"carrier_frequency_hz", "speed_of_light_m_s", "pilot_phase_rad", "n_snapshots"},
        path);
    spec.carrier_frequency_hz = get_double(s, "carrier_frequency_hz", path);
    spec.speed_of_light_m_s = opt_double(s, "speed_of_light_m_s", kSpeedOfLight, path);
    spec.pilot_phase_rad = opt_double(s, "pilot_phase_rad", 0.0, path);
    spec.n_snapshots = get_int(s, "n_snapshots", path);
  }
  if (root.contains("waveguide")) {
    const json& w = root.at("waveguide");
    const std::string path = "$.waveguide";
    reject_unknown(w, {"attenuation_per_m", "wavenumber_per_m"}, path);
    spec.waveguide_attenuation_per_m = get_double(w, "attenuation_per_m", path);
    spec.waveguide_wavenumber_per_m = get_double(w, "wavenumber_per_m", path);
  }
  {
    const json& u = require(root, "users", "$");
    if (!u.is_array() || u.empty()) fail("$.users", "expected a non-empty array");
    for (std::size_t i = 0; i < u.size(); ++i)
      spec.users.push_back(
          parse_position(u.at(i), "$.users[" + std::to_string(i) + "]"));
  }
  {
    const json& g = require(root, "search_grid", "$");
    const std::string path = "$.search_grid";
    reject_unknown(g,
                   {"distance_min_m", "distance_max_m", "distance_points", "azimuth_min_rad",
                    "azimuth_max_rad", "azimuth_points", "elevation_fixed_rad",
                    "elevation_min_rad", "elevation_max_rad", "elevation_points",
                    "refine_levels"},
                   path);
    spec.grid.distance = {get_double(g, "distance_min_m", path),
                          get_double(g, "distance_max_m", path),
                          get_int(g, "distance_points", path)};
    spec.grid.azimuth = {get_double(g, "azimuth_min_rad", path),
                         get_double(g, "azimuth_max_rad", path),
                         get_int(g, "azimuth_points", path)};
    const bool searched_elevation = g.contains("elevation_points");
    if (searched_elevation) {
      spec.grid.elevation = {get_double(g, "elevation_min_rad", path),
                             get_double(g, "elevation_max_rad", path),
                             get_int(g, "elevation_points", path)};
      spec.grid.fix_elevation.reset();
      if (g.contains("elevation_fixed_rad"))
        fail(path, "elevation_fixed_rad conflicts with a searched elevation axis");
    } else {
      spec.grid.fix_elevation = opt_double(g, "elevation_fixed_rad", kPi / 2.0, path);
    }
    spec.grid.refine_levels = opt_int(g, "refine_levels", 2, path);
  }
  {
    const json& e = require(root, "estimation", "$");
    const std::string path = "$.estimation";
    reject_unknown(
        e, {"max_outer_iterations", "monte_carlo_trials", "snr_grid_db", "base_seed"}, path);
    spec.max_outer_iterations = get_int(e, "max_outer_iterations", path);
    spec.monte_carlo_trials = get_int(e, "monte_carlo_trials", path);
    const json& snr = require(e, "snr_grid_db", path);
    if (!snr.is_array() || snr.empty())
      fail(path + ".snr_grid_db", "expected a non-empty array");
    for (std::size_t i = 0; i < snr.size(); ++i)
      spec.snr_grid_db.push_back(
          as_double(snr.at(i), path + ".snr_grid_db[" + std::to_string(i) + "]"));
    spec.base_seed = as_u64(require(e, "base_seed", path), path + ".base_seed");
  }
  if (root.contains("rcg")) {
    const json& r = root.at("rcg");
    const std::string path = "$.rcg";
    reject_unknown(r,
                   {"max_iters", "grad_tolerance", "armijo_initial_step", "armijo_shrink",
                    "armijo_sufficient_decrease", "max_backtracks", "pr_restart_threshold"},
                   path);
    spec.rcg.max_iters = opt_int(r, "max_iters", spec.rcg.max_iters, path);
    spec.rcg.grad_tolerance = opt_double(r, "grad_tolerance", spec.rcg.grad_tolerance, path);
    spec.rcg.armijo_initial_step =
        opt_double(r, "armijo_initial_step", spec.rcg.armijo_initial_step, path);
    spec.rcg.armijo_shrink = opt_double(r, "armijo_shrink", spec.rcg.armijo_shrink, path);
    spec.rcg.armijo_sufficient_decrease = opt_double(
        r, "armijo_sufficient_decrease", spec.rcg.armijo_sufficient_decrease, path);
    spec.rcg.max_backtracks = opt_int(r, "max_backtracks", spec.rcg.max_backtracks, path);
    spec.rcg.pr_restart_threshold =
        opt_double(r, "pr_restart_threshold", spec.rcg.pr_restart_threshold, path);
  }
  {
    const json& s = require(root, "schemes", "$");
    if (!s.is_array() || s.empty()) fail("$.schemes", "expected a non-empty array");
    for (std::size_t i = 0; i < s.size(); ++i)
      spec.schemes.push_back(parse_scheme(s.at(i), "$.schemes[" + std::to_string(i) + "]"));
  }

  auto find_scheme = [&](const std::string& label, const std::string& path) -> SchemeConfig {
    for (const SchemeConfig& s : spec.schemes)
      if (s.label == label) return s;
    fail(path, "scheme label '" + label + "' not found in $.schemes");
    return {};
  };

  if (root.contains("heatmap")) {
    const json& h = root.at("heatmap");
    const std::string path = "$.heatmap";
    reject_unknown(h,
                   {"x_min_m", "x_max_m", "y_min_m", "y_max_m", "resolution_m", "mode",
                    "focus", "scheme", "snr_db", "trials"},
                   path);
    HeatmapSpec hm;
    hm.x_min_m = get_double(h, "x_min_m", path);
    hm.x_max_m = get_double(h, "x_max_m", path);
    hm.y_min_m = get_double(h, "y_min_m", path);
    hm.y_max_m = get_double(h, "y_max_m", path);
    hm.resolution_m = get_double(h, "resolution_m", path);
    const std::string mode = as_string(require(h, "mode", path), path + ".mode");
    if (mode == "localize_everywhere") {
      hm.mode = HeatmapSpec::Mode::LocalizeEverywhere;
    } else if (mode == "fixed_focus") {
      hm.mode = HeatmapSpec::Mode::FixedFocus;
      hm.focus = parse_position(require(h, "focus", path), path + ".focus");
    } else {
      fail(path + ".mode", "expected localize_everywhere or fixed_focus");
    }
    hm.scheme = find_scheme(as_string(require(h, "scheme", path), path + ".scheme"),
                            path + ".scheme");
    hm.snr_db = get_double(h, "snr_db", path);
    hm.trials = get_int(h, "trials", path);
    rc.heatmap = hm;
  }
  if (root.contains("rf_sweep")) {
    const json& r = root.at("rf_sweep");
    const std::string path = "$.rf_sweep";
    reject_unknown(r, {"rf_counts"}, path);
    const json& counts = require(r, "rf_counts", path);
    if (!counts.is_array() || counts.empty())
      fail(path + ".rf_counts", "expected a non-empty array");
    for (std::size_t i = 0; i < counts.size(); ++i)
      rc.rf_counts.push_back(
          as_int(counts.at(i), path + ".rf_counts[" + std::to_string(i) + "]"));
  }
  if (root.contains("single_run")) {
    const json& s = root.at("single_run");
    const std::string path = "$.single_run";
    reject_unknown(s, {"scheme", "snr_db"}, path);
    SingleRunSpec sr;
    sr.scheme_label = as_string(require(s, "scheme", path), path + ".scheme");
    find_scheme(sr.scheme_label, path + ".scheme");
    sr.snr_db = get_double(s, "snr_db", path);
    rc.single_run = sr;
  }
  if (root.contains("output")) {
    const json& o = root.at("output");
    reject_unknown(o, {"verbosity"}, "$.output");
    rc.verbosity = opt_int(o, "verbosity", 1, "$.output");
  }

  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  }

  // Resolved echo, defaults included, for reproducibility headers.
  nlohmann::ordered_json res;
  res["array"] = {{"n_rows", spec.n_rows},
                  {"n_cols", spec.n_cols},
                  {"row_spacing_m", spec.row_spacing_m},
                  {"col_spacing_m", spec.col_spacing_m},
                  {"wavelength_m", spec.wavelength_m}};
  res["signal"] = {{"carrier_frequency_hz", spec.carrier_frequency_hz},
                   {"speed_of_light_m_s", spec.speed_of_light_m_s},
                   {"pilot_phase_rad", spec.pilot_phase_rad},
                   {"n_snapshots", spec.n_snapshots}};
  res["waveguide"] = {{"attenuation_per_m", spec.waveguide_attenuation_per_m},
                      {"wavenumber_per_m", spec.waveguide_wavenumber_per_m}};
  res["users"] = nlohmann::ordered_json::array();
  for (const SourcePosition& p : spec.users) res["users"].push_back(position_json(p));
  res["search_grid"] = {{"distance_min_m", spec.grid.distance.lo},
                        {"distance_max_m", spec.grid.distance.hi},
                        {"distance_points", spec.grid.distance.points},
                        {"azimuth_min_rad", spec.grid.azimuth.lo},
                        {"azimuth_max_rad", spec.grid.azimuth.hi},
                        {"azimuth_points", spec.grid.azimuth.points},
                        {"refine_levels", spec.grid.refine_levels}};
  if (spec.grid.fix_elevation) {
    res["search_grid"]["elevation_fixed_rad"] = *spec.grid.fix_elevation;
  } else {
    res["search_grid"]["elevation_min_rad"] = spec.grid.elevation.lo;
    res["search_grid"]["elevation_max_rad"] = spec.grid.elevation.hi;
    res["search_grid"]["elevation_points"] = spec.grid.elevation.points;
  }
  res["estimation"] = {{"max_outer_iterations", spec.max_outer_iterations},
                       {"monte_carlo_trials", spec.monte_carlo_trials},
                       {"snr_grid_db", spec.snr_grid_db},
                       {"base_seed", spec.base_seed}};
  res["rcg"] = {{"max_iters", spec.rcg.max_iters},
                {"grad_tolerance", spec.rcg.grad_tolerance},
                {"armijo_initial_step", spec.rcg.armijo_initial_step},
                {"armijo_shrink", spec.rcg.armijo_shrink},
                {"armijo_sufficient_decrease", spec.rcg.armijo_sufficient_decrease},
                {"max_backtracks", spec.rcg.max_backtracks},
                {"pr_restart_threshold", spec.rcg.pr_restart_threshold}};
  res["schemes"] = nlohmann::ordered_json::array();
  for (const SchemeConfig& s : spec.schemes) res["schemes"].push_back(scheme_json(s));
  if (rc.heatmap) {
    res["heatmap"] = {{"x_min_m", rc.heatmap->x_min_m},
                      {"x_max_m", rc.heatmap->x_max_m},
                      {"y_min_m", rc.heatmap->y_min_m},
                      {"y_max_m", rc.heatmap->y_max_m},
                      {"resolution_m", rc.heatmap->resolution_m},
                      {"mode", rc.heatmap->mode == HeatmapSpec::Mode::FixedFocus
                                   ? "fixed_focus"
                                   : "localize_everywhere"},
                      {"scheme", rc.heatmap->scheme.label},
                      {"snr_db", rc.heatmap->snr_db},
                      {"trials", rc.heatmap->trials}};
    if (rc.heatmap->mode == HeatmapSpec::Mode::FixedFocus)
      res["heatmap"]["focus"] = position_json(rc.heatmap->focus);
  }
  if (!rc.rf_counts.empty()) res["rf_sweep"] = {{"rf_counts", rc.rf_counts}};
  if (rc.single_run)
    res["single_run"] = {{"scheme", rc.single_run->scheme_label},
                         {"snr_db", rc.single_run->snr_db}};
  res["output"] = {{"verbosity", rc.verbosity}};
  rc.resolved = std::move(res);
  return rc;
}

inline RunConfig load_run_config(const std::string& file_path) {
  std::ifstream in(file_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + file_path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace nfloc

#endif  // NFLOC_EXPERIMENT_CONFIG_HPP

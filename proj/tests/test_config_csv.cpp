// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with RF-chain-reduced arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "nfloc/csv_writer.hpp"
#include "nfloc/experiment_config.hpp"

using namespace nfloc;

namespace {

std::string minimal_config() {
  return R"({
    "array": {"n_rows": 4, "n_cols": 8, "row_spacing_m": 0.025,
              "col_spacing_m": 0.005, "wavelength_m": 0.01},
    "signal": {"carrier_frequency_hz": 28e9, "n_snapshots": 50},
    "waveguide": {"attenuation_per_m": 0.6, "wavenumber_per_m": 827.67},
    "users": [{"distance_m": 0.35, "azimuth_rad": 0.5235987755982988}],
    "search_grid": {"distance_min_m": 0.1, "distance_max_m": 1.075,
                    "distance_points": 40, "azimuth_min_rad": 0.26,
                    "azimuth_max_rad": 1.81, "azimuth_points": 60,
                    "refine_levels": 2},
    "estimation": {"max_outer_iterations": 5, "monte_carlo_trials": 10,
                   "snr_grid_db": [-10, -5], "base_seed": 7},
    "schemes": [{"label": "dma_rcg", "architecture": "dma", "tuning": "rcg",
                 "q_mode": "alternating"}]
  })";
}

}  // namespace

TEST_CASE("run configs parse into experiment specs", "[config]") {
  const RunConfig rc = parse_run_config(minimal_config());
  REQUIRE(rc.spec.n_rows == 4);
  REQUIRE(rc.spec.n_cols == 8);
  REQUIRE(rc.spec.carrier_frequency_hz == 28e9);
  REQUIRE(rc.spec.speed_of_light_m_s == kSpeedOfLight);  // default applied
  REQUIRE(rc.spec.users.size() == 1);
  REQUIRE(rc.spec.users[0].elevation_rad == Catch::Approx(kPi / 2));
  REQUIRE(rc.spec.snr_grid_db == std::vector<double>{-10.0, -5.0});
  REQUIRE(rc.spec.base_seed == 7);
  REQUIRE(rc.spec.schemes.size() == 1);
  REQUIRE(rc.spec.schemes[0].architecture == ArchitectureKind::Dma);
  REQUIRE(rc.spec.schemes[0].tuning == TuningMethod::Rcg);
  REQUIRE(rc.spec.grid.fix_elevation.has_value());
  REQUIRE(rc.verbosity == 1);
  // the resolved echo repeats defaults for reproducibility headers
  REQUIRE(rc.resolved["signal"]["speed_of_light_m_s"].get<double>() == kSpeedOfLight);
  REQUIRE(rc.resolved["estimation"]["base_seed"].get<std::uint64_t>() == 7);
}

TEST_CASE("config rejection is fail-fast and precise", "[config]") {
  SECTION("unknown keys are rejected with their path") {
    std::string text = minimal_config();
    text.replace(text.find("\"n_rows\""), 8, "\"n_rowz\"");
    try {
      parse_run_config(text);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      REQUIRE(std::string(e.what()).find("n_rowz") != std::string::npos);
      REQUIRE(std::string(e.what()).find("$.array") != std::string::npos);
    }
  }

  SECTION("missing required keys are reported") {
    std::string text = minimal_config();
    text.replace(text.find("\"base_seed\": 7"), 14, "\"base_seed\":7,\"x\":1");
    REQUIRE_THROWS_AS(parse_run_config(text), ConfigError);
  }

  SECTION("malformed JSON reports line and column") {
    const std::string text = "{\n  \"array\": {\n    oops\n  }\n}";
    try {
      parse_run_config(text);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      REQUIRE(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }

  SECTION("heatmap scheme labels must resolve") {
    std::string text = minimal_config();
    text.insert(text.rfind('}'),
                R"(, "heatmap": {"x_min_m": 0, "x_max_m": 1, "y_min_m": 0,
                   "y_max_m": 1, "resolution_m": 0.5,
                   "mode": "localize_everywhere", "scheme": "nope",
                   "snr_db": -10, "trials": 2})");
    try {
      parse_run_config(text);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      REQUIRE(std::string(e.what()).find("nope") != std::string::npos);
    }
  }

  SECTION("searched and fixed elevation cannot both be configured") {
    std::string text = minimal_config();
    text.replace(text.find("\"refine_levels\": 2"), 18,
                 "\"refine_levels\": 2, \"elevation_fixed_rad\": 1.57, "
                 "\"elevation_min_rad\": 1.0, \"elevation_max_rad\": 2.0, "
                 "\"elevation_points\": 5");
    REQUIRE_THROWS_AS(parse_run_config(text), ConfigError);
  }

  SECTION("invalid enum values are rejected") {
    std::string text = minimal_config();
    text.replace(text.find("\"rcg\""), 5, "\"abc\"");
    REQUIRE_THROWS_AS(parse_run_config(text), ConfigError);
  }
}

TEST_CASE("csv writer emits deterministic tables", "[config]") {
  CsvWriter csv;
  csv.comment("tool demo");
  csv.header({"a", "b", "c"});
  csv.row({csv_number(1), csv_number(2.5), csv_number(std::uint64_t{7})});
  csv.row({csv_number(-0.125), "text", csv_number(0)});

  const std::string expected =
      "# tool demo\n"
      "a,b,c\n"
      "1,2.5,7\n"
      "-0.125,text,0\n";
  REQUIRE(csv.str() == expected);

  SECTION("number formatting is stable across calls") {
    REQUIRE(csv_number(0.1) == csv_number(0.1));
    REQUIRE(csv_number(1.0 / 3.0) == "0.333333333333");
    REQUIRE(csv_number(1e-7) == "1e-07");
  }
}

/*
 * Copyright 2026 The dvppsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>

#include <json.hpp>

#include "dvppsim/dvpp.hpp"
#include "dvppsim/engine.hpp"

namespace dvppsim::io {

/// Shortest decimal form with 9 significant digits (printf %.9g).
std::string format_g9(double v);

/// Timeseries table: column "t" followed by f_hz/dp_pu/dq_pu/v_pu columns
/// grouped per device, devices ordered by id. Values use format_g9, so
/// emit(parse(emit(x))) == emit(x) byte for byte.
std::string timeseries_csv(const engine::SimOutput& out);

/// Inverse of timeseries_csv. Only the sampled series and device names
/// survive the text round trip; metadata (ids, buses, ledgers) does not.
engine::SimOutput parse_timeseries_csv(const std::string& text);

/// Structured run summary: solver settings, metrics, and per-plant
/// ledger/audit residuals, serialized as indented JSON.
std::string metrics_json(const engine::Metrics& m, const engine::SimOutput& out,
                         const std::string& scenario_name);

/// Three stacked panels (f, dP, dQ against time), one polyline per device.
std::string plot_svg(const engine::SimOutput& out);

/// Scenario config, schema_version 1. Throws dvppsim::ConfigError with a
/// field-level diagnostic on anything malformed.
engine::Scenario parse_scenario_json(const nlohmann::json& j);
engine::Scenario load_scenario(const std::string& path);
nlohmann::json scenario_to_json(const engine::Scenario& s);

/// Standalone coordinator spec (the `audit` input), schema_version 1.
dvpp::DvppSpec parse_dvpp_spec_json(const nlohmann::json& j);
dvpp::DvppSpec load_dvpp_spec(const std::string& path);
nlohmann::json dvpp_spec_to_json(const dvpp::DvppSpec& spec);

std::string read_file(const std::string& path);
/// Writes via a temp file in the same directory plus rename, creating
/// parent directories as needed.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace dvppsim::io

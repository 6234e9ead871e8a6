# Copyright 2026 The dvppsim Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Phasor-domain grid simulation with coordinated inverter plants."""

from ._core import (
    Allocation,
    AuditReport,
    ConfigError,
    DeviceTrace,
    DvppConfig,
    DvppSpec,
    Error,
    LoadEvent,
    Metrics,
    Scenario,
    SimError,
    SimOutput,
    __version__,
    allocate,
    build_experiment,
    compute_metrics,
    load_dvpp_spec,
    load_scenario,
    metrics_json,
    metrics_text,
    parse_timeseries_csv,
    plot_svg,
    run,
    timeseries_csv,
)

__all__ = [
    "Allocation",
    "AuditReport",
    "ConfigError",
    "DeviceTrace",
    "DvppConfig",
    "DvppSpec",
    "Error",
    "LoadEvent",
    "Metrics",
    "Scenario",
    "SimError",
    "SimOutput",
    "__version__",
    "allocate",
    "build_experiment",
    "compute_metrics",
    "load_dvpp_spec",
    "load_scenario",
    "metrics_json",
    "metrics_text",
    "parse_timeseries_csv",
    "plot_svg",
    "run",
    "timeseries_csv",
]

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

#include <map>
#include <string>
#include <vector>

#include "dvppsim/devices.hpp"
#include "dvppsim/dvpp.hpp"
#include "dvppsim/network.hpp"

namespace dvppsim::engine {

using Complex = std::complex<double>;

/// A device instance attached to a network bus. Electrical quantities
/// inside the model live on the device MVA base; the engine converts to
/// and from the system base at the terminal.
struct PlacedDevice {
  int id = 0;  // unique, referenced by coordinator member lists
  int bus = 0;
  std::string name;
  devices::DeviceModel model;
  /// 0 = standalone; otherwise the id of the coordinator this device
  /// belongs to (its id must appear in that coordinator's spec).
  int dvpp_id = 0;
};

/// Aggregation coordinator: owns the participation allocation for its
/// members and turns measured point-of-connection deviations into
/// per-member reference offsets.
struct DvppConfig {
  int id = 1;
  int bus = 0;
  dvpp::DvppSpec spec;
  /// Members' own droop references follow the measured frequency through
  /// this first-order lag so sustained offsets are carried only by the
  /// coordinated references (0 disables tracking).
  double t_track = 0.2;
};

struct SolverSettings {
  double dt = 1e-3;
  double t_end = 30.0;
};

struct Scenario {
  std::string name;
  network::NetworkModel net;
  std::vector<PlacedDevice> devices;
  std::vector<network::LoadEvent> events;
  std::vector<DvppConfig> dvpps;
  SolverSettings solver;
  int slack_bus = 1;
  double slack_v = 1.04;
  /// Net scheduled injections per generator bus, system pu. The slack
  /// bus entry is ignored (the power flow balances it).
  std::map<int, double> dispatch_p;
  std::map<int, double> dispatch_q;
  /// Internal-angle offsets (rad) by device id, applied after the
  /// equilibrium initialization. Useful for free-oscillation studies.
  std::map<int, double> angle_perturbation;

  void validate() const;
};

struct DeviceTrace {
  int id = 0;
  std::string name;
  int bus = 0;
  int dvpp_id = 0;
  std::vector<double> f_hz;
  std::vector<double> dp_pu;   // deviation from the initial point, system base
  std::vector<double> dq_pu;
  std::vector<double> v_mag_pu;
  bool any_saturated = false;
  bool any_lost_lock = false;
};

struct DvppLedgerRecord {
  int dvpp_id = 0;
  dvpp::DisturbanceLedger ledger;
  dvpp::Allocation allocation;
};

struct SimOutput {
  double dt = 0.0;
  double f_nom_hz = 60.0;
  std::vector<double> t;
  std::vector<DeviceTrace> traces;
  std::vector<double> event_times;
  std::vector<DvppLedgerRecord> dvpp_records;
};

struct Metrics {
  double nadir_hz = 0.0;
  double nadir_time_s = 0.0;
  double max_rocof_hz_per_s = 0.0;
  double coherence_hz = 0.0;
  double steady_state_dev_hz = 0.0;
  double recovery_time_s = 0.0;
  /// Coordinated member names ordered by the time their |dP| peaked
  /// (all devices when the scenario has no coordinator).
  std::vector<std::string> relay_order;
};

/// Canonical three-machine scenarios: 1 = all synchronous machines,
/// 2 = unit 3 replaced by a coordinated hydro/battery/supercapacitor
/// plant, 3 = additionally unit 2 replaced by a coordinated
/// wind/PV/vehicle-storage plant under virtual-synchronous control.
Scenario build_experiment(int n);

SimOutput run(const Scenario& s);

/// Post-event metrics. The event must lie strictly inside the horizon.
Metrics compute_metrics(const SimOutput& out, double t_event);

std::string metrics_text(const Metrics& m);

}  // namespace dvppsim::engine

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

#include <Eigen/Dense>
#include <complex>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace dvppsim::network {

using Complex = std::complex<double>;

struct PerUnitBase {
  double s_base_mva = 100.0;
  double v_base_kv = 230.0;
  double f_nom_hz = 60.0;
};

enum class BusKind { Generator, Load, Transfer };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::Transfer;
  Complex shunt{0.0, 0.0};  // fixed bus shunt admittance, pu
  double load_p = 0.0;      // nominal constant-power load, pu
  double load_q = 0.0;
};

struct Branch {
  int from = 0;
  int to = 0;
  Complex series_z{0.0, 0.0};
  double shunt_b = 0.0;  // total line charging susceptance, pu
};

struct NetworkModel {
  PerUnitBase base;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  Eigen::MatrixXcd y_matrix;  // bus admittance matrix, pu

  int size() const { return static_cast<int>(buses.size()); }
  /// Bus ids are contiguous from 1; index = id - 1.
  int index(int bus_id) const;
  const Bus& bus(int bus_id) const { return buses[index(bus_id)]; }

  /// Assemble y_matrix from branches and bus shunts. Validates ids.
  void build_y();
  /// Branch-only admittance matrix (no line charging, no bus shunts);
  /// every row sums to zero for a connected passive network.
  Eigen::MatrixXcd series_only_y() const;
};

/// Canonical 3-machine 9-bus network on a 100 MVA / 230 kV / 60 Hz base:
/// three step-up transformers, six lines, loads at buses 5, 6 and 8.
NetworkModel build_nine_bus();

/// One step change of constant-impedance load.
struct LoadEvent {
  double t = 0.0;
  int bus = 0;
  double dp = 0.0;  // pu on system base
  double dq = 0.0;
};

/// Constant-impedance load admittances plus scheduled step events. The
/// admittance deltas are computed once, from the reference (pre-event
/// operating point) voltage magnitude at each stepped bus.
struct LoadState {
  std::vector<Complex> y_load;    // per bus, pu
  std::vector<LoadEvent> events;  // sorted by time
  std::vector<Complex> event_dy;  // admittance delta per event

  /// Number of events with t_event <= t.
  int epoch(double t) const;
};

/// Converts the buses' nominal P/Q loads (and the event list) to
/// constant-impedance form at the given voltage profile. Pass a flat
/// profile for unit-voltage conversion.
LoadState make_load_state(const NetworkModel& net,
                          const Eigen::VectorXcd& v_ref,
                          std::vector<LoadEvent> events = {});

/// Voltage source behind an admittance: injects y_src * (emf - v_bus).
struct TheveninSource {
  int bus = 0;
  Complex emf{1.0, 0.0};
  Complex y_src{0.0, 0.0};
};

/// Ideal current injection into a bus.
struct NortonCurrent {
  int bus = 0;
  Complex i_inj{0.0, 0.0};
};

using DeviceInterface = std::variant<TheveninSource, NortonCurrent>;

struct NetworkSolution {
  Eigen::VectorXcd v;              // per-bus voltage, pu
  std::vector<Complex> device_s;   // per-device injected P + jQ, system pu
};

/// Linear complex solver for the algebraic network equation with
/// constant-impedance loads. The admittance matrix (network + loads +
/// Thevenin source admittances) is piecewise constant between load
/// events, so one LU factorization is cached per event epoch.
class NetworkSolver {
public:
  /// The interface list fixes each device's bus and source admittance;
  /// only emf / current values vary between solves.
  NetworkSolver(const NetworkModel& net, LoadState loads,
                std::vector<DeviceInterface> interfaces);

  /// Solve at time t with updated source values (same length/kinds as the
  /// constructor list). Throws dvppsim::SimError on a singular matrix,
  /// naming the most suspect bus.
  NetworkSolution solve(double t,
                        const std::vector<DeviceInterface>& interfaces);

  const LoadState& loads() const { return loads_; }
  int device_count() const { return static_cast<int>(base_interfaces_.size()); }

private:
  const Eigen::FullPivLU<Eigen::MatrixXcd>& factorization(int epoch);

  const NetworkModel* net_;
  LoadState loads_;
  std::vector<DeviceInterface> base_interfaces_;
  Eigen::MatrixXcd y_aug_;  // network + loads(epoch 0) + device shunts
  std::map<int, Eigen::FullPivLU<Eigen::MatrixXcd>> lu_by_epoch_;
};

/// One-shot convenience wrapper around NetworkSolver.
NetworkSolution network_solve_step(const NetworkModel& net,
                                   const LoadState& loads,
                                   const std::vector<DeviceInterface>& ifs,
                                   double t);

struct PowerFlowResult {
  Eigen::VectorXcd v;
  int iterations = 0;
  double max_mismatch = 0.0;
};

/// Newton-Raphson power flow. injections holds the net P + jQ injection
/// (generation minus load) per bus; the slack bus entry is ignored and
/// its voltage pinned to slack_v. Converges to max mismatch < tol.
/// Throws dvppsim::SimError on divergence or a singular Jacobian.
PowerFlowResult solve_power_flow(const NetworkModel& net,
                                 const std::vector<Complex>& injections,
                                 int slack_bus,
                                 Complex slack_v = Complex(1.0, 0.0),
                                 double tol = 1e-8, int max_iter = 50);

/// Per-unit base conversion for powers.
inline double device_to_system(double value_device_pu, double s_device_mva,
                               double s_base_mva) {
  return value_device_pu * s_device_mva / s_base_mva;
}
inline double system_to_device(double value_system_pu, double s_device_mva,
                               double s_base_mva) {
  return value_system_pu * s_base_mva / s_device_mva;
}

}  // namespace dvppsim::network

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

#include <complex>
#include <numbers>
#include <optional>
#include <variant>

#include "dvppsim/network.hpp"

namespace dvppsim::devices {

using Complex = std::complex<double>;

inline constexpr double kOmegaBase60 = 2.0 * std::numbers::pi * 60.0;

/// Electrical quantities a device sees at its terminal each step, on the
/// device base: injected active/reactive power and the terminal voltage
/// phasor in the synchronously rotating system frame.
struct ElecInput {
  double p = 0.0;
  double q = 0.0;
  Complex v_term{1.0, 0.0};
};

struct PqPair {
  double p = 0.0;
  double q = 0.0;
};

/// dq-frame signal bundle of the inverter control loops.
struct DqSignals {
  double v_gd = 0.0, v_gq = 0.0;      // grid voltage
  double i_od = 0.0, i_oq = 0.0;      // inverter output currents
  double i_d = 0.0, i_q = 0.0;        // measured currents
  double i_d_ref = 0.0, i_q_ref = 0.0;
  double v_id_ref = 0.0, v_iq_ref = 0.0;
};

/// Instantaneous powers from dq signals, raw 3/2 form. The per-unit
/// phasor pipeline absorbs the 3/2 into the base and uses S = V conj(I);
/// this raw form is kept for the control-loop arithmetic.
PqPair compute_pq(const DqSignals& sig);

/// Synchronous generator, classical model: constant EMF behind transient
/// reactance, swing equation with damping, first-order governor.
/// All quantities on the device base; omega in pu of nominal speed.
struct SgDevice {
  // parameters
  double h_inertia = 5.0;   // s
  double d_mech = 1.5;      // pu power per pu speed deviation
  double r_gov = 0.05;      // governor droop, pu; +infinity disables it
  double t_gov = 0.5;       // s
  double rating_mva = 100.0;
  double x_transient = 0.25;  // pu
  double omega_base = kOmegaBase60;  // rad/s
  double emf_mag = 1.0;       // fixed after initialization
  double p_mech0 = 0.0;       // dispatch, pu

  // state
  double delta = 0.0;  // rotor angle, rad, system frame
  double omega = 1.0;  // pu
  double p_gov = 0.0;  // governor lag output, pu

  static constexpr int kStates = 3;
  void get_state(double* x) const;
  void set_state(const double* x);
  void deriv(const ElecInput& in, double* dx) const;
};

/// Grid-forming droop inverter: frequency and voltage sag linearly with
/// filtered power errors. tau = 0 bypasses the measurement filter and
/// applies the static droop law directly.
struct DroopDevice {
  // parameters
  double k_p_droop = 0.05;
  double k_d_droop = 0.05;
  double omega_ref = 1.0;
  double v_ref = 1.0;
  double p_ref = 0.0, q_ref = 0.0;
  double tau = 0.02;    // s, omega-P channel filter
  double tau_q = 0.02;  // s, v-Q channel filter
  double x_source = 0.2;  // pu source reactance behind the voltage law
  double rating_mva = 100.0;
  double omega_base = kOmegaBase60;

  // coordinator inputs (defaults leave the device autonomous)
  double p_ref_offset = 0.0, q_ref_offset = 0.0;
  std::optional<double> omega_ref_track;  // tracked grid frequency, pu

  // state
  double theta = 0.0;  // source angle, rad, system frame
  double z_p = 0.0;    // filtered K_P (P - P_ref)
  double z_q = 0.0;    // filtered K_d (Q - Q_ref)

  double p_ref_total() const { return p_ref + p_ref_offset; }
  double q_ref_total() const { return q_ref + q_ref_offset; }
  double effective_omega_ref() const {
    return omega_ref_track.value_or(omega_ref);
  }

  struct Output {
    double omega = 1.0;
    double v = 1.0;
  };
  /// Droop laws evaluated at the current state and measured powers.
  Output outputs(double p, double q) const;
  /// Source EMF magnitude implied by the voltage law (filter state only).
  double emf_mag() const { return v_ref - z_q; }

  static constexpr int kStates = 3;
  void get_state(double* x) const;
  void set_state(const double* x);
  void deriv(const ElecInput& in, double* dx) const;
};

/// Grid-forming inverter with virtual-synchronous-generator control:
/// swing emulation with literal division by omega, frequency-regulation
/// channel through a low-pass filter, plus a v-Q droop channel so the
/// device can take reactive-power coordination inputs.
struct VsgDevice {
  // parameters
  double j_virt = 12.0;   // s^2, power-normalized inertia
  double d_virt = 3.0;    // pu power per pu speed deviation
  double k_omega = 20.0;  // pu power per pu frequency deviation
  double tau = 0.02;      // s, filter on the K_omega channel
  double k_d_droop = 0.05;
  double tau_q = 0.02;
  double omega_ref = 1.0;
  double omega_0 = 1.0;
  double v_ref = 1.0;
  double p_ref = 0.0, q_ref = 0.0;
  bool literal_speed_quotient = true;  // divide by omega, not omega_0
  double x_source = 0.2;
  double rating_mva = 100.0;
  double omega_base = kOmegaBase60;
  double omega_min = 0.9, omega_max = 1.1;  // accepted speed band, pu

  // coordinator inputs
  double p_ref_offset = 0.0, q_ref_offset = 0.0;
  std::optional<double> omega_ref_track;

  // state
  double theta = 0.0;
  double omega = 1.0;
  double z_f = 0.0;  // filtered K_omega (omega_ref - omega)
  double z_q = 0.0;

  double p_ref_total() const { return p_ref + p_ref_offset; }
  double q_ref_total() const { return q_ref + q_ref_offset; }
  double effective_omega_ref() const {
    return omega_ref_track.value_or(omega_ref);
  }
  double p_mech() const;
  double emf_mag() const { return v_ref - z_q; }
  /// Throws dvppsim::SimError when omega leaves the accepted band.
  void check_speed_band(double t = -1.0) const;

  static constexpr int kStates = 4;
  void get_state(double* x) const;
  void set_state(const double* x);
  void deriv(const ElecInput& in, double* dx) const;
};

/// Grid-following inverter: SRF-PLL synchronization and a first-order
/// closed-current-loop phasor model injecting current in the PLL frame.
struct GflDevice {
  // parameters
  double l_f = 0.1;               // pu filter inductance
  double kp_i = 1.0, ki_i = 50.0;  // inner current-loop PI gains
  double kp_pll = 177.7;           // ~20 Hz bandwidth, damping 0.707
  double ki_pll = 15791.0;
  double i_max = 1.2;   // pu current limit
  double t_i = 0.02;    // s, closed current-loop tracking time constant
  double v_lock_min = 0.1;  // pu, loss-of-lock threshold
  double p_ref = 0.0, q_ref = 0.0;
  double rating_mva = 100.0;
  double omega_base = kOmegaBase60;

  // coordinator inputs
  double p_ref_offset = 0.0, q_ref_offset = 0.0;

  // state
  double theta_hat = 0.0;  // estimated grid phase, rad, system frame
  double x_pll = 0.0;      // PLL integrator, rad/s
  double i_d = 0.0, i_q = 0.0;  // injected current, PLL frame, pu

  // derived per-step observations
  double omega_pll = 0.0;  // rad/s deviation from the system frame
  double e_v = 0.0;
  bool saturated = false;
  bool lost_lock = false;

  // inner current-loop integrators (used by gfl_current_loop_step)
  double ci_d = 0.0, ci_q = 0.0;

  double p_ref_total() const { return p_ref + p_ref_offset; }
  double q_ref_total() const { return q_ref + q_ref_offset; }

  /// Current reference in the PLL frame for the present voltage, with
  /// the magnitude clamp applied; sets `clamped` when it engaged.
  Complex current_ref(Complex v_dq, bool* clamped = nullptr) const;
  /// Injected current phasor in the system frame.
  Complex injection() const;
  /// Update saturation / loss-of-lock observations for the solved input.
  void observe(const ElecInput& in);

  static constexpr int kStates = 4;
  void get_state(double* x) const;
  void set_state(const double* x);
  void deriv(const ElecInput& in, double* dx) const;
};

// ---- operation-level steppers (RK4 with inputs held over dt) ----

struct GflVoltageRefs {
  double v_id_ref = 0.0;
  double v_iq_ref = 0.0;
};

/// Inner current controller, one step: clamps the current references in
/// sig to i_max (flagging saturation on the device), advances the PI
/// integrators, and returns the inverter voltage references.
GflVoltageRefs gfl_current_loop_step(GflDevice& dev, DqSignals& sig,
                                     double omega, double dt);

struct PllOutput {
  double theta_hat = 0.0;
  double omega_pll = 0.0;
};
/// Advance the PLL states by dt for a held terminal voltage.
PllOutput pll_step(GflDevice& dev, Complex v_terminal, double dt);

/// Advance the droop filter states by dt for held P, Q; returns the
/// droop law outputs after the step.
DroopDevice::Output droop_step(DroopDevice& dev, double p, double q, double dt);

struct SwingOutput {
  double theta = 0.0;
  double omega = 1.0;
};
/// Advance the VSG swing by dt for held electrical power.
SwingOutput vsg_step(VsgDevice& dev, double p_electrical, double dt);
/// Advance the SG swing + governor by dt for held electrical power.
SwingOutput sg_step(SgDevice& dev, double p_electrical, double dt);

using DeviceModel = std::variant<SgDevice, DroopDevice, VsgDevice, GflDevice>;

/// Network-facing equivalent of the device at its current state, on the
/// device base: voltage source behind reactance for SG/droop/VSG, current
/// injection for GFL.
network::DeviceInterface device_interface(const DeviceModel& dev, int bus = 0);

int state_count(const DeviceModel& dev);
void get_state(const DeviceModel& dev, double* x);
void set_state(DeviceModel& dev, const double* x);
void deriv(const DeviceModel& dev, const ElecInput& in, double* dx);

}  // namespace dvppsim::devices

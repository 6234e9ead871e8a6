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

#include "dvppsim/devices.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "dvppsim/errors.hpp"

namespace dvppsim::devices {

namespace {

// Classic RK4 over a device's state vector with electrical inputs held
// constant across the step.
template <typename Dev>
void rk4_step(Dev& dev, const ElecInput& in, double dt) {
  constexpr int n = Dev::kStates;
  std::array<double, n> x0, k1, k2, k3, k4, xs;
  dev.get_state(x0.data());

  dev.deriv(in, k1.data());
  for (int i = 0; i < n; ++i) xs[i] = x0[i] + 0.5 * dt * k1[i];
  dev.set_state(xs.data());
  dev.deriv(in, k2.data());
  for (int i = 0; i < n; ++i) xs[i] = x0[i] + 0.5 * dt * k2[i];
  dev.set_state(xs.data());
  dev.deriv(in, k3.data());
  for (int i = 0; i < n; ++i) xs[i] = x0[i] + dt * k3[i];
  dev.set_state(xs.data());
  dev.deriv(in, k4.data());

  for (int i = 0; i < n; ++i) {
    xs[i] = x0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  dev.set_state(xs.data());
}

Complex source_admittance(double x, const char* kind) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw Error(std::string(kind) + ": source reactance must be positive");
  }
  return Complex(0.0, -1.0 / x);
}

}  // namespace

PqPair compute_pq(const DqSignals& sig) {
  PqPair out;
  out.p = 1.5 * (sig.v_gd * sig.i_od + sig.v_gq * sig.i_oq);
  out.q = 1.5 * (sig.v_gq * sig.i_od - sig.v_gd * sig.i_oq);
  return out;
}

// ---- SgDevice ----

void SgDevice::get_state(double* x) const {
  x[0] = delta;
  x[1] = omega;
  x[2] = p_gov;
}

void SgDevice::set_state(const double* x) {
  delta = x[0];
  omega = x[1];
  p_gov = x[2];
}

void SgDevice::deriv(const ElecInput& in, double* dx) const {
  const double inv_r = std::isinf(r_gov) ? 0.0 : 1.0 / r_gov;
  const double gov_out =
      (t_gov > 0.0) ? p_gov : -inv_r * (omega - 1.0);
  dx[0] = omega_base * (omega - 1.0);
  dx[1] = (p_mech0 + gov_out - in.p - d_mech * (omega - 1.0)) /
          (2.0 * h_inertia);
  dx[2] = (t_gov > 0.0)
              ? (-inv_r * (omega - 1.0) - p_gov) / t_gov
              : 0.0;
}

// ---- DroopDevice ----

DroopDevice::Output DroopDevice::outputs(double p, double q) const {
  Output out;
  out.omega = (tau > 0.0)
                  ? effective_omega_ref() - z_p
                  : effective_omega_ref() - k_p_droop * (p - p_ref_total());
  out.v = (tau_q > 0.0) ? v_ref - z_q
                        : v_ref - k_d_droop * (q - q_ref_total());
  return out;
}

void DroopDevice::get_state(double* x) const {
  x[0] = theta;
  x[1] = z_p;
  x[2] = z_q;
}

void DroopDevice::set_state(const double* x) {
  theta = x[0];
  z_p = x[1];
  z_q = x[2];
}

void DroopDevice::deriv(const ElecInput& in, double* dx) const {
  dx[0] = omega_base * (outputs(in.p, in.q).omega - 1.0);
  dx[1] = (tau > 0.0)
              ? (k_p_droop * (in.p - p_ref_total()) - z_p) / tau
              : 0.0;
  dx[2] = (tau_q > 0.0)
              ? (k_d_droop * (in.q - q_ref_total()) - z_q) / tau_q
              : 0.0;
}

// ---- VsgDevice ----

double VsgDevice::p_mech() const {
  const double reg = (tau > 0.0)
                         ? z_f
                         : k_omega * (effective_omega_ref() - omega);
  return p_ref_total() + reg;
}

void VsgDevice::check_speed_band(double t) const {
  if (omega < omega_min || omega > omega_max) {
    throw SimError("virtual rotor speed " + std::to_string(omega) +
                       " pu outside accepted band [" +
                       std::to_string(omega_min) + ", " +
                       std::to_string(omega_max) + "]",
                   t);
  }
}

void VsgDevice::get_state(double* x) const {
  x[0] = theta;
  x[1] = omega;
  x[2] = z_f;
  x[3] = z_q;
}

void VsgDevice::set_state(const double* x) {
  theta = x[0];
  omega = x[1];
  z_f = x[2];
  z_q = x[3];
}

void VsgDevice::deriv(const ElecInput& in, double* dx) const {
  const double denom = literal_speed_quotient ? omega : omega_0;
  if (std::abs(denom) < 1e-6) {
    throw SimError("virtual rotor speed too close to zero for swing update");
  }
  dx[0] = omega_base * (omega - 1.0);
  dx[1] = ((p_mech() - in.p) / denom - d_virt * (omega - omega_0)) / j_virt;
  dx[2] = (tau > 0.0)
              ? (k_omega * (effective_omega_ref() - omega) - z_f) / tau
              : 0.0;
  dx[3] = (tau_q > 0.0)
              ? (k_d_droop * (in.q - q_ref_total()) - z_q) / tau_q
              : 0.0;
}

// ---- GflDevice ----

Complex GflDevice::current_ref(Complex v_dq, bool* clamped) const {
  const double v2_floor = v_lock_min * v_lock_min;
  const double v2 = std::max(std::norm(v_dq), v2_floor);
  const Complex s_ref(p_ref_total(), q_ref_total());
  Complex i_ref = std::conj(s_ref) * v_dq / v2;
  bool hit = false;
  const double mag = std::abs(i_ref);
  if (mag > i_max) {
    i_ref *= i_max / mag;
    hit = true;
  }
  if (clamped != nullptr) *clamped = hit;
  return i_ref;
}

Complex GflDevice::injection() const {
  return Complex(i_d, i_q) * std::polar(1.0, theta_hat);
}

void GflDevice::observe(const ElecInput& in) {
  const Complex v_dq = in.v_term * std::polar(1.0, -theta_hat);
  const double vm = std::abs(in.v_term);
  e_v = (vm > 1e-9) ? v_dq.imag() / vm : 0.0;
  omega_pll = kp_pll * e_v + x_pll;
  lost_lock = vm < v_lock_min;
  bool hit = false;
  current_ref(v_dq, &hit);
  saturated = hit;
}

void GflDevice::get_state(double* x) const {
  x[0] = theta_hat;
  x[1] = x_pll;
  x[2] = i_d;
  x[3] = i_q;
}

void GflDevice::set_state(const double* x) {
  theta_hat = x[0];
  x_pll = x[1];
  i_d = x[2];
  i_q = x[3];
}

void GflDevice::deriv(const ElecInput& in, double* dx) const {
  const Complex v_dq = in.v_term * std::polar(1.0, -theta_hat);
  const double vm = std::abs(in.v_term);
  const double ev = (vm > 1e-9) ? v_dq.imag() / vm : 0.0;
  dx[0] = kp_pll * ev + x_pll;
  dx[1] = ki_pll * ev;
  const Complex i_ref = current_ref(v_dq);
  dx[2] = (i_ref.real() - i_d) / t_i;
  dx[3] = (i_ref.imag() - i_q) / t_i;
}

// ---- operation steppers ----

GflVoltageRefs gfl_current_loop_step(GflDevice& dev, DqSignals& sig,
                                     double omega, double dt) {
  if (!(dt > 0.0)) throw Error("current loop: dt must be positive");
  const double mag = std::hypot(sig.i_d_ref, sig.i_q_ref);
  bool hit = false;
  if (mag > dev.i_max) {
    const double scale = dev.i_max / mag;
    sig.i_d_ref *= scale;
    sig.i_q_ref *= scale;
    hit = true;
  }
  dev.saturated = hit;

  const double e_d = sig.i_d_ref - sig.i_d;
  const double e_q = sig.i_q_ref - sig.i_q;
  dev.ci_d += dev.ki_i * e_d * dt;
  dev.ci_q += dev.ki_i * e_q * dt;

  GflVoltageRefs out;
  out.v_id_ref = sig.v_gd + dev.l_f * (dev.kp_i * e_d + dev.ci_d -
                                       omega * dev.l_f * sig.i_q);
  out.v_iq_ref = sig.v_gq + dev.l_f * (dev.kp_i * e_q + dev.ci_q +
                                       omega * dev.l_f * sig.i_d);
  sig.v_id_ref = out.v_id_ref;
  sig.v_iq_ref = out.v_iq_ref;
  return out;
}

PllOutput pll_step(GflDevice& dev, Complex v_terminal, double dt) {
  if (!(dt > 0.0)) throw Error("pll: dt must be positive");
  const double vm = std::abs(v_terminal);

  auto err = [&](double th) {
    return (vm > 1e-9)
               ? (v_terminal * std::polar(1.0, -th)).imag() / vm
               : 0.0;
  };
  auto f = [&](const std::array<double, 2>& x, std::array<double, 2>& dx) {
    const double ev = err(x[0]);
    dx[0] = dev.kp_pll * ev + x[1];
    dx[1] = dev.ki_pll * ev;
  };

  std::array<double, 2> x{dev.theta_hat, dev.x_pll};
  std::array<double, 2> k1, k2, k3, k4, xs;
  f(x, k1);
  xs = {x[0] + 0.5 * dt * k1[0], x[1] + 0.5 * dt * k1[1]};
  f(xs, k2);
  xs = {x[0] + 0.5 * dt * k2[0], x[1] + 0.5 * dt * k2[1]};
  f(xs, k3);
  xs = {x[0] + dt * k3[0], x[1] + dt * k3[1]};
  f(xs, k4);
  dev.theta_hat =
      x[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
  dev.x_pll = x[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);

  dev.e_v = err(dev.theta_hat);
  dev.omega_pll = dev.kp_pll * dev.e_v + dev.x_pll;
  dev.lost_lock = vm < dev.v_lock_min;
  return PllOutput{dev.theta_hat, dev.omega_pll};
}

DroopDevice::Output droop_step(DroopDevice& dev, double p, double q,
                               double dt) {
  if (!(dt > 0.0)) throw Error("droop: dt must be positive");
  rk4_step(dev, ElecInput{p, q, Complex(1.0, 0.0)}, dt);
  return dev.outputs(p, q);
}

SwingOutput vsg_step(VsgDevice& dev, double p_electrical, double dt) {
  if (!(dt > 0.0)) throw Error("vsg: dt must be positive");
  rk4_step(dev, ElecInput{p_electrical, dev.q_ref_total(), Complex(1.0, 0.0)},
           dt);
  dev.check_speed_band();
  return SwingOutput{dev.theta, dev.omega};
}

SwingOutput sg_step(SgDevice& dev, double p_electrical, double dt) {
  if (!(dt > 0.0)) throw Error("sg: dt must be positive");
  rk4_step(dev, ElecInput{p_electrical, 0.0, Complex(1.0, 0.0)}, dt);
  return SwingOutput{dev.delta, dev.omega};
}

// ---- variant helpers ----

network::DeviceInterface device_interface(const DeviceModel& dev, int bus) {
  return std::visit(
      [bus](const auto& d) -> network::DeviceInterface {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, SgDevice>) {
          return network::TheveninSource{
              bus, std::polar(d.emf_mag, d.delta),
              source_admittance(d.x_transient, "sg")};
        } else if constexpr (std::is_same_v<T, DroopDevice>) {
          return network::TheveninSource{
              bus, std::polar(d.emf_mag(), d.theta),
              source_admittance(d.x_source, "droop")};
        } else if constexpr (std::is_same_v<T, VsgDevice>) {
          return network::TheveninSource{
              bus, std::polar(d.emf_mag(), d.theta),
              source_admittance(d.x_source, "vsg")};
        } else {
          return network::NortonCurrent{bus, d.injection()};
        }
      },
      dev);
}

int state_count(const DeviceModel& dev) {
  return std::visit([](const auto& d) { return int(d.kStates); }, dev);
}

void get_state(const DeviceModel& dev, double* x) {
  std::visit([x](const auto& d) { d.get_state(x); }, dev);
}

void set_state(DeviceModel& dev, const double* x) {
  std::visit([x](auto& d) { d.set_state(x); }, dev);
}

void deriv(const DeviceModel& dev, const ElecInput& in, double* dx) {
  std::visit([&](const auto& d) { d.deriv(in, dx); }, dev);
}

}  // namespace dvppsim::devices

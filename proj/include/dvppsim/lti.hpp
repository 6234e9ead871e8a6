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
#include <optional>
#include <string>
#include <vector>

namespace dvppsim::lti {

using Complex = std::complex<double>;

/// Continuous-time SISO transfer function num(s)/den(s).
/// Coefficients are stored in ascending powers of s, so {1.0, 2.0} means
/// 1 + 2s. A default-constructed value is the zero function 0/1.
struct RationalTransfer {
  std::vector<double> num{0.0};
  std::vector<double> den{1.0};

  RationalTransfer() = default;
  RationalTransfer(std::vector<double> n, std::vector<double> d);

  /// Static gain k (numerator {k}, denominator {1}).
  static RationalTransfer gain(double k);
  /// Unity-dc-gain low-pass 1 / (tau*s + 1), tau > 0.
  static RationalTransfer low_pass(double tau);
  /// Washout tau*s / (tau*s + 1), tau > 0.
  static RationalTransfer high_pass(double tau);
  /// Lead-lag k * (1 + t_lead*s) / (1 + t_lag*s), t_lag > 0.
  static RationalTransfer lead_lag(double k, double t_lead, double t_lag);

  int num_degree() const { return static_cast<int>(num.size()) - 1; }
  int den_degree() const { return static_cast<int>(den.size()) - 1; }
  bool is_zero() const;
  /// Proper: deg(num) <= deg(den) after trimming.
  bool is_proper() const;

  Complex eval(Complex s) const;
};

RationalTransfer operator+(const RationalTransfer& a, const RationalTransfer& b);
RationalTransfer operator-(const RationalTransfer& a, const RationalTransfer& b);
RationalTransfer operator*(const RationalTransfer& a, const RationalTransfer& b);
RationalTransfer operator*(double k, const RationalTransfer& a);

/// a / b with pole-zero cancellation: after forming a.num*b.den over
/// a.den*b.num, root pairs closer than cancel_tol (relative to root
/// magnitude) are removed. Throws dvppsim::Error when b is zero.
RationalTransfer divide(const RationalTransfer& a, const RationalTransfer& b,
                        double cancel_tol = 1e-9);

/// Roots of the denominator polynomial (companion-matrix eigenvalues).
std::vector<Complex> poles(const RationalTransfer& tf);
/// Roots of the numerator polynomial. Empty for constant numerators.
std::vector<Complex> zeros(const RationalTransfer& tf);

/// All denominator roots strictly in the open left half-plane.
/// A margin of 0 accepts poles on the imaginary axis as unstable.
bool is_stable(const RationalTransfer& tf, double margin = 0.0);

/// Gain at s = 0. Returns +/-inf for a pole at the origin; throws
/// dvppsim::Error for the indeterminate 0/0 case.
double dc_gain(const RationalTransfer& tf);

/// Limit of |num/den| as s -> infinity, from the leading coefficients:
/// 0 for strictly proper, num_lead/den_lead for biproper. Throws for
/// improper functions.
double hf_gain(const RationalTransfer& tf);

/// Frequency response H(j*omega_rad_s).
Complex eval_freq(const RationalTransfer& tf, double omega_rad_s);

/// Discrete-time realization of a proper RationalTransfer: controllable
/// canonical state space advanced by the trapezoidal (bilinear) rule with
/// the input held constant over each sample interval. step(u) holds u for
/// one interval and returns the output at the end of it, so a caller
/// looping k = 1..N sees outputs at t = k*dt. A-stable: stable continuous
/// blocks stay stable at any dt.
class LtiBlock {
public:
  LtiBlock() = default;
  LtiBlock(const RationalTransfer& tf, double dt);

  /// Hold u over [t, t+dt), advance the state, return the output at t+dt.
  /// Throws dvppsim::SimError when u or the produced output is not finite.
  double step(double u);

  /// Output that step(u) would produce, without advancing.
  double peek(double u) const;

  /// Zero the internal state.
  void reset();
  /// Place the state on the equilibrium for constant input u0 so that
  /// step(u0) returns dc_gain*u0 indefinitely. Requires a nonsingular
  /// (I - Ad); throws dvppsim::Error otherwise (e.g. pure integrators).
  void set_equilibrium(double u0);

  int order() const { return static_cast<int>(x_.size()); }
  double dt() const { return dt_; }
  const Eigen::VectorXd& state() const { return x_; }

  const Eigen::MatrixXd& ad() const { return ad_; }
  const Eigen::VectorXd& bd() const { return bd_; }
  const Eigen::RowVectorXd& c() const { return c_; }
  double d() const { return d_; }

private:
  Eigen::MatrixXd ad_;   // (I - (dt/2)A)^-1 (I + (dt/2)A)
  Eigen::VectorXd bd_;   // (I - (dt/2)A)^-1 dt B
  Eigen::RowVectorXd c_; // continuous output row
  double d_ = 0.0;       // continuous feedthrough
  Eigen::VectorXd x_;
  double dt_ = 0.0;
};

/// Builds the bilinear realization; state dimension equals the trimmed
/// denominator degree. Throws dvppsim::Error for improper transfer
/// functions, non-positive dt, or a zero denominator.
LtiBlock realize(const RationalTransfer& tf, double dt);

/// Discrete PI controller with output clamping and conditional
/// anti-windup (the integrator freezes while pushing further into a
/// saturated limit).
struct PiController {
  double kp = 0.0;
  double ki = 0.0;
  double integrator = 0.0;
  std::optional<double> out_min;
  std::optional<double> out_max;
  bool saturated = false;

  double step(double error, double dt);
  void reset();
};

}  // namespace dvppsim::lti

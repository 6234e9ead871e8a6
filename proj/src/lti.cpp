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

#include "dvppsim/lti.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dvppsim/errors.hpp"

namespace dvppsim::lti {

namespace {

constexpr double kTrimRel = 1e-12;

double max_abs(const std::vector<double>& c) {
  double m = 0.0;
  for (double v : c) m = std::max(m, std::abs(v));
  return m;
}

// Drop vanishing high-order coefficients. Keeps at least one entry.
std::vector<double> trimmed(std::vector<double> c) {
  if (c.empty()) return {0.0};
  const double tol = kTrimRel * max_abs(c);
  while (c.size() > 1 && std::abs(c.back()) <= tol) c.pop_back();
  if (c.size() == 1 && std::abs(c[0]) <= tol) c[0] = 0.0;
  return c;
}

std::vector<double> conv(const std::vector<double>& a,
                         const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

std::vector<double> poly_add(const std::vector<double>& a,
                             const std::vector<double>& b, double sign_b) {
  std::vector<double> out(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += sign_b * b[i];
  return out;
}

Complex polyval(const std::vector<double>& c, Complex s) {
  Complex v{0.0, 0.0};
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * s + *it;
  return v;
}

// Roots of an ascending-coefficient polynomial via the companion matrix.
std::vector<Complex> poly_roots(std::vector<double> c) {
  c = trimmed(std::move(c));
  const int n = static_cast<int>(c.size()) - 1;
  if (n <= 0) return {};
  if (n == 1) return {Complex(-c[0] / c[1], 0.0)};
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i) comp(i, n - 1) = -c[i] / c[n];
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, /*computeEigenvectors=*/false);
  std::vector<Complex> roots(n);
  for (int i = 0; i < n; ++i) roots[i] = es.eigenvalues()(i);
  return roots;
}

// Real polynomial with the given roots and leading coefficient. Roots are
// expected in (near-)conjugate pairs; residual imaginary parts are dropped.
std::vector<double> poly_from_roots(const std::vector<Complex>& roots,
                                    double lead) {
  std::vector<Complex> acc{Complex(1.0, 0.0)};
  for (const Complex& r : roots) {
    std::vector<Complex> next(acc.size() + 1, Complex(0.0, 0.0));
    for (std::size_t i = 0; i < acc.size(); ++i) {
      next[i] += -r * acc[i];
      next[i + 1] += acc[i];
    }
    acc = std::move(next);
  }
  std::vector<double> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = lead * acc[i].real();
  return out;
}

}  // namespace

RationalTransfer::RationalTransfer(std::vector<double> n, std::vector<double> d)
    : num(trimmed(std::move(n))), den(trimmed(std::move(d))) {
  for (double v : num)
    if (!std::isfinite(v)) throw Error("transfer function: non-finite numerator coefficient");
  for (double v : den)
    if (!std::isfinite(v)) throw Error("transfer function: non-finite denominator coefficient");
  if (max_abs(den) == 0.0) throw Error("transfer function: zero denominator");
}

RationalTransfer RationalTransfer::gain(double k) { return {{k}, {1.0}}; }

RationalTransfer RationalTransfer::low_pass(double tau) {
  if (!(tau > 0.0)) throw Error("low_pass: tau must be positive");
  return {{1.0}, {1.0, tau}};
}

RationalTransfer RationalTransfer::high_pass(double tau) {
  if (!(tau > 0.0)) throw Error("high_pass: tau must be positive");
  return {{0.0, tau}, {1.0, tau}};
}

RationalTransfer RationalTransfer::lead_lag(double k, double t_lead,
                                            double t_lag) {
  if (!(t_lag > 0.0)) throw Error("lead_lag: lag time constant must be positive");
  return {{k, k * t_lead}, {1.0, t_lag}};
}

bool RationalTransfer::is_zero() const { return max_abs(num) == 0.0; }

bool RationalTransfer::is_proper() const {
  return is_zero() || num_degree() <= den_degree();
}

Complex RationalTransfer::eval(Complex s) const {
  return polyval(num, s) / polyval(den, s);
}

RationalTransfer operator+(const RationalTransfer& a,
                           const RationalTransfer& b) {
  return {poly_add(conv(a.num, b.den), conv(b.num, a.den), +1.0),
          conv(a.den, b.den)};
}

RationalTransfer operator-(const RationalTransfer& a,
                           const RationalTransfer& b) {
  return {poly_add(conv(a.num, b.den), conv(b.num, a.den), -1.0),
          conv(a.den, b.den)};
}

RationalTransfer operator*(const RationalTransfer& a,
                           const RationalTransfer& b) {
  if (a.is_zero() || b.is_zero()) return {};
  return {conv(a.num, b.num), conv(a.den, b.den)};
}

RationalTransfer operator*(double k, const RationalTransfer& a) {
  std::vector<double> n = a.num;
  for (double& v : n) v *= k;
  return {std::move(n), a.den};
}

RationalTransfer divide(const RationalTransfer& a, const RationalTransfer& b,
                        double cancel_tol) {
  if (b.is_zero()) throw Error("divide: division by the zero transfer function");
  if (a.is_zero()) return {};
  std::vector<double> num = conv(a.num, b.den);
  std::vector<double> den = conv(a.den, b.num);

  std::vector<Complex> zs = poly_roots(num);
  std::vector<Complex> ps = poly_roots(den);
  std::vector<bool> z_used(zs.size(), false);
  std::vector<bool> p_used(ps.size(), false);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < zs.size(); ++j) {
      if (z_used[j]) continue;
      const double d = std::abs(ps[i] - zs[j]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0 && best_d <= cancel_tol * std::max(1.0, std::abs(ps[i]))) {
      p_used[i] = true;
      z_used[best] = true;
    }
  }

  bool any = false;
  for (bool u : p_used) any = any || u;
  if (!any) return {std::move(num), std::move(den)};

  std::vector<Complex> zs_left, ps_left;
  for (std::size_t j = 0; j < zs.size(); ++j)
    if (!z_used[j]) zs_left.push_back(zs[j]);
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (!p_used[i]) ps_left.push_back(ps[i]);

  const std::vector<double> tn = trimmed(num);
  const std::vector<double> td = trimmed(den);
  return {poly_from_roots(zs_left, tn.back()),
          poly_from_roots(ps_left, td.back())};
}

std::vector<Complex> poles(const RationalTransfer& tf) {
  return poly_roots(tf.den);
}

std::vector<Complex> zeros(const RationalTransfer& tf) {
  return poly_roots(tf.num);
}

bool is_stable(const RationalTransfer& tf, double margin) {
  for (const Complex& p : poles(tf))
    if (p.real() >= -margin) return false;
  return true;
}

double dc_gain(const RationalTransfer& tf) {
  const double n0 = tf.num[0];
  const double d0 = tf.den[0];
  const double n_scale = std::max(max_abs(tf.num), 1e-300);
  const double d_scale = std::max(max_abs(tf.den), 1e-300);
  const bool n0_zero = std::abs(n0) <= 1e-12 * n_scale;
  const bool d0_zero = std::abs(d0) <= 1e-12 * d_scale;
  if (tf.is_zero()) return 0.0;
  if (d0_zero && n0_zero)
    throw Error("dc_gain: indeterminate 0/0 at s=0; cancel the shared root first");
  if (d0_zero) {
    // Pole at the origin: sign of the limit along s -> 0+.
    for (double dk : tf.den)
      if (std::abs(dk) > 1e-12 * d_scale)
        return std::copysign(std::numeric_limits<double>::infinity(), n0 * dk);
  }
  return n0 / d0;
}

double hf_gain(const RationalTransfer& tf) {
  if (tf.is_zero()) return 0.0;
  if (tf.num_degree() > tf.den_degree())
    throw Error("hf_gain: improper transfer function diverges at high frequency");
  if (tf.num_degree() < tf.den_degree()) return 0.0;
  return tf.num.back() / tf.den.back();
}

Complex eval_freq(const RationalTransfer& tf, double omega_rad_s) {
  return tf.eval(Complex(0.0, omega_rad_s));
}

LtiBlock::LtiBlock(const RationalTransfer& tf, double dt) {
  if (!(dt > 0.0)) throw Error("realize: dt must be positive");
  if (!tf.is_proper())
    throw Error("realize: improper transfer function has no causal realization");
  const std::vector<double>& a = tf.den;
  const int n = tf.den_degree();
  const double an = a.back();
  dt_ = dt;

  if (n == 0) {
    ad_.resize(0, 0);
    bd_.resize(0);
    c_.resize(0);
    d_ = tf.num[0] / a[0];
    x_.resize(0);
    return;
  }

  // Controllable canonical form of num/den, denominator made monic.
  Eigen::MatrixXd ac = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd bc = Eigen::VectorXd::Zero(n);
  Eigen::RowVectorXd cc = Eigen::RowVectorXd::Zero(n);
  std::vector<double> b(static_cast<std::size_t>(n) + 1, 0.0);
  for (std::size_t i = 0; i < tf.num.size(); ++i) b[i] = tf.num[i] / an;
  const double d = b[static_cast<std::size_t>(n)];
  for (int i = 0; i + 1 < n; ++i) ac(i, i + 1) = 1.0;
  for (int i = 0; i < n; ++i) ac(n - 1, i) = -a[i] / an;
  bc(n - 1) = 1.0;
  for (int i = 0; i < n; ++i) cc(i) = b[i] - d * (a[i] / an);

  // Trapezoidal update with held input:
  //   (I - (dt/2)A) x_{k+1} = (I + (dt/2)A) x_k + dt B u_k
  const double alpha = dt / 2.0;
  Eigen::MatrixXd ima = Eigen::MatrixXd::Identity(n, n) - alpha * ac;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(ima);
  if (!lu.isInvertible())
    throw Error("realize: continuous pole at 2/dt makes the bilinear map singular");
  const Eigen::MatrixXd ima_inv = lu.inverse();
  ad_ = ima_inv * (Eigen::MatrixXd::Identity(n, n) + alpha * ac);
  bd_ = ima_inv * (dt * bc);
  c_ = cc;
  d_ = d;
  x_ = Eigen::VectorXd::Zero(n);
}

double LtiBlock::step(double u) {
  if (!std::isfinite(u))
    throw SimError("lti block: non-finite input sample");
  if (x_.size()) x_ = ad_ * x_ + bd_ * u;
  const double y = (x_.size() ? (c_ * x_)(0, 0) : 0.0) + d_ * u;
  if (!std::isfinite(y) || !x_.allFinite())
    throw SimError("lti block: state or output became non-finite");
  return y;
}

double LtiBlock::peek(double u) const {
  if (!x_.size()) return d_ * u;
  Eigen::VectorXd xn = ad_ * x_ + bd_ * u;
  return (c_ * xn)(0, 0) + d_ * u;
}

void LtiBlock::reset() { x_.setZero(); }

void LtiBlock::set_equilibrium(double u0) {
  if (!x_.size()) return;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(x_.size(), x_.size()) - ad_;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible())
    throw Error("set_equilibrium: block has a pole at z=1 (no equilibrium)");
  x_ = lu.solve(bd_ * u0);
}

LtiBlock realize(const RationalTransfer& tf, double dt) {
  return LtiBlock(tf, dt);
}

double PiController::step(double error, double dt) {
  const double cand = integrator + ki * error * dt;
  const double raw_cand = kp * error + cand;
  const bool hi = out_max && raw_cand > *out_max;
  const bool lo = out_min && raw_cand < *out_min;
  saturated = hi || lo;
  // Conditional anti-windup: hold the integrator while the error keeps
  // pushing into an active limit.
  if (!(hi && error > 0.0) && !(lo && error < 0.0)) integrator = cand;
  double out = kp * error + integrator;
  if (out_max && out > *out_max) out = *out_max;
  if (out_min && out < *out_min) out = *out_min;
  return out;
}

void PiController::reset() {
  integrator = 0.0;
  saturated = false;
}

}  // namespace dvppsim::lti

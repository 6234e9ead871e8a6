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

#include "dvppsim/dvpp.hpp"

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <doctest.h>

#include "dvppsim/errors.hpp"
#include "dvppsim/lti.hpp"

using namespace dvppsim;
using namespace dvppsim::dvpp;
using lti::RationalTransfer;
using Complex = std::complex<double>;

namespace {

ParticipationFactor default_target() {
  // droop-plus-derivative aggregate shape on both channels
  ParticipationFactor t;
  t.phi_wp = RationalTransfer({50.0, 50.0 * 0.2}, {1.0, 0.1});
  t.gamma_vq = RationalTransfer({12.0, 12.0 * 0.05}, {1.0, 0.1});
  return t;
}

Member controllable(int id, MemberClass cls, double mva) {
  Member m;
  m.device_id = id;
  m.band_class = cls;
  m.controllable = true;
  m.capacity_mva = mva;
  return m;
}

}  // namespace

TEST_CASE("band family matches its closed forms and sums to one") {
  const double ts = 10.0, tf = 0.1;
  const auto fam = design_band_family(ts, tf);

  for (double w : {1e-3, 0.05, 1.0, 20.0, 1e3}) {
    const Complex s(0.0, w);
    const Complex lpf = 1.0 / (ts * s + 1.0);
    const Complex hpf = tf * s / (tf * s + 1.0);
    const Complex bpf = (ts - tf) * s / ((ts * s + 1.0) * (tf * s + 1.0));
    CHECK(std::abs(fam.lpf.eval(s) - lpf) < 1e-14);
    CHECK(std::abs(fam.hpf.eval(s) - hpf) < 1e-14);
    CHECK(std::abs(fam.bpf.eval(s) - bpf) < 1e-13);
    const Complex sum = fam.lpf.eval(s) + fam.bpf.eval(s) + fam.hpf.eval(s);
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }

  CHECK(lti::dc_gain(fam.lpf) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(lti::dc_gain(fam.bpf) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(lti::dc_gain(fam.hpf) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(lti::hf_gain(fam.lpf) == doctest::Approx(0.0));
  CHECK(lti::hf_gain(fam.bpf) == doctest::Approx(0.0));
  CHECK(lti::hf_gain(fam.hpf) == doctest::Approx(1.0));

  CHECK_THROWS_AS(design_band_family(0.1, 0.1), ConfigError);
  CHECK_THROWS_AS(design_band_family(0.05, 0.1), ConfigError);
  CHECK_THROWS_AS(design_band_family(5.0, 0.0), ConfigError);
}

TEST_CASE("single controllable member takes the identity share") {
  DvppSpec spec;
  spec.xi_target = default_target();
  spec.members = {controllable(1, MemberClass::Slow, 100.0)};
  const auto alloc = allocate(spec);
  REQUIRE(alloc.gamma.size() == 1);
  CHECK(lti::dc_gain(alloc.gamma[0].phi_wp) == doctest::Approx(1.0));
  CHECK(lti::dc_gain(alloc.gamma[0].gamma_vq) == doctest::Approx(1.0));
  for (double w : {1e-2, 1.0, 1e2}) {
    CHECK(std::abs(lti::eval_freq(alloc.gamma[0].phi_wp, w) - 1.0) < 1e-12);
  }
  CHECK(alloc.audit.pass);
}

TEST_CASE("slow and fast pair splits at the slow corner") {
  DvppSpec spec;
  spec.xi_target = default_target();
  spec.t_slow = 5.0;
  spec.t_fast = 0.05;
  spec.members = {controllable(1, MemberClass::Slow, 180.0),
                  controllable(2, MemberClass::Fast, 20.0)};
  const auto alloc = allocate(spec);

  for (double w : {1e-3, 0.1, 1.0, 1e2}) {
    const Complex s(0.0, w);
    const Complex expect_slow = 1.0 / (5.0 * s + 1.0);
    const Complex expect_fast = 5.0 * s / (5.0 * s + 1.0);
    CHECK(std::abs(lti::eval_freq(alloc.gamma[0].phi_wp, w) - expect_slow) <
          1e-12);
    CHECK(std::abs(lti::eval_freq(alloc.gamma[1].phi_wp, w) - expect_fast) <
          1e-12);
  }
  CHECK(alloc.audit.max_residual_wp < 1e-12);
  CHECK(alloc.audit.max_residual_vq < 1e-12);
  REQUIRE(!alloc.diagnostics.empty());
  CHECK(alloc.diagnostics[0].find("merged") != std::string::npos);
}

TEST_CASE("three-class split assigns band roles by class") {
  DvppSpec spec;
  spec.xi_target = default_target();
  spec.members = {controllable(1, MemberClass::Slow, 250.0),
                  controllable(2, MemberClass::Mid, 50.0),
                  controllable(3, MemberClass::Fast, 20.0)};
  const auto alloc = allocate(spec);

  // steady state rests entirely on the slow unit
  CHECK(lti::dc_gain(alloc.gamma[0].phi_wp) == doctest::Approx(1.0));
  CHECK(lti::dc_gain(alloc.gamma[1].phi_wp) == doctest::Approx(0.0));
  CHECK(lti::dc_gain(alloc.gamma[2].phi_wp) == doctest::Approx(0.0));
  // the fastest transients rest entirely on the fast unit
  CHECK(lti::hf_gain(alloc.gamma[0].phi_wp) == doctest::Approx(0.0));
  CHECK(lti::hf_gain(alloc.gamma[1].phi_wp) == doctest::Approx(0.0));
  CHECK(lti::hf_gain(alloc.gamma[2].phi_wp) == doctest::Approx(1.0));

  CHECK(alloc.audit.pass);
  CHECK(alloc.audit.max_residual_wp < 1e-9);
  CHECK(alloc.audit.max_residual_vq < 1e-9);
  CHECK(alloc.diagnostics.empty());

  // realized shares compose with the target
  for (double w : {1e-2, 1.0, 1e2}) {
    const Complex lhs = lti::eval_freq(alloc.realized_xi[1].phi_wp, w);
    const Complex rhs = lti::eval_freq(alloc.gamma[1].phi_wp, w) *
                        lti::eval_freq(spec.xi_target.phi_wp, w);
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("capacity sets the static split inside a class") {
  DvppSpec spec;
  spec.xi_target = default_target();
  spec.members = {controllable(1, MemberClass::Slow, 100.0),
                  controllable(2, MemberClass::Mid, 30.0),
                  controllable(3, MemberClass::Mid, 60.0),
                  controllable(4, MemberClass::Fast, 10.0)};
  const auto alloc = allocate(spec);

  for (double w : {1e-2, 0.5, 10.0}) {
    const Complex a = lti::eval_freq(alloc.gamma[1].phi_wp, w);
    const Complex b = lti::eval_freq(alloc.gamma[2].phi_wp, w);
    CHECK(std::abs(a / b - 0.5) < 1e-12);  // 30 vs 60 MVA
  }

  // scaling both mid capacities leaves the class band untouched
  DvppSpec scaled = spec;
  scaled.members[1].capacity_mva *= 7.0;
  scaled.members[2].capacity_mva *= 7.0;
  const auto alloc2 = allocate(scaled);
  for (double w : {1e-2, 0.5, 10.0}) {
    const Complex band1 = lti::eval_freq(alloc.gamma[1].phi_wp, w) +
                          lti::eval_freq(alloc.gamma[2].phi_wp, w);
    const Complex band2 = lti::eval_freq(alloc2.gamma[1].phi_wp, w) +
                          lti::eval_freq(alloc2.gamma[2].phi_wp, w);
    CHECK(std::abs(band1 - band2) < 1e-12);
  }
  CHECK(alloc.audit.pass);
  CHECK(alloc2.audit.pass);
}

TEST_CASE("fixed member shares divide out of the target") {
  DvppSpec spec;
  spec.xi_target = default_target();
  Member fixed;
  fixed.device_id = 9;
  fixed.band_class = MemberClass::Mid;
  fixed.controllable = false;
  fixed.capacity_mva = 40.0;
  // the fixed unit carries a constant quarter of the target
  fixed.fixed_xi = ParticipationFactor{0.25 * spec.xi_target.phi_wp,
                                       0.25 * spec.xi_target.gamma_vq};
  spec.members = {controllable(1, MemberClass::Slow, 100.0), fixed};

  const auto alloc = allocate(spec);
  // quotient collapses to the constant 0.25 after cancellation
  CHECK(alloc.gamma[1].phi_wp.num_degree() == 0);
  CHECK(alloc.gamma[1].phi_wp.den_degree() == 0);
  CHECK(lti::dc_gain(alloc.gamma[1].phi_wp) == doctest::Approx(0.25));
  // the controllable member gets the other three quarters
  CHECK(lti::dc_gain(alloc.gamma[0].phi_wp) == doctest::Approx(0.75));
  CHECK(alloc.audit.pass);
}

TEST_CASE("unrealizable fixed shares are rejected with a diagnostic") {
  // improper quotient: strictly proper target, biproper-like fixed share
  DvppSpec spec;
  spec.xi_target.phi_wp = RationalTransfer({50.0}, {1.0, 0.1});
  spec.xi_target.gamma_vq = RationalTransfer({12.0}, {1.0, 0.1});
  Member fixed;
  fixed.device_id = 7;
  fixed.controllable = false;
  fixed.capacity_mva = 10.0;
  fixed.fixed_xi =
      ParticipationFactor{RationalTransfer({1.0, 2.0}, {1.0, 0.5}),
                          RationalTransfer({1.0}, {1.0, 0.5})};
  spec.members = {controllable(1, MemberClass::Slow, 100.0), fixed};
  CHECK_THROWS_WITH_AS(allocate(spec),
                       doctest::Contains("improper against the target"),
                       ConfigError);

  // unstable quotient: target with a right-half-plane zero
  DvppSpec spec2;
  spec2.xi_target.phi_wp = RationalTransfer({50.0, -10.0}, {1.0, 0.1});
  spec2.xi_target.gamma_vq = RationalTransfer({12.0}, {1.0, 0.1});
  Member fixed2 = fixed;
  fixed2.fixed_xi =
      ParticipationFactor{RationalTransfer({1.0}, {1.0, 0.5}),
                          RationalTransfer({1.0}, {1.0, 0.5})};
  spec2.members = {controllable(1, MemberClass::Slow, 100.0), fixed2};
  CHECK_THROWS_WITH_AS(allocate(spec2),
                       doctest::Contains("unstable against the target"),
                       ConfigError);
}

TEST_CASE("missing slow class with a dc residual is a config error") {
  DvppSpec spec;
  spec.xi_target = default_target();
  spec.members = {controllable(1, MemberClass::Mid, 50.0),
                  controllable(2, MemberClass::Fast, 20.0)};
  CHECK_THROWS_WITH_AS(allocate(spec), doctest::Contains("slow"),
                       ConfigError);
}

TEST_CASE("missing slow class is fine when fixed units cover dc") {
  DvppSpec spec;
  spec.xi_target = default_target();
  Member fixed;
  fixed.device_id = 9;
  fixed.band_class = MemberClass::Slow;
  fixed.controllable = false;
  fixed.capacity_mva = 200.0;
  // fixed unit carries exactly the low band of the target
  const auto fam = design_band_family(spec.t_slow, spec.t_fast);
  fixed.fixed_xi = ParticipationFactor{fam.lpf * spec.xi_target.phi_wp,
                                       fam.lpf * spec.xi_target.gamma_vq};
  spec.members = {fixed, controllable(1, MemberClass::Mid, 50.0),
                  controllable(2, MemberClass::Fast, 20.0)};

  const auto alloc = allocate(spec);
  CHECK(alloc.audit.pass);
  CHECK(lti::dc_gain(alloc.gamma[1].phi_wp) == doctest::Approx(0.0));
  CHECK(lti::dc_gain(alloc.gamma[2].phi_wp) == doctest::Approx(0.0));
  bool noted = false;
  for (const auto& d : alloc.diagnostics) {
    if (d.find("slow band merged") != std::string::npos) noted = true;
  }
  CHECK(noted);
}

TEST_CASE("aggregation audit flags perturbed and empty allocations") {
  const auto fam = design_band_family(5.0, 0.05);
  Allocation alloc;
  alloc.members = {controllable(1, MemberClass::Slow, 1.0),
                   controllable(2, MemberClass::Mid, 1.0),
                   controllable(3, MemberClass::Fast, 1.0)};
  alloc.gamma = {ParticipationFactor{fam.lpf, fam.lpf},
                 ParticipationFactor{fam.bpf, fam.bpf},
                 ParticipationFactor{1.01 * fam.hpf, fam.hpf}};
  const auto report = verify_aggregation(alloc, default_audit_grid());
  CHECK_FALSE(report.pass);
  // the extra 1% of high-pass shows up fully at high frequency
  CHECK(report.max_residual_wp == doctest::Approx(0.01).epsilon(1e-3));
  CHECK(report.max_residual_vq < 1e-9);

  Allocation empty;
  const auto empty_report = verify_aggregation(empty, default_audit_grid());
  CHECK_FALSE(empty_report.pass);
  CHECK(empty_report.max_residual_wp == doctest::Approx(1.0));
  CHECK(empty_report.max_residual_vq == doctest::Approx(1.0));

  CHECK_THROWS_AS(verify_aggregation(empty, {}), ConfigError);
}

TEST_CASE("reference split is linear, decoupled, and sums to the target") {
  DvppSpec spec;
  spec.xi_target = default_target();
  spec.members = {controllable(1, MemberClass::Slow, 250.0),
                  controllable(2, MemberClass::Mid, 50.0),
                  controllable(3, MemberClass::Fast, 20.0)};
  const auto alloc = allocate(spec);

  const double dt = 1e-3;
  const int n = 4000;
  std::vector<double> d_omega(n), d_v(n), zeros(n, 0.0);
  for (int k = 0; k < n; ++k) {
    const double t = (k + 1) * dt;
    d_omega[k] = 1e-3 * (1.0 + 0.5 * std::sin(3.0 * t));  // step + wobble
    d_v[k] = 5e-4 * std::cos(2.0 * t);
  }

  const auto refs = disaggregate_reference(alloc, d_omega, d_v, dt);
  REQUIRE(refs.size() == 3);

  // oracle: one filter realizing the aggregate target directly
  auto target_p = lti::realize(spec.xi_target.phi_wp, dt);
  auto target_q = lti::realize(spec.xi_target.gamma_vq, dt);
  double max_p = 0.0, max_q = 0.0;
  for (int k = 0; k < n; ++k) {
    double sum_p = 0.0, sum_q = 0.0;
    for (const auto& r : refs) {
      sum_p += r.dp_ref[k];
      sum_q += r.dq_ref[k];
    }
    max_p = std::max(max_p, std::abs(sum_p - target_p.step(d_omega[k])));
    max_q = std::max(max_q, std::abs(sum_q - target_q.step(d_v[k])));
  }
  CHECK(max_p < 1e-9);
  CHECK(max_q < 1e-9);

  // linearity in the input
  std::vector<double> scaled(n);
  for (int k = 0; k < n; ++k) scaled[k] = 3.0 * d_omega[k];
  const auto refs3 = disaggregate_reference(alloc, scaled, d_v, dt);
  double lin_err = 0.0;
  for (int k = 0; k < n; ++k) {
    lin_err = std::max(lin_err,
                       std::abs(refs3[0].dp_ref[k] - 3.0 * refs[0].dp_ref[k]));
  }
  CHECK(lin_err < 1e-12);

  // channel decoupling: voltage input never leaks into active power
  const auto refs_v_only = disaggregate_reference(alloc, zeros, d_v, dt);
  for (const auto& r : refs_v_only) {
    for (double v : r.dp_ref) CHECK(v == 0.0);
  }
  const auto refs_w_only = disaggregate_reference(alloc, d_omega, zeros, dt);
  for (const auto& r : refs_w_only) {
    for (double v : r.dq_ref) CHECK(v == 0.0);
  }

  // zero input gives zero references
  const auto refs0 = disaggregate_reference(alloc, zeros, zeros, dt);
  for (const auto& r : refs0) {
    for (double v : r.dp_ref) CHECK(v == 0.0);
    for (double v : r.dq_ref) CHECK(v == 0.0);
  }
}

TEST_CASE("a steady frequency offset lands on the slow member") {
  DvppSpec spec;
  spec.xi_target = default_target();
  spec.members = {controllable(1, MemberClass::Slow, 250.0),
                  controllable(2, MemberClass::Mid, 50.0),
                  controllable(3, MemberClass::Fast, 20.0)};
  const auto alloc = allocate(spec);

  const double dt = 0.01;
  const int n = 8000;  // 80 s >> slow corner
  const double step = 0.01;
  std::vector<double> d_omega(n, step), d_v(n, 0.0);
  const auto refs = disaggregate_reference(alloc, d_omega, d_v, dt);

  const double target_dc = lti::dc_gain(spec.xi_target.phi_wp);
  CHECK(std::abs(refs[0].dp_ref.back() - target_dc * step) < 1e-3 * target_dc * step);
  CHECK(std::abs(refs[1].dp_ref.back()) < 1e-3 * target_dc * step);
  CHECK(std::abs(refs[2].dp_ref.back()) < 1e-3 * target_dc * step);
}

TEST_CASE("reference split refuses an unaudited allocation") {
  Allocation alloc;
  alloc.members = {controllable(1, MemberClass::Slow, 10.0)};
  alloc.gamma = {ParticipationFactor{RationalTransfer::gain(0.5),
                                     RationalTransfer::gain(0.5)}};
  alloc.realized_xi = alloc.gamma;
  alloc.audit.pass = false;
  CHECK_THROWS_AS(
      disaggregate_reference(alloc, {0.0, 0.0}, {0.0, 0.0}, 1e-3),
      ConfigError);
}

TEST_CASE("power ledger accounting") {
  DisturbanceLedger ledger;
  const int n = 50;
  ledger.dp_target.assign(n, 0.0);
  ledger.dq_target.assign(n, 0.0);
  ledger.dp_members = {std::vector<double>(n, 0.0)};
  ledger.dq_members = {std::vector<double>(n, 0.0)};
  CHECK(check_power_ledger(ledger).pass);

  // consistent split: target = member + fixed at every sample
  for (int k = 0; k < n; ++k) {
    const double a = 0.1 * std::sin(0.3 * k);
    const double b = 0.02 * k / n;
    ledger.dp_members[0][k] = a;
    ledger.dq_members[0][k] = 0.5 * a;
    ledger.dp_target[k] = a + b;
    ledger.dq_target[k] = 0.5 * a + 0.25 * b;
  }
  ledger.dp_fixed = {std::vector<double>(n)};
  ledger.dq_fixed = {std::vector<double>(n)};
  for (int k = 0; k < n; ++k) {
    ledger.dp_fixed[0][k] = 0.02 * k / n;
    ledger.dq_fixed[0][k] = 0.25 * 0.02 * k / n;
  }
  const auto ok = check_power_ledger(ledger);
  CHECK(ok.pass);
  CHECK(ok.max_residual_p < 1e-12);

  // negating one member's series must be caught and quantified
  DisturbanceLedger bad = ledger;
  for (auto& v : bad.dp_members[0]) v = -v;
  const auto fail = check_power_ledger(bad);
  CHECK_FALSE(fail.pass);
  CHECK(fail.max_residual_p > 0.1);

  DisturbanceLedger mismatched = ledger;
  mismatched.dp_members[0].pop_back();
  CHECK_THROWS_AS(check_power_ledger(mismatched), ConfigError);
}

TEST_CASE("allocation reports render text and csv") {
  DvppSpec spec;
  spec.xi_target = default_target();
  spec.members = {controllable(1, MemberClass::Slow, 250.0),
                  controllable(2, MemberClass::Fast, 20.0)};
  const auto alloc = allocate(spec);

  const auto text = allocation_report_text(alloc);
  CHECK(text.find("device 1") != std::string::npos);
  CHECK(text.find("pass") != std::string::npos);
  CHECK(text.find("audit") != std::string::npos);

  const auto grid = default_audit_grid();
  const auto csv = allocation_frequency_csv(alloc, grid);
  // header + one row per grid point
  const auto rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == static_cast<long>(grid.size()) + 1);
  CHECK(csv.find("phi_abs_1") != std::string::npos);
  CHECK(csv.find("gamma_arg_2") != std::string::npos);
}

TEST_CASE("spec validation rejects malformed member lists") {
  DvppSpec spec;
  spec.xi_target = default_target();
  CHECK_THROWS_AS(allocate(spec), ConfigError);  // empty

  spec.members = {controllable(1, MemberClass::Slow, -5.0)};
  CHECK_THROWS_AS(allocate(spec), ConfigError);  // bad capacity

  Member fixed_only;
  fixed_only.device_id = 2;
  fixed_only.controllable = false;
  fixed_only.capacity_mva = 10.0;
  fixed_only.fixed_xi = ParticipationFactor{RationalTransfer::gain(1.0),
                                            RationalTransfer::gain(1.0)};
  spec.members = {fixed_only};
  CHECK_THROWS_AS(allocate(spec), ConfigError);  // nobody controllable

  Member no_xi;
  no_xi.device_id = 3;
  no_xi.controllable = false;
  no_xi.capacity_mva = 10.0;
  spec.members = {controllable(1, MemberClass::Slow, 5.0), no_xi};
  CHECK_THROWS_AS(allocate(spec), ConfigError);  // missing fixed share

  CHECK(member_class_from_string("slow") == MemberClass::Slow);
  CHECK(member_class_from_string("mid") == MemberClass::Mid);
  CHECK(member_class_from_string("fast") == MemberClass::Fast);
  CHECK_THROWS_AS(member_class_from_string("quick"), ConfigError);
  CHECK(std::string(to_string(MemberClass::Fast)) == "fast");
}

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

#include <optional>
#include <string>
#include <vector>

#include "dvppsim/lti.hpp"

namespace dvppsim::dvpp {

using lti::RationalTransfer;

/// Dynamic participation of one unit, per channel: phi_wp shapes the
/// frequency (omega -> P) response share, gamma_vq the voltage
/// (v -> Q) share. Both must be proper and strictly stable.
struct ParticipationFactor {
  RationalTransfer phi_wp = RationalTransfer::gain(0.0);
  RationalTransfer gamma_vq = RationalTransfer::gain(0.0);
};

/// Throws dvppsim::ConfigError when either channel is improper or has a
/// pole outside the open left half-plane.
void validate_participation(const ParticipationFactor& pf,
                            const std::string& label);

enum class MemberClass { Slow, Mid, Fast };

const char* to_string(MemberClass c);
MemberClass member_class_from_string(const std::string& s);

struct Member {
  int device_id = 0;
  MemberClass band_class = MemberClass::Mid;
  bool controllable = true;
  double capacity_mva = 0.0;
  /// Required for uncontrollable members: their participation is an
  /// input to the allocation, not an output.
  std::optional<ParticipationFactor> fixed_xi;
};

struct DvppSpec {
  std::vector<Member> members;
  /// Desired aggregate participation per channel.
  ParticipationFactor xi_target;
  /// Corner periods of the band split, seconds.
  double t_slow = 5.0;
  double t_fast = 0.05;

  void validate() const;
};

struct BandFamily {
  RationalTransfer lpf;  // 1 / (t_slow s + 1)
  RationalTransfer bpf;  // exact complement, (t_slow - t_fast) s / (...)
  RationalTransfer hpf;  // t_fast s / (t_fast s + 1)
};

/// Complementary filter triple: lpf + bpf + hpf = 1 identically, with
/// the band-pass defined as the algebraic residual so the identity holds
/// by construction. Requires t_slow > t_fast > 0.
BandFamily design_band_family(double t_slow, double t_fast);

struct AuditReport {
  std::vector<double> grid;  // rad/s
  double max_residual_wp = 1.0;
  double max_residual_vq = 1.0;
  double tolerance = 1e-9;
  bool pass = false;
};

/// 61 log-spaced points over [1e-3, 1e3] rad/s.
std::vector<double> default_audit_grid();

struct Allocation {
  std::vector<Member> members;
  /// Share Gamma_i per member, aligned with members. Multiplying by
  /// xi_target gives the participation each unit actually realizes.
  std::vector<ParticipationFactor> gamma;
  std::vector<ParticipationFactor> realized_xi;
  ParticipationFactor xi_target;
  AuditReport audit;
  /// Non-fatal notes: band merges applied for missing classes, etc.
  std::vector<std::string> diagnostics;
};

/// Distributes the aggregate target across members. Uncontrollable
/// members keep Gamma_i = xi_i / xi_target; the remaining share is split
/// across the classes present among controllable members using the band
/// family, and within a class by capacity. Missing classes merge their
/// band into the nearest faster class; a missing slow class with a
/// nonzero steady-state share to place is a configuration error, since
/// no other class may carry dc.
Allocation allocate(const DvppSpec& spec);

AuditReport verify_aggregation(const Allocation& alloc,
                               const std::vector<double>& grid,
                               double tolerance = 1e-9);

struct MemberReference {
  int device_id = 0;
  std::vector<double> dp_ref;
  std::vector<double> dq_ref;
};

/// Runs each member's realized participation filters over the sampled
/// channel signals (input held over each dt). The allocation must carry
/// a passing audit.
std::vector<MemberReference> disaggregate_reference(
    const Allocation& alloc, const std::vector<double>& d_omega,
    const std::vector<double>& d_v, double dt);

/// Time-aligned record of how a disturbance was shared: controllable
/// member responses, fixed-unit responses, and the aggregate target.
struct DisturbanceLedger {
  std::vector<double> t;
  std::vector<std::vector<double>> dp_members;
  std::vector<std::vector<double>> dq_members;
  std::vector<std::vector<double>> dp_fixed;
  std::vector<std::vector<double>> dq_fixed;
  std::vector<double> dp_target;
  std::vector<double> dq_target;
  std::vector<double> d_omega;
  std::vector<double> d_v;
};

struct LedgerReport {
  bool pass = false;
  double max_residual_p = 0.0;
  double max_residual_q = 0.0;
  std::size_t worst_sample = 0;
  double tolerance = 0.0;
};

/// Checks that member plus fixed responses reproduce the aggregate
/// target at every sample. Series length mismatches are rejected.
LedgerReport check_power_ledger(const DisturbanceLedger& ledger,
                                double tol = 1e-6);

/// Human-readable allocation summary: per-member shares as coefficient
/// lists, static gains, and the audit residuals.
std::string allocation_report_text(const Allocation& alloc);

/// CSV rows (omega, then |.| and angle of each member's share per
/// channel) for plotting the frequency split.
std::string allocation_frequency_csv(const Allocation& alloc,
                                     const std::vector<double>& grid);

}  // namespace dvppsim::dvpp

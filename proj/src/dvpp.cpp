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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "dvppsim/errors.hpp"

namespace dvppsim::dvpp {

using lti::Complex;

namespace {

constexpr double kDcTol = 1e-9;

std::string coeff_list(const std::vector<double>& c) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i > 0) os << ", ";
    os << c[i];
  }
  os << "]";
  return os.str();
}

}  // namespace

void validate_participation(const ParticipationFactor& pf,
                            const std::string& label) {
  auto check = [&](const RationalTransfer& tf, const char* channel) {
    if (!tf.is_proper()) {
      throw ConfigError(label + ": " + channel +
                        " share is improper (more zeros than poles)");
    }
    if (!tf.is_zero() && tf.den_degree() > 0 && !lti::is_stable(tf)) {
      throw ConfigError(label + ": " + channel +
                        " share has a pole outside the left half-plane");
    }
  };
  check(pf.phi_wp, "omega-P");
  check(pf.gamma_vq, "v-Q");
}

const char* to_string(MemberClass c) {
  switch (c) {
    case MemberClass::Slow:
      return "slow";
    case MemberClass::Mid:
      return "mid";
    case MemberClass::Fast:
      return "fast";
  }
  return "?";
}

MemberClass member_class_from_string(const std::string& s) {
  if (s == "slow") return MemberClass::Slow;
  if (s == "mid") return MemberClass::Mid;
  if (s == "fast") return MemberClass::Fast;
  throw ConfigError("unknown member class '" + s +
                    "' (expected slow, mid, or fast)");
}

void DvppSpec::validate() const {
  if (members.empty()) throw ConfigError("dvpp: member list is empty");
  bool any_controllable = false;
  for (const auto& m : members) {
    const std::string label = "dvpp member " + std::to_string(m.device_id);
    if (!(m.capacity_mva > 0.0)) {
      throw ConfigError(label + ": capacity must be positive");
    }
    if (m.controllable) {
      any_controllable = true;
    } else if (!m.fixed_xi.has_value()) {
      throw ConfigError(label +
                        ": uncontrollable member needs a fixed participation");
    }
    if (m.fixed_xi) validate_participation(*m.fixed_xi, label);
  }
  if (!any_controllable) {
    throw ConfigError("dvpp: at least one controllable member is required");
  }
  if (!(t_fast > 0.0) || !(t_slow > t_fast)) {
    throw ConfigError("dvpp: band corners must satisfy t_slow > t_fast > 0");
  }
  validate_participation(xi_target, "dvpp target");
  if (xi_target.phi_wp.is_zero() || xi_target.gamma_vq.is_zero()) {
    throw ConfigError("dvpp target: both channels must be nonzero");
  }
}

BandFamily design_band_family(double t_slow, double t_fast) {
  if (!(t_fast > 0.0) || !(t_slow > t_fast)) {
    throw ConfigError("band corners must satisfy t_slow > t_fast > 0");
  }
  BandFamily fam;
  fam.lpf = RationalTransfer::low_pass(t_slow);
  fam.hpf = RationalTransfer::high_pass(t_fast);
  fam.bpf = RationalTransfer::gain(1.0) - fam.lpf - fam.hpf;
  return fam;
}

std::vector<double> default_audit_grid() {
  std::vector<double> grid(61);
  for (int i = 0; i < 61; ++i) {
    grid[i] = std::pow(10.0, -3.0 + 6.0 * i / 60.0);
  }
  return grid;
}

namespace {

// Per-class band filters for the classes actually present among the
// controllable members. Absent classes fold their band into the nearest
// faster class so the filters still sum to one.
std::map<MemberClass, RationalTransfer> class_bands(
    const std::set<MemberClass>& present, double t_slow, double t_fast,
    double residual_dc, std::vector<std::string>& notes) {
  std::map<MemberClass, RationalTransfer> bands;
  const bool has_slow = present.count(MemberClass::Slow) > 0;
  const bool has_mid = present.count(MemberClass::Mid) > 0;
  const bool has_fast = present.count(MemberClass::Fast) > 0;

  if (present.size() == 3) {
    const auto fam = design_band_family(t_slow, t_fast);
    bands[MemberClass::Slow] = fam.lpf;
    bands[MemberClass::Mid] = fam.bpf;
    bands[MemberClass::Fast] = fam.hpf;
    return bands;
  }
  if (present.size() == 1) {
    bands[*present.begin()] = RationalTransfer::gain(1.0);
    notes.push_back(std::string("all bands carried by the only class (") +
                    to_string(*present.begin()) + ")");
    return bands;
  }
  if (has_slow) {
    // slow keeps its low-pass; the other class absorbs everything above
    const MemberClass other = has_mid ? MemberClass::Mid : MemberClass::Fast;
    bands[MemberClass::Slow] = RationalTransfer::low_pass(t_slow);
    bands[other] = RationalTransfer::high_pass(t_slow);
    notes.push_back(std::string(has_mid ? "fast" : "mid") +
                    " band merged into the " + to_string(other) + " class");
    return bands;
  }
  // mid + fast, nobody can hold a steady-state share
  if (std::abs(residual_dc) > kDcTol) {
    throw ConfigError(
        "no slow-class member to carry the steady-state share (dc residual " +
        std::to_string(residual_dc) +
        "); add a slow member, or re-merge the slow band into mid by "
        "assigning a fixed participation that covers dc");
  }
  bands[MemberClass::Mid] = RationalTransfer::low_pass(t_fast);
  bands[MemberClass::Fast] = RationalTransfer::high_pass(t_fast);
  notes.push_back("slow band merged into mid (residual has no dc content)");
  return bands;
}

// One channel of the allocation: fixed members divide out the target,
// controllable members split the leftover by class band and capacity.
std::vector<RationalTransfer> allocate_channel(
    const DvppSpec& spec,
    const RationalTransfer& (*pick)(const ParticipationFactor&),
    const RationalTransfer& target, const char* channel,
    std::vector<std::string>& notes) {
  const std::size_t n = spec.members.size();
  std::vector<RationalTransfer> gamma(n);

  RationalTransfer residual = RationalTransfer::gain(1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = spec.members[i];
    if (m.controllable) continue;
    const std::string label = "dvpp member " + std::to_string(m.device_id);
    RationalTransfer g = lti::divide(pick(*m.fixed_xi), target);
    if (!g.is_proper()) {
      throw ConfigError(label + ": fixed " + channel +
                        " share is improper against the target");
    }
    if (!g.is_zero() && g.den_degree() > 0 && !lti::is_stable(g)) {
      throw ConfigError(label + ": fixed " + channel +
                        " share is unstable against the target");
    }
    gamma[i] = g;
    residual = residual - g;
  }

  std::set<MemberClass> present;
  std::map<MemberClass, double> class_capacity;
  for (const auto& m : spec.members) {
    if (!m.controllable) continue;
    present.insert(m.band_class);
    class_capacity[m.band_class] += m.capacity_mva;
  }

  const double residual_dc = lti::dc_gain(residual);
  const auto bands =
      class_bands(present, spec.t_slow, spec.t_fast, residual_dc, notes);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = spec.members[i];
    if (!m.controllable) continue;
    const double share = m.capacity_mva / class_capacity.at(m.band_class);
    gamma[i] = share * (bands.at(m.band_class) * residual);
  }
  return gamma;
}

const RationalTransfer& pick_wp(const ParticipationFactor& pf) {
  return pf.phi_wp;
}
const RationalTransfer& pick_vq(const ParticipationFactor& pf) {
  return pf.gamma_vq;
}

}  // namespace

Allocation allocate(const DvppSpec& spec) {
  spec.validate();
  Allocation alloc;
  alloc.members = spec.members;
  alloc.xi_target = spec.xi_target;

  std::vector<std::string> notes_wp, notes_vq;
  const auto wp = allocate_channel(spec, &pick_wp, spec.xi_target.phi_wp,
                                   "omega-P", notes_wp);
  const auto vq = allocate_channel(spec, &pick_vq, spec.xi_target.gamma_vq,
                                   "v-Q", notes_vq);
  alloc.diagnostics = notes_wp;  // both channels share the class layout
  if (notes_vq != notes_wp) {
    alloc.diagnostics.insert(alloc.diagnostics.end(), notes_vq.begin(),
                             notes_vq.end());
  }

  const std::size_t n = spec.members.size();
  alloc.gamma.resize(n);
  alloc.realized_xi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    alloc.gamma[i] = ParticipationFactor{wp[i], vq[i]};
    alloc.realized_xi[i] =
        ParticipationFactor{wp[i] * spec.xi_target.phi_wp,
                            vq[i] * spec.xi_target.gamma_vq};
  }
  alloc.audit = verify_aggregation(alloc, default_audit_grid());
  return alloc;
}

AuditReport verify_aggregation(const Allocation& alloc,
                               const std::vector<double>& grid,
                               double tolerance) {
  if (grid.empty()) throw ConfigError("audit grid is empty");
  AuditReport report;
  report.grid = grid;
  report.tolerance = tolerance;
  report.max_residual_wp = 0.0;
  report.max_residual_vq = 0.0;
  for (const double w : grid) {
    Complex sum_wp(0.0, 0.0), sum_vq(0.0, 0.0);
    for (const auto& g : alloc.gamma) {
      sum_wp += lti::eval_freq(g.phi_wp, w);
      sum_vq += lti::eval_freq(g.gamma_vq, w);
    }
    report.max_residual_wp =
        std::max(report.max_residual_wp, std::abs(sum_wp - 1.0));
    report.max_residual_vq =
        std::max(report.max_residual_vq, std::abs(sum_vq - 1.0));
  }
  report.pass = report.max_residual_wp < tolerance &&
                report.max_residual_vq < tolerance;
  return report;
}

std::vector<MemberReference> disaggregate_reference(
    const Allocation& alloc, const std::vector<double>& d_omega,
    const std::vector<double>& d_v, double dt) {
  if (!alloc.audit.pass) {
    throw ConfigError("allocation audit did not pass; refusing to split "
                      "references");
  }
  if (d_omega.size() != d_v.size()) {
    throw ConfigError("channel series lengths differ");
  }
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");

  std::vector<MemberReference> out;
  out.reserve(alloc.members.size());
  for (std::size_t i = 0; i < alloc.members.size(); ++i) {
    MemberReference ref;
    ref.device_id = alloc.members[i].device_id;
    auto bp = lti::realize(alloc.realized_xi[i].phi_wp, dt);
    auto bq = lti::realize(alloc.realized_xi[i].gamma_vq, dt);
    ref.dp_ref.reserve(d_omega.size());
    ref.dq_ref.reserve(d_omega.size());
    for (std::size_t k = 0; k < d_omega.size(); ++k) {
      ref.dp_ref.push_back(bp.step(d_omega[k]));
      ref.dq_ref.push_back(bq.step(d_v[k]));
    }
    out.push_back(std::move(ref));
  }
  return out;
}

LedgerReport check_power_ledger(const DisturbanceLedger& ledger, double tol) {
  const std::size_t n = ledger.dp_target.size();
  auto check_len = [&](std::size_t got, const char* what) {
    if (got != n) {
      throw ConfigError(std::string("ledger series '") + what +
                        "' length mismatch");
    }
  };
  check_len(ledger.dq_target.size(), "dq_target");
  if (!ledger.t.empty()) check_len(ledger.t.size(), "t");
  for (const auto& s : ledger.dp_members) check_len(s.size(), "dp_members");
  for (const auto& s : ledger.dq_members) check_len(s.size(), "dq_members");
  for (const auto& s : ledger.dp_fixed) check_len(s.size(), "dp_fixed");
  for (const auto& s : ledger.dq_fixed) check_len(s.size(), "dq_fixed");

  LedgerReport report;
  report.tolerance = tol;
  for (std::size_t k = 0; k < n; ++k) {
    double sum_p = 0.0, sum_q = 0.0;
    for (const auto& s : ledger.dp_members) sum_p += s[k];
    for (const auto& s : ledger.dp_fixed) sum_p += s[k];
    for (const auto& s : ledger.dq_members) sum_q += s[k];
    for (const auto& s : ledger.dq_fixed) sum_q += s[k];
    const double rp = std::abs(sum_p - ledger.dp_target[k]);
    const double rq = std::abs(sum_q - ledger.dq_target[k]);
    if (rp > report.max_residual_p || rq > report.max_residual_q) {
      report.worst_sample = k;
    }
    report.max_residual_p = std::max(report.max_residual_p, rp);
    report.max_residual_q = std::max(report.max_residual_q, rq);
  }
  report.pass = report.max_residual_p <= tol && report.max_residual_q <= tol;
  return report;
}

std::string allocation_report_text(const Allocation& alloc) {
  std::ostringstream os;
  os << "allocation: " << alloc.members.size() << " members\n";
  for (std::size_t i = 0; i < alloc.members.size(); ++i) {
    const auto& m = alloc.members[i];
    const auto& g = alloc.gamma[i];
    os << "  device " << m.device_id << " (" << to_string(m.band_class)
       << ", " << (m.controllable ? "controllable" : "fixed") << ", "
       << m.capacity_mva << " MVA)\n";
    os << "    share omega-P: num " << coeff_list(g.phi_wp.num) << " den "
       << coeff_list(g.phi_wp.den)
       << "  dc " << lti::dc_gain(g.phi_wp) << "\n";
    os << "    share v-Q:     num " << coeff_list(g.gamma_vq.num) << " den "
       << coeff_list(g.gamma_vq.den)
       << "  dc " << lti::dc_gain(g.gamma_vq) << "\n";
  }
  os << "  audit: max |sum(phi)-1| = " << alloc.audit.max_residual_wp
     << ", max |sum(gamma)-1| = " << alloc.audit.max_residual_vq << " over "
     << alloc.audit.grid.size() << " points -> "
     << (alloc.audit.pass ? "pass" : "FAIL") << "\n";
  for (const auto& d : alloc.diagnostics) os << "  note: " << d << "\n";
  return os.str();
}

std::string allocation_frequency_csv(const Allocation& alloc,
                                     const std::vector<double>& grid) {
  std::ostringstream os;
  os << "omega_rad_s";
  for (const auto& m : alloc.members) {
    os << ",phi_abs_" << m.device_id << ",phi_arg_" << m.device_id
       << ",gamma_abs_" << m.device_id << ",gamma_arg_" << m.device_id;
  }
  os << "\n";
  os.precision(9);
  for (const double w : grid) {
    os << w;
    for (std::size_t i = 0; i < alloc.members.size(); ++i) {
      const Complex p = lti::eval_freq(alloc.gamma[i].phi_wp, w);
      const Complex q = lti::eval_freq(alloc.gamma[i].gamma_vq, w);
      os << "," << std::abs(p) << "," << std::arg(p) << "," << std::abs(q)
         << "," << std::arg(q);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace dvppsim::dvpp

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

#include "dvppsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>

#include "dvppsim/errors.hpp"

namespace dvppsim::engine {

namespace {

using devices::DeviceModel;
using devices::DroopDevice;
using devices::ElecInput;
using devices::GflDevice;
using devices::SgDevice;
using devices::VsgDevice;

double rating_of(const DeviceModel& m) {
  return std::visit([](const auto& d) { return d.rating_mva; }, m);
}

void set_omega_base(DeviceModel& m, double wb) {
  std::visit([wb](auto& d) { d.omega_base = wb; }, m);
}

bool is_gfm(const DeviceModel& m) {
  return std::holds_alternative<DroopDevice>(m) ||
         std::holds_alternative<VsgDevice>(m);
}

}  // namespace

void Scenario::validate() const {
  if (net.buses.empty()) throw ConfigError("scenario: empty network");
  if (!(solver.dt > 0.0)) throw ConfigError("scenario: dt must be positive");
  if (!(solver.t_end > 0.0)) {
    throw ConfigError("scenario: t_end must be positive");
  }
  if (devices.empty()) throw ConfigError("scenario: no devices placed");

  const int n_bus = static_cast<int>(net.buses.size());
  std::set<int> ids;
  for (const auto& d : devices) {
    if (d.id <= 0) throw ConfigError("scenario: device ids must be positive");
    if (!ids.insert(d.id).second) {
      throw ConfigError("scenario: duplicate device id " +
                        std::to_string(d.id));
    }
    if (d.bus < 1 || d.bus > n_bus) {
      throw ConfigError("scenario: device '" + d.name + "' placed at bus " +
                        std::to_string(d.bus) + " outside the network");
    }
    if (!(rating_of(d.model) > 0.0)) {
      throw ConfigError("scenario: device '" + d.name +
                        "' has a non-positive MVA rating");
    }
  }
  for (const auto& ev : events) {
    if (ev.bus < 1 || ev.bus > n_bus) {
      throw ConfigError("scenario: event bus outside the network");
    }
    if (ev.t < 0.0) throw ConfigError("scenario: event before t=0");
    if (ev.t >= solver.t_end) {
      throw ConfigError("scenario: event at or beyond the horizon end");
    }
  }
  if (slack_bus < 1 || slack_bus > n_bus) {
    throw ConfigError("scenario: slack bus outside the network");
  }
  for (const auto& [bus, p] : dispatch_p) {
    (void)p;
    if (bus < 1 || bus > n_bus) {
      throw ConfigError("scenario: dispatch bus outside the network");
    }
  }

  std::set<int> dvpp_ids;
  for (const auto& cfg : dvpps) {
    if (cfg.id <= 0) throw ConfigError("scenario: dvpp ids must be positive");
    if (!dvpp_ids.insert(cfg.id).second) {
      throw ConfigError("scenario: duplicate dvpp id");
    }
    if (cfg.bus < 1 || cfg.bus > n_bus) {
      throw ConfigError("scenario: dvpp bus outside the network");
    }
    if (cfg.t_track < 0.0) {
      throw ConfigError("scenario: dvpp tracking lag must be >= 0");
    }
    for (const auto& member : cfg.spec.members) {
      const auto it =
          std::find_if(devices.begin(), devices.end(), [&](const auto& d) {
            return d.id == member.device_id;
          });
      if (it == devices.end()) {
        throw ConfigError("scenario: dvpp member id " +
                          std::to_string(member.device_id) +
                          " has no placed device");
      }
      if (it->dvpp_id != cfg.id) {
        throw ConfigError("scenario: device '" + it->name +
                          "' is not tagged as a member of dvpp " +
                          std::to_string(cfg.id));
      }
      if (it->bus != cfg.bus) {
        throw ConfigError("scenario: dvpp member '" + it->name +
                          "' sits on a different bus than its plant");
      }
      if (member.controllable && !is_gfm(it->model)) {
        throw ConfigError("scenario: controllable dvpp member '" + it->name +
                          "' must be a grid-forming device");
      }
      if (std::abs(member.capacity_mva - rating_of(it->model)) > 1e-6) {
        throw ConfigError("scenario: dvpp member '" + it->name +
                          "' capacity disagrees with its device rating");
      }
    }
  }
  for (const auto& d : devices) {
    if (d.dvpp_id == 0) continue;
    const auto it = std::find_if(dvpps.begin(), dvpps.end(), [&](const auto& c) {
      return c.id == d.dvpp_id;
    });
    if (it == dvpps.end()) {
      throw ConfigError("scenario: device '" + d.name +
                        "' references unknown dvpp " +
                        std::to_string(d.dvpp_id));
    }
    const bool listed = std::any_of(
        it->spec.members.begin(), it->spec.members.end(),
        [&](const auto& m) { return m.device_id == d.id; });
    if (!listed) {
      throw ConfigError("scenario: device '" + d.name +
                        "' is tagged for dvpp " + std::to_string(d.dvpp_id) +
                        " but not listed among its members");
    }
  }
}

namespace {

// Live coordinator state during a run.
struct Coordinator {
  const DvppConfig* cfg = nullptr;
  dvpp::Allocation alloc;
  // scenario device index per allocation member (-1 for pure-ledger
  // entries whose device is not placed, which validate() prevents)
  std::vector<int> dev_index;
  std::vector<lti::LtiBlock> filt_p, filt_q;
  lti::LtiBlock target_p, target_q;
  lti::LtiBlock track;
  bool tracking = false;
  double v0 = 1.0;
  double cap_total = 0.0;
  dvpp::DisturbanceLedger ledger;
  // ledger column index per member, split by controllability
  std::vector<int> ledger_col;
};

class Simulator {
public:
  explicit Simulator(const Scenario& s) : sc_(s) {
    sc_.validate();
    // trace (and CSV column) order is ascending device id
    std::stable_sort(sc_.devices.begin(), sc_.devices.end(),
                     [](const auto& a, const auto& b) { return a.id < b.id; });
    net_ = sc_.net;
    net_.build_y();
    wb_ = 2.0 * std::numbers::pi * net_.base.f_nom_hz;
    models_.reserve(sc_.devices.size());
    for (auto& d : sc_.devices) {
      models_.push_back(d.model);
      set_omega_base(models_.back(), wb_);
    }
    init_equilibrium();
    init_coordinators();
  }

  SimOutput run();

private:
  void init_equilibrium();
  void init_coordinators();

  std::vector<network::DeviceInterface> interfaces() const;
  // One network solve for the present model states; t picks the epoch.
  network::NetworkSolution solve_at(double t) const;

  ElecInput elec_input(std::size_t i,
                       const network::NetworkSolution& sol) const {
    const auto& dev = sc_.devices[i];
    const double scale = net_.base.s_base_mva / rating_of(models_[i]);
    const Complex s_dev = sol.device_s[i] * scale;
    return ElecInput{s_dev.real(), s_dev.imag(),
                     sol.v[net_.index(dev.bus)]};
  }

  void pack(std::vector<double>& x) const;
  void unpack(const std::vector<double>& x);
  void derivatives(double t_epoch, std::vector<double>& dx);

  double internal_omega(std::size_t i,
                        const network::NetworkSolution& sol) const;
  void coordinate(double t, const network::NetworkSolution& sol);
  void record(double t, const network::NetworkSolution& sol,
              SimOutput& out);

  Scenario sc_;
  network::NetworkModel net_;
  network::LoadState loads_;
  std::unique_ptr<network::NetworkSolver> solver_;
  std::vector<DeviceModel> models_;
  std::vector<Coordinator> coords_;
  std::vector<double> p0_sys_, q0_sys_;
  double wb_ = 0.0;
  int n_states_ = 0;
};

std::vector<network::DeviceInterface> Simulator::interfaces() const {
  std::vector<network::DeviceInterface> out;
  out.reserve(models_.size());
  for (std::size_t i = 0; i < models_.size(); ++i) {
    auto iface = devices::device_interface(models_[i], sc_.devices[i].bus);
    const double scale = rating_of(models_[i]) / net_.base.s_base_mva;
    if (auto* t = std::get_if<network::TheveninSource>(&iface)) {
      t->y_src *= scale;
    } else if (auto* n = std::get_if<network::NortonCurrent>(&iface)) {
      n->i_inj *= scale;
    }
    out.push_back(iface);
  }
  return out;
}

network::NetworkSolution Simulator::solve_at(double t) const {
  return solver_->solve(t, interfaces());
}

void Simulator::init_equilibrium() {
  // scheduled net injections for the power flow (generation minus load)
  std::vector<Complex> injections(std::size_t(net_.size()), Complex(0.0));
  for (int i = 0; i < net_.size(); ++i) {
    injections[std::size_t(i)] -=
        Complex(net_.buses[std::size_t(i)].load_p,
                net_.buses[std::size_t(i)].load_q);
  }
  for (const auto& [bus, p] : sc_.dispatch_p) {
    injections[std::size_t(net_.index(bus))] += Complex(p, 0.0);
  }
  for (const auto& [bus, q] : sc_.dispatch_q) {
    injections[std::size_t(net_.index(bus))] += Complex(0.0, q);
  }

  const auto pf = network::solve_power_flow(net_, injections, sc_.slack_bus,
                                            Complex(sc_.slack_v, 0.0));
  loads_ = network::make_load_state(net_, pf.v, sc_.events);

  // realized generation per bus (power-flow injection plus local load)
  const Eigen::VectorXcd i_net = net_.y_matrix * pf.v;
  std::map<int, Complex> gen_s;
  for (const auto& d : sc_.devices) {
    const int k = net_.index(d.bus);
    if (gen_s.count(d.bus) == 0) {
      gen_s[d.bus] = pf.v[k] * std::conj(i_net[k]) +
                     Complex(net_.buses[k].load_p, net_.buses[k].load_q);
    }
  }

  // split each bus's generation across the devices sitting on it:
  // slow coordinated members take the base point by capacity; otherwise
  // plain capacity shares
  std::map<int, std::vector<std::size_t>> by_bus;
  for (std::size_t i = 0; i < sc_.devices.size(); ++i) {
    by_bus[sc_.devices[i].bus].push_back(i);
  }

  auto member_class = [&](std::size_t i) -> std::optional<dvpp::MemberClass> {
    const auto& d = sc_.devices[i];
    if (d.dvpp_id == 0) return std::nullopt;
    for (const auto& cfg : sc_.dvpps) {
      if (cfg.id != d.dvpp_id) continue;
      for (const auto& m : cfg.spec.members) {
        if (m.device_id == d.id) return m.band_class;
      }
    }
    return std::nullopt;
  };

  std::vector<Complex> share(sc_.devices.size(), Complex(0.0, 0.0));
  for (const auto& [bus, idxs] : by_bus) {
    const Complex total = gen_s.at(bus);
    std::vector<std::size_t> base_carriers;
    double cap = 0.0;
    for (const auto i : idxs) {
      if (member_class(i) == dvpp::MemberClass::Slow) {
        base_carriers.push_back(i);
        cap += rating_of(models_[i]);
      }
    }
    if (base_carriers.empty()) {
      base_carriers = idxs;
      cap = 0.0;
      for (const auto i : idxs) cap += rating_of(models_[i]);
    }
    for (const auto i : base_carriers) {
      share[i] = total * (rating_of(models_[i]) / cap);
    }
  }

  // place every device on its internal equilibrium for its share
  for (std::size_t i = 0; i < models_.size(); ++i) {
    const int k = net_.index(sc_.devices[i].bus);
    const Complex v = pf.v[k];
    const double scale = net_.base.s_base_mva / rating_of(models_[i]);
    const Complex s_dev = share[i] * scale;
    const Complex i_dev = std::conj(s_dev / v);

    std::visit(
        [&](auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, SgDevice>) {
            const Complex e = v + Complex(0.0, d.x_transient) * i_dev;
            d.emf_mag = std::abs(e);
            d.delta = std::arg(e);
            d.omega = 1.0;
            d.p_gov = 0.0;
            d.p_mech0 = s_dev.real();
          } else if constexpr (std::is_same_v<T, DroopDevice>) {
            const Complex e = v + Complex(0.0, d.x_source) * i_dev;
            d.v_ref = std::abs(e);
            d.theta = std::arg(e);
            d.p_ref = s_dev.real();
            d.q_ref = s_dev.imag();
            d.z_p = d.z_q = 0.0;
          } else if constexpr (std::is_same_v<T, VsgDevice>) {
            const Complex e = v + Complex(0.0, d.x_source) * i_dev;
            d.v_ref = std::abs(e);
            d.theta = std::arg(e);
            d.omega = 1.0;
            d.z_f = d.z_q = 0.0;
            d.p_ref = s_dev.real();
            d.q_ref = s_dev.imag();
          } else {
            d.theta_hat = std::arg(v);
            d.x_pll = 0.0;
            const Complex i_dq = i_dev * std::polar(1.0, -d.theta_hat);
            d.i_d = i_dq.real();
            d.i_q = i_dq.imag();
            d.p_ref = s_dev.real();
            d.q_ref = s_dev.imag();
          }
        },
        models_[i]);
    p0_sys_.push_back(share[i].real());
    q0_sys_.push_back(share[i].imag());
  }

  for (const auto& [id, offset] : sc_.angle_perturbation) {
    for (std::size_t i = 0; i < models_.size(); ++i) {
      if (sc_.devices[i].id != id) continue;
      std::visit(
          [&](auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, SgDevice>) {
              d.delta += offset;
            } else if constexpr (std::is_same_v<T, GflDevice>) {
              d.theta_hat += offset;
            } else {
              d.theta += offset;
            }
          },
          models_[i]);
    }
  }

  solver_ = std::make_unique<network::NetworkSolver>(net_, loads_,
                                                     interfaces());
  n_states_ = 0;
  for (const auto& m : models_) n_states_ += devices::state_count(m);

  // the constructed point must actually be stationary
  if (sc_.angle_perturbation.empty()) {
    std::vector<double> dx(n_states_, 0.0);
    derivatives(0.0, dx);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      // angle rates scale with omega_base; normalize before judging
      if (std::abs(dx[i]) / wb_ > 1e-7) {
        throw SimError(
            "initialization left a drifting state (residual " +
            std::to_string(dx[i]) + ")",
            0.0);
      }
    }
  }
}

void Simulator::init_coordinators() {
  const double dt = sc_.solver.dt;
  const auto sol0 = solve_at(0.0);
  for (const auto& cfg : sc_.dvpps) {
    Coordinator c;
    c.cfg = &cfg;
    c.alloc = dvpp::allocate(cfg.spec);
    c.v0 = std::abs(sol0.v[net_.index(cfg.bus)]);
    c.target_p = lti::realize(cfg.spec.xi_target.phi_wp, dt);
    c.target_q = lti::realize(cfg.spec.xi_target.gamma_vq, dt);
    if (cfg.t_track > 0.0) {
      c.track = lti::realize(lti::RationalTransfer::low_pass(cfg.t_track), dt);
      c.track.set_equilibrium(1.0);
      c.tracking = true;
    }
    int n_ctrl = 0, n_fixed = 0;
    for (std::size_t m = 0; m < cfg.spec.members.size(); ++m) {
      const auto& member = cfg.spec.members[m];
      int idx = -1;
      for (std::size_t i = 0; i < sc_.devices.size(); ++i) {
        if (sc_.devices[i].id == member.device_id) idx = int(i);
      }
      c.dev_index.push_back(idx);
      c.filt_p.push_back(lti::realize(c.alloc.realized_xi[m].phi_wp, dt));
      c.filt_q.push_back(lti::realize(c.alloc.realized_xi[m].gamma_vq, dt));
      if (member.controllable) {
        c.cap_total += member.capacity_mva;
        c.ledger_col.push_back(n_ctrl++);
      } else {
        c.ledger_col.push_back(n_fixed++);
      }
    }
    c.ledger.dp_members.resize(n_ctrl);
    c.ledger.dq_members.resize(n_ctrl);
    c.ledger.dp_fixed.resize(n_fixed);
    c.ledger.dq_fixed.resize(n_fixed);
    coords_.push_back(std::move(c));
  }
}

void Simulator::pack(std::vector<double>& x) const {
  x.resize(n_states_);
  double* p = x.data();
  for (const auto& m : models_) {
    devices::get_state(m, p);
    p += devices::state_count(m);
  }
}

void Simulator::unpack(const std::vector<double>& x) {
  const double* p = x.data();
  for (auto& m : models_) {
    devices::set_state(m, p);
    p += devices::state_count(m);
  }
}

void Simulator::derivatives(double t_epoch, std::vector<double>& dx) {
  const auto sol = solve_at(t_epoch);
  dx.resize(n_states_);
  double* p = dx.data();
  for (std::size_t i = 0; i < models_.size(); ++i) {
    devices::deriv(models_[i], elec_input(i, sol), p);
    p += devices::state_count(models_[i]);
  }
}

double Simulator::internal_omega(std::size_t i,
                                 const network::NetworkSolution& sol) const {
  const auto& m = models_[i];
  if (const auto* sg = std::get_if<SgDevice>(&m)) return sg->omega;
  if (const auto* vsg = std::get_if<VsgDevice>(&m)) return vsg->omega;
  if (const auto* droop = std::get_if<DroopDevice>(&m)) {
    const auto in = elec_input(i, sol);
    return droop->outputs(in.p, in.q).omega;
  }
  const auto& gfl = std::get<GflDevice>(m);
  return 1.0 + gfl.omega_pll / wb_;
}

void Simulator::coordinate(double t, const network::NetworkSolution& sol) {
  for (auto& c : coords_) {
    double omega_pcc = 0.0;
    for (std::size_t m = 0; m < c.dev_index.size(); ++m) {
      const auto& member = c.cfg->spec.members[m];
      if (!member.controllable) continue;
      omega_pcc += internal_omega(std::size_t(c.dev_index[m]), sol) *
                   (member.capacity_mva / c.cap_total);
    }
    const double v_pcc = std::abs(sol.v[net_.index(c.cfg->bus)]);

    // deficits: positive when frequency or voltage sit below their
    // references, meaning members should inject more
    const double u_p = 1.0 - omega_pcc;
    const double u_q = c.v0 - v_pcc;

    const double omega_track = c.tracking ? c.track.step(omega_pcc) : 1.0;

    c.ledger.t.push_back(t);
    c.ledger.d_omega.push_back(u_p);
    c.ledger.d_v.push_back(u_q);
    c.ledger.dp_target.push_back(c.target_p.step(u_p));
    c.ledger.dq_target.push_back(c.target_q.step(u_q));

    for (std::size_t m = 0; m < c.dev_index.size(); ++m) {
      const auto& member = c.cfg->spec.members[m];
      const double dp_cmd = c.filt_p[m].step(u_p);
      const double dq_cmd = c.filt_q[m].step(u_q);
      if (member.controllable) {
        c.ledger.dp_members[c.ledger_col[m]].push_back(dp_cmd);
        c.ledger.dq_members[c.ledger_col[m]].push_back(dq_cmd);
        auto& model = models_[std::size_t(c.dev_index[m])];
        const double scale = net_.base.s_base_mva / rating_of(model);
        std::visit(
            [&](auto& d) {
              using T = std::decay_t<decltype(d)>;
              if constexpr (std::is_same_v<T, DroopDevice> ||
                            std::is_same_v<T, VsgDevice>) {
                d.p_ref_offset = dp_cmd * scale;
                d.q_ref_offset = dq_cmd * scale;
                if (c.tracking) d.omega_ref_track = omega_track;
              }
            },
            model);
      } else {
        c.ledger.dp_fixed[c.ledger_col[m]].push_back(dp_cmd);
        c.ledger.dq_fixed[c.ledger_col[m]].push_back(dq_cmd);
      }
    }
  }
}

void Simulator::record(double t, const network::NetworkSolution& sol,
                       SimOutput& out) {
  out.t.push_back(t);
  for (std::size_t i = 0; i < models_.size(); ++i) {
    auto& tr = out.traces[i];
    const int k = net_.index(sc_.devices[i].bus);
    tr.f_hz.push_back(internal_omega(i, sol) * net_.base.f_nom_hz);
    tr.dp_pu.push_back(sol.device_s[i].real() - p0_sys_[i]);
    tr.dq_pu.push_back(sol.device_s[i].imag() - q0_sys_[i]);
    tr.v_mag_pu.push_back(std::abs(sol.v[k]));

    if (auto* gfl = std::get_if<GflDevice>(&models_[i])) {
      gfl->observe(elec_input(i, sol));
      tr.any_saturated = tr.any_saturated || gfl->saturated;
      tr.any_lost_lock = tr.any_lost_lock || gfl->lost_lock;
    }
  }
}

SimOutput Simulator::run() {
  const double dt = sc_.solver.dt;
  const int n_steps = static_cast<int>(std::llround(sc_.solver.t_end / dt));

  SimOutput out;
  out.dt = dt;
  out.f_nom_hz = net_.base.f_nom_hz;
  for (const auto& ev : sc_.events) out.event_times.push_back(ev.t);
  out.traces.resize(models_.size());
  for (std::size_t i = 0; i < models_.size(); ++i) {
    out.traces[i].id = sc_.devices[i].id;
    out.traces[i].name = sc_.devices[i].name;
    out.traces[i].bus = sc_.devices[i].bus;
    out.traces[i].dvpp_id = sc_.devices[i].dvpp_id;
    const std::size_t reserve = std::size_t(n_steps) + 1;
    out.traces[i].f_hz.reserve(reserve);
    out.traces[i].dp_pu.reserve(reserve);
    out.traces[i].dq_pu.reserve(reserve);
    out.traces[i].v_mag_pu.reserve(reserve);
  }

  std::vector<double> x0, xs, k1, k2, k3, k4;
  pack(x0);

  auto sol = solve_at(0.0);
  record(0.0, sol, out);

  for (int step = 0; step < n_steps; ++step) {
    const double t = step * dt;
    coordinate(t, sol);

    try {
      pack(x0);
      derivatives(t, k1);
      xs.resize(x0.size());
      for (std::size_t i = 0; i < x0.size(); ++i) {
        xs[i] = x0[i] + 0.5 * dt * k1[i];
      }
      unpack(xs);
      derivatives(t, k2);
      for (std::size_t i = 0; i < x0.size(); ++i) {
        xs[i] = x0[i] + 0.5 * dt * k2[i];
      }
      unpack(xs);
      derivatives(t, k3);
      for (std::size_t i = 0; i < x0.size(); ++i) {
        xs[i] = x0[i] + dt * k3[i];
      }
      unpack(xs);
      derivatives(t, k4);
      for (std::size_t i = 0; i < x0.size(); ++i) {
        xs[i] = x0[i] +
                dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      }
      unpack(xs);
    } catch (const SimError& e) {
      throw SimError(std::string(e.what()), t);
    }

    const double t_next = (step + 1) * dt;
    for (std::size_t i = 0; i < models_.size(); ++i) {
      if (const auto* vsg = std::get_if<VsgDevice>(&models_[i])) {
        try {
          vsg->check_speed_band();
        } catch (const SimError& e) {
          throw SimError(e.what(), t_next, sc_.devices[i].name);
        }
      }
    }

    sol = solve_at(t_next);
    record(t_next, sol, out);
  }

  for (auto& c : coords_) {
    DvppLedgerRecord rec;
    rec.dvpp_id = c.cfg->id;
    rec.ledger = std::move(c.ledger);
    rec.allocation = std::move(c.alloc);
    out.dvpp_records.push_back(std::move(rec));
  }

  for (const auto& tr : out.traces) {
    for (const double v : tr.f_hz) {
      if (!std::isfinite(v)) {
        throw SimError("non-finite frequency in trace", -1.0, tr.name);
      }
    }
  }
  return out;
}

}  // namespace

Scenario build_experiment(int n) {
  if (n < 1 || n > 3) {
    throw ConfigError("experiment must be 1, 2, or 3");
  }
  Scenario s;
  s.name = "experiment" + std::to_string(n);
  s.net = network::build_nine_bus();
  s.solver = SolverSettings{1e-3, 30.0};
  s.events = {{1.0, 5, 0.10, 0.0}};
  s.slack_bus = 1;
  s.slack_v = 1.04;
  s.dispatch_p = {{2, 0.60}, {3, 0.45}};
  s.dispatch_q = {{2, 0.20}, {3, 0.15}};

  auto sg = [](int id, int bus, const std::string& name, double mva,
               double h) {
    PlacedDevice d;
    d.id = id;
    d.bus = bus;
    d.name = name;
    SgDevice g;
    g.rating_mva = mva;
    g.h_inertia = h;
    g.d_mech = 1.5;
    g.r_gov = 0.05;
    g.t_gov = 0.5;
    g.x_transient = 0.25;
    d.model = g;
    return d;
  };

  s.devices.push_back(sg(1, 1, "sg1", 250.0, 5.0));
  s.devices.push_back(sg(2, 2, "sg2", 80.0, 4.0));
  s.devices.push_back(sg(3, 3, "sg3", 60.0, 3.5));
  if (n == 1) return s;

  // unit 3 becomes a coordinated plant: hydro + battery + supercapacitor
  {
    s.devices.pop_back();  // sg3

    auto gfm = [](int id, int bus, const std::string& name, double mva) {
      PlacedDevice d;
      d.id = id;
      d.bus = bus;
      d.name = name;
      d.dvpp_id = 1;
      DroopDevice g;
      g.rating_mva = mva;
      g.k_p_droop = 0.05;
      g.k_d_droop = 0.05;
      g.tau = 0.01;
      g.tau_q = 0.01;
      g.x_source = 0.15;
      d.model = g;
      return d;
    };
    s.devices.push_back(gfm(4, 3, "hydro", 180.0));
    s.devices.push_back(gfm(5, 3, "battery", 50.0));
    s.devices.push_back(gfm(6, 3, "supercap", 20.0));

    DvppConfig cfg;
    cfg.id = 1;
    cfg.bus = 3;
    cfg.t_track = 0.2;
    cfg.spec.t_slow = 5.0;
    cfg.spec.t_fast = 0.05;
    cfg.spec.xi_target.phi_wp =
        lti::RationalTransfer({50.0, 50.0 * 0.2}, {1.0, 0.1});
    cfg.spec.xi_target.gamma_vq = lti::RationalTransfer({10.0}, {1.0, 0.1});
    auto member = [](int id, dvpp::MemberClass cls, double mva) {
      dvpp::Member m;
      m.device_id = id;
      m.band_class = cls;
      m.controllable = true;
      m.capacity_mva = mva;
      return m;
    };
    cfg.spec.members = {member(4, dvpp::MemberClass::Slow, 180.0),
                        member(5, dvpp::MemberClass::Mid, 50.0),
                        member(6, dvpp::MemberClass::Fast, 20.0)};
    s.dvpps.push_back(cfg);
  }
  if (n == 2) return s;

  // unit 2 becomes a second plant: wind + PV + vehicle storage, under
  // virtual-synchronous-machine control
  {
    s.devices.erase(s.devices.begin() + 1);  // sg2

    auto vsg = [](int id, int bus, const std::string& name, double mva) {
      PlacedDevice d;
      d.id = id;
      d.bus = bus;
      d.name = name;
      d.dvpp_id = 2;
      VsgDevice g;
      g.rating_mva = mva;
      g.j_virt = 12.0;
      g.d_virt = 3.0;
      g.k_omega = 20.0;
      g.tau = 0.02;
      g.k_d_droop = 0.05;
      g.tau_q = 0.02;
      g.x_source = 0.15;
      d.model = g;
      return d;
    };
    s.devices.push_back(vsg(7, 2, "dfig", 70.0));
    s.devices.push_back(vsg(8, 2, "pv", 52.0));
    s.devices.push_back(vsg(9, 2, "storage", 30.0));

    DvppConfig cfg;
    cfg.id = 2;
    cfg.bus = 2;
    cfg.t_track = 0.2;
    cfg.spec.t_slow = 5.0;
    cfg.spec.t_fast = 0.05;
    cfg.spec.xi_target.phi_wp =
        lti::RationalTransfer({12.0, 12.0 * 0.2}, {1.0, 0.1});
    cfg.spec.xi_target.gamma_vq = lti::RationalTransfer({5.0}, {1.0, 0.1});
    auto member = [](int id, dvpp::MemberClass cls, double mva) {
      dvpp::Member m;
      m.device_id = id;
      m.band_class = cls;
      m.controllable = true;
      m.capacity_mva = mva;
      return m;
    };
    cfg.spec.members = {member(7, dvpp::MemberClass::Slow, 70.0),
                        member(8, dvpp::MemberClass::Mid, 52.0),
                        member(9, dvpp::MemberClass::Fast, 30.0)};
    s.dvpps.push_back(cfg);
  }
  return s;
}

SimOutput run(const Scenario& s) {
  Simulator sim(s);
  return sim.run();
}

Metrics compute_metrics(const SimOutput& out, double t_event) {
  if (out.t.size() < 2) throw ConfigError("metrics: output too short");
  const double t_end = out.t.back();
  if (t_event < out.t.front() || t_event >= t_end - out.dt) {
    throw ConfigError("metrics: event time is outside the usable horizon");
  }
  const double dt = out.dt;
  const std::size_t n = out.t.size();
  auto idx_of = [&](double t) {
    return std::min(n - 1, std::size_t(std::max(0.0, std::ceil(t / dt - 1e-9))));
  };
  const std::size_t k_event = idx_of(t_event);

  Metrics m;

  // nadir over all devices after the event
  m.nadir_hz = std::numeric_limits<double>::infinity();
  for (const auto& tr : out.traces) {
    for (std::size_t k = k_event; k < n; ++k) {
      if (tr.f_hz[k] < m.nadir_hz) {
        m.nadir_hz = tr.f_hz[k];
        m.nadir_time_s = out.t[k];
      }
    }
  }

  // steepest 100 ms window in the first half second after the event
  const std::size_t w = std::max<std::size_t>(1, std::size_t(std::llround(0.1 / dt)));
  const std::size_t k_stop = std::min(n - 1, k_event + std::size_t(std::llround(0.5 / dt)));
  m.max_rocof_hz_per_s = 0.0;
  for (const auto& tr : out.traces) {
    for (std::size_t k = k_event; k + w <= k_stop; ++k) {
      const double slope = std::abs(tr.f_hz[k + w] - tr.f_hz[k]) / (w * dt);
      m.max_rocof_hz_per_s = std::max(m.max_rocof_hz_per_s, slope);
    }
  }

  // pairwise spread once the first swing settles
  const std::size_t k_coh = idx_of(t_event + 2.0);
  m.coherence_hz = 0.0;
  for (std::size_t k = k_coh; k < n; ++k) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& tr : out.traces) {
      lo = std::min(lo, tr.f_hz[k]);
      hi = std::max(hi, tr.f_hz[k]);
    }
    m.coherence_hz = std::max(m.coherence_hz, hi - lo);
  }

  // mean system frequency, final value from the last second
  std::vector<double> f_sys(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (const auto& tr : out.traces) f_sys[k] += tr.f_hz[k];
    f_sys[k] /= double(out.traces.size());
  }
  const std::size_t k_tail = idx_of(t_end - 1.0);
  double f_final = 0.0;
  for (std::size_t k = k_tail; k < n; ++k) f_final += f_sys[k];
  f_final /= double(n - k_tail);
  m.steady_state_dev_hz = f_final - out.f_nom_hz;

  m.recovery_time_s = 0.0;
  for (std::size_t k = n; k-- > k_event;) {
    if (std::abs(f_sys[k] - f_final) > 0.02) {
      m.recovery_time_s = out.t[k] - t_event + dt;
      break;
    }
  }

  // coordinated members ranked by when their |dP| peaked
  std::vector<const DeviceTrace*> ranked;
  for (const auto& tr : out.traces) {
    if (tr.dvpp_id > 0) ranked.push_back(&tr);
  }
  if (ranked.empty()) {
    for (const auto& tr : out.traces) ranked.push_back(&tr);
  }
  std::vector<std::pair<double, const DeviceTrace*>> peak_times;
  for (const auto* tr : ranked) {
    double best = 0.0;
    std::size_t best_k = k_event;
    for (std::size_t k = k_event; k < n; ++k) {
      if (std::abs(tr->dp_pu[k]) > best) {
        best = std::abs(tr->dp_pu[k]);
        best_k = k;
      }
    }
    peak_times.emplace_back(out.t[best_k], tr);
  }
  std::stable_sort(peak_times.begin(), peak_times.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [t, tr] : peak_times) {
    (void)t;
    m.relay_order.push_back(tr->name);
  }
  return m;
}

std::string metrics_text(const Metrics& m) {
  std::ostringstream os;
  os.precision(6);
  os << "nadir: " << m.nadir_hz << " Hz at t=" << m.nadir_time_s << " s\n";
  os << "max rocof (100 ms window): " << m.max_rocof_hz_per_s << " Hz/s\n";
  os << "coherence (max pairwise spread after settling): " << m.coherence_hz
     << " Hz\n";
  os << "steady-state deviation: " << m.steady_state_dev_hz << " Hz\n";
  os << "recovery time (within 0.02 Hz of final): " << m.recovery_time_s
     << " s\n";
  os << "relay order:";
  for (const auto& name : m.relay_order) os << " " << name;
  os << "\n";
  return os.str();
}

}  // namespace dvppsim::engine

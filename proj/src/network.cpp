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

#include "dvppsim/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dvppsim/errors.hpp"

namespace dvppsim::network {

namespace {

Eigen::VectorXcd polar_profile(const Eigen::VectorXd& vm,
                               const Eigen::VectorXd& va) {
  Eigen::VectorXcd v(vm.size());
  for (int i = 0; i < vm.size(); ++i) v(i) = std::polar(vm(i), va(i));
  return v;
}

}  // namespace

int NetworkModel::index(int bus_id) const {
  if (bus_id < 1 || bus_id > size())
    throw Error("network: unknown bus id " + std::to_string(bus_id));
  return bus_id - 1;
}

void NetworkModel::build_y() {
  const int n = size();
  for (int i = 0; i < n; ++i) {
    if (buses[i].id != i + 1)
      throw Error("network: bus ids must be contiguous from 1");
  }
  y_matrix = Eigen::MatrixXcd::Zero(n, n);
  for (const Branch& br : branches) {
    if (br.from == br.to) throw Error("network: branch endpoints must differ");
    if (std::abs(br.series_z) == 0.0)
      throw Error("network: zero series impedance on branch " +
                  std::to_string(br.from) + "-" + std::to_string(br.to));
    const int f = index(br.from);
    const int t = index(br.to);
    const Complex y = 1.0 / br.series_z;
    const Complex half_b(0.0, br.shunt_b / 2.0);
    y_matrix(f, f) += y + half_b;
    y_matrix(t, t) += y + half_b;
    y_matrix(f, t) -= y;
    y_matrix(t, f) -= y;
  }
  for (int i = 0; i < n; ++i) y_matrix(i, i) += buses[i].shunt;
}

Eigen::MatrixXcd NetworkModel::series_only_y() const {
  const int n = size();
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const Branch& br : branches) {
    const int f = index(br.from);
    const int t = index(br.to);
    const Complex ys = 1.0 / br.series_z;
    y(f, f) += ys;
    y(t, t) += ys;
    y(f, t) -= ys;
    y(t, f) -= ys;
  }
  return y;
}

NetworkModel build_nine_bus() {
  NetworkModel net;
  net.base = PerUnitBase{100.0, 230.0, 60.0};
  auto gen = [](int id) { return Bus{id, BusKind::Generator, {0, 0}, 0, 0}; };
  auto xfer = [](int id) { return Bus{id, BusKind::Transfer, {0, 0}, 0, 0}; };
  auto load = [](int id, double p, double q) {
    return Bus{id, BusKind::Load, {0, 0}, p, q};
  };
  net.buses = {gen(1),           gen(2),  gen(3),
               xfer(4),          load(5, 1.25, 0.50),
               load(6, 0.90, 0.30), xfer(7),
               load(8, 1.00, 0.35), xfer(9)};

  auto xfmr = [](int f, int t, double x) {
    return Branch{f, t, Complex(0.0, x), 0.0};
  };
  auto line = [](int f, int t, double r, double x, double b) {
    return Branch{f, t, Complex(r, x), b};
  };
  net.branches = {
      xfmr(1, 4, 0.0576),
      xfmr(2, 7, 0.0625),
      xfmr(3, 9, 0.0586),
      line(4, 5, 0.010, 0.085, 0.176),
      line(4, 6, 0.017, 0.092, 0.158),
      line(5, 7, 0.032, 0.161, 0.306),
      line(6, 9, 0.039, 0.170, 0.358),
      line(7, 8, 0.0085, 0.072, 0.149),
      line(8, 9, 0.0119, 0.1008, 0.209),
  };
  net.build_y();
  return net;
}

int LoadState::epoch(double t) const {
  int k = 0;
  while (k < static_cast<int>(events.size()) && events[k].t <= t) ++k;
  return k;
}

LoadState make_load_state(const NetworkModel& net, const Eigen::VectorXcd& v_ref,
                          std::vector<LoadEvent> events) {
  if (v_ref.size() != net.size())
    throw Error("make_load_state: voltage profile size mismatch");
  LoadState ls;
  ls.y_load.resize(net.size(), Complex(0.0, 0.0));
  for (int i = 0; i < net.size(); ++i) {
    const Bus& b = net.buses[i];
    if (b.load_p == 0.0 && b.load_q == 0.0) continue;
    const double v2 = std::norm(v_ref(i));
    if (!(v2 > 0.0))
      throw Error("make_load_state: zero reference voltage at bus " +
                  std::to_string(b.id));
    ls.y_load[i] = Complex(b.load_p, -b.load_q) / v2;
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const LoadEvent& a, const LoadEvent& b) { return a.t < b.t; });
  for (const LoadEvent& ev : events) {
    const int i = net.index(ev.bus);
    const double v2 = std::norm(v_ref(i));
    if (!(v2 > 0.0))
      throw Error("make_load_state: zero reference voltage at bus " +
                  std::to_string(ev.bus));
    ls.event_dy.push_back(Complex(ev.dp, -ev.dq) / v2);
  }
  ls.events = std::move(events);
  return ls;
}

NetworkSolver::NetworkSolver(const NetworkModel& net, LoadState loads,
                             std::vector<DeviceInterface> interfaces)
    : net_(&net), loads_(std::move(loads)), base_interfaces_(std::move(interfaces)) {
  const int n = net.size();
  if (static_cast<int>(loads_.y_load.size()) != n)
    throw Error("network solver: load state size mismatch");
  y_aug_ = net.y_matrix;
  for (int i = 0; i < n; ++i) y_aug_(i, i) += loads_.y_load[i];
  for (const DeviceInterface& di : base_interfaces_) {
    if (const auto* th = std::get_if<TheveninSource>(&di)) {
      if (std::abs(th->y_src) == 0.0 || !std::isfinite(std::abs(th->y_src)))
        throw Error("network solver: voltage source needs a finite nonzero source admittance");
      y_aug_(net.index(th->bus), net.index(th->bus)) += th->y_src;
    } else {
      const auto& no = std::get<NortonCurrent>(di);
      net.index(no.bus);  // validate
    }
  }
}

const Eigen::FullPivLU<Eigen::MatrixXcd>& NetworkSolver::factorization(int epoch) {
  auto it = lu_by_epoch_.find(epoch);
  if (it != lu_by_epoch_.end()) return it->second;
  Eigen::MatrixXcd y = y_aug_;
  for (int k = 0; k < epoch; ++k)
    y(net_->index(loads_.events[k].bus), net_->index(loads_.events[k].bus)) +=
        loads_.event_dy[k];
  auto [ins, ok] = lu_by_epoch_.emplace(epoch, Eigen::FullPivLU<Eigen::MatrixXcd>(y));
  if (!ins->second.isInvertible()) {
    // Name the weakest-coupled bus to aid diagnosis.
    int worst = 0;
    double worst_norm = std::numeric_limits<double>::infinity();
    for (int i = 0; i < y.rows(); ++i) {
      const double rn = y.row(i).norm();
      if (rn < worst_norm) {
        worst_norm = rn;
        worst = i;
      }
    }
    throw SimError("network matrix singular near bus " +
                   std::to_string(worst + 1) +
                   " (no voltage source or load ties it down)");
  }
  return ins->second;
}

NetworkSolution NetworkSolver::solve(double t,
                                     const std::vector<DeviceInterface>& ifs) {
  if (ifs.size() != base_interfaces_.size())
    throw Error("network solver: interface list size changed between solves");
  const int n = net_->size();
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  for (std::size_t d = 0; d < ifs.size(); ++d) {
    if (const auto* th = std::get_if<TheveninSource>(&ifs[d])) {
      const auto* th0 = std::get_if<TheveninSource>(&base_interfaces_[d]);
      if (!th0 || th0->bus != th->bus || th0->y_src != th->y_src)
        throw Error("network solver: interface kind/bus/admittance must stay fixed");
      rhs(net_->index(th->bus)) += th->y_src * th->emf;
    } else {
      const auto& no = std::get<NortonCurrent>(ifs[d]);
      rhs(net_->index(no.bus)) += no.i_inj;
    }
  }

  NetworkSolution sol;
  sol.v = factorization(loads_.epoch(t)).solve(rhs);
  sol.device_s.reserve(ifs.size());
  for (const DeviceInterface& di : ifs) {
    if (const auto* th = std::get_if<TheveninSource>(&di)) {
      const Complex v = sol.v(net_->index(th->bus));
      const Complex i_dev = th->y_src * (th->emf - v);
      sol.device_s.push_back(v * std::conj(i_dev));
    } else {
      const auto& no = std::get<NortonCurrent>(di);
      const Complex v = sol.v(net_->index(no.bus));
      sol.device_s.push_back(v * std::conj(no.i_inj));
    }
  }
  return sol;
}

NetworkSolution network_solve_step(const NetworkModel& net, const LoadState& loads,
                                   const std::vector<DeviceInterface>& ifs,
                                   double t) {
  NetworkSolver solver(net, loads, ifs);
  return solver.solve(t, ifs);
}

PowerFlowResult solve_power_flow(const NetworkModel& net,
                                 const std::vector<Complex>& injections,
                                 int slack_bus, Complex slack_v, double tol,
                                 int max_iter) {
  const int n = net.size();
  if (static_cast<int>(injections.size()) != n)
    throw Error("power flow: injection list size mismatch");
  const int slack = net.index(slack_bus);
  if (net.buses[slack].kind != BusKind::Generator)
    throw Error("power flow: slack must be a generator bus");

  const Eigen::MatrixXcd& y = net.y_matrix;
  Eigen::VectorXd vm = Eigen::VectorXd::Constant(n, std::abs(slack_v));
  Eigen::VectorXd va = Eigen::VectorXd::Constant(n, std::arg(slack_v));

  // Unknown ordering: angles then magnitudes of all non-slack buses.
  std::vector<int> pq;
  for (int i = 0; i < n; ++i)
    if (i != slack) pq.push_back(i);
  const int m = static_cast<int>(pq.size());

  auto calc_pq = [&](int i, double& p, double& q) {
    p = 0.0;
    q = 0.0;
    for (int k = 0; k < n; ++k) {
      const double g = y(i, k).real();
      const double b = y(i, k).imag();
      const double th = va(i) - va(k);
      p += vm(i) * vm(k) * (g * std::cos(th) + b * std::sin(th));
      q += vm(i) * vm(k) * (g * std::sin(th) - b * std::cos(th));
    }
  };

  double max_mis = 0.0;
  for (int iter = 1; iter <= max_iter; ++iter) {
    Eigen::VectorXd mis(2 * m);
    for (int r = 0; r < m; ++r) {
      double p, q;
      calc_pq(pq[r], p, q);
      mis(r) = injections[pq[r]].real() - p;
      mis(m + r) = injections[pq[r]].imag() - q;
    }
    max_mis = mis.lpNorm<Eigen::Infinity>();
    if (max_mis < tol) return {polar_profile(vm, va), iter - 1, max_mis};

    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    for (int r = 0; r < m; ++r) {
      const int i = pq[r];
      double pi, qi;
      calc_pq(i, pi, qi);
      for (int c = 0; c < m; ++c) {
        const int k = pq[c];
        const double g = y(i, k).real();
        const double b = y(i, k).imag();
        if (i == k) {
          jac(r, c) = -qi - b * vm(i) * vm(i);
          jac(r, m + c) = pi / vm(i) + g * vm(i);
          jac(m + r, c) = pi - g * vm(i) * vm(i);
          jac(m + r, m + c) = qi / vm(i) - b * vm(i);
        } else {
          const double th = va(i) - va(k);
          const double co = std::cos(th);
          const double si = std::sin(th);
          jac(r, c) = vm(i) * vm(k) * (g * si - b * co);
          jac(r, m + c) = vm(i) * (g * co + b * si);
          jac(m + r, c) = -vm(i) * vm(k) * (g * co + b * si);
          jac(m + r, m + c) = vm(i) * (g * si - b * co);
        }
      }
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible())
      throw SimError("power flow: singular Jacobian at iteration " +
                     std::to_string(iter));
    Eigen::VectorXd dx = lu.solve(mis);
    if (!dx.allFinite())
      throw SimError("power flow: non-finite Newton update");
    for (int r = 0; r < m; ++r) {
      va(pq[r]) += dx(r);
      vm(pq[r]) += dx(m + r);
      if (vm(pq[r]) <= 0.0)
        throw SimError("power flow diverged: voltage collapse at bus " +
                       std::to_string(pq[r] + 1));
    }
  }
  throw SimError("power flow did not converge in " + std::to_string(max_iter) +
                 " iterations (max mismatch " + std::to_string(max_mis) + " pu)");
}

}  // namespace dvppsim::network

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

#include "dvppsim/io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "dvppsim/errors.hpp"

namespace dvppsim::io {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// timeseries

std::string timeseries_csv(const engine::SimOutput& out) {
  std::string s = "t";
  for (const auto& tr : out.traces) {
    s += ",f_hz_" + tr.name + ",dp_pu_" + tr.name + ",dq_pu_" + tr.name +
         ",v_pu_" + tr.name;
  }
  s += "\n";
  for (std::size_t k = 0; k < out.t.size(); ++k) {
    s += format_g9(out.t[k]);
    for (const auto& tr : out.traces) {
      s += "," + format_g9(tr.f_hz[k]);
      s += "," + format_g9(tr.dp_pu[k]);
      s += "," + format_g9(tr.dq_pu[k]);
      s += "," + format_g9(tr.v_mag_pu[k]);
    }
    s += "\n";
  }
  return s;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_number(const std::string& tok, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("timeseries: bad number '" + tok + "' on line " +
                      std::to_string(line_no + 1));
  }
}

}  // namespace

engine::SimOutput parse_timeseries_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("timeseries: empty input");
  auto header = split(line, ',');
  if (header.empty() || header[0] != "t") {
    throw ConfigError("timeseries: first column must be t");
  }
  if ((header.size() - 1) % 4 != 0 || header.size() == 1) {
    throw ConfigError("timeseries: expected four columns per device");
  }

  engine::SimOutput out;
  const std::size_t n_dev = (header.size() - 1) / 4;
  out.traces.resize(n_dev);
  const char* prefixes[4] = {"f_hz_", "dp_pu_", "dq_pu_", "v_pu_"};
  for (std::size_t d = 0; d < n_dev; ++d) {
    std::string name;
    for (int c = 0; c < 4; ++c) {
      const std::string& col = header[1 + 4 * d + c];
      const std::string prefix = prefixes[c];
      if (col.rfind(prefix, 0) != 0) {
        throw ConfigError("timeseries: column '" + col + "' should start with " +
                          prefix);
      }
      const std::string suffix = col.substr(prefix.size());
      if (c == 0) {
        name = suffix;
      } else if (suffix != name) {
        throw ConfigError("timeseries: column '" + col +
                          "' does not match device '" + name + "'");
      }
    }
    out.traces[d].name = name;
    out.traces[d].id = static_cast<int>(d) + 1;
  }

  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto toks = split(line, ',');
    if (toks.size() != header.size()) {
      throw ConfigError("timeseries: line " + std::to_string(line_no + 1) +
                        " has " + std::to_string(toks.size()) +
                        " fields, expected " + std::to_string(header.size()));
    }
    out.t.push_back(parse_number(toks[0], line_no));
    for (std::size_t d = 0; d < n_dev; ++d) {
      out.traces[d].f_hz.push_back(parse_number(toks[1 + 4 * d], line_no));
      out.traces[d].dp_pu.push_back(parse_number(toks[2 + 4 * d], line_no));
      out.traces[d].dq_pu.push_back(parse_number(toks[3 + 4 * d], line_no));
      out.traces[d].v_mag_pu.push_back(parse_number(toks[4 + 4 * d], line_no));
    }
  }
  if (out.t.size() < 2) throw ConfigError("timeseries: needs at least two rows");
  out.dt = out.t[1] - out.t[0];
  return out;
}

// ---------------------------------------------------------------------------
// metrics summary

std::string metrics_json(const engine::Metrics& m, const engine::SimOutput& out,
                         const std::string& scenario_name) {
  ordered_json j;
  j["schema_version"] = 1;
  j["scenario"] = scenario_name;
  j["f_nom_hz"] = out.f_nom_hz;
  j["dt"] = out.dt;
  j["t_end"] = out.t.empty() ? 0.0 : out.t.back();
  j["event_times"] = out.event_times;
  ordered_json jm;
  jm["nadir_hz"] = m.nadir_hz;
  jm["nadir_time_s"] = m.nadir_time_s;
  jm["max_rocof_hz_per_s"] = m.max_rocof_hz_per_s;
  jm["coherence_hz"] = m.coherence_hz;
  jm["steady_state_dev_hz"] = m.steady_state_dev_hz;
  jm["recovery_time_s"] = m.recovery_time_s;
  jm["relay_order"] = m.relay_order;
  j["metrics"] = jm;
  j["devices"] = ordered_json::array();
  for (const auto& tr : out.traces) {
    ordered_json jd;
    jd["id"] = tr.id;
    jd["name"] = tr.name;
    jd["bus"] = tr.bus;
    jd["dvpp"] = tr.dvpp_id;
    jd["saturated"] = tr.any_saturated;
    jd["lost_lock"] = tr.any_lost_lock;
    j["devices"].push_back(jd);
  }
  j["plants"] = ordered_json::array();
  for (const auto& rec : out.dvpp_records) {
    const auto rep = dvpp::check_power_ledger(rec.ledger, 1e-6);
    ordered_json jp;
    jp["id"] = rec.dvpp_id;
    jp["ledger_pass"] = rep.pass;
    jp["ledger_max_residual_p"] = rep.max_residual_p;
    jp["ledger_max_residual_q"] = rep.max_residual_q;
    jp["audit_pass"] = rec.allocation.audit.pass;
    jp["audit_max_residual_wp"] = rec.allocation.audit.max_residual_wp;
    jp["audit_max_residual_vq"] = rec.allocation.audit.max_residual_vq;
    j["plants"].push_back(jp);
  }
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// plots

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                          "#bcbd22"};
constexpr int kPaletteSize = 9;

std::string xml_escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

struct PanelLayout {
  double x0, y0, w, h;
};

void svg_panel(std::ostringstream& os, const PanelLayout& L,
               const engine::SimOutput& out,
               const std::vector<const std::vector<double>*>& series,
               const std::string& title) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* s : series) {
    for (const double v : *s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) {
    hi += 0.5;
    lo -= 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double t0 = out.t.front(), t1 = out.t.back();

  auto px = [&](double t) { return L.x0 + (t - t0) / (t1 - t0) * L.w; };
  auto py = [&](double v) { return L.y0 + L.h - (v - lo) / (hi - lo) * L.h; };

  os << "<rect x='" << L.x0 << "' y='" << L.y0 << "' width='" << L.w
     << "' height='" << L.h << "' fill='white' stroke='#444'/>\n";
  os << "<text x='" << L.x0 + 6 << "' y='" << L.y0 - 7
     << "' font-size='14' fill='#222'>" << xml_escape(title) << "</text>\n";

  for (int i = 0; i <= 4; ++i) {
    const double tv = t0 + (t1 - t0) * i / 4.0;
    const double vv = lo + (hi - lo) * i / 4.0;
    char num[32];
    os << "<line x1='" << px(tv) << "' y1='" << L.y0 + L.h << "' x2='"
       << px(tv) << "' y2='" << L.y0 + L.h + 4 << "' stroke='#444'/>\n";
    std::snprintf(num, sizeof(num), "%.4g", tv);
    os << "<text x='" << px(tv) << "' y='" << L.y0 + L.h + 16
       << "' font-size='11' text-anchor='middle'>" << num << "</text>\n";
    std::snprintf(num, sizeof(num), "%.4g", vv);
    os << "<text x='" << L.x0 - 6 << "' y='" << py(vv) + 4
       << "' font-size='11' text-anchor='end'>" << num << "</text>\n";
    os << "<line x1='" << L.x0 << "' y1='" << py(vv) << "' x2='"
       << L.x0 + L.w << "' y2='" << py(vv)
       << "' stroke='#ddd' stroke-width='0.5'/>\n";
  }

  for (const double te : out.event_times) {
    os << "<line x1='" << px(te) << "' y1='" << L.y0 << "' x2='" << px(te)
       << "' y2='" << L.y0 + L.h
       << "' stroke='#999' stroke-dasharray='4,3'/>\n";
  }

  const std::size_t n = out.t.size();
  const std::size_t stride = std::max<std::size_t>(1, n / 1500);
  for (std::size_t i = 0; i < series.size(); ++i) {
    os << "<polyline fill='none' stroke='" << kPalette[i % kPaletteSize]
       << "' stroke-width='1.3' points='";
    for (std::size_t k = 0; k < n; k += stride) {
      char pt[40];
      std::snprintf(pt, sizeof(pt), "%.1f,%.1f ", px(out.t[k]),
                    py((*series[i])[k]));
      os << pt;
    }
    if ((n - 1) % stride != 0) {
      char pt[40];
      std::snprintf(pt, sizeof(pt), "%.1f,%.1f", px(out.t[n - 1]),
                    py((*series[i])[n - 1]));
      os << pt;
    }
    os << "'/>\n";
  }
}

}  // namespace

std::string plot_svg(const engine::SimOutput& out) {
  if (out.t.size() < 2 || out.traces.empty()) {
    throw ConfigError("plot: nothing to draw");
  }
  const double panel_w = 660.0, panel_h = 240.0;
  const double left = 70.0, top = 36.0, gap = 46.0;
  const double width = left + panel_w + 190.0;
  const double height = top + 3 * panel_h + 2 * gap + 40.0;

  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
     << "' height='" << height << "' viewBox='0 0 " << width << " " << height
     << "'>\n<rect width='100%' height='100%' fill='white'/>\n";

  const char* titles[3] = {"frequency [Hz]", "active power deviation [pu]",
                           "reactive power deviation [pu]"};
  for (int p = 0; p < 3; ++p) {
    std::vector<const std::vector<double>*> series;
    for (const auto& tr : out.traces) {
      series.push_back(p == 0 ? &tr.f_hz : (p == 1 ? &tr.dp_pu : &tr.dq_pu));
    }
    const PanelLayout L{left, top + p * (panel_h + gap), panel_w, panel_h};
    svg_panel(os, L, out, series, titles[p]);
  }
  os << "<text x='" << left + panel_w / 2 << "' y='" << height - 8
     << "' font-size='13' text-anchor='middle'>t [s]</text>\n";

  const double lx = left + panel_w + 24.0;
  for (std::size_t i = 0; i < out.traces.size(); ++i) {
    const double ly = top + 14.0 + 20.0 * double(i);
    os << "<line x1='" << lx << "' y1='" << ly << "' x2='" << lx + 22
       << "' y2='" << ly << "' stroke='" << kPalette[i % kPaletteSize]
       << "' stroke-width='2'/>\n";
    os << "<text x='" << lx + 28 << "' y='" << ly + 4 << "' font-size='12'>"
       << xml_escape(out.traces[i].name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON configs

namespace {

[[noreturn]] void bad(const std::string& what) {
  throw ConfigError("config: " + what);
}

void require_schema(const json& j) {
  if (!j.is_object()) bad("top level must be an object");
  if (!j.contains("schema_version")) bad("missing schema_version");
  if (!j["schema_version"].is_number_integer() ||
      j["schema_version"].get<int>() != 1) {
    bad("unsupported schema_version (expected 1)");
  }
}

lti::RationalTransfer parse_tf(const json& j, const std::string& label) {
  if (!j.is_object() || !j.contains("num") || !j.contains("den")) {
    bad(label + " must be an object with num and den arrays");
  }
  std::vector<double> num, den;
  try {
    num = j.at("num").get<std::vector<double>>();
    den = j.at("den").get<std::vector<double>>();
  } catch (const json::exception&) {
    bad(label + ": num/den must be arrays of numbers");
  }
  if (num.empty() || den.empty()) bad(label + ": num/den must be non-empty");
  for (const double c : num) {
    if (!std::isfinite(c)) bad(label + ": non-finite coefficient");
  }
  for (const double c : den) {
    if (!std::isfinite(c)) bad(label + ": non-finite coefficient");
  }
  try {
    return lti::RationalTransfer(num, den);
  } catch (const Error& e) {
    bad(label + ": " + e.what());
  }
}

json tf_to_json(const lti::RationalTransfer& tf) {
  return json{{"num", tf.num}, {"den", tf.den}};
}

dvpp::Member parse_member(const json& j) {
  dvpp::Member m;
  if (!j.is_object()) bad("member entries must be objects");
  if (!j.contains("device")) bad("member: missing device id");
  m.device_id = j.at("device").get<int>();
  if (!j.contains("class")) bad("member: missing class");
  m.band_class = dvpp::member_class_from_string(j.at("class").get<std::string>());
  m.controllable = j.value("controllable", true);
  if (!j.contains("capacity_mva")) bad("member: missing capacity_mva");
  m.capacity_mva = j.at("capacity_mva").get<double>();
  if (j.contains("fixed")) {
    dvpp::ParticipationFactor pf;
    pf.phi_wp = parse_tf(j.at("fixed").at("wp"), "member fixed wp");
    pf.gamma_vq = parse_tf(j.at("fixed").at("vq"), "member fixed vq");
    m.fixed_xi = pf;
  }
  return m;
}

json member_to_json(const dvpp::Member& m) {
  json j;
  j["device"] = m.device_id;
  j["class"] = dvpp::to_string(m.band_class);
  j["controllable"] = m.controllable;
  j["capacity_mva"] = m.capacity_mva;
  if (m.fixed_xi) {
    j["fixed"] = json{{"wp", tf_to_json(m.fixed_xi->phi_wp)},
                      {"vq", tf_to_json(m.fixed_xi->gamma_vq)}};
  }
  return j;
}

void parse_spec_body(const json& j, dvpp::DvppSpec& spec) {
  spec.t_slow = j.value("t_slow", 5.0);
  spec.t_fast = j.value("t_fast", 0.05);
  if (!j.contains("xi_target")) bad("missing xi_target");
  const auto& jt = j.at("xi_target");
  spec.xi_target.phi_wp = parse_tf(jt.at("wp"), "xi_target wp");
  spec.xi_target.gamma_vq = parse_tf(jt.at("vq"), "xi_target vq");
  if (!j.contains("members") || !j.at("members").is_array() ||
      j.at("members").empty()) {
    bad("members must be a non-empty array");
  }
  for (const auto& jm : j.at("members")) spec.members.push_back(parse_member(jm));
}

json spec_body_to_json(const dvpp::DvppSpec& spec) {
  json j;
  j["t_slow"] = spec.t_slow;
  j["t_fast"] = spec.t_fast;
  j["xi_target"] = json{{"wp", tf_to_json(spec.xi_target.phi_wp)},
                        {"vq", tf_to_json(spec.xi_target.gamma_vq)}};
  j["members"] = json::array();
  for (const auto& m : spec.members) j["members"].push_back(member_to_json(m));
  return j;
}

network::NetworkModel parse_network(const json& j) {
  if (!j.is_object()) bad("network must be an object");
  if (j.contains("builtin")) {
    const auto name = j.at("builtin").get<std::string>();
    if (name == "nine_bus") return network::build_nine_bus();
    bad("unknown builtin network '" + name + "'");
  }
  network::NetworkModel net;
  if (j.contains("base")) {
    const auto& jb = j.at("base");
    net.base.s_base_mva = jb.value("s_base_mva", 100.0);
    net.base.v_base_kv = jb.value("v_base_kv", 230.0);
    net.base.f_nom_hz = jb.value("f_nom_hz", 60.0);
  }
  if (!j.contains("buses") || !j.at("buses").is_array()) {
    bad("network: buses must be an array");
  }
  for (const auto& jb : j.at("buses")) {
    network::Bus b;
    b.id = jb.at("id").get<int>();
    const auto kind = jb.value("kind", std::string("transfer"));
    if (kind == "generator") {
      b.kind = network::BusKind::Generator;
    } else if (kind == "load") {
      b.kind = network::BusKind::Load;
    } else if (kind == "transfer") {
      b.kind = network::BusKind::Transfer;
    } else {
      bad("network: unknown bus kind '" + kind + "'");
    }
    b.shunt = network::Complex(jb.value("shunt_g", 0.0), jb.value("shunt_b", 0.0));
    b.load_p = jb.value("load_p", 0.0);
    b.load_q = jb.value("load_q", 0.0);
    net.buses.push_back(b);
  }
  if (j.contains("branches")) {
    for (const auto& jb : j.at("branches")) {
      network::Branch br;
      br.from = jb.at("from").get<int>();
      br.to = jb.at("to").get<int>();
      br.series_z = network::Complex(jb.value("r", 0.0), jb.at("x").get<double>());
      br.shunt_b = jb.value("shunt_b", 0.0);
      net.branches.push_back(br);
    }
  }
  try {
    net.build_y();
  } catch (const Error& e) {
    bad(std::string("network: ") + e.what());
  }
  return net;
}

json network_to_json(const network::NetworkModel& net) {
  json j;
  j["base"] = json{{"s_base_mva", net.base.s_base_mva},
                   {"v_base_kv", net.base.v_base_kv},
                   {"f_nom_hz", net.base.f_nom_hz}};
  j["buses"] = json::array();
  for (const auto& b : net.buses) {
    const char* kind = b.kind == network::BusKind::Generator ? "generator"
                       : b.kind == network::BusKind::Load    ? "load"
                                                             : "transfer";
    j["buses"].push_back(json{{"id", b.id},
                              {"kind", kind},
                              {"shunt_g", b.shunt.real()},
                              {"shunt_b", b.shunt.imag()},
                              {"load_p", b.load_p},
                              {"load_q", b.load_q}});
  }
  j["branches"] = json::array();
  for (const auto& br : net.branches) {
    j["branches"].push_back(json{{"from", br.from},
                                 {"to", br.to},
                                 {"r", br.series_z.real()},
                                 {"x", br.series_z.imag()},
                                 {"shunt_b", br.shunt_b}});
  }
  return j;
}

devices::DeviceModel parse_device_model(const json& j, const std::string& type) {
  const json params = j.value("params", json::object());
  if (!params.contains("rating_mva")) bad("device: missing params.rating_mva");
  const double rating = params.at("rating_mva").get<double>();

  if (type == "sg") {
    devices::SgDevice d;
    d.rating_mva = rating;
    d.h_inertia = params.value("h", d.h_inertia);
    d.d_mech = params.value("d", d.d_mech);
    d.r_gov = params.value("r_gov", d.r_gov);
    d.t_gov = params.value("t_gov", d.t_gov);
    d.x_transient = params.value("x_transient", d.x_transient);
    return d;
  }
  if (type == "droop") {
    devices::DroopDevice d;
    d.rating_mva = rating;
    d.k_p_droop = params.value("k_p", d.k_p_droop);
    d.k_d_droop = params.value("k_q", d.k_d_droop);
    d.tau = params.value("tau", d.tau);
    d.tau_q = params.value("tau_q", d.tau_q);
    d.x_source = params.value("x_source", d.x_source);
    return d;
  }
  if (type == "vsg") {
    devices::VsgDevice d;
    d.rating_mva = rating;
    d.j_virt = params.value("j", d.j_virt);
    d.d_virt = params.value("d", d.d_virt);
    d.k_omega = params.value("k_omega", d.k_omega);
    d.tau = params.value("tau", d.tau);
    d.k_d_droop = params.value("k_q", d.k_d_droop);
    d.tau_q = params.value("tau_q", d.tau_q);
    d.x_source = params.value("x_source", d.x_source);
    d.literal_speed_quotient =
        params.value("literal_speed_quotient", d.literal_speed_quotient);
    d.omega_min = params.value("omega_min", d.omega_min);
    d.omega_max = params.value("omega_max", d.omega_max);
    return d;
  }
  if (type == "gfl") {
    devices::GflDevice d;
    d.rating_mva = rating;
    d.l_f = params.value("l_f", d.l_f);
    d.kp_i = params.value("kp_i", d.kp_i);
    d.ki_i = params.value("ki_i", d.ki_i);
    d.kp_pll = params.value("kp_pll", d.kp_pll);
    d.ki_pll = params.value("ki_pll", d.ki_pll);
    d.i_max = params.value("i_max", d.i_max);
    d.t_i = params.value("t_i", d.t_i);
    d.v_lock_min = params.value("v_lock_min", d.v_lock_min);
    return d;
  }
  bad("device: unknown type '" + type + "' (expected sg, droop, vsg, or gfl)");
}

json device_to_json(const engine::PlacedDevice& d) {
  json j;
  j["id"] = d.id;
  j["bus"] = d.bus;
  j["name"] = d.name;
  if (d.dvpp_id != 0) j["dvpp"] = d.dvpp_id;
  json params;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        params["rating_mva"] = m.rating_mva;
        if constexpr (std::is_same_v<T, devices::SgDevice>) {
          j["type"] = "sg";
          params["h"] = m.h_inertia;
          params["d"] = m.d_mech;
          params["r_gov"] = m.r_gov;
          params["t_gov"] = m.t_gov;
          params["x_transient"] = m.x_transient;
        } else if constexpr (std::is_same_v<T, devices::DroopDevice>) {
          j["type"] = "droop";
          params["k_p"] = m.k_p_droop;
          params["k_q"] = m.k_d_droop;
          params["tau"] = m.tau;
          params["tau_q"] = m.tau_q;
          params["x_source"] = m.x_source;
        } else if constexpr (std::is_same_v<T, devices::VsgDevice>) {
          j["type"] = "vsg";
          params["j"] = m.j_virt;
          params["d"] = m.d_virt;
          params["k_omega"] = m.k_omega;
          params["tau"] = m.tau;
          params["k_q"] = m.k_d_droop;
          params["tau_q"] = m.tau_q;
          params["x_source"] = m.x_source;
          params["literal_speed_quotient"] = m.literal_speed_quotient;
          params["omega_min"] = m.omega_min;
          params["omega_max"] = m.omega_max;
        } else {
          j["type"] = "gfl";
          params["l_f"] = m.l_f;
          params["kp_i"] = m.kp_i;
          params["ki_i"] = m.ki_i;
          params["kp_pll"] = m.kp_pll;
          params["ki_pll"] = m.ki_pll;
          params["i_max"] = m.i_max;
          params["t_i"] = m.t_i;
          params["v_lock_min"] = m.v_lock_min;
        }
      },
      d.model);
  j["params"] = params;
  return j;
}

}  // namespace

engine::Scenario parse_scenario_json(const json& j) {
  require_schema(j);
  engine::Scenario s;
  try {
    s.name = j.value("name", std::string("scenario"));
    if (!j.contains("network")) bad("missing network");
    s.net = parse_network(j.at("network"));
    if (j.contains("solver")) {
      s.solver.dt = j.at("solver").value("dt", s.solver.dt);
      s.solver.t_end = j.at("solver").value("t_end", s.solver.t_end);
    }
    if (j.contains("slack")) {
      s.slack_bus = j.at("slack").value("bus", s.slack_bus);
      s.slack_v = j.at("slack").value("v", s.slack_v);
    }
    for (const auto& jd : j.value("dispatch", json::array())) {
      const int bus = jd.at("bus").get<int>();
      if (jd.contains("p")) s.dispatch_p[bus] = jd.at("p").get<double>();
      if (jd.contains("q")) s.dispatch_q[bus] = jd.at("q").get<double>();
    }
    for (const auto& je : j.value("events", json::array())) {
      network::LoadEvent ev;
      ev.t = je.at("t").get<double>();
      ev.bus = je.at("bus").get<int>();
      ev.dp = je.value("dp", 0.0);
      ev.dq = je.value("dq", 0.0);
      s.events.push_back(ev);
    }
    if (!j.contains("devices") || !j.at("devices").is_array() ||
        j.at("devices").empty()) {
      bad("devices must be a non-empty array");
    }
    for (const auto& jd : j.at("devices")) {
      engine::PlacedDevice d;
      d.id = jd.at("id").get<int>();
      d.bus = jd.at("bus").get<int>();
      d.name = jd.value("name", "dev" + std::to_string(d.id));
      d.dvpp_id = jd.value("dvpp", 0);
      if (!jd.contains("type")) bad("device: missing type");
      d.model = parse_device_model(jd, jd.at("type").get<std::string>());
      s.devices.push_back(d);
    }
    for (const auto& jp : j.value("dvpps", json::array())) {
      engine::DvppConfig cfg;
      cfg.id = jp.value("id", 1);
      cfg.bus = jp.at("bus").get<int>();
      cfg.t_track = jp.value("t_track", cfg.t_track);
      parse_spec_body(jp, cfg.spec);
      s.dvpps.push_back(cfg);
    }
  } catch (const json::exception& e) {
    bad(e.what());
  }
  s.validate();
  return s;
}

nlohmann::json scenario_to_json(const engine::Scenario& s) {
  json j;
  j["schema_version"] = 1;
  j["name"] = s.name;
  j["network"] = network_to_json(s.net);
  j["solver"] = json{{"dt", s.solver.dt}, {"t_end", s.solver.t_end}};
  j["slack"] = json{{"bus", s.slack_bus}, {"v", s.slack_v}};
  j["dispatch"] = json::array();
  {
    std::map<int, json> rows;
    for (const auto& [bus, p] : s.dispatch_p) rows[bus]["p"] = p;
    for (const auto& [bus, q] : s.dispatch_q) rows[bus]["q"] = q;
    for (auto& [bus, row] : rows) {
      row["bus"] = bus;
      j["dispatch"].push_back(row);
    }
  }
  j["events"] = json::array();
  for (const auto& ev : s.events) {
    j["events"].push_back(
        json{{"t", ev.t}, {"bus", ev.bus}, {"dp", ev.dp}, {"dq", ev.dq}});
  }
  j["devices"] = json::array();
  for (const auto& d : s.devices) j["devices"].push_back(device_to_json(d));
  j["dvpps"] = json::array();
  for (const auto& cfg : s.dvpps) {
    json jp = spec_body_to_json(cfg.spec);
    jp["id"] = cfg.id;
    jp["bus"] = cfg.bus;
    jp["t_track"] = cfg.t_track;
    j["dvpps"].push_back(jp);
  }
  return j;
}

dvpp::DvppSpec parse_dvpp_spec_json(const json& j) {
  require_schema(j);
  dvpp::DvppSpec spec;
  try {
    parse_spec_body(j, spec);
  } catch (const json::exception& e) {
    bad(e.what());
  }
  return spec;
}

nlohmann::json dvpp_spec_to_json(const dvpp::DvppSpec& spec) {
  json j = spec_body_to_json(spec);
  j["schema_version"] = 1;
  return j;
}

// ---------------------------------------------------------------------------
// files

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read file '" + path + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) {
      throw ConfigError("cannot create directory '" +
                        target.parent_path().string() + "': " + ec.message());
    }
  }
  const fs::path tmp =
      target.parent_path() /
      (target.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write file '" + tmp.string() + "'");
    os << content;
    if (!os.good()) throw ConfigError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw ConfigError("cannot move '" + tmp.string() + "' into place: " +
                      ec.message());
  }
}

engine::Scenario load_scenario(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_scenario_json(j);
}

dvpp::DvppSpec load_dvpp_spec(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_dvpp_spec_json(j);
}

}  // namespace dvppsim::io

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

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "dvppsim/errors.hpp"
#include "dvppsim/io.hpp"

namespace {

using namespace dvppsim;

struct RunConfig {
  int experiment = 0;          // 1..3, or 0 when a config file is used
  std::string config_path;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<int> step_bus;
  std::optional<double> step_p;
  double step_q = 0.0;
  double step_t = 1.0;
  std::string out_dir;
  bool plots = false;
};

std::string resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("DVPPSIM_OUT"); env && *env) return env;
  return "out";
}

engine::Scenario make_scenario(const RunConfig& cfg) {
  if (cfg.experiment != 0 && !cfg.config_path.empty()) {
    throw ConfigError("choose either --experiment or --config, not both");
  }
  engine::Scenario s = cfg.config_path.empty()
                           ? engine::build_experiment(
                                 cfg.experiment == 0 ? 1 : cfg.experiment)
                           : io::load_scenario(cfg.config_path);
  if (cfg.dt) {
    if (!(*cfg.dt > 0.0)) throw ConfigError("--dt must be positive");
    s.solver.dt = *cfg.dt;
  }
  if (cfg.t_end) {
    if (!(*cfg.t_end > 0.0)) throw ConfigError("--t-end must be positive");
    s.solver.t_end = *cfg.t_end;
  }
  if (cfg.step_bus.has_value() != cfg.step_p.has_value()) {
    throw ConfigError("--step-bus and --step-p must be given together");
  }
  if (cfg.step_bus) {
    network::LoadEvent ev;
    ev.t = cfg.step_t;
    ev.bus = *cfg.step_bus;
    ev.dp = *cfg.step_p;
    ev.dq = cfg.step_q;
    s.events = {ev};
  }
  s.validate();
  return s;
}

double first_event_time(const engine::Scenario& s) {
  double t = std::numeric_limits<double>::infinity();
  for (const auto& ev : s.events) t = std::min(t, ev.t);
  return std::isfinite(t) ? t : 0.0;
}

std::string ledger_csv(const dvpp::DisturbanceLedger& led) {
  std::string s = "t,d_omega,d_v,dp_target,dq_target";
  for (std::size_t i = 0; i < led.dp_members.size(); ++i) {
    s += ",dp_member_" + std::to_string(i + 1);
    s += ",dq_member_" + std::to_string(i + 1);
  }
  for (std::size_t i = 0; i < led.dp_fixed.size(); ++i) {
    s += ",dp_fixed_" + std::to_string(i + 1);
    s += ",dq_fixed_" + std::to_string(i + 1);
  }
  s += "\n";
  for (std::size_t k = 0; k < led.t.size(); ++k) {
    s += io::format_g9(led.t[k]);
    s += "," + io::format_g9(led.d_omega[k]);
    s += "," + io::format_g9(led.d_v[k]);
    s += "," + io::format_g9(led.dp_target[k]);
    s += "," + io::format_g9(led.dq_target[k]);
    for (std::size_t i = 0; i < led.dp_members.size(); ++i) {
      s += "," + io::format_g9(led.dp_members[i][k]);
      s += "," + io::format_g9(led.dq_members[i][k]);
    }
    for (std::size_t i = 0; i < led.dp_fixed.size(); ++i) {
      s += "," + io::format_g9(led.dp_fixed[i][k]);
      s += "," + io::format_g9(led.dq_fixed[i][k]);
    }
    s += "\n";
  }
  return s;
}

int cmd_run(const RunConfig& cfg) {
  const auto scenario = make_scenario(cfg);
  const auto out = engine::run(scenario);
  const auto metrics = engine::compute_metrics(out, first_event_time(scenario));

  const std::filesystem::path dir = resolve_out_dir(cfg.out_dir);
  io::write_file_atomic((dir / "timeseries.csv").string(),
                        io::timeseries_csv(out));
  io::write_file_atomic((dir / "metrics.json").string(),
                        io::metrics_json(metrics, out, scenario.name));
  for (const auto& rec : out.dvpp_records) {
    const std::string tag = "dvpp" + std::to_string(rec.dvpp_id);
    io::write_file_atomic((dir / ("allocation_" + tag + ".txt")).string(),
                          dvpp::allocation_report_text(rec.allocation));
    io::write_file_atomic(
        (dir / ("allocation_" + tag + ".csv")).string(),
        dvpp::allocation_frequency_csv(rec.allocation,
                                       dvpp::default_audit_grid()));
    io::write_file_atomic((dir / ("ledger_" + tag + ".csv")).string(),
                          ledger_csv(rec.ledger));
  }
  if (cfg.plots) {
    io::write_file_atomic((dir / "plots.svg").string(), io::plot_svg(out));
  }

  // a run whose coordinator books don't balance is not an accepted result
  for (const auto& rec : out.dvpp_records) {
    const auto rep = dvpp::check_power_ledger(rec.ledger, 1e-6);
    if (!rep.pass) {
      throw SimError("power ledger of dvpp " + std::to_string(rec.dvpp_id) +
                         " does not close (max residual " +
                         io::format_g9(std::max(rep.max_residual_p,
                                                rep.max_residual_q)) +
                         " pu)",
                     rep.worst_sample * out.dt);
    }
  }

  std::cout << "scenario: " << scenario.name << "\n"
            << engine::metrics_text(metrics) << "wrote " << dir.string()
            << "/timeseries.csv, metrics.json"
            << (out.dvpp_records.empty() ? "" : ", allocation/ledger files")
            << (cfg.plots ? ", plots.svg" : "") << "\n";
  return 0;
}

int cmd_audit(const std::string& spec_path) {
  const auto spec = io::load_dvpp_spec(spec_path);

  bool any_controllable = false;
  for (const auto& m : spec.members) any_controllable |= m.controllable;
  if (!any_controllable) {
    // allocation refuses such specs; still quantify how far the fixed
    // members alone are from covering the target
    double worst = 0.0;
    for (const double w : dvpp::default_audit_grid()) {
      const lti::Complex s(0.0, w);
      lti::Complex sum_wp(0.0), sum_vq(0.0);
      for (const auto& m : spec.members) {
        if (!m.fixed_xi) continue;
        sum_wp += lti::divide(m.fixed_xi->phi_wp, spec.xi_target.phi_wp).eval(s);
        sum_vq +=
            lti::divide(m.fixed_xi->gamma_vq, spec.xi_target.gamma_vq).eval(s);
      }
      worst = std::max(worst, std::abs(sum_wp - 1.0));
      worst = std::max(worst, std::abs(sum_vq - 1.0));
    }
    std::cout << "audit: no controllable member; fixed members leave a "
                 "max sum-to-one residual of "
              << io::format_g9(worst) << "\n";
    std::cerr << "error: dvpp: at least one controllable member is required\n";
    return 2;
  }

  const auto alloc = dvpp::allocate(spec);
  std::cout << dvpp::allocation_report_text(alloc);
  const double residual =
      std::max(alloc.audit.max_residual_wp, alloc.audit.max_residual_vq);
  std::cout << "max sum-to-one residual: " << io::format_g9(residual) << "\n";
  if (!(residual <= 1e-9)) {
    std::cerr << "error: aggregation residual exceeds 1e-9\n";
    return 1;
  }
  return 0;
}

struct SweepRow {
  double value = 0.0;
  std::string status = "ok";
  engine::Metrics metrics;
};

engine::Scenario apply_sweep_param(engine::Scenario s, const std::string& param,
                                   double value) {
  if (param == "dt") {
    s.solver.dt = value;
  } else if (param == "step_p") {
    if (s.events.empty()) {
      throw ConfigError("step_p sweep needs a scenario with an event");
    }
    s.events[0].dp = value;
  } else if (param == "vsg_j_scale" || param == "vsg_d_scale") {
    int touched = 0;
    for (auto& d : s.devices) {
      if (auto* vsg = std::get_if<devices::VsgDevice>(&d.model)) {
        if (param == "vsg_j_scale") {
          vsg->j_virt *= value;
        } else {
          vsg->d_virt *= value;
        }
        ++touched;
      }
    }
    if (touched == 0) {
      throw ConfigError(param + " sweep needs at least one vsg device");
    }
  } else {
    throw ConfigError("unknown sweep parameter '" + param +
                      "' (expected vsg_j_scale, vsg_d_scale, step_p, or dt)");
  }
  s.validate();
  return s;
}

int cmd_sweep(const RunConfig& cfg, const std::string& param,
              const std::vector<double>& values, int jobs) {
  static const char* kParams[] = {"vsg_j_scale", "vsg_d_scale", "step_p", "dt"};
  if (std::find_if(std::begin(kParams), std::end(kParams),
                   [&](const char* p) { return param == p; }) ==
      std::end(kParams)) {
    throw ConfigError("unknown sweep parameter '" + param +
                      "' (expected vsg_j_scale, vsg_d_scale, step_p, or dt)");
  }
  const auto base = make_scenario(cfg);

  std::vector<SweepRow> rows(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= values.size()) return;
      rows[i].value = values[i];
      try {
        const auto s = apply_sweep_param(base, param, values[i]);
        const auto out = engine::run(s);
        rows[i].metrics = engine::compute_metrics(out, first_event_time(s));
      } catch (const Error& e) {
        rows[i].status = std::string("error: ") + e.what();
      }
    }
  };
  const int n_threads =
      std::max(1, std::min<int>(jobs, static_cast<int>(values.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::string csv =
      "param,value,status,nadir_hz,nadir_time_s,max_rocof_hz_per_s,"
      "coherence_hz,steady_state_dev_hz,recovery_time_s\n";
  for (const auto& row : rows) {
    std::string status = row.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    csv += param + "," + io::format_g9(row.value) + "," + status;
    if (row.status == "ok") {
      const auto& m = row.metrics;
      csv += "," + io::format_g9(m.nadir_hz);
      csv += "," + io::format_g9(m.nadir_time_s);
      csv += "," + io::format_g9(m.max_rocof_hz_per_s);
      csv += "," + io::format_g9(m.coherence_hz);
      csv += "," + io::format_g9(m.steady_state_dev_hz);
      csv += "," + io::format_g9(m.recovery_time_s);
    } else {
      csv += ",,,,,,";
    }
    csv += "\n";
  }

  const std::filesystem::path dir = resolve_out_dir(cfg.out_dir);
  io::write_file_atomic((dir / "sweep.csv").string(), csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dvppsim: phasor-domain simulation of dynamic virtual power "
               "plants on the 9-bus test system"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string audit_spec;
  std::string sweep_param;
  std::vector<double> sweep_values;
  int sweep_jobs = 1;

  auto add_scenario_flags = [&cfg](CLI::App* cmd) {
    cmd->add_option("--experiment", cfg.experiment,
                    "built-in scenario number (1, 2, or 3)")
        ->check(CLI::Range(1, 3));
    cmd->add_option("--config", cfg.config_path, "scenario config file (JSON)");
    cmd->add_option("--dt", cfg.dt, "integration step, s");
    cmd->add_option("--t-end", cfg.t_end, "simulation horizon, s");
    cmd->add_option("--out", cfg.out_dir,
                    "output directory (default $DVPPSIM_OUT or ./out)");
  };

  auto* run = app.add_subcommand("run", "simulate a scenario and write "
                                        "timeseries, metrics, and plots");
  add_scenario_flags(run);
  run->add_option("--step-bus", cfg.step_bus, "load-step bus (overrides events)");
  run->add_option("--step-p", cfg.step_p, "load-step active power, pu");
  run->add_option("--step-q", cfg.step_q, "load-step reactive power, pu");
  run->add_option("--step-t", cfg.step_t, "load-step time, s");
  run->add_flag("--plots", cfg.plots, "write plots.svg alongside the CSV");

  auto* audit = app.add_subcommand(
      "audit", "check a coordinator spec: prints per-member participation "
               "coefficients and the sum-to-one residual");
  audit->add_option("spec", audit_spec, "dvpp spec file (JSON)")->required();

  auto* sweep = app.add_subcommand(
      "sweep", "run a scenario over a parameter grid and tabulate metrics");
  add_scenario_flags(sweep);
  sweep->add_option("--param", sweep_param,
                    "one of vsg_j_scale, vsg_d_scale, step_p, dt")
      ->required();
  sweep->add_option("--values", sweep_values, "grid values")
      ->required()
      ->expected(-1);
  sweep->add_option("--jobs", sweep_jobs, "parallel runs")->check(CLI::Range(1, 64));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(cfg);
    if (audit->parsed()) return cmd_audit(audit_spec);
    if (sweep->parsed()) {
      if (sweep_values.empty()) throw ConfigError("sweep: empty value grid");
      return cmd_sweep(cfg, sweep_param, sweep_values, sweep_jobs);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SimError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#ifndef DARKSQUEEZE_CLI_HPP
#define DARKSQUEEZE_CLI_HPP

// Command implementations behind the darksqueeze executable.  They are kept
// in the library so the test suite can drive them in-process; the binary in
// tools/ is a thin argument-parsing shell.
//
// Exit-code contract: 0 success, 1 configuration error, 2 numerical-validity
// failure.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "darksqueeze/oracle.hpp"
#include "darksqueeze/runconfig.hpp"

namespace darksqueeze::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitNumericError = 2;

namespace detail {

inline std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", x);
  return buf;
}

// write-then-rename so readers never observe a partial file
inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    if (!f) throw InvalidInputError("cannot write output file '" + path + "'");
    f << content;
  }
  std::filesystem::rename(tmp, path);
}

inline int worker_count(size_t jobs) {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("DARKSQUEEZE_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return static_cast<int>(std::min<size_t>(n, jobs));
}

inline std::string series_csv(const TimeSeries& series) {
  std::string out = "t_us,n_a,n_b,fidelity,gap_kHz,trunc_top,norm_or_trace\n";
  for (const auto& r : series.records) {
    out += num(r.t_us) + "," + num(r.n_a) + "," + num(r.n_b) + "," + num(r.fidelity) +
           "," + num(r.gap_khz) + "," + num(r.trunc_top) + "," +
           num(r.norm_or_trace) + "\n";
  }
  return out;
}

inline double min_gap(const TimeSeries& series) {
  double g = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : series.records)
    if (std::isfinite(r.gap_khz) && (!std::isfinite(g) || r.gap_khz < g)) g = r.gap_khz;
  return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// derive: print the closed-form coupling table at Omega2 = 0 and at the
/// ramp endpoint.
inline int cmd_derive(const RunConfig& cfg, std::ostream& out) {
  const DerivedCouplings d0 = derive_couplings(cfg.params, 0.0);
  const DerivedCouplings d1 = derive_couplings(cfg.params, cfg.params.omega2_rabi_max);
  auto row = [&](const char* name, double v, const char* unit) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%-14s %14.4f  %s\n", name, v, unit);
    out << buf;
  };
  out << "derived couplings (Omega2 at ramp end = "
      << detail::num(cfg.params.omega2_rabi_max) << " 2pi*kHz)\n";
  row("eta_e", d1.eta_e, "2pi*kHz");
  row("eta_g", d1.eta_g, "2pi*kHz");
  row("xi_e", d1.xi_e, "2pi*kHz");
  row("xi_g", d1.xi_g, "2pi*kHz");
  row("lambda1", d1.lambda1, "2pi*kHz");
  row("lambda2", d1.lambda2, "2pi*kHz");
  if (d0.mu) row("mu_max", *d0.mu, "2pi*kHz");
  if (d1.mu) {
    row("mu_min", *d1.mu, "2pi*kHz");
    row("r", *d1.r, "-");
    row("theta", cfg.branch == Branch::Atomic ? d1.theta_atomic : d1.theta_field, "rad");
  } else {
    out << "above threshold: lambda2 >= lambda1, no dark squeezed state\n";
  }
  row("delta_a", d1.delta_a, "2pi*kHz");
  row("delta_b", d1.delta_b, "2pi*kHz");
  if (!validate(cfg.params).large_detuning_ok)
    out << "warning: large-detuning condition not met (margin < 10)\n";
  return kExitOk;
}

/// budget: print the adiabatic error budget and write it as one CSV row.
inline int cmd_budget(const RunConfig& cfg, std::ostream& out) {
  const ErrorBudget b = error_budget(cfg.params, cfg.t_total_us);
  auto line = [&](const char* name, double v) {
    out << name << " = " << detail::num(v) << "\n";
  };
  line("T_us", b.t_total_us);
  line("deltaE_max_kHz", b.deltaE_max);
  line("deltaE_min_kHz", b.deltaE_min);
  line("delta_a_kHz", b.delta_a);
  line("P_b", b.p_b);
  line("kappa_e_kHz", b.kappa_e);
  line("gamma_e_kHz", b.gamma_e);
  line("total_error", b.total_error);
  std::string csv =
      "T_us,deltaE_max_kHz,deltaE_min_kHz,delta_a_kHz,P_b,kappa_e_kHz,gamma_e_kHz,"
      "total_error\n";
  csv += detail::num(b.t_total_us) + "," + detail::num(b.deltaE_max) + "," +
         detail::num(b.deltaE_min) + "," + detail::num(b.delta_a) + "," +
         detail::num(b.p_b) + "," + detail::num(b.kappa_e) + "," +
         detail::num(b.gamma_e) + "," + detail::num(b.total_error) + "\n";
  detail::write_file_atomic(cfg.output, csv);
  return kExitOk;
}

/// evolve: run the configured protocol, write the time series CSV, print a
/// one-line summary.  Exit 2 on truncation/positivity breach.
inline int cmd_evolve(const RunConfig& cfg, std::ostream& out) {
  ProtocolResult res = run_protocol(cfg.params, cfg.schedule(), cfg.evolve,
                                    cfg.model_level(), cfg.open_system,
                                    cfg.keep_residual_stark);
  detail::write_file_atomic(cfg.output, detail::series_csv(res.series));
  out << "final_fidelity=" << detail::num(res.fidelity_to_target)
      << " leakage=" << detail::num(res.leakage)
      << " min_gap_kHz=" << detail::num(detail::min_gap(res.series))
      << " final_n_a=" << detail::num(res.series.back().n_a)
      << " valid=" << (res.series.valid ? "true" : "false") << "\n";
  if (!res.series.valid) {
    out << "numerical validity failure: " << res.series.breach_reason << " at t="
        << detail::num(res.series.breach_time_us) << " us\n";
    return kExitNumericError;
  }
  return kExitOk;
}

struct SweepSpec {
  std::string param;
  std::vector<double> values;
};

/// sweep: one protocol run per grid value of a numeric config key; rows in
/// grid order, failures flagged per row.  Runs execute concurrently
/// (DARKSQUEEZE_THREADS caps the worker count).
inline int cmd_sweep(const RunConfig& base, const SweepSpec& spec, std::ostream& out) {
  if (spec.values.empty()) throw InvalidInputError("sweep grid is empty");
  for (double v : spec.values)
    if (!std::isfinite(v)) throw InvalidInputError("sweep grid has non-finite value");

  const std::string base_text = serialize_config(base);
  // validate the key once up front so typos exit with a config error
  {
    RunConfig probe = parse_config_text(
        base_text, {spec.param + "=" + detail::num(spec.values.front())});
    (void)probe;
  }

  struct Row {
    bool ok = false;
    std::string text;
  };
  std::vector<Row> rows(spec.values.size());
  std::atomic<size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= spec.values.size()) return;
      const double v = spec.values[i];
      std::string text = spec.param + "," + detail::num(v);
      try {
        RunConfig cfg =
            parse_config_text(base_text, {spec.param + "=" + detail::num(v)});
        ProtocolResult res = run_protocol(cfg.params, cfg.schedule(), cfg.evolve,
                                          cfg.model_level(), cfg.open_system,
                                          cfg.keep_residual_stark);
        text += "," + detail::num(res.fidelity_to_target) + "," +
                detail::num(res.leakage) + "," +
                detail::num(detail::min_gap(res.series)) + "," +
                detail::num(res.series.back().n_a) + "," +
                detail::num(res.series.back().n_b) + "," +
                (res.series.valid ? "ok" : "invalid:" + res.series.breach_reason);
        rows[i] = {res.series.valid, text};
      } catch (const std::exception& e) {
        rows[i] = {false, text + ",nan,nan,nan,nan,nan,failed:" + e.what()};
      }
    }
  };
  const int n_workers = detail::worker_count(spec.values.size());
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::string csv = "param,value,final_fidelity,leakage,min_gap_kHz,final_n_a,final_n_b,status\n";
  size_t ok_count = 0;
  for (const auto& r : rows) {
    csv += r.text + "\n";
    if (r.ok) ++ok_count;
  }
  detail::write_file_atomic(base.output, csv);
  out << "sweep " << spec.param << ": " << ok_count << "/" << rows.size()
      << " points ok, results in " << base.output << "\n";
  return ok_count == 0 ? kExitConfigError : kExitOk;
}

// ---------------------------------------------------------------------------
// oracle suite

namespace detail {

struct OracleCheck {
  std::string name;
  std::string status;  // pass | fail | inconclusive
  double value = 0.0;
  double threshold = 0.0;
  std::string note;
};

inline void check_line(std::ostream& out, const OracleCheck& c) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %-32s value=%.6g threshold=%.6g %s\n",
                c.status == "pass"         ? "PASS"
                : c.status == "fail"       ? "FAIL"
                                           : "INCONCLUSIVE",
                c.name.c_str(), c.value, c.threshold, c.note.c_str());
  out << buf;
}

inline nlohmann::json to_json(const OracleCheck& c) {
  return {{"check", c.name},
          {"status", c.status},
          {"value", c.value},
          {"threshold", c.threshold},
          {"note", c.note}};
}

inline OracleCheck below(const std::string& name, double value, double threshold,
                         const std::string& note = "") {
  return {name, value <= threshold ? "pass" : "fail", value, threshold, note};
}

inline OracleCheck above(const std::string& name, double value, double threshold,
                         const std::string& note = "") {
  return {name, value >= threshold ? "pass" : "fail", value, threshold, note};
}

inline void report_comparison(std::vector<OracleCheck>& checks,
                              const ComparisonReport& rep, const std::string& prefix) {
  if (rep.inconclusive) {
    checks.push_back({prefix, "inconclusive", 0.0, 0.0, rep.note});
    return;
  }
  for (const auto& o : rep.observables)
    checks.push_back(below(prefix + "." + o.name, o.max_deviation, o.bound, rep.note));
}

}  // namespace detail

/// oracle: run the validation checks appropriate to the configured level and
/// print one PASS/FAIL/INCONCLUSIVE line per check; details go to the output
/// path as JSON lines.  Exit 2 if any check fails.
inline int cmd_oracle(const RunConfig& cfg, bool negative_controls_only,
                      std::ostream& out) {
  using detail::OracleCheck;
  std::vector<OracleCheck> checks;
  const PhysicalParams& p = cfg.params;

  if (cfg.level == Level::TwoMode || cfg.level == Level::Transformed) {
    const DerivedCouplings d = derive_couplings(p, p.omega2_rabi_max);
    if (!d.r) throw InvalidInputError("oracle needs a below-threshold configuration");
    if (!negative_controls_only) {
      checks.push_back(detail::below(
          "bogoliubov_residual", bogoliubov_check(p, cfg.cavity_dim, cfg.b_dim, cfg.branch),
          1e-6));
      auto target = target_state(p, cfg.branch, cfg.cavity_dim, cfg.b_dim);
      auto h = build_two_mode_hamiltonian(p, p.omega2_rabi_max, cfg.cavity_dim,
                                          cfg.b_dim, cfg.keep_residual_stark);
      checks.push_back(
          detail::below("dark_state_residual", dark_state_residual(h, target), 1e-6));
      // analytic vs numeric gap across a deterministic 20-point grid
      double worst = 0.0;
      for (int i = 1; i <= 5; ++i)
        for (int j = 0; j < 4; ++j) {
          const double mu = 100.0 * i, da = 1.0 + 125.0 * j;
          PhysicalParams q;
          q.delta1 = q.delta2 = 1e6;
          q.omega1_rabi = q.delta1;  // lambda1 = g1
          q.g1 = mu;                 // single atom: mu = lambda1
          q.n_atoms = 1;
          q.cavity_offset = da + q.g1 * q.g1 / q.delta1;
          auto ht = build_transformed_hamiltonian(q, 0.0, 3, 3, Branch::Atomic);
          const double analytic = gap_analytic(mu, da);
          worst = std::max(worst, std::abs(gap_numeric(ht) - analytic) / analytic);
        }
      checks.push_back(detail::below("gap_numeric_vs_analytic", worst, 1e-9));
      // kernel uniqueness (symmetry breaking)
      const bool degenerate = std::abs(d.delta_a) < 1e-9 && std::abs(d.delta_b) < 1e-9;
      auto probe = kernel_probe(h, 1e-6 * max_abs(h.mat), 2);
      if (degenerate)
        checks.push_back(detail::above("degenerate_kernel_dim", probe.kernel_dim, 2,
                                       "delta_a = delta_b = 0"));
      else
        checks.push_back({"unique_kernel_dim",
                          probe.kernel_dim == 1 ? "pass" : "fail",
                          double(probe.kernel_dim), 1.0, ""});
    }
    checks.push_back(detail::above(
        "negative_control_theta",
        bogoliubov_check(p, cfg.cavity_dim, cfg.b_dim, cfg.branch, std::nullopt,
                         (cfg.branch == Branch::Atomic ? d.theta_atomic : d.theta_field) +
                             0.3),
        1e-3, "perturbed squeezing phase must fail"));
    checks.push_back(detail::above(
        "negative_control_r",
        bogoliubov_check(p, cfg.cavity_dim, cfg.b_dim, cfg.branch, *d.r * 1.1),
        1e-3, "perturbed squeezing strength must fail"));
  } else if (cfg.level == Level::Full) {
    auto rep = compare_full_vs_eliminated(p, static_cast<int>(cfg.n_atoms_model),
                                          cfg.cavity_dim, cfg.schedule(), cfg.evolve);
    detail::report_comparison(checks, rep, "full_vs_eliminated");
    // elimination error must shrink when the detuning doubles
    RunConfig doubled = parse_config_text(
        serialize_config(cfg), {"delta1_kHz=" + detail::num(2.0 * p.delta1),
                                "delta2_kHz=" + detail::num(2.0 * p.delta2)});
    auto rep2 = compare_full_vs_eliminated(doubled.params,
                                           static_cast<int>(cfg.n_atoms_model),
                                           cfg.cavity_dim, cfg.schedule(), cfg.evolve);
    if (!rep.inconclusive && !rep2.inconclusive) {
      const double ratio = rep.observables[1].max_deviation /
                           std::max(rep2.observables[1].max_deviation, 1e-300);
      checks.push_back(detail::above("elimination_error_shrink", ratio, 3.0,
                                     "deviation ratio under doubled detuning"));
    }
  } else if (cfg.level == Level::Spin) {
    const int n = static_cast<int>(cfg.n_atoms_model);
    auto rep = compare_spin_vs_twomode(p, n, cfg.cavity_dim, cfg.b_dim,
                                       cfg.schedule(), cfg.evolve,
                                       cfg.keep_residual_stark);
    detail::report_comparison(checks, rep, "spin_vs_twomode");
    // 4N companion run with g scaled down by 2 so mu and the dropped-term
    // floors stay matched; requires the delta_a_kHz knob form
    RunConfig big = parse_config_text(
        serialize_config(cfg),
        {"n_atoms=" + std::to_string(4ll * n), "n_atoms_model=" + std::to_string(4ll * n),
         "g1_kHz=" + detail::num(0.5 * p.g1), "g2_kHz=" + detail::num(0.5 * p.g2)});
    auto rep4 = compare_spin_vs_twomode(big.params, 4 * n, cfg.cavity_dim, cfg.b_dim,
                                        cfg.schedule(), cfg.evolve,
                                        cfg.keep_residual_stark);
    detail::report_comparison(checks, rep4, "spin_vs_twomode_4N");
    if (!rep.inconclusive && !rep4.inconclusive) {
      const double ratio = rep.observables[0].max_deviation /
                           std::max(rep4.observables[0].max_deviation, 1e-300);
      OracleCheck c{"hp_error_scaling", (ratio >= 2.0 && ratio <= 8.0) ? "pass" : "fail",
                    ratio, 2.0, "deviation(N)/deviation(4N), must lie in [2, 8]"};
      checks.push_back(c);
    }
  }

  std::string json_lines;
  bool any_fail = false;
  for (const auto& c : checks) {
    detail::check_line(out, c);
    json_lines += detail::to_json(c).dump() + "\n";
    if (c.status == "fail") any_fail = true;
  }
  detail::write_file_atomic(cfg.output, json_lines);
  return any_fail ? kExitNumericError : kExitOk;
}

}  // namespace darksqueeze::cli

#endif  // DARKSQUEEZE_CLI_HPP

// Copyright 2026 The ebmvar Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ebmvar command-line experiment runner.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ebmvar/config.hpp"
#include "ebmvar/covariance_engine.hpp"
#include "ebmvar/io.hpp"
#include "ebmvar/model_core.hpp"
#include "ebmvar/sde_engine.hpp"
#include "ebmvar/spatial_model.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace ebmvar;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitStability = 4;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string out;
  bool force = false;
};

// Thrown after outputs are written when the command still has to fail.
struct ExitRequest {
  int code;
  std::string message;
};

class Outputs {
 public:
  Outputs(fs::path dir, OutputSection fmt) : dir_(std::move(dir)), fmt_(fmt) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail(ErrorKind::config, "output.directory: cannot create " + dir_.string());
  }

  const OutputSection& formats() const { return fmt_; }

  template <typename Writer>
  void file(const std::string& name, Writer&& w) {
    std::ofstream os(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorKind::config, "cannot open " + (dir_ / name).string());
    w(os);
    if (!os) fail(ErrorKind::config, "write failed for " + (dir_ / name).string());
  }

  void summary(const json& j) {
    if (fmt_.json) file("summary.json", [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    std::cout << j.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  OutputSection fmt_;
};

ExperimentConfig load(const CommonFlags& f) {
  if (f.config.empty()) fail(ErrorKind::config, "--config is required");
  std::ifstream is(f.config, std::ios::binary);
  if (!is) fail(ErrorKind::config, "cannot read " + f.config);
  auto cfg = parse_config(is);
  if (f.seed) cfg.sim.sim.seed = *f.seed;
  cfg.sim.sim.threads = f.threads;
  if (!f.out.empty()) cfg.output.directory = f.out;
  return cfg;
}

json model_json(const EbmParams& p) {
  return json{{"beta_min", p.beta_min}, {"beta_max", p.beta_max}, {"T_l", p.T_l},
              {"T_u", p.T_u},           {"r0", p.r0},             {"r1", p.r1},
              {"Q", p.Q},               {"lambda", p.lambda},     {"tau", p.tau}};
}

json sim_json(const SimConfig& c) {
  return json{{"dt", c.dt},
              {"n_steps", c.n_steps},
              {"n_paths", c.n_paths},
              {"seed", c.seed},
              {"scheme", to_string(c.scheme)},
              {"drift_form", to_string(c.drift_form)},
              {"burn_in_fraction", c.burn_in_fraction},
              {"record_stride", c.record_stride},
              {"noise", c.noise}};
}

json grid_json(const Grid2D& g) {
  return json{{"Lx", g.Lx}, {"Ly", g.Ly}, {"Nx", g.Nx}, {"Ny", g.Ny}, {"dim", g.dim()}};
}

json noise_json(const ExperimentConfig& c) {
  json j{{"kernel", c.noise.kind == NoiseKernel::Kind::identity ? "identity" : "exponential"},
         {"length", c.noise.length},
         {"variance", c.noise.variance}};
  if (c.negative_pair) j["negative_pair"] = *c.negative_pair;
  return j;
}

json certificate_json(const StabilityCertificate& c) {
  return json{{"m_spectral_abscissa", c.m_spectral_abscissa},
              {"k_spectral_abscissa", c.k_spectral_abscissa},
              {"k_abscissa_route", c.k_abscissa_route},
              {"k_hurwitz", c.k_hurwitz},
              {"k_symmetric_part_negative_definite", c.k_symmetric_part_negative_definite},
              {"minus_k_is_Z", c.minus_k_is_Z},
              {"minus_k_irreducible", c.minus_k_irreducible},
              {"c_nonnegative", c.c_nonnegative},
              {"f_nonnegative", c.f_nonnegative},
              {"coercivity_ok", c.coercivity_ok},
              {"mmatrix_route", c.mmatrix_route},
              {"inverse_nonnegative", c.inverse_nonnegative},
              {"inverse_strictly_positive", c.inverse_strictly_positive},
              {"inverse_route", c.inverse_route},
              {"inverse_min_entry", c.inverse_min_entry},
              {"inverse_max_entry", c.inverse_max_entry}};
}

EquilibriumRoot scalar_root(const ExperimentConfig& cfg) {
  const auto report = equilibrium_roots(cfg.model);
  const auto root = select_root(report, cfg.sweep.reference_T);
  if (!root) fail(ErrorKind::inadmissible_variance, "no stable variance-admissible equilibrium");
  return *root;
}

// ---------------------------------------------------------------- commands

int cmd_variance_curve(const CommonFlags& f) {
  const auto cfg = load(f);
  if (cfg.sweep.lambdas.empty()) fail(ErrorKind::config, "sweep.lambdas: missing lambda grid");
  Outputs out(cfg.output.directory, cfg.output);
  const auto pts = variance_curve(cfg.model, cfg.sweep.lambdas, cfg.sweep.reference_T);
  const auto v = classify_curve(pts);
  if (out.formats().csv) {
    out.file("variance_curve.csv", [&](std::ostream& os) { io::write_variance_curve(os, pts); });
  }
  std::size_t multi = 0;
  json failures = json::array();
  for (const auto& p : pts) {
    multi += p.n_stable > 1 ? 1 : 0;
    if (p.error) failures.push_back(json{{"lambda", p.lambda}, {"error", *p.error}});
  }
  json ice{{"pairs", v.ice_pairs}, {"increasing", v.ice_increasing}};
  ice["min_difference"] = v.ice_pairs ? json(v.min_ice_difference) : json(nullptr);
  ice["verdict"] = v.ice_pairs == 0 ? "none"
                   : v.ice_increasing == v.ice_pairs ? "strictly increasing" : "violated";
  json plateau{{"pairs", v.plateau_pairs},
               {"constant", v.plateau_constant},
               {"max_abs_difference", v.max_plateau_jump}};
  plateau["verdict"] = v.plateau_pairs == 0 ? "none"
                       : v.plateau_constant == v.plateau_pairs ? "constant" : "violated";
  json j{{"command", "variance-curve"},
         {"model", model_json(cfg.model)},
         {"root_selection",
          json{{"rule", "stable admissible root closest to the previous point's root; "
                        "coldest stable root at the first point without reference_T"},
               {"reference_T", cfg.sweep.reference_T ? json(*cfg.sweep.reference_T) : json(nullptr)},
               {"points_with_multiple_stable_roots", multi}}},
         {"n_points", pts.size()},
         {"regimes", json{{"ice-sensitive", ice}, {"plateau", plateau}}},
         {"mixed_pairs", v.mixed_pairs},
         {"failed_points", failures},
         {"verdict", v.verdict()}};
  out.summary(j);
  if (v.failed_points > 0) throw ExitRequest{kExitNumerical, "solver failed at some lambda points"};
  return kExitOk;
}

// Ordinary least squares slope of log y on log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

int cmd_wz_convergence(const CommonFlags& f) {
  const auto cfg = load(f);
  Outputs out(cfg.output.directory, cfg.output);
  const double Q = cfg.model.Q;
  const double x0 = cfg.wz.x0.value_or(Q + 1.0);
  const auto& sim = cfg.sim.sim;
  std::vector<WongZakaiResult> rungs;
  for (std::size_t r = 0; r < cfg.wz.taus.size(); ++r) {
    rungs.push_back(wong_zakai_error(cfg.wz.taus[r], cfg.wz.t, x0, Q, sim.n_paths, sim.seed + r,
                                     cfg.wz.substeps_per_tau, sim.threads));
  }
  if (out.formats().csv) {
    out.file("wz_convergence.csv", [&](std::ostream& os) {
      io::CsvWriter w(os);
      w.header({"tau", "mc", "exact", "se", "fine_steps"});
      for (const auto& r : rungs)
        w.cell(r.tau).cell(r.mc_estimate).cell(r.exact).cell(r.se).cell(r.fine_steps).end_row();
    });
  }
  std::vector<double> taus, exact, mc;
  json rows = json::array();
  bool all_within = true;
  for (const auto& r : rungs) {
    taus.push_back(r.tau);
    exact.push_back(r.exact);
    mc.push_back(r.mc_estimate);
    const double z = (r.mc_estimate - r.exact) / r.se;
    all_within = all_within && std::abs(z) <= 3.0;
    rows.push_back(json{{"tau", r.tau}, {"mc", r.mc_estimate}, {"exact", r.exact}, {"se", r.se},
                        {"z", z}, {"within_3se", std::abs(z) <= 3.0}});
  }
  json j{{"command", "wz-convergence"},
         {"model", model_json(cfg.model)},
         {"t", cfg.wz.t},
         {"x0", x0},
         {"n_paths", sim.n_paths},
         {"seed", sim.seed},
         {"substeps_per_tau", cfg.wz.substeps_per_tau},
         {"rungs", rows},
         {"all_within_3se", all_within}};
  j["exact_slope"] = taus.size() >= 2 ? json(loglog_slope(taus, exact)) : json(nullptr);
  j["mc_slope"] = taus.size() >= 2 ? json(loglog_slope(taus, mc)) : json(nullptr);
  out.summary(j);
  return kExitOk;
}

void write_bundle(Outputs& out, const std::string& stem, const PathBundle& b) {
  if (out.formats().binary) {
    out.file(stem + ".bin", [&](std::ostream& os) { io::write_bundle_binary(os, b); });
  }
  if (out.formats().csv) {
    out.file(stem + ".csv", [&](std::ostream& os) { io::write_bundle_csv(os, b); });
  }
}

void write_moments(Outputs& out, const std::string& name, const PathBundle& b,
                   const std::vector<Moments>& m) {
  if (out.formats().csv) {
    out.file(name, [&](std::ostream& os) { io::write_moments_csv(os, b, m); });
  }
}

json moments_json(const Moments& m) {
  return json{{"mean", m.mean},
              {"variance", m.variance},
              {"se_mean", m.se_mean},
              {"se_variance", m.se_variance},
              {"n", m.n}};
}

int cmd_simulate(const CommonFlags& f, const std::string& which) {
  const auto cfg = load(f);
  Outputs out(cfg.output.directory, cfg.output);
  const auto& sim = cfg.sim.sim;
  json j{{"command", "simulate"}, {"which", which}, {"model", model_json(cfg.model)},
         {"sim", sim_json(sim)}};

  if (which == "fast-slow" || which == "reduced") {
    const double T0 = cfg.sim.T0 ? *cfg.sim.T0 : scalar_root(cfg).T_star;
    j["T0"] = T0;
    if (which == "fast-slow") {
      const double x0 = cfg.sim.x0.value_or(cfg.model.Q);
      j["x0"] = x0;
      const auto [xb, tb] = simulate_fast_slow(cfg.model, x0, T0, sim);
      write_bundle(out, "paths_X", xb);
      write_bundle(out, "paths_T", tb);
      write_moments(out, "moments_X.csv", xb, mc_moments(xb));
      write_moments(out, "moments_T.csv", tb, mc_moments(tb));
      j["pooled_X"] = moments_json(mc_moments_pooled(xb, sim.burn_in_fraction));
      j["pooled_T"] = moments_json(mc_moments_pooled(tb, sim.burn_in_fraction));
    } else {
      const auto tb = simulate_reduced_sde(cfg.model, T0, sim);
      write_bundle(out, "paths_T", tb);
      write_moments(out, "moments_T.csv", tb, mc_moments(tb));
      j["pooled_T"] = moments_json(mc_moments_pooled(tb, sim.burn_in_fraction));
    }
  } else if (which == "anomaly-0d") {
    const auto root = scalar_root(cfg);
    const auto yb = simulate_linear_anomaly(root.b, root.sigma0, root.sigma1, cfg.model.tau,
                                            cfg.sim.y0, sim);
    write_bundle(out, "paths_Y", yb);
    write_moments(out, "moments_Y.csv", yb, mc_moments(yb));
    const auto pooled = mc_moments_pooled(yb, sim.burn_in_fraction);
    const double var = stationary_variance(root.b, root.sigma0, root.sigma1, cfg.model.tau);
    j["equilibrium"] = json{{"T_star", root.T_star}, {"branch", to_string(root.branch)},
                            {"b", root.b},           {"sigma0", root.sigma0},
                            {"sigma1", root.sigma1}};
    j["pooled_Y"] = moments_json(pooled);
    j["stationary_variance"] = var;
    j["z_variance"] = (pooled.variance - var) / pooled.se_variance;
  } else if (which == "anomaly-field") {
    const auto setup = cfg.spatial_setup();
    const auto noise = setup.noise();
    ProfileOptions popt;
    if (cfg.initial_T) popt.initial = Eigen::VectorXd::Constant(cfg.grid.dim(), *cfg.initial_T);
    const auto sol = solve_spatial(setup, cfg.model.lambda, noise, popt);
    const auto yb = simulate_anomaly_field(sol.ops, sim);
    write_bundle(out, "paths_Y", yb);
    write_moments(out, "moments_trace.csv", yb, trace_moments(yb));
    const auto tr = pooled_trace(yb, sim.burn_in_fraction);
    j["grid"] = grid_json(cfg.grid);
    j["noise"] = noise_json(cfg);
    j["mc_trace"] = json{{"mean", tr.mean}, {"se", tr.se}, {"n_paths", tr.n_paths},
                         {"samples_per_path", tr.per_path}};
    const auto vs = assemble_vectorised(sol.ops);
    if (check_hurwitz(vs).hurwitz) {
      const double trace = stationary_covariance(vs, {true, cfg.model.lambda}).spatial_variance;
      j["stationary_trace"] = trace;
      j["z_trace"] = (tr.mean - trace) / tr.se;
    } else {
      j["stationary_trace"] = nullptr;
    }
  } else {
    fail(ErrorKind::config, "--which: expected fast-slow, reduced, anomaly-0d or anomaly-field");
  }
  out.summary(j);
  return kExitOk;
}

int cmd_spatial_stationary(const CommonFlags& f) {
  const auto cfg = load(f);
  Outputs out(cfg.output.directory, cfg.output);
  const auto setup = cfg.spatial_setup();
  const auto noise = setup.noise();
  ProfileOptions popt;
  if (cfg.initial_T) popt.initial = Eigen::VectorXd::Constant(cfg.grid.dim(), *cfg.initial_T);
  const auto sol = solve_spatial(setup, cfg.model.lambda, noise, popt);
  const auto vs = assemble_vectorised(sol.ops);
  const auto cert = certify(sol.ops, vs);

  if (out.formats().csv) {
    out.file("T_star.csv",
             [&](std::ostream& os) { io::write_field_csv(os, cfg.grid, sol.profile.T.values); });
  }
  if (out.formats().matrices) {
    out.file("M.mtx", [&](std::ostream& os) { io::write_matrix_market(os, sol.ops.M); });
    out.file("K.mtx", [&](std::ostream& os) { io::write_matrix_market(os, vs.K); });
  }
  json j{{"command", "spatial-stationary"},
         {"model", model_json(cfg.model)},
         {"grid", grid_json(cfg.grid)},
         {"noise", noise_json(cfg)},
         {"newton_iterations", sol.profile.iterations},
         {"newton_residual", sol.profile.residual},
         {"T_min", sol.profile.T.values.minCoeff()},
         {"T_max", sol.profile.T.values.maxCoeff()},
         {"noise_jitter_rounds", noise.jitter_rounds},
         {"certificate", certificate_json(cert)},
         {"forced", false}};
  if (!cert.k_hurwitz && !f.force) {
    j["trace"] = nullptr;
    j["refused"] = "K is not Hurwitz; rerun with --force to report the formal solve";
    out.summary(j);
    throw ExitRequest{kExitStability, "K is not Hurwitz"};
  }
  j["forced"] = !cert.k_hurwitz;
  const auto cs = stationary_covariance(vs, {false, cfg.model.lambda});
  if (out.formats().matrices) {
    out.file("gamma.mtx", [&](std::ostream& os) { io::write_matrix_market(os, cs.gamma); });
  }
  if (out.formats().csv) {
    out.file("variance_field.csv", [&](std::ostream& os) {
      io::write_field_csv(os, cfg.grid, cs.gamma.diagonal());
    });
  }
  j["trace"] = cs.spatial_variance;
  j["gamma_is_psd"] = cs.is_psd;
  j["gamma_min_eigenvalue"] = cs.min_eigenvalue;
  j["gamma_symmetry_defect"] = cs.symmetry_defect;
  out.summary(j);
  return kExitOk;
}

int cmd_monotonicity(const CommonFlags& f) {
  const auto cfg = load(f);
  if (cfg.sweep.lambdas.empty()) fail(ErrorKind::config, "sweep.lambdas: missing lambda grid");
  Outputs out(cfg.output.directory, cfg.output);
  SweepOptions opt;
  opt.threads = cfg.sim.sim.threads;
  opt.h = cfg.sweep.h;
  opt.keep_matrices = out.formats().matrices;
  const auto report = monotonicity_sweep(cfg.spatial_setup(), cfg.sweep.lambdas, opt);

  if (out.formats().csv) {
    out.file("sweep.csv", [&](std::ostream& os) {
      io::CsvWriter w(os);
      w.header({"lambda", "trace", "min_dgamma_entry", "verdict", "h", "d_trace",
                "max_abs_dgamma_entry", "T_min", "T_max", "u_min", "sensitivity_rel_error",
                "min_df", "in_band", "coercive", "c_nonnegative", "k_hurwitz"});
      for (const auto& p : report.points) {
        w.cell(p.lambda).cell(p.trace).cell(p.min_dgamma_entry).cell(to_string(p.verdict))
            .cell(p.h).cell(p.d_trace).cell(p.max_abs_dgamma_entry).cell(p.T_min).cell(p.T_max)
            .cell(p.u_min).cell(p.sensitivity_rel_error).cell(p.min_df)
            .cell(p.in_band ? "true" : "false").cell(p.coercive ? "true" : "false")
            .cell(p.c_nonnegative ? "true" : "false").cell(p.k_hurwitz ? "true" : "false")
            .end_row();
      }
    });
  }
  if (out.formats().matrices) {
    for (std::size_t i = 0; i < report.points.size(); ++i) {
      const auto& p = report.points[i];
      if (p.gamma.size() == 0) continue;
      out.file("gamma_" + std::to_string(i) + ".mtx",
               [&](std::ostream& os) { io::write_matrix_market(os, p.gamma); });
      out.file("dgamma_" + std::to_string(i) + ".mtx",
               [&](std::ostream& os) { io::write_matrix_market(os, p.dgamma); });
    }
  }
  json pts = json::array();
  std::size_t errors = 0;
  for (const auto& p : report.points) {
    json e{{"lambda", p.lambda}, {"verdict", to_string(p.verdict)}, {"trace", p.trace},
           {"min_dgamma_entry", p.min_dgamma_entry}, {"notes", p.notes}};
    if (p.certificate) e["certificate"] = certificate_json(*p.certificate);
    if (p.error) {
      e["error"] = *p.error;
      ++errors;
    }
    pts.push_back(e);
  }
  json counts;
  for (auto v : {SweepVerdict::entrywise_positive, SweepVerdict::not_positive,
                 SweepVerdict::non_applicable, SweepVerdict::hypothesis_violation,
                 SweepVerdict::error})
    counts[to_string(v)] = report.count(v);
  json j{{"command", "monotonicity"},
         {"model", model_json(cfg.model)},
         {"grid", grid_json(cfg.grid)},
         {"noise", noise_json(cfg)},
         {"h_rule", cfg.sweep.h > 0.0 ? "fixed" : "1e-4 * max(1, |lambda|)"},
         {"verdict_counts", counts},
         {"trace_strictly_increasing", report.trace_strictly_increasing()},
         {"verdict", report.verdict()},
         {"points", pts}};
  out.summary(j);
  if (errors > 0) throw ExitRequest{kExitNumerical, "solver failed at some lambda points"};
  return kExitOk;
}

struct CounterexampleFlags {
  double s = 0.5;
  double c = 0.8;
  double lambda_min = 0.0;
  double lambda_max = 1.0;
  std::size_t n_lambda = 101;
};

int cmd_counterexample(const CommonFlags& f, const CounterexampleFlags& x) {
  OutputSection fmt;
  std::string dir = "out";
  if (!f.config.empty()) {
    const auto cfg = load(f);
    fmt = cfg.output;
    dir = cfg.output.directory;
  }
  if (!f.out.empty()) dir = f.out;
  if (x.n_lambda < 2) fail(ErrorKind::config, "--n-lambda must be >= 2");
  if (!(x.lambda_max > x.lambda_min)) fail(ErrorKind::config, "--lambda-max must exceed --lambda-min");
  check_counterexample_params(x.s, x.c, x.lambda_min);
  Outputs out(dir, fmt);
  std::vector<CounterexampleResult> rows;
  std::vector<double> lams;
  double max_gap = 0.0;
  bool derivative_nonnegative = true;
  for (std::size_t i = 0; i < x.n_lambda; ++i) {
    const double lam = x.lambda_min + (x.lambda_max - x.lambda_min) * static_cast<double>(i) /
                                          static_cast<double>(x.n_lambda - 1);
    lams.push_back(lam);
    rows.push_back(counterexample_trace(x.s, x.c, lam));
    max_gap = std::max(max_gap, std::abs(rows.back().trace - rows.back().numeric_trace));
    derivative_nonnegative = derivative_nonnegative && rows.back().d_trace >= 0.0;
  }
  if (out.formats().csv) {
    out.file("counterexample.csv", [&](std::ostream& os) {
      io::CsvWriter w(os);
      w.header({"lambda", "trace", "derivative", "numeric_trace"});
      for (std::size_t i = 0; i < rows.size(); ++i)
        w.cell(lams[i]).cell(rows[i].trace).cell(rows[i].d_trace).cell(rows[i].numeric_trace)
            .end_row();
    });
  }
  const double root = counterexample_sign_change(x.s, x.c);
  json j{{"command", "counterexample"},
         {"s", x.s},
         {"c", x.c},
         {"lambda_min", x.lambda_min},
         {"lambda_max", x.lambda_max},
         {"n_lambda", x.n_lambda},
         {"max_abs_trace_gap", max_gap},
         {"derivative_nonnegative", derivative_nonnegative},
         {"sign_change_lambda", root},
         {"cs", x.c * x.s},
         {"sign_change_error", std::abs(root - x.c * x.s)}};
  out.summary(j);
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (error_class(e.kind())) {
    case ErrorClass::config:
    case ErrorClass::argument: return kExitConfig;
    case ErrorClass::stability: return kExitStability;
    case ErrorClass::numerical: return kExitNumerical;
  }
  return kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ebmvar: stochastic energy balance model variance experiments"};
  app.require_subcommand(1);
  CommonFlags flags;
  auto common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", flags.config, "experiment config file");
    if (config_required) opt->required();
    sub->add_option("--seed", flags.seed, "RNG seed, overrides [sim] seed");
    sub->add_option("--threads", flags.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", flags.out, "output directory, overrides [output] directory");
    sub->add_flag("--force", flags.force, "report results despite a stability refusal");
  };

  auto* vc = app.add_subcommand("variance-curve", "0-D stationary variance along a lambda grid");
  common(vc, true);
  auto* wz = app.add_subcommand("wz-convergence", "Wong-Zakai error over a tau ladder");
  common(wz, true);
  auto* sim = app.add_subcommand("simulate", "path simulation and moments");
  common(sim, true);
  std::string which;
  sim->add_option("--which", which, "fast-slow | reduced | anomaly-0d | anomaly-field")
      ->required()
      ->check(CLI::IsMember({"fast-slow", "reduced", "anomaly-0d", "anomaly-field"}));
  auto* ss = app.add_subcommand("spatial-stationary", "certified stationary covariance");
  common(ss, true);
  auto* mono = app.add_subcommand("monotonicity", "lambda sweep of the stationary covariance");
  common(mono, true);
  auto* cx = app.add_subcommand("counterexample", "two-node anticorrelated-noise example");
  common(cx, false);
  CounterexampleFlags cxf;
  cx->add_option("--s", cxf.s, "coupling in (0, 1)");
  cx->add_option("--c", cxf.c, "anticorrelation in [0, 1)");
  cx->add_option("--lambda-min", cxf.lambda_min);
  cx->add_option("--lambda-max", cxf.lambda_max);
  cx->add_option("--n-lambda", cxf.n_lambda);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*vc) return cmd_variance_curve(flags);
    if (*wz) return cmd_wz_convergence(flags);
    if (*sim) return cmd_simulate(flags, which);
    if (*ss) return cmd_spatial_stationary(flags);
    if (*mono) return cmd_monotonicity(flags);
    if (*cx) return cmd_counterexample(flags, cxf);
  } catch (const ExitRequest& r) {
    std::cerr << "ebmvar: " << r.message << '\n';
    return r.code;
  } catch (const Error& e) {
    std::cerr << "ebmvar: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "ebmvar: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}

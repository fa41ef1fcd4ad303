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

#ifndef EBMVAR_CONFIG_HPP
#define EBMVAR_CONFIG_HPP

// INI-style experiment configuration. Every key is checked against a fixed
// schema; unknown sections or keys are rejected with their field path.

#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/algorithm/string/split.hpp>
#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ebmvar/covariance_engine.hpp"
#include "ebmvar/errors.hpp"
#include "ebmvar/model_core.hpp"
#include "ebmvar/sde_engine.hpp"
#include "ebmvar/spatial_model.hpp"

namespace ebmvar {

struct SimSection {
  SimConfig sim;
  std::optional<double> x0;      // fast variable start, default Q
  std::optional<double> T0;      // slow start, default the selected equilibrium
  double y0 = 0.0;               // anomaly start
};

struct SweepSection {
  std::vector<double> lambdas;
  double h = 0.0;  // <= 0: automatic
  std::optional<double> reference_T;
};

struct WzSection {
  std::vector<double> taus{0.2, 0.1, 0.05, 0.025};
  double t = 2.0;
  std::optional<double> x0;  // default Q + 1
  std::size_t substeps_per_tau = 200;
};

struct OutputSection {
  std::string directory = "out";
  bool csv = true;
  bool json = true;
  bool binary = true;
  bool matrices = true;
};

struct ExperimentConfig {
  EbmParams model;
  SimSection sim;
  Grid2D grid;
  std::optional<double> initial_T;
  NoiseKernel noise;
  std::optional<double> negative_pair;
  BoundaryData boundary;
  SweepSection sweep;
  WzSection wz;
  OutputSection output;
  std::set<std::string> sections;

  bool has(const std::string& s) const { return sections.count(s) > 0; }

  SpatialSetup spatial_setup() const {
    SpatialSetup s;
    s.grid = grid;
    s.theta = boundary;
    s.params = model;
    s.kernel = noise;
    s.negative_pair = negative_pair;
    return s;
  }
};

namespace config_detail {

using boost::property_tree::ptree;

[[noreturn]] inline void bad(const std::string& path, const std::string& msg) {
  fail(ErrorKind::config, path + ": " + msg);
}

inline double to_double(const std::string& path, std::string s) {
  boost::algorithm::trim(s);
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) bad(path, "expected a number, got '" + s + "'");
  return v;
}

inline std::uint64_t to_u64(const std::string& path, std::string s) {
  boost::algorithm::trim(s);
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) {
    bad(path, "expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

inline bool to_bool(const std::string& path, std::string s) {
  boost::algorithm::trim(s);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  bad(path, "expected true or false, got '" + s + "'");
}

inline std::vector<std::string> to_list(std::string s) {
  std::vector<std::string> parts;
  boost::algorithm::trim(s);
  if (s.empty()) return parts;
  boost::algorithm::split(parts, s, [](char c) { return c == ','; });
  for (auto& p : parts) boost::algorithm::trim(p);
  return parts;
}

inline std::vector<double> to_doubles(const std::string& path, const std::string& s) {
  std::vector<double> out;
  for (const auto& p : to_list(s)) out.push_back(to_double(path, p));
  if (out.empty()) bad(path, "expected a comma-separated list of numbers");
  return out;
}

// Consumes keys from one section and reports leftovers.
class Section {
 public:
  Section(std::string name, const ptree* tree) : name_(std::move(name)), tree_(tree) {
    if (tree_) {
      for (const auto& [k, v] : *tree_) {
        if (!v.empty()) bad(path(k), "nested keys are not allowed");
        keys_.insert(k);
      }
    }
  }

  bool present() const { return tree_ != nullptr; }
  std::string path(const std::string& key) const { return name_ + "." + key; }

  std::optional<std::string> raw(const std::string& key) {
    if (!tree_) return std::nullopt;
    auto it = tree_->find(key);
    if (it == tree_->not_found()) return std::nullopt;
    keys_.erase(key);
    return it->second.data();
  }

  std::string required(const std::string& key) {
    auto v = raw(key);
    if (!v) bad(path(key), "missing required key");
    return *v;
  }

  void number(const std::string& key, double& out) {
    if (auto v = raw(key)) out = to_double(path(key), *v);
  }
  void count(const std::string& key, std::size_t& out) {
    if (auto v = raw(key)) out = static_cast<std::size_t>(to_u64(path(key), *v));
  }
  void integer(const std::string& key, int& out) {
    if (auto v = raw(key)) {
      const auto n = to_u64(path(key), *v);
      if (n > 1000000) bad(path(key), "value too large");
      out = static_cast<int>(n);
    }
  }
  void flag(const std::string& key, bool& out) {
    if (auto v = raw(key)) out = to_bool(path(key), *v);
  }
  std::optional<double> optional_number(const std::string& key) {
    if (auto v = raw(key)) return to_double(path(key), *v);
    return std::nullopt;
  }

  void finish() const {
    if (!keys_.empty()) bad(path(*keys_.begin()), "unknown key");
  }

 private:
  std::string name_;
  const ptree* tree_;
  std::set<std::string> keys_;
};

template <typename F>
void validated(const std::string& section, F&& check) {
  try {
    check();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config) throw;
    fail(ErrorKind::config, section + ": " + e.what());
  }
}

inline void parse_model(Section sec, EbmParams& p) {
  if (!sec.present()) bad("model", "missing required section");
  auto req = [&](const char* key, double& out) { out = to_double(sec.path(key), sec.required(key)); };
  req("beta_min", p.beta_min);
  req("beta_max", p.beta_max);
  req("T_l", p.T_l);
  req("T_u", p.T_u);
  req("r0", p.r0);
  req("r1", p.r1);
  req("Q", p.Q);
  req("lambda", p.lambda);
  req("tau", p.tau);
  sec.finish();
  validated("model", [&] { p.validate(); });
}

inline void parse_sim(Section sec, SimSection& s) {
  auto& c = s.sim;
  sec.number("dt", c.dt);
  sec.count("n_steps", c.n_steps);
  sec.count("n_paths", c.n_paths);
  if (auto v = sec.raw("seed")) c.seed = to_u64(sec.path("seed"), *v);
  if (auto v = sec.raw("scheme")) {
    if (*v == "euler-maruyama") c.scheme = Scheme::euler_maruyama;
    else if (*v == "milstein") c.scheme = Scheme::milstein;
    else bad(sec.path("scheme"), "expected euler-maruyama or milstein, got '" + *v + "'");
  }
  if (auto v = sec.raw("drift_form")) {
    if (*v == "ito") c.drift_form = DriftForm::ito;
    else if (*v == "stratonovich-corrected") c.drift_form = DriftForm::stratonovich_corrected;
    else bad(sec.path("drift_form"), "expected ito or stratonovich-corrected, got '" + *v + "'");
  }
  sec.number("burn_in_fraction", c.burn_in_fraction);
  sec.count("record_stride", c.record_stride);
  sec.flag("noise", c.noise);
  s.x0 = sec.optional_number("x0");
  s.T0 = sec.optional_number("T0");
  sec.number("y0", s.y0);
  sec.finish();
  validated("sim", [&] { c.validate(); });
}

inline void parse_grid(Section sec, Grid2D& g, std::optional<double>& initial_T) {
  sec.number("Lx", g.Lx);
  sec.number("Ly", g.Ly);
  sec.integer("Nx", g.Nx);
  sec.integer("Ny", g.Ny);
  initial_T = sec.optional_number("initial_T");
  sec.finish();
  validated("grid", [&] { g.validate(); });
}

inline void parse_noise(Section sec, NoiseKernel& k, std::optional<double>& negative_pair) {
  if (auto v = sec.raw("kernel")) {
    if (*v == "identity") k.kind = NoiseKernel::Kind::identity;
    else if (*v == "exponential") k.kind = NoiseKernel::Kind::exponential;
    else bad(sec.path("kernel"), "expected identity or exponential, got '" + *v + "'");
  }
  sec.number("length", k.length);
  sec.number("variance", k.variance);
  negative_pair = sec.optional_number("negative_pair");
  sec.finish();
  validated("noise", [&] { k.validate(); });
  if (negative_pair && !(*negative_pair > 0.0 && *negative_pair < 1.0)) {
    bad("noise.negative_pair", "must lie in (0, 1)");
  }
}

inline void parse_boundary(Section sec, BoundaryData& b) {
  if (auto t = sec.optional_number("theta")) b = BoundaryData::constant(*t);
  sec.number("west", b.west);
  sec.number("east", b.east);
  sec.number("south", b.south);
  sec.number("north", b.north);
  sec.finish();
  if (!b.finite()) bad("boundary", "values must be finite");
}

inline void parse_sweep(Section sec, SweepSection& s) {
  if (auto v = sec.raw("lambdas")) s.lambdas = to_doubles(sec.path("lambdas"), *v);
  const auto lo = sec.optional_number("lambda_min");
  const auto hi = sec.optional_number("lambda_max");
  std::size_t n = 0;
  sec.count("n_lambda", n);
  if (lo || hi || n) {
    if (!s.lambdas.empty()) bad("sweep.lambdas", "give either a list or lambda_min/lambda_max/n_lambda");
    if (!lo) bad("sweep.lambda_min", "missing required key");
    if (!hi) bad("sweep.lambda_max", "missing required key");
    if (n < 2) bad("sweep.n_lambda", "must be >= 2");
    if (!(*hi > *lo)) bad("sweep.lambda_max", "must exceed lambda_min");
    for (std::size_t i = 0; i < n; ++i)
      s.lambdas.push_back(*lo + (*hi - *lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  sec.number("h", s.h);
  s.reference_T = sec.optional_number("reference_T");
  sec.finish();
}

inline void parse_wz(Section sec, WzSection& w) {
  if (auto v = sec.raw("taus")) w.taus = to_doubles(sec.path("taus"), *v);
  sec.number("t", w.t);
  w.x0 = sec.optional_number("x0");
  sec.count("substeps_per_tau", w.substeps_per_tau);
  sec.finish();
  for (double t : w.taus)
    if (!(t > 0.0)) bad("wz.taus", "entries must be > 0");
  if (!(w.t > 0.0)) bad("wz.t", "must be > 0");
  if (w.substeps_per_tau < 1) bad("wz.substeps_per_tau", "must be >= 1");
}

inline void parse_output(Section sec, OutputSection& o) {
  if (auto v = sec.raw("directory")) o.directory = boost::algorithm::trim_copy(*v);
  if (auto v = sec.raw("formats")) {
    o.csv = o.json = o.binary = o.matrices = false;
    for (const auto& f : to_list(*v)) {
      if (f == "csv") o.csv = true;
      else if (f == "json") o.json = true;
      else if (f == "binary") o.binary = true;
      else if (f == "mtx") o.matrices = true;
      else bad(sec.path("formats"), "unknown format '" + f + "'");
    }
  }
  sec.finish();
}

}  // namespace config_detail

inline ExperimentConfig parse_config(std::istream& is) {
  namespace pt = boost::property_tree;
  using namespace config_detail;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorKind::config, std::string("line ") + std::to_string(e.line()) + ": " + e.message());
  }
  static const std::set<std::string> known = {"model",    "sim",   "grid", "noise", "boundary",
                                              "sweep",    "wz",    "output"};
  ExperimentConfig cfg;
  for (const auto& [name, sub] : tree) {
    if (sub.empty() && !sub.data().empty()) bad(name, "keys must belong to a section");
    if (!known.count(name)) bad(name, "unknown section");
    cfg.sections.insert(name);
  }
  auto section = [&](const std::string& name) {
    auto it = tree.find(name);
    return Section(name, it == tree.not_found() ? nullptr : &it->second);
  };
  parse_model(section("model"), cfg.model);
  parse_sim(section("sim"), cfg.sim);
  parse_grid(section("grid"), cfg.grid, cfg.initial_T);
  parse_noise(section("noise"), cfg.noise, cfg.negative_pair);
  parse_boundary(section("boundary"), cfg.boundary);
  parse_sweep(section("sweep"), cfg.sweep);
  parse_wz(section("wz"), cfg.wz);
  parse_output(section("output"), cfg.output);
  return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

}  // namespace ebmvar

#endif  // EBMVAR_CONFIG_HPP

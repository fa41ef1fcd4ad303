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

#ifndef EBMVAR_SDE_ENGINE_HPP
#define EBMVAR_SDE_ENGINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ebmvar/errors.hpp"
#include "ebmvar/model_core.hpp"
#include "ebmvar/parallel.hpp"
#include "ebmvar/rng.hpp"

namespace ebmvar {

enum class Scheme { euler_maruyama, milstein };
enum class DriftForm { ito, stratonovich_corrected };

inline const char* to_string(Scheme s) {
  return s == Scheme::milstein ? "milstein" : "euler-maruyama";
}
inline const char* to_string(DriftForm f) {
  return f == DriftForm::stratonovich_corrected ? "stratonovich-corrected" : "ito";
}

struct SimConfig {
  double dt = 1e-2;
  std::size_t n_steps = 1000;
  std::size_t n_paths = 100;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::euler_maruyama;
  DriftForm drift_form = DriftForm::ito;
  double burn_in_fraction = 0.5;
  // Keep every record_stride-th step (the final step is always kept).
  std::size_t record_stride = 1;
  // When false all Brownian increments are zero.
  bool noise = true;
  // Worker count for path-level parallelism; never affects results.
  unsigned threads = 1;

  void validate() const {
    require(dt > 0.0 && std::isfinite(dt), "sim.dt > 0");
    require(n_steps >= 1, "sim.n_steps >= 1");
    require(n_paths >= 1, "sim.n_paths >= 1");
    require(n_paths <= std::numeric_limits<std::uint32_t>::max(), "sim.n_paths < 2^32");
    require(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0, "sim.burn_in_fraction in [0, 1)");
    require(record_stride >= 1, "sim.record_stride >= 1");
  }

  double t_end() const { return dt * static_cast<double>(n_steps); }
};

// Step indices that get stored in a bundle.
inline std::vector<std::size_t> recorded_steps(const SimConfig& cfg) {
  std::vector<std::size_t> ks;
  for (std::size_t k = 0; k <= cfg.n_steps; k += cfg.record_stride) ks.push_back(k);
  if (ks.back() != cfg.n_steps) ks.push_back(cfg.n_steps);
  return ks;
}

struct PathBundle {
  std::vector<double> times;
  std::size_t n_paths = 0;
  std::size_t dim = 1;
  // Row-major [path][time][component].
  std::vector<double> values;
  SimConfig config;
  std::vector<std::pair<std::string, double>> params;

  std::size_t n_times() const { return times.size(); }

  double at(std::size_t path, std::size_t time, std::size_t comp = 0) const {
    return values[(path * n_times() + time) * dim + comp];
  }

  std::span<const double> state(std::size_t path, std::size_t time) const {
    return {values.data() + (path * n_times() + time) * dim, dim};
  }

  std::span<double> path_block(std::size_t path) {
    return {values.data() + path * n_times() * dim, n_times() * dim};
  }
};

namespace detail {

inline PathBundle make_bundle(const SimConfig& cfg, std::size_t dim) {
  PathBundle b;
  b.config = cfg;
  b.n_paths = cfg.n_paths;
  b.dim = dim;
  for (auto k : recorded_steps(cfg)) b.times.push_back(cfg.dt * static_cast<double>(k));
  b.values.assign(b.n_paths * b.times.size() * dim, 0.0);
  return b;
}

// Writes state into a path block at the matching record slot.
class Recorder {
 public:
  Recorder(const SimConfig& cfg, std::span<double> block, std::size_t dim)
      : stride_(cfg.record_stride), last_(cfg.n_steps), block_(block), dim_(dim) {}

  void operator()(std::size_t step, double x) {
    if (step % stride_ == 0 || step == last_) block_[slot_++ * dim_] = x;
  }

  template <typename Vec>
  void vector(std::size_t step, const Vec& x) {
    if (step % stride_ == 0 || step == last_) {
      for (std::size_t c = 0; c < dim_; ++c) block_[slot_ * dim_ + c] = x[c];
      ++slot_;
    }
  }

 private:
  std::size_t stride_, last_;
  std::span<double> block_;
  std::size_t dim_;
  std::size_t slot_ = 0;
};

}  // namespace detail

// Exact Ornstein-Uhlenbeck transition with rate 1/tau and diffusion
// 1/sqrt(tau); stationary law N(Q, 1/2).
inline PathBundle simulate_ou(double tau, double Q, double x0, const SimConfig& cfg) {
  cfg.validate();
  require(tau > 0.0, "tau > 0");
  auto bundle = detail::make_bundle(cfg, 1);
  bundle.params = {{"tau", tau}, {"Q", Q}, {"x0", x0}};
  const double decay = std::exp(-cfg.dt / tau);
  const double sd = cfg.noise ? std::sqrt(-0.5 * std::expm1(-2.0 * cfg.dt / tau)) : 0.0;
  parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t path) {
    const NormalStream rng(cfg.seed, path);
    detail::Recorder rec(cfg, bundle.path_block(path), 1);
    double x = x0;
    rec(0, x);
    for (std::size_t k = 0; k < cfg.n_steps; ++k) {
      const double z = sd > 0.0 ? rng.normal(k) : 0.0;
      x = Q + (x - Q) * decay + sd * z;
      rec(k + 1, x);
    }
  });
  return bundle;
}

inline void check_ebm_step(const EbmParams& p, double dt) {
  const double rate = p.r1 + std::abs(p.Q) * ice_slope(p);
  if (dt * rate > 1.0) {
    fail(ErrorKind::step_too_large,
         "dt*(r1 + |Q| s) = " + std::to_string(dt * rate) + " exceeds 1");
  }
}

// OU insolation advanced exactly, temperature by explicit Euler on the same grid.
inline std::pair<PathBundle, PathBundle> simulate_fast_slow(const EbmParams& p, double x0,
                                                            double theta0, const SimConfig& cfg) {
  cfg.validate();
  p.validate();
  require(p.tau > 0.0, "tau > 0");
  check_ebm_step(p, cfg.dt);
  auto xb = detail::make_bundle(cfg, 1);
  auto tb = detail::make_bundle(cfg, 1);
  xb.params = tb.params = {{"tau", p.tau}, {"Q", p.Q}, {"lambda", p.lambda}, {"x0", x0},
                           {"theta0", theta0}};
  const double decay = std::exp(-cfg.dt / p.tau);
  const double sd = cfg.noise ? std::sqrt(-0.5 * std::expm1(-2.0 * cfg.dt / p.tau)) : 0.0;
  parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t path) {
    const NormalStream rng(cfg.seed, path);
    detail::Recorder xrec(cfg, xb.path_block(path), 1);
    detail::Recorder trec(cfg, tb.path_block(path), 1);
    double x = x0, T = theta0;
    xrec(0, x);
    trec(0, T);
    for (std::size_t k = 0; k < cfg.n_steps; ++k) {
      const double dT = x * co_albedo(T, p) + p.lambda - emitted_radiation(T, p);
      T += cfg.dt * dT;
      const double z = sd > 0.0 ? rng.normal(k) : 0.0;
      x = p.Q + (x - p.Q) * decay + sd * z;
      xrec(k + 1, x);
      trec(k + 1, T);
    }
  });
  return {std::move(xb), std::move(tb)};
}

struct WongZakaiResult {
  double tau = 0.0;
  double t = 0.0;
  double mc_estimate = 0.0;
  double exact = 0.0;
  double se = 0.0;
  std::size_t fine_steps = 0;
};

inline double wong_zakai_exact(double tau, double t, double x0, double Q) {
  const double a = -std::expm1(-t / tau);
  const double dx = x0 - Q;
  return tau * a * a * dx * dx - 0.5 * tau * std::expm1(-2.0 * t / tau);
}

// Monte Carlo estimate of E|W^tau_t - W_t|^2, where
// W^tau_t = tau^{-1/2} * int_0^t (X_s - Q) ds. The OU state and W are
// advanced jointly and exactly on the fine grid from one increment pair per
// step; the time integral uses the trapezoid rule.
inline WongZakaiResult wong_zakai_error(double tau, double t, double x0, double Q,
                                        std::size_t n_paths, std::uint64_t seed,
                                        std::size_t substeps_per_tau = 200, unsigned threads = 1) {
  require(tau > 0.0 && t > 0.0, "tau > 0 and t > 0");
  require(n_paths >= 2, "n_paths >= 2");
  require(substeps_per_tau >= 1, "substeps_per_tau >= 1");
  const auto n = static_cast<std::size_t>(
      std::ceil(t / tau * static_cast<double>(substeps_per_tau) - 1e-9));
  const double delta = t / static_cast<double>(n);
  const double a = delta / tau;
  const double decay = std::exp(-a);
  // Var(xi) and Cov(xi, dW) for xi = tau^{-1/2} int_step e^{-(t_{k+1}-r)/tau} dW_r.
  const double var_xi = -0.5 * std::expm1(-2.0 * a);
  const double cov = -std::sqrt(tau) * std::expm1(-a);
  const double beta = cov / delta;
  const double resid_sd = std::sqrt(std::max(0.0, var_xi - cov * beta));
  const double sqrt_delta = std::sqrt(delta);
  const double inv_sqrt_tau = 1.0 / std::sqrt(tau);

  std::vector<double> sq(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t path) {
    const NormalStream rng(seed, path);
    double x = x0, w = 0.0, integral = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto [z1, z2] = rng.pair(k);
      const double dw = sqrt_delta * z1;
      const double xi = beta * dw + resid_sd * z2;
      const double x_next = Q + (x - Q) * decay + xi;
      integral += 0.5 * delta * ((x - Q) + (x_next - Q));
      w += dw;
      x = x_next;
    }
    const double diff = inv_sqrt_tau * integral - w;
    sq[path] = diff * diff;
  });
  const double mean = std::accumulate(sq.begin(), sq.end(), 0.0) / static_cast<double>(n_paths);
  double ss = 0.0;
  for (double v : sq) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n_paths - 1));
  return {tau, t, mean, wong_zakai_exact(tau, t, x0, Q), sd / std::sqrt(static_cast<double>(n_paths)), n};
}

// Reduced multiplicative-noise EBM
//   dT = (Q beta(T) + lambda - Re(T) [+ tau/2 beta beta']) dt + sqrt(tau) beta(T) dW.
inline PathBundle simulate_reduced_sde(const EbmParams& p, double T0, const SimConfig& cfg) {
  cfg.validate();
  p.validate();
  check_ebm_step(p, cfg.dt);
  auto bundle = detail::make_bundle(cfg, 1);
  bundle.params = {{"tau", p.tau}, {"Q", p.Q}, {"lambda", p.lambda}, {"T0", T0}};
  const double sqrt_tau = std::sqrt(p.tau);
  const double sqrt_dt = std::sqrt(cfg.dt);
  const bool strat = cfg.drift_form == DriftForm::stratonovich_corrected;
  const bool milstein = cfg.scheme == Scheme::milstein;
  const bool noisy = cfg.noise && p.tau > 0.0;
  parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t path) {
    const NormalStream rng(cfg.seed, path);
    detail::Recorder rec(cfg, bundle.path_block(path), 1);
    double T = T0;
    rec(0, T);
    for (std::size_t k = 0; k < cfg.n_steps; ++k) {
      const double beta = co_albedo(T, p);
      const double dbeta = co_albedo_slope(T, p);
      double drift = radiative_balance(T, p);
      if (strat) drift += 0.5 * p.tau * beta * dbeta;
      double next = T + drift * cfg.dt;
      if (noisy) {
        const double dw = sqrt_dt * rng.normal(k);
        next += sqrt_tau * beta * dw;
        if (milstein) next += 0.5 * p.tau * beta * dbeta * (dw * dw - cfg.dt);
      }
      T = next;
      rec(k + 1, T);
    }
  });
  return bundle;
}

// Linearised anomaly dY = -b Y dt + sqrt(tau) (sigma0 + sigma1 Y) dW (Ito).
inline PathBundle simulate_linear_anomaly(double b, double sigma0, double sigma1, double tau,
                                          double y0, const SimConfig& cfg) {
  cfg.validate();
  require(tau >= 0.0, "tau >= 0");
  if (cfg.dt * b > 1.0) {
    fail(ErrorKind::step_too_large, "dt*b = " + std::to_string(cfg.dt * b) + " exceeds 1");
  }
  auto bundle = detail::make_bundle(cfg, 1);
  bundle.params = {{"b", b}, {"sigma0", sigma0}, {"sigma1", sigma1}, {"tau", tau}, {"y0", y0}};
  const double sqrt_tau = std::sqrt(tau);
  const double sqrt_dt = std::sqrt(cfg.dt);
  const bool milstein = cfg.scheme == Scheme::milstein;
  const bool noisy = cfg.noise && tau > 0.0;
  parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t path) {
    const NormalStream rng(cfg.seed, path);
    detail::Recorder rec(cfg, bundle.path_block(path), 1);
    double y = y0;
    rec(0, y);
    for (std::size_t k = 0; k < cfg.n_steps; ++k) {
      double next = y - b * y * cfg.dt;
      if (noisy) {
        const double dw = sqrt_dt * rng.normal(k);
        const double amp = sigma0 + sigma1 * y;
        next += sqrt_tau * amp * dw;
        if (milstein) next += 0.5 * tau * sigma1 * amp * (dw * dw - cfg.dt);
      }
      y = next;
      rec(k + 1, y);
    }
  });
  return bundle;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double se_mean = 0.0;
  double se_variance = 0.0;
  std::size_t n = 0;
};

// Unbiased mean/variance of a sample with standard errors.
inline Moments sample_moments(std::span<const double> xs) {
  if (xs.empty()) fail(ErrorKind::empty_sample, "no samples");
  Moments m;
  m.n = xs.size();
  const double n = static_cast<double>(xs.size());
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) {
    m.variance = std::numeric_limits<double>::quiet_NaN();
    m.se_mean = m.se_variance = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - m.mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m.variance = m2 / (n - 1.0);
  m4 /= n;
  m.se_mean = std::sqrt(m.variance / n);
  const double s4 = m.variance * m.variance;
  m.se_variance = std::sqrt(std::max(0.0, (m4 - s4 * (n - 3.0) / (n - 1.0)) / n));
  return m;
}

// Cross-path statistics at every recorded time.
inline std::vector<Moments> mc_moments(const PathBundle& bundle, std::size_t comp = 0) {
  if (bundle.n_paths == 0 || bundle.n_times() == 0) fail(ErrorKind::empty_sample, "empty bundle");
  std::vector<Moments> out;
  out.reserve(bundle.n_times());
  std::vector<double> col(bundle.n_paths);
  for (std::size_t t = 0; t < bundle.n_times(); ++t) {
    for (std::size_t p = 0; p < bundle.n_paths; ++p) col[p] = bundle.at(p, t, comp);
    out.push_back(sample_moments(col));
  }
  return out;
}

inline std::size_t first_retained_time(const PathBundle& bundle, double burn_in_fraction) {
  require(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0, "burn_in_fraction in [0, 1)");
  const double last = static_cast<double>(bundle.n_times() - 1);
  return static_cast<std::size_t>(std::ceil(burn_in_fraction * last - 1e-12));
}

// Statistics pooled over all paths and post-burn-in times. Paths are
// independent, so standard errors come from per-path batch statistics.
inline Moments mc_moments_pooled(const PathBundle& bundle, double burn_in_fraction,
                                 std::size_t comp = 0) {
  if (bundle.n_paths == 0 || bundle.n_times() == 0) fail(ErrorKind::empty_sample, "empty bundle");
  const std::size_t t0 = first_retained_time(bundle, burn_in_fraction);
  const std::size_t per_path = bundle.n_times() - t0;
  if (per_path == 0) fail(ErrorKind::empty_sample, "burn-in discards every sample");
  const double N = static_cast<double>(per_path * bundle.n_paths);

  std::vector<double> path_mean(bundle.n_paths, 0.0);
  double total = 0.0;
  for (std::size_t p = 0; p < bundle.n_paths; ++p) {
    double s = 0.0;
    for (std::size_t t = t0; t < bundle.n_times(); ++t) s += bundle.at(p, t, comp);
    path_mean[p] = s / static_cast<double>(per_path);
    total += s;
  }
  Moments m;
  m.n = per_path * bundle.n_paths;
  m.mean = total / N;
  std::vector<double> path_sq(bundle.n_paths, 0.0);
  double ss = 0.0;
  for (std::size_t p = 0; p < bundle.n_paths; ++p) {
    double s = 0.0;
    for (std::size_t t = t0; t < bundle.n_times(); ++t) {
      const double d = bundle.at(p, t, comp) - m.mean;
      s += d * d;
    }
    path_sq[p] = s / static_cast<double>(per_path);
    ss += s;
  }
  m.variance = N > 1.0 ? ss / (N - 1.0) : std::numeric_limits<double>::quiet_NaN();
  if (bundle.n_paths >= 2) {
    m.se_mean = sample_moments(path_mean).se_mean;
    m.se_variance = sample_moments(path_sq).se_mean;
  } else {
    m.se_mean = m.se_variance = std::numeric_limits<double>::quiet_NaN();
  }
  return m;
}

// Lag-`lag` autocorrelation pooled over paths and post-burn-in times, with a
// per-path batch standard error.
inline std::pair<double, double> pooled_autocorrelation(const PathBundle& bundle,
                                                        double burn_in_fraction, std::size_t lag) {
  const auto m = mc_moments_pooled(bundle, burn_in_fraction);
  const std::size_t t0 = first_retained_time(bundle, burn_in_fraction);
  require(bundle.n_times() > t0 + lag, "lag longer than retained window");
  std::vector<double> per_path(bundle.n_paths);
  for (std::size_t p = 0; p < bundle.n_paths; ++p) {
    double s = 0.0;
    std::size_t cnt = 0;
    for (std::size_t t = t0; t + lag < bundle.n_times(); ++t, ++cnt)
      s += (bundle.at(p, t) - m.mean) * (bundle.at(p, t + lag) - m.mean);
    per_path[p] = s / static_cast<double>(cnt) / m.variance;
  }
  const auto pm = sample_moments(per_path);
  return {pm.mean, pm.se_mean};
}

}  // namespace ebmvar

#endif  // EBMVAR_SDE_ENGINE_HPP

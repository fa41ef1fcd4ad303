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

#include <cmath>
#include <vector>

#include <boost/numeric/odeint.hpp>
#include <gtest/gtest.h>

#include "ebmvar/model_core.hpp"
#include "ebmvar/sde_engine.hpp"

using namespace ebmvar;

namespace {

SimConfig config(double dt, std::size_t steps, std::size_t paths, std::uint64_t seed = 1) {
  SimConfig c;
  c.dt = dt;
  c.n_steps = steps;
  c.n_paths = paths;
  c.seed = seed;
  return c;
}

std::vector<double> column(const PathBundle& b, std::size_t t) {
  std::vector<double> out(b.n_paths);
  for (std::size_t p = 0; p < b.n_paths; ++p) out[p] = b.at(p, t);
  return out;
}

}  // namespace

TEST(SimConfig, Validation) {
  auto c = config(0.01, 10, 2);
  EXPECT_NO_THROW(c.validate());
  c.dt = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = config(0.01, 0, 2);
  EXPECT_THROW(c.validate(), Error);
  c = config(0.01, 10, 2);
  c.burn_in_fraction = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(RecordedSteps, StrideKeepsFinalStep) {
  auto c = config(0.1, 10, 1);
  c.record_stride = 4;
  EXPECT_EQ(recorded_steps(c), (std::vector<std::size_t>{0, 4, 8, 10}));
  const auto b = simulate_ou(1.0, 0.0, 1.0, c);
  ASSERT_EQ(b.n_times(), 4u);
  EXPECT_DOUBLE_EQ(b.times.back(), 1.0);
  for (std::size_t i = 1; i < b.n_times(); ++i) EXPECT_GT(b.times[i], b.times[i - 1]);
}

TEST(SimulateOu, DeterministicRelaxation) {
  auto c = config(0.01, 300, 2);
  c.noise = false;
  const double tau = 0.2, Q = 100.0, x0 = 103.0;
  const auto b = simulate_ou(tau, Q, x0, c);
  for (std::size_t t = 0; t < b.n_times(); ++t)
    EXPECT_NEAR(b.at(1, t), Q + (x0 - Q) * std::exp(-b.times[t] / tau), 1e-11);
}

TEST(SimulateOu, StationaryVarianceHalf) {
  const double tau = 0.05;
  auto c = config(tau / 10.0, 2000, 400, 5);
  const auto b = simulate_ou(tau, 100.0, 100.0, c);
  const auto m = mc_moments_pooled(b, 0.5);
  EXPECT_NEAR(m.variance, 0.5, 3.0 * m.se_variance);
  EXPECT_NEAR(m.mean, 100.0, 3.0 * m.se_mean);
}

TEST(SimulateOu, LagOneAutocorrelation) {
  const double tau = 0.05;
  auto c = config(tau / 10.0, 2000, 400, 6);
  const auto b = simulate_ou(tau, 0.0, 0.0, c);
  const auto [rho, se] = pooled_autocorrelation(b, 0.5, 1);
  EXPECT_NEAR(rho, std::exp(-c.dt / tau), 3.0 * se);
}

TEST(SimulateOu, ReproducibleAndThreadInvariant) {
  auto c = config(0.01, 200, 9, 123);
  const auto a = simulate_ou(0.1, 1.0, 0.0, c);
  c.threads = 3;
  const auto b = simulate_ou(0.1, 1.0, 0.0, c);
  EXPECT_EQ(a.values, b.values);
  c.n_paths = 4;
  const auto d = simulate_ou(0.1, 1.0, 0.0, c);
  for (std::size_t p = 0; p < 4; ++p)
    for (std::size_t t = 0; t < d.n_times(); ++t) EXPECT_EQ(d.at(p, t), a.at(p, t));
}

TEST(FastSlow, NoNoiseConvergesToStableRoot) {
  EbmParams p;
  p.tau = 0.05;
  auto c = config(p.tau / 10.0, 6000, 1);
  c.noise = false;
  const auto [xb, tb] = simulate_fast_slow(p, p.Q, 290.0, c);
  const auto root = select_root(equilibrium_roots(p));
  ASSERT_TRUE(root);
  EXPECT_NEAR(tb.at(0, tb.n_times() - 1), root->T_star, 1e-9);
  EXPECT_DOUBLE_EQ(xb.at(0, xb.n_times() - 1), p.Q);
}

TEST(FastSlow, StepGuard) {
  EbmParams p;
  auto c = config(1.0, 10, 1);
  try {
    simulate_fast_slow(p, p.Q, 280.0, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::step_too_large);
  }
}

TEST(FastSlow, EnsembleMeanNearEquilibriumAndBounded) {
  EbmParams p;
  p.tau = 0.01;
  auto c = config(p.tau / 10.0, 8000, 200, 17);
  c.record_stride = 100;
  const auto root = select_root(equilibrium_roots(p));
  const auto [xb, tb] = simulate_fast_slow(p, p.Q, root->T_star, c);
  for (double v : tb.values) {
    EXPECT_GT(v, 150.0);
    EXPECT_LT(v, 400.0);
  }
  const auto m = sample_moments(column(tb, tb.n_times() - 1));
  EXPECT_NEAR(m.mean, root->T_star, 3.0 * m.se_mean);
}

TEST(WongZakai, ExactValueCases) {
  const double t = 2.0, Q = 5.0;
  for (double tau : {0.2, 0.1, 0.05}) {
    EXPECT_NEAR(wong_zakai_exact(tau, t, Q, Q), 0.5 * tau * (1.0 - std::exp(-2.0 * t / tau)), 1e-15);
    const double e = 1.0 - std::exp(-t / tau);
    EXPECT_NEAR(wong_zakai_exact(tau, t, Q + 1.5, Q),
                tau * e * e * 2.25 + 0.5 * tau * (1.0 - std::exp(-2.0 * t / tau)), 1e-14);
  }
  for (double tau : {0.1, 0.05, 0.02}) {
    EXPECT_NEAR(wong_zakai_exact(tau / 2, 10.0, 1.0, 0.0) / wong_zakai_exact(tau, 10.0, 1.0, 0.0),
                0.5, 1e-3);
  }
}

TEST(WongZakai, MonteCarloWithinThreeSe) {
  const auto r = wong_zakai_error(0.1, 1.0, 1.0, 0.0, 10000, 99);
  EXPECT_NEAR(r.mc_estimate, r.exact, 3.0 * r.se);
  EXPECT_EQ(r.fine_steps, 2000u);
}

TEST(WongZakai, ThreadInvariant) {
  const auto a = wong_zakai_error(0.2, 0.5, 1.0, 0.0, 50, 3, 50, 1);
  const auto b = wong_zakai_error(0.2, 0.5, 1.0, 0.0, 50, 3, 50, 4);
  EXPECT_EQ(a.mc_estimate, b.mc_estimate);
}

TEST(ReducedSde, ZeroTauMatchesReferenceIntegrator) {
  EbmParams p;
  p.tau = 0.0;
  const double T0 = 285.0;
  auto c = config(1e-3, 10000, 1);
  const auto b = simulate_reduced_sde(p, T0, c);
  // Explicit Euler recurrence, coded independently.
  double T = T0;
  for (std::size_t k = 0; k < c.n_steps; ++k) {
    const double beta = p.T_l < T && T < p.T_u
                            ? p.beta_min + (p.beta_max - p.beta_min) * (T - p.T_l) / (p.T_u - p.T_l)
                            : (T <= p.T_l ? p.beta_min : p.beta_max);
    T += c.dt * (p.Q * beta + p.lambda - p.r0 - p.r1 * T);
  }
  const double sim = b.at(0, b.n_times() - 1);
  EXPECT_NEAR(sim, T, 1e-8 * T);
  using State = std::vector<double>;
  State x{T0};
  auto rhs = [&](const State& s, State& ds, double) { ds[0] = radiative_balance(s[0], p); };
  boost::numeric::odeint::integrate_adaptive(
      boost::numeric::odeint::make_controlled<boost::numeric::odeint::runge_kutta_dopri5<State>>(
          1e-13, 1e-13),
      rhs, x, 0.0, 10.0, 1e-3);
  EXPECT_NEAR(sim / x[0], 1.0, 1e-8);
}

TEST(ReducedSde, WarmPlateauVariance) {
  EbmParams p;
  p.tau = 0.05;
  p.lambda = 230.0;
  const auto root = select_root(equilibrium_roots(p));
  ASSERT_EQ(root->branch, Branch::warm_plateau);
  auto c = config(1e-3, 5000, 200, 21);
  const auto b = simulate_reduced_sde(p, root->T_star, c);
  const auto m = mc_moments_pooled(b, 0.5);
  const double exact = p.tau * p.beta_max * p.beta_max / (2.0 * p.r1);
  EXPECT_NEAR(m.variance, exact, 3.0 * m.se_variance);
}

TEST(ReducedSde, StratonovichShiftScalesWithTau) {
  EbmParams p;
  const auto root = select_root(equilibrium_roots(p));
  const double t = 2.0;
  std::vector<double> ratio;
  for (double tau : {0.02, 0.01, 0.005}) {
    p.tau = tau;
    auto c = config(1e-2, 200, 200, 8);
    const auto ito = simulate_reduced_sde(p, root->T_star, c);
    c.drift_form = DriftForm::stratonovich_corrected;
    const auto str = simulate_reduced_sde(p, root->T_star, c);
    const double mi = sample_moments(column(ito, ito.n_times() - 1)).mean;
    const double ms = sample_moments(column(str, str.n_times() - 1)).mean;
    ratio.push_back((ms - mi) / tau);
  }
  // Shift of the mean: (tau/2) beta beta' (1 - e^{-bt}) / b.
  const double c_exact = 0.5 * root->sigma0 * root->sigma1 * (1.0 - std::exp(-root->b * t)) / root->b;
  for (double r : ratio) {
    EXPECT_GT(r, 0.0);
    EXPECT_NEAR(r / c_exact, 1.0, 0.05);
  }
}

TEST(ReducedSde, WeakOrderOneInMean) {
  EbmParams p;
  p.tau = 0.02;
  const double t = 1.0, T0 = 290.0;
  std::vector<Moments> means;
  std::vector<double> det;
  for (double dt : {0.02, 0.01, 0.005}) {
    const auto steps = static_cast<std::size_t>(std::lround(t / dt));
    auto c = config(dt, steps, 2000, 31);
    const auto b = simulate_reduced_sde(p, T0, c);
    means.push_back(sample_moments(column(b, b.n_times() - 1)));
    c.noise = false;
    c.n_paths = 1;
    det.push_back(simulate_reduced_sde(p, T0, c).values.back());
  }
  // Deterministic differences halve with dt, and the ensemble follows them.
  const double d1 = det[0] - det[1], d2 = det[1] - det[2];
  EXPECT_NEAR(d2 / d1, 0.5, 0.05);
  const double cdt = std::abs(d1) / 0.01;
  const double se = std::hypot(means[1].se_mean, means[2].se_mean);
  EXPECT_LE(std::abs(means[1].mean - means[2].mean), cdt * 0.005 + 3.0 * se);
}

TEST(LinearAnomaly, MeanAndTransientVariance) {
  const double b = 1.135, s0 = 0.54, s1 = 0.00865, tau = 0.05, y0 = 0.5;
  auto c = config(2e-3, 1000, 4000, 3);
  c.record_stride = 100;
  const auto bm = simulate_linear_anomaly(b, s0, s1, tau, y0, c);
  const auto mm = mc_moments(bm);
  for (std::size_t t = 1; t < bm.n_times(); ++t)
    EXPECT_NEAR(mm[t].mean, std::exp(-b * bm.times[t]) * y0, 3.0 * mm[t].se_mean);
  const auto bv = simulate_linear_anomaly(b, s0, s1, tau, 0.0, c);
  const auto mv = mc_moments(bv);
  for (std::size_t t = 1; t < bv.n_times(); ++t) {
    EXPECT_NEAR(mv[t].variance, transient_variance(b, s0, s1, tau, bv.times[t]),
                3.0 * mv[t].se_variance);
  }
}

TEST(LinearAnomaly, DeterministicDecay) {
  auto c = config(1e-6, 1000000, 1);
  const auto b = simulate_linear_anomaly(1.0, 0.0, 0.0, 0.05, 2.0, c);
  EXPECT_NEAR(b.values.back(), 2.0 * std::exp(-1.0), 1e-6);
}

TEST(LinearAnomaly, EulerAndMilsteinAgree) {
  const double b = 1.0, s0 = 0.5, s1 = 0.3, tau = 0.1;
  auto c = config(1e-2, 1500, 400, 4);
  const auto em = mc_moments_pooled(simulate_linear_anomaly(b, s0, s1, tau, 0.0, c), 0.5);
  c.scheme = Scheme::milstein;
  const auto mil = mc_moments_pooled(simulate_linear_anomaly(b, s0, s1, tau, 0.0, c), 0.5);
  EXPECT_NEAR(em.variance, mil.variance,
              3.0 * std::hypot(em.se_variance, mil.se_variance));
}

TEST(LinearAnomaly, StepGuard) {
  auto c = config(0.5, 10, 1);
  EXPECT_THROW(simulate_linear_anomaly(3.0, 1.0, 0.0, 0.1, 0.0, c), Error);
}

TEST(Moments, ConstantAndTwoPoint) {
  const std::vector<double> k(7, 3.25);
  const auto m = sample_moments(k);
  EXPECT_DOUBLE_EQ(m.mean, 3.25);
  EXPECT_DOUBLE_EQ(m.variance, 0.0);
  const std::vector<double> two{0.0, 2.0};
  const auto m2 = sample_moments(two);
  EXPECT_DOUBLE_EQ(m2.mean, 1.0);
  EXPECT_DOUBLE_EQ(m2.variance, 2.0);
}

TEST(Moments, EmptySample) {
  const std::vector<double> none;
  try {
    sample_moments(none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_sample);
  }
  PathBundle empty;
  EXPECT_THROW(mc_moments(empty), Error);
}

TEST(Moments, CrossPathBundle) {
  PathBundle b;
  b.times = {0.0, 1.0};
  b.n_paths = 2;
  b.values = {0.0, 1.0, 2.0, 1.0};
  const auto m = mc_moments(b);
  EXPECT_DOUBLE_EQ(m[0].mean, 1.0);
  EXPECT_DOUBLE_EQ(m[0].variance, 2.0);
  EXPECT_DOUBLE_EQ(m[1].variance, 0.0);
}

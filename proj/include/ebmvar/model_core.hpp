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

#ifndef EBMVAR_MODEL_CORE_HPP
#define EBMVAR_MODEL_CORE_HPP

// Zero-dimensional energy-balance model: piecewise-linear co-albedo, affine
// emission, equilibrium enumeration and the stationary variance of the
// linearised multiplicative-noise anomaly.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ebmvar/errors.hpp"

namespace ebmvar {

struct EbmParams {
  double beta_min = 0.38;
  double beta_max = 0.70;
  double T_l = 263.0;
  double T_u = 300.0;
  double r0 = -370.0;
  double r1 = 2.0;
  double Q = 100.0;
  double lambda = 139.0;
  double tau = 1.0 / 365.0;

  void validate() const {
    require(std::isfinite(beta_min) && std::isfinite(beta_max) && std::isfinite(T_l) &&
                std::isfinite(T_u) && std::isfinite(r0) && std::isfinite(r1) &&
                std::isfinite(Q) && std::isfinite(lambda) && std::isfinite(tau),
            "model parameters must be finite");
    require(beta_min < beta_max, "beta_min < beta_max");
    require(T_l < T_u, "T_l < T_u");
    require(r1 > 0.0, "r1 > 0");
    require(Q >= 0.0, "Q >= 0");
    require(tau >= 0.0, "tau >= 0");
  }
};

// Slope of the co-albedo inside the ice-sensitive band.
inline double ice_slope(const EbmParams& p) { return (p.beta_max - p.beta_min) / (p.T_u - p.T_l); }

inline double co_albedo(double T, const EbmParams& p) {
  if (T <= p.T_l) return p.beta_min;
  if (T >= p.T_u) return p.beta_max;
  return p.beta_min + ice_slope(p) * (T - p.T_l);
}

// At the kinks the plateau side wins, so the slope there is 0.
inline double co_albedo_slope(double T, const EbmParams& p) {
  if (T <= p.T_l || T >= p.T_u) return 0.0;
  return ice_slope(p);
}

inline double emitted_radiation(double T, const EbmParams& p) { return p.r0 + p.r1 * T; }

// Net radiative tendency Q*beta(T) + lambda - Re(T).
inline double radiative_balance(double T, const EbmParams& p) {
  return p.Q * co_albedo(T, p) + p.lambda - emitted_radiation(T, p);
}

enum class Branch { cold_plateau, ice_sensitive, warm_plateau };

inline const char* to_string(Branch b) {
  switch (b) {
    case Branch::cold_plateau: return "cold-plateau";
    case Branch::ice_sensitive: return "ice-sensitive";
    case Branch::warm_plateau: return "warm-plateau";
  }
  return "?";
}

inline Branch classify_temperature(double T, const EbmParams& p) {
  if (T <= p.T_l) return Branch::cold_plateau;
  if (T >= p.T_u) return Branch::warm_plateau;
  return Branch::ice_sensitive;
}

inline constexpr double kRootTol = 1e-10;
inline constexpr double kBranchTol = 1e-9;
inline constexpr double kLambdaStep = 1e-4;

struct EquilibriumRoot {
  double T_star = 0.0;
  Branch branch = Branch::cold_plateau;
  double b = 0.0;
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  bool stable = false;
  bool variance_admissible = false;
};

struct EquilibriumReport {
  std::vector<EquilibriumRoot> roots;

  std::size_t stable_count() const {
    return static_cast<std::size_t>(
        std::count_if(roots.begin(), roots.end(), [](const auto& r) { return r.stable; }));
  }
};

inline EquilibriumRoot linearise_at(double T, Branch branch, const EbmParams& p) {
  EquilibriumRoot r;
  r.T_star = T;
  r.branch = branch;
  r.sigma0 = co_albedo(T, p);
  r.sigma1 = branch == Branch::ice_sensitive ? ice_slope(p) : 0.0;
  r.b = p.r1 - p.Q * r.sigma1;
  r.stable = r.b > 0.0;
  r.variance_admissible = 2.0 * r.b - p.tau * r.sigma1 * r.sigma1 > 0.0;
  return r;
}

// Each affine branch of Q*beta(T) + lambda - r0 - r1*T = 0 is solved in closed
// form; a root is kept when it lies in the branch's closed interval (up to
// kBranchTol). Roots closer than kBranchTol are merged, the plateau
// classification winning at a kink.
inline EquilibriumReport equilibrium_roots(const EbmParams& p) {
  p.validate();
  const double s = ice_slope(p);
  struct Piece {
    Branch branch;
    double beta_at_Tl;  // beta(T) = beta_at_Tl + slope * (T - T_l)
    double slope;
    double lo, hi;
  };
  const std::array<Piece, 3> pieces{{
      {Branch::cold_plateau, p.beta_min, 0.0, -std::numeric_limits<double>::infinity(), p.T_l},
      {Branch::ice_sensitive, p.beta_min, s, p.T_l, p.T_u},
      {Branch::warm_plateau, p.beta_max, 0.0, p.T_u, std::numeric_limits<double>::infinity()},
  }};

  std::vector<EquilibriumRoot> found;
  for (const auto& piece : pieces) {
    const double eff_slope = p.r1 - p.Q * piece.slope;
    const double scale = std::max(p.r1, p.Q * piece.slope);
    if (std::abs(eff_slope) <= 1e-12 * scale) {
      fail(ErrorKind::degenerate_branch,
           std::string("effective slope r1 - Q*beta' vanishes on the ") + to_string(piece.branch) +
               " branch");
    }
    // (r1 - Q*slope) T = Q*(beta_at_Tl - slope*T_l) + lambda - r0
    const double rhs = p.Q * (piece.beta_at_Tl - piece.slope * p.T_l) + p.lambda - p.r0;
    const double T = rhs / eff_slope;
    if (T < piece.lo - kBranchTol || T > piece.hi + kBranchTol) continue;
    EquilibriumRoot r = linearise_at(T, piece.branch, p);
    found.push_back(r);
  }
  std::sort(found.begin(), found.end(),
            [](const auto& a, const auto& b) { return a.T_star < b.T_star; });

  EquilibriumReport report;
  for (const auto& r : found) {
    if (!report.roots.empty() && std::abs(report.roots.back().T_star - r.T_star) <= kBranchTol) {
      if (r.branch != Branch::ice_sensitive) report.roots.back() = r;
      continue;
    }
    report.roots.push_back(r);
  }
  return report;
}

// Stable, variance-admissible root closest to `reference`; with no reference
// the coldest such root.
inline std::optional<EquilibriumRoot> select_root(const EquilibriumReport& report,
                                                  std::optional<double> reference = {}) {
  std::optional<EquilibriumRoot> best;
  for (const auto& r : report.roots) {
    if (!r.stable || !r.variance_admissible) continue;
    if (!best) {
      best = r;
      continue;
    }
    if (reference && std::abs(r.T_star - *reference) < std::abs(best->T_star - *reference)) best = r;
  }
  return best;
}

inline double stationary_variance(double b, double sigma0, double sigma1, double tau) {
  const double denom = 2.0 * b - tau * sigma1 * sigma1;
  if (!(b > 0.0) || !(denom > 0.0)) {
    fail(ErrorKind::inadmissible_variance,
         "2b - tau*sigma1^2 = " + std::to_string(denom) + " (b = " + std::to_string(b) + ")");
  }
  return tau * sigma0 * sigma0 / denom;
}

// Second moment of the linear anomaly started from 0.
inline double transient_variance(double b, double sigma0, double sigma1, double tau, double t) {
  const double rate = 2.0 * b - tau * sigma1 * sigma1;
  return tau * sigma0 * sigma0 / rate * (1.0 - std::exp(-rate * t));
}

struct VariancePoint {
  double lambda = 0.0;
  double T_star = std::numeric_limits<double>::quiet_NaN();
  Branch branch = Branch::cold_plateau;
  double b = std::numeric_limits<double>::quiet_NaN();
  double sigma0 = std::numeric_limits<double>::quiet_NaN();
  double sigma1 = std::numeric_limits<double>::quiet_NaN();
  double var_inf = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_stable = 0;
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }
};

// Sweeps lambda, tracking the root nearest to the previous point's root.
inline std::vector<VariancePoint> variance_curve(EbmParams p, std::span<const double> lambda_grid,
                                                 std::optional<double> reference = {}) {
  std::vector<VariancePoint> out;
  out.reserve(lambda_grid.size());
  for (double lam : lambda_grid) {
    VariancePoint pt;
    pt.lambda = lam;
    p.lambda = lam;
    try {
      const auto report = equilibrium_roots(p);
      pt.n_stable = report.stable_count();
      const auto root = select_root(report, reference);
      if (!root) {
        fail(ErrorKind::inadmissible_variance, "no stable variance-admissible equilibrium");
      }
      pt.T_star = root->T_star;
      pt.branch = root->branch;
      pt.b = root->b;
      pt.sigma0 = root->sigma0;
      pt.sigma1 = root->sigma1;
      pt.var_inf = stationary_variance(root->b, root->sigma0, root->sigma1, p.tau);
      reference = root->T_star;
    } catch (const Error& e) {
      pt.error = e.what();
    }
    out.push_back(pt);
  }
  return out;
}

struct CurveVerdict {
  std::size_t ice_pairs = 0;
  std::size_t ice_increasing = 0;
  std::size_t plateau_pairs = 0;
  std::size_t plateau_constant = 0;
  std::size_t mixed_pairs = 0;
  std::size_t failed_points = 0;
  double max_plateau_jump = 0.0;
  double min_ice_difference = std::numeric_limits<double>::infinity();

  // "strictly increasing", "constant", "violated" or "mixed".
  std::string verdict() const {
    const bool ice_ok = ice_increasing == ice_pairs;
    const bool plateau_ok = plateau_constant == plateau_pairs;
    if (!ice_ok || !plateau_ok) return "violated";
    if (ice_pairs > 0 && plateau_pairs == 0 && mixed_pairs == 0) return "strictly increasing";
    if (plateau_pairs > 0 && ice_pairs == 0 && mixed_pairs == 0) return "constant";
    return "mixed";
  }
};

inline constexpr double kPlateauFlatTol = 1e-12;

inline CurveVerdict classify_curve(std::span<const VariancePoint> pts) {
  CurveVerdict v;
  for (const auto& p : pts) v.failed_points += p.ok() ? 0 : 1;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const auto& a = pts[i - 1];
    const auto& b = pts[i];
    if (!a.ok() || !b.ok()) continue;
    const double diff = b.var_inf - a.var_inf;
    if (a.branch == Branch::ice_sensitive && b.branch == Branch::ice_sensitive && b.lambda > a.lambda) {
      ++v.ice_pairs;
      v.min_ice_difference = std::min(v.min_ice_difference, diff);
      if (diff > 0.0) ++v.ice_increasing;
    } else if (a.branch == b.branch && a.branch != Branch::ice_sensitive) {
      ++v.plateau_pairs;
      v.max_plateau_jump = std::max(v.max_plateau_jump, std::abs(diff));
      if (std::abs(diff) <= kPlateauFlatTol) ++v.plateau_constant;
    } else {
      ++v.mixed_pairs;
    }
  }
  return v;
}

}  // namespace ebmvar

#endif  // EBMVAR_MODEL_CORE_HPP

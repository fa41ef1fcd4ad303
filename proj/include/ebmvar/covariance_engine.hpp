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

#ifndef EBMVAR_COVARIANCE_ENGINE_HPP
#define EBMVAR_COVARIANCE_ENGINE_HPP

// Second-moment dynamics of the semi-discrete anomaly SDE: matrix ODE,
// column-stacked vectorisation, stationary solve, M-matrix certification and
// the lambda-monotonicity sweep.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "ebmvar/errors.hpp"
#include "ebmvar/model_core.hpp"
#include "ebmvar/parallel.hpp"
#include "ebmvar/spatial_model.hpp"

namespace ebmvar {

inline constexpr Eigen::Index kDenseCap = 2500;

// M G + G M^T + tau * C o (D G D + f f^T).
inline Eigen::MatrixXd covariance_rhs(const Eigen::MatrixXd& gamma, const SpatialOperators& ops) {
  const Eigen::Index d = ops.dim();
  require(gamma.rows() == d && gamma.cols() == d, "gamma shape must match the operators");
  Eigen::MatrixXd mg = ops.M * gamma;
  Eigen::MatrixXd noise = ops.d_vec.asDiagonal() * gamma * ops.d_vec.asDiagonal();
  noise.noalias() += ops.f_vec * ops.f_vec.transpose();
  return mg + mg.transpose() + ops.tau * ops.C.cwiseProduct(noise);
}

struct CovarianceState {
  Eigen::MatrixXd gamma;
  double spatial_variance = 0.0;
  bool is_psd = false;
  double min_eigenvalue = 0.0;
  double symmetry_defect = 0.0;
  double lambda = std::numeric_limits<double>::quiet_NaN();
};

inline CovarianceState make_covariance_state(Eigen::MatrixXd gamma, double lambda) {
  CovarianceState cs;
  const double scale = gamma.cwiseAbs().maxCoeff();
  cs.symmetry_defect = scale > 0.0 ? (gamma - gamma.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
  gamma = 0.5 * (gamma + gamma.transpose());
  const Eigen::VectorXd ev =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gamma, Eigen::EigenvaluesOnly).eigenvalues();
  cs.min_eigenvalue = ev[0];
  const double norm2 = std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
  cs.is_psd = ev[0] >= -1e-8 * norm2;
  cs.spatial_variance = gamma.trace();
  cs.gamma = std::move(gamma);
  cs.lambda = lambda;
  return cs;
}

// Classical RK4 from Gamma(0) = 0, symmetrised after every step.
inline CovarianceState integrate_covariance(const SpatialOperators& ops, double t_end, double dt,
                                            double lambda = std::numeric_limits<double>::quiet_NaN()) {
  require(t_end >= 0.0 && dt > 0.0, "t_end >= 0 and dt > 0");
  const Eigen::Index d = ops.dim();
  const auto n = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-12));
  const double h = n > 0 ? t_end / static_cast<double>(n) : 0.0;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::MatrixXd k1 = covariance_rhs(g, ops);
    const Eigen::MatrixXd k2 = covariance_rhs(g + 0.5 * h * k1, ops);
    const Eigen::MatrixXd k3 = covariance_rhs(g + 0.5 * h * k2, ops);
    const Eigen::MatrixXd k4 = covariance_rhs(g + h * k3, ops);
    g += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    g = 0.5 * (g + g.transpose()).eval();
    if (!g.allFinite()) {
      fail(ErrorKind::non_finite_state, "covariance overflow at step " + std::to_string(k + 1));
    }
  }
  return make_covariance_state(std::move(g), lambda);
}

// Column-stacking: vec(G)[i + j d] = G(i, j).
inline Eigen::Index vec_index(Eigen::Index i, Eigen::Index j, Eigen::Index d) { return i + j * d; }

inline Eigen::VectorXd vectorise(const Eigen::MatrixXd& a) {
  return Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
}

inline Eigen::MatrixXd unvectorise(const Eigen::VectorXd& q, Eigen::Index d) {
  return Eigen::Map<const Eigen::MatrixXd>(q.data(), d, d);
}

struct VectorisedSystem {
  SparseMatrix K;
  Eigen::VectorXd F;
  Eigen::Index d = 0;
  bool symmetric = false;
  // tau * C_ij d_i d_j, the diagonal noise block of K.
  Eigen::VectorXd noise_diagonal;
};

// K = I (x) M + M (x) I + tau diag(vec C)(D (x) D),  F = tau diag(vec C) vec(f f^T).
inline VectorisedSystem assemble_vectorised(const SpatialOperators& ops) {
  const Eigen::Index d = ops.dim();
  require(ops.C.rows() == d && ops.d_vec.size() == d && ops.f_vec.size() == d,
          "operator shapes must agree");
  VectorisedSystem vs;
  vs.d = d;
  const SparseMatrix id = sparse_identity(d);
  vs.K = kron(id, ops.M) + kron(ops.M, id);
  vs.noise_diagonal.resize(d * d);
  vs.F.resize(d * d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const Eigen::Index k = vec_index(i, j, d);
      vs.noise_diagonal[k] = ops.tau * ops.C(i, j) * ops.d_vec[i] * ops.d_vec[j];
      vs.F[k] = ops.tau * ops.C(i, j) * ops.f_vec[i] * ops.f_vec[j];
    }
  }
  for (Eigen::Index k = 0; k < d * d; ++k) vs.K.coeffRef(k, k) += vs.noise_diagonal[k];
  vs.K.prune(0.0);
  vs.K.makeCompressed();
  vs.symmetric = is_symmetric(vs.K);
  return vs;
}

enum class HurwitzRoute { symmetric_cholesky, symmetric_part_cholesky, dense_eigen, unconfirmed };

inline const char* to_string(HurwitzRoute r) {
  switch (r) {
    case HurwitzRoute::symmetric_cholesky: return "symmetric-cholesky";
    case HurwitzRoute::symmetric_part_cholesky: return "symmetric-part-cholesky";
    case HurwitzRoute::dense_eigen: return "dense-eigen";
    case HurwitzRoute::unconfirmed: return "unconfirmed";
  }
  return "?";
}

inline bool negative_definite(const SparseMatrix& sym) {
  Eigen::SimplicialLLT<SparseMatrix> llt;
  llt.compute(-sym);
  return llt.info() == Eigen::Success;
}

struct HurwitzCheck {
  bool hurwitz = false;
  HurwitzRoute route = HurwitzRoute::unconfirmed;
};

// Cheap Hurwitz test. Symmetric K: Cholesky of -K is exact. Otherwise a
// negative definite symmetric part suffices; failing that, a dense eigensolve
// below the dense cap.
inline HurwitzCheck check_hurwitz(const VectorisedSystem& vs) {
  if (vs.symmetric) return {negative_definite(vs.K), HurwitzRoute::symmetric_cholesky};
  const SparseMatrix kt = vs.K.transpose();
  const SparseMatrix sym = 0.5 * (vs.K + kt);
  if (negative_definite(sym)) return {true, HurwitzRoute::symmetric_part_cholesky};
  if (vs.K.rows() <= kDenseCap) {
    const auto re = eigenvalue_real_parts(Eigen::MatrixXd(vs.K), false);
    return {re[re.size() - 1] < 0.0, HurwitzRoute::dense_eigen};
  }
  return {false, HurwitzRoute::unconfirmed};
}

struct StationaryOptions {
  bool require_hurwitz = true;
  double lambda = std::numeric_limits<double>::quiet_NaN();
};

// Solves (-K) q = F and un-vectorises.
inline CovarianceState stationary_covariance(const VectorisedSystem& vs,
                                             const StationaryOptions& opt = {}) {
  if (opt.require_hurwitz) {
    const auto hc = check_hurwitz(vs);
    if (!hc.hurwitz) {
      fail(ErrorKind::unstable_k,
           std::string("K is not confirmed Hurwitz (route ") + to_string(hc.route) + ")");
    }
  }
  Eigen::SparseLU<SparseMatrix> lu;
  const SparseMatrix minus_k = -vs.K;
  lu.compute(minus_k);
  if (lu.info() != Eigen::Success) fail(ErrorKind::solve_failed, "sparse LU of -K failed");
  const Eigen::VectorXd q = lu.solve(vs.F);
  if (!q.allFinite()) fail(ErrorKind::solve_failed, "non-finite stationary solution");
  const double fnorm = vs.F.lpNorm<Eigen::Infinity>();
  const double res = (vs.K * q + vs.F).lpNorm<Eigen::Infinity>();
  if (res > 1e-9 * fnorm) {
    fail(ErrorKind::solve_failed, "residual " + std::to_string(res) + " exceeds 1e-9 |F|");
  }
  auto state = make_covariance_state(unvectorise(q, vs.d), opt.lambda);
  if (state.symmetry_defect > 1e-10) {
    fail(ErrorKind::solve_failed,
         "stationary covariance asymmetric: " + std::to_string(state.symmetry_defect));
  }
  return state;
}

// Directed graph of the off-diagonal nonzeros is strongly connected.
inline bool strongly_connected(const SparseMatrix& a) {
  const Eigen::Index n = a.rows();
  if (n <= 1) return true;
  auto reach_all = [n](const SparseMatrix& m) {
    // Column-major: column k lists entries (row, k), i.e. edges row <- k.
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::queue<Eigen::Index> todo;
    todo.push(0);
    seen[0] = 1;
    Eigen::Index count = 1;
    while (!todo.empty()) {
      const Eigen::Index k = todo.front();
      todo.pop();
      for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
        if (it.row() == k || it.value() == 0.0 || seen[it.row()]) continue;
        seen[it.row()] = 1;
        ++count;
        todo.push(it.row());
      }
    }
    return count == n;
  };
  const SparseMatrix at = a.transpose();
  return reach_all(a) && reach_all(at);
}

struct CertifyOptions {
  bool explicit_inverse = true;
  bool dense_spectrum = true;
};

struct StabilityCertificate {
  double m_spectral_abscissa = 0.0;
  double k_spectral_abscissa = 0.0;
  std::string k_abscissa_route;  // "dense-eigen" or "kronecker-weyl-bound"
  bool k_hurwitz = false;
  bool k_symmetric_part_negative_definite = false;
  bool minus_k_is_Z = false;
  bool minus_k_irreducible = false;
  bool c_nonnegative = false;
  bool f_nonnegative = false;
  bool coercivity_ok = false;
  // Z-matrix, Hurwitz and C >= 0 together.
  bool mmatrix_route = false;
  bool inverse_computed = false;
  double inverse_min_entry = std::numeric_limits<double>::quiet_NaN();
  double inverse_max_entry = std::numeric_limits<double>::quiet_NaN();
  bool inverse_nonnegative = false;
  bool inverse_strictly_positive = false;
  std::string inverse_route;  // "explicit" or "m-matrix"

  bool all_ok() const {
    return k_hurwitz && minus_k_is_Z && minus_k_irreducible && inverse_nonnegative &&
           coercivity_ok && c_nonnegative;
  }
};

inline StabilityCertificate certify(const SpatialOperators& ops, const VectorisedSystem& vs,
                                    const CertifyOptions& opt = {}) {
  StabilityCertificate c;
  const Eigen::Index n = vs.K.rows();
  c.m_spectral_abscissa = drift_spectrum(ops.M).abscissa;

  const SparseMatrix kt = vs.K.transpose();
  const SparseMatrix sym = 0.5 * (vs.K + kt);
  c.k_symmetric_part_negative_definite = negative_definite(sym);
  if (opt.dense_spectrum && n <= kDenseCap) {
    const auto re = eigenvalue_real_parts(Eigen::MatrixXd(vs.K), vs.symmetric);
    c.k_spectral_abscissa = re[re.size() - 1];
    c.k_abscissa_route = "dense-eigen";
  } else {
    // Weyl: abscissa(K) <= lambda_max(sym K) <= 2 lambda_max(sym M) + max noise diagonal.
    const SparseMatrix mt = ops.M.transpose();
    const SparseMatrix msym = 0.5 * (ops.M + mt);
    const double mmax = drift_spectrum(msym).abscissa;
    c.k_spectral_abscissa = 2.0 * mmax + vs.noise_diagonal.maxCoeff();
    c.k_abscissa_route = "kronecker-weyl-bound";
  }
  c.k_hurwitz = c.k_spectral_abscissa < 0.0;

  c.minus_k_is_Z = true;
  for (int k = 0; k < vs.K.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(vs.K, k); it; ++it)
      if (it.row() != it.col() && it.value() < 0.0) c.minus_k_is_Z = false;
  c.minus_k_irreducible = strongly_connected(vs.K);
  c.c_nonnegative = (ops.C.array() >= 0.0).all();
  c.f_nonnegative = (vs.F.array() >= 0.0).all();
  c.coercivity_ok = ops.coercive();
  c.mmatrix_route = c.minus_k_is_Z && c.k_hurwitz && c.c_nonnegative;

  if (opt.explicit_inverse && n <= kDenseCap) {
    Eigen::SparseLU<SparseMatrix> lu;
    const SparseMatrix minus_k = -vs.K;
    lu.compute(minus_k);
    if (lu.info() == Eigen::Success) {
      const Eigen::MatrixXd inv = lu.solve(Eigen::MatrixXd::Identity(n, n));
      c.inverse_computed = inv.allFinite();
      if (c.inverse_computed) {
        c.inverse_min_entry = inv.minCoeff();
        c.inverse_max_entry = inv.maxCoeff();
        const double scale = inv.cwiseAbs().maxCoeff();
        c.inverse_nonnegative = c.inverse_min_entry >= -1e-10 * scale;
        c.inverse_strictly_positive = c.inverse_min_entry > 0.0;
        c.inverse_route = "explicit";
      }
    }
  }
  if (!c.inverse_computed) {
    c.inverse_nonnegative = c.mmatrix_route;
    c.inverse_strictly_positive = c.mmatrix_route && c.minus_k_irreducible;
    c.inverse_route = "m-matrix";
  }
  return c;
}

inline double spatial_variance(const CovarianceState& cs) { return cs.gamma.trace(); }

// P(max_i |Y_i| >= theta) <= min(1, Var_sp / theta^2).
inline double markov_bound(double spatial_var, double threshold) {
  if (!(threshold > 0.0)) fail(ErrorKind::non_positive_threshold, "threshold must be > 0");
  return std::min(1.0, spatial_var / (threshold * threshold));
}

// Everything needed to rebuild the operators at any lambda.
struct SpatialSetup {
  Grid2D grid;
  Eigen::VectorXd q_field;  // empty: constant p.Q
  BoundaryData theta;
  EbmParams params;
  NoiseKernel kernel;
  // Overrides C(0,1) = C(1,0) = -c * variance; demonstrates a violated C >= 0.
  std::optional<double> negative_pair;

  Eigen::VectorXd q() const {
    return q_field.size() ? q_field : Eigen::VectorXd::Constant(grid.dim(), params.Q);
  }

  NoiseCovariance noise() const {
    auto nc = build_noise_covariance(grid, kernel);
    if (negative_pair && grid.dim() >= 2) {
      Eigen::MatrixXd C = nc.C;
      C(0, 1) = C(1, 0) = -*negative_pair * kernel.variance;
      nc = factor_covariance(std::move(C), kernel.variance);
    }
    return nc;
  }
};

struct SpatialSolution {
  EquilibriumProfile profile;
  SpatialOperators ops;
};

inline SpatialSolution solve_spatial(const SpatialSetup& s, double lambda,
                                     const NoiseCovariance& noise, const ProfileOptions& popt = {}) {
  auto p = s.params;
  p.lambda = lambda;
  const Eigen::VectorXd q = s.q();
  auto prof = solve_equilibrium_profile(s.grid, q, lambda, s.theta, p, popt);
  auto ops = make_operators(s.grid, prof.T.values, q, p, noise);
  return {std::move(prof), std::move(ops)};
}

inline double lambda_step(double lambda) { return 1e-4 * std::max(1.0, std::abs(lambda)); }

// Solves (A_delta - diag(r1 - Q s)) u = -1, the discrete sensitivity dT*/dlambda
// on the ice-sensitive branch.
inline Eigen::VectorXd sensitivity(const Grid2D& g, const Eigen::VectorXd& q, const EbmParams& p) {
  SparseMatrix J = assemble_laplacian(g);
  const double s = ice_slope(p);
  for (Eigen::Index m = 0; m < g.dim(); ++m) J.coeffRef(m, m) -= p.r1 - q[m] * s;
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(J);
  if (lu.info() != Eigen::Success) fail(ErrorKind::solve_failed, "sensitivity system is singular");
  return lu.solve(Eigen::VectorXd::Constant(g.dim(), -1.0));
}

enum class SweepVerdict { entrywise_positive, not_positive, non_applicable, hypothesis_violation, error };

inline const char* to_string(SweepVerdict v) {
  switch (v) {
    case SweepVerdict::entrywise_positive: return "entrywise-positive";
    case SweepVerdict::not_positive: return "not-positive";
    case SweepVerdict::non_applicable: return "non-applicable";
    case SweepVerdict::hypothesis_violation: return "hypothesis-violation";
    case SweepVerdict::error: return "error";
  }
  return "?";
}

struct SweepPoint {
  double lambda = 0.0;
  double h = 0.0;
  SweepVerdict verdict = SweepVerdict::error;
  double trace = std::numeric_limits<double>::quiet_NaN();
  double d_trace = std::numeric_limits<double>::quiet_NaN();
  double min_dgamma_entry = std::numeric_limits<double>::quiet_NaN();
  double max_abs_dgamma_entry = std::numeric_limits<double>::quiet_NaN();
  double T_min = std::numeric_limits<double>::quiet_NaN();
  double T_max = std::numeric_limits<double>::quiet_NaN();
  double u_min = std::numeric_limits<double>::quiet_NaN();
  double sensitivity_rel_error = std::numeric_limits<double>::quiet_NaN();
  double min_df = std::numeric_limits<double>::quiet_NaN();
  int newton_iterations = 0;
  bool in_band = false;
  bool coercive = false;
  bool c_nonnegative = false;
  bool k_hurwitz = false;
  std::optional<StabilityCertificate> certificate;
  std::vector<std::string> notes;
  std::optional<std::string> error;
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd dgamma;
  Eigen::VectorXd u;
  Eigen::VectorXd fd_dT;
};

struct SweepOptions {
  unsigned threads = 1;
  // Step for the central difference; <= 0 selects 1e-4 * max(1, |lambda|).
  double h = 0.0;
  bool keep_matrices = true;
  bool certify = true;
};

inline SweepPoint sweep_point(const SpatialSetup& s, const NoiseCovariance& noise, double lambda,
                              const SweepOptions& opt) {
  SweepPoint pt;
  pt.lambda = lambda;
  pt.h = opt.h > 0.0 ? opt.h : lambda_step(lambda);
  try {
    const auto centre = solve_spatial(s, lambda, noise);
    ProfileOptions warm;
    warm.initial = centre.profile.T.values;
    const auto plus = solve_spatial(s, lambda + pt.h, noise, warm);
    const auto minus = solve_spatial(s, lambda - pt.h, noise, warm);
    pt.newton_iterations = centre.profile.iterations;

    const auto& p = s.params;
    auto band = [&](const Eigen::VectorXd& T) {
      return (T.array() > p.T_l).all() && (T.array() < p.T_u).all();
    };
    const Eigen::VectorXd& T = centre.profile.T.values;
    pt.T_min = T.minCoeff();
    pt.T_max = T.maxCoeff();
    pt.in_band = band(T) && band(plus.profile.T.values) && band(minus.profile.T.values);
    pt.coercive = centre.ops.coercive();
    pt.c_nonnegative = (noise.C.array() >= 0.0).all();

    const auto vs = assemble_vectorised(centre.ops);
    pt.k_hurwitz = check_hurwitz(vs).hurwitz;
    if (opt.certify) pt.certificate = certify(centre.ops, vs);
    if (!pt.k_hurwitz) fail(ErrorKind::unstable_k, "K is not Hurwitz at lambda");

    const auto g0 = stationary_covariance(vs, {true, lambda});
    const auto gp = stationary_covariance(assemble_vectorised(plus.ops), {true, lambda + pt.h});
    const auto gm = stationary_covariance(assemble_vectorised(minus.ops), {true, lambda - pt.h});
    const Eigen::MatrixXd dg = (gp.gamma - gm.gamma) / (2.0 * pt.h);
    pt.trace = g0.spatial_variance;
    pt.d_trace = dg.trace();
    pt.min_dgamma_entry = dg.minCoeff();
    pt.max_abs_dgamma_entry = dg.cwiseAbs().maxCoeff();

    pt.fd_dT = (plus.profile.T.values - minus.profile.T.values) / (2.0 * pt.h);
    if (pt.in_band) {
      pt.u = sensitivity(s.grid, s.q(), p);
      pt.u_min = pt.u.minCoeff();
      pt.sensitivity_rel_error =
          ((pt.fd_dT - pt.u).array().abs() / pt.u.array().abs()).maxCoeff();
      pt.min_df = ice_slope(p) * pt.u_min;
    }

    if (!pt.c_nonnegative) pt.notes.emplace_back("noise covariance has negative entries");
    if (!pt.coercive) pt.notes.emplace_back("coercivity r1 - Q s >= 0 fails");
    if (!pt.in_band) pt.notes.emplace_back("equilibrium leaves the ice-sensitive band");
    if (!pt.c_nonnegative || !pt.coercive) {
      pt.verdict = SweepVerdict::hypothesis_violation;
    } else if (!pt.in_band) {
      pt.verdict = SweepVerdict::non_applicable;
    } else {
      pt.verdict =
          pt.min_dgamma_entry > 0.0 ? SweepVerdict::entrywise_positive : SweepVerdict::not_positive;
    }
    if (opt.keep_matrices) {
      pt.gamma = g0.gamma;
      pt.dgamma = dg;
    }
  } catch (const Error& e) {
    pt.verdict = SweepVerdict::error;
    pt.error = e.what();
  }
  return pt;
}

struct SweepReport {
  std::vector<SweepPoint> points;

  std::size_t count(SweepVerdict v) const {
    return static_cast<std::size_t>(std::count_if(
        points.begin(), points.end(), [v](const auto& p) { return p.verdict == v; }));
  }

  bool trace_strictly_increasing() const {
    for (std::size_t i = 1; i < points.size(); ++i)
      if (!(points[i].trace > points[i - 1].trace)) return false;
    return !points.empty();
  }

  // Overall verdict: the common per-point verdict, or "mixed".
  std::string verdict() const {
    if (points.empty()) return "empty";
    const auto v = points.front().verdict;
    for (const auto& p : points)
      if (p.verdict != v) return "mixed";
    return to_string(v);
  }
};

inline SweepReport monotonicity_sweep(const SpatialSetup& s, std::span<const double> lambda_grid,
                                      const SweepOptions& opt = {}) {
  s.grid.validate();
  s.params.validate();
  const auto noise = s.noise();
  SweepReport report;
  report.points.resize(lambda_grid.size());
  parallel_for(lambda_grid.size(), opt.threads, [&](std::size_t i) {
    report.points[i] = sweep_point(s, noise, lambda_grid[i], opt);
  });
  return report;
}

struct CounterexampleResult {
  double trace = 0.0;
  double d_trace = 0.0;
  double numeric_trace = 0.0;
};

// Two-node additive-noise system with M = [[-1, s], [s, -1]], C = [[1, -c], [-c, 1]],
// f = (lambda, 1).
inline SpatialOperators counterexample_operators(double s, double c, double lambda) {
  Eigen::Matrix2d M;
  M << -1.0, s, s, -1.0;
  Eigen::Matrix2d C;
  C << 1.0, -c, -c, 1.0;
  return make_linear_operators(M, Eigen::Vector2d::Zero(), Eigen::Vector2d(lambda, 1.0),
                               factor_covariance(C, 1.0), 1.0);
}

inline double counterexample_closed_form(double s, double c, double lambda) {
  return (lambda * lambda - 2.0 * c * s * lambda + 1.0) / (2.0 * (1.0 - s * s));
}

inline void check_counterexample_params(double s, double c, double lambda) {
  if (!(s > 0.0 && s < 1.0)) fail(ErrorKind::param_out_of_range, "s must lie in (0, 1)");
  if (!(c >= 0.0 && c < 1.0)) fail(ErrorKind::param_out_of_range, "c must lie in [0, 1)");
  if (!(lambda >= 0.0)) fail(ErrorKind::param_out_of_range, "lambda must be >= 0");
}

inline double counterexample_numeric_trace(double s, double c, double lambda) {
  const auto vs = assemble_vectorised(counterexample_operators(s, c, lambda));
  return stationary_covariance(vs).spatial_variance;
}

inline CounterexampleResult counterexample_trace(double s, double c, double lambda) {
  check_counterexample_params(s, c, lambda);
  return {counterexample_closed_form(s, c, lambda), (lambda - c * s) / (1.0 - s * s),
          counterexample_numeric_trace(s, c, lambda)};
}

// Root of the central-difference derivative of the numeric trace, by
// bisection on [0, 1].
inline double counterexample_sign_change(double s, double c, double width = 1e-12) {
  check_counterexample_params(s, c, 0.0);
  const double h = 1e-4;
  auto deriv = [&](double lam) {
    return (counterexample_numeric_trace(s, c, lam + h) -
            counterexample_numeric_trace(s, c, std::max(0.0, lam - h))) /
           (lam + h - std::max(0.0, lam - h));
  };
  double lo = 0.0, hi = 1.0;
  if (deriv(lo) >= 0.0) return lo;
  while (hi - lo > width) {
    const double mid = 0.5 * (lo + hi);
    (deriv(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct PooledEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n_paths = 0;
  std::size_t per_path = 0;
};

// Averages g(state) over post-burn-in times within each path, then across
// paths; the standard error comes from the per-path averages.
template <typename G>
PooledEstimate pooled_functional(const PathBundle& b, double burn_in_fraction, G&& g) {
  if (b.n_paths == 0 || b.n_times() == 0) fail(ErrorKind::empty_sample, "empty bundle");
  const std::size_t t0 = first_retained_time(b, burn_in_fraction);
  std::vector<double> per_path(b.n_paths);
  for (std::size_t p = 0; p < b.n_paths; ++p) {
    double s = 0.0;
    for (std::size_t t = t0; t < b.n_times(); ++t) s += g(b.state(p, t));
    per_path[p] = s / static_cast<double>(b.n_times() - t0);
  }
  const auto m = sample_moments(per_path);
  return {m.mean, m.se_mean, b.n_paths, b.n_times() - t0};
}

// Stationary E sum_i Y_i^2.
inline PooledEstimate pooled_trace(const PathBundle& b, double burn_in_fraction) {
  return pooled_functional(b, burn_in_fraction, [](std::span<const double> y) {
    double s = 0.0;
    for (double v : y) s += v * v;
    return s;
  });
}

// Stationary P(max_i |Y_i| >= threshold).
inline PooledEstimate pooled_exceedance(const PathBundle& b, double burn_in_fraction,
                                        double threshold) {
  return pooled_functional(b, burn_in_fraction, [threshold](std::span<const double> y) {
    double mx = 0.0;
    for (double v : y) mx = std::max(mx, std::abs(v));
    return mx >= threshold ? 1.0 : 0.0;
  });
}

// Cross-path mean and standard error of sum_i Y_i^2 at every recorded time.
inline std::vector<Moments> trace_moments(const PathBundle& b) {
  std::vector<Moments> out;
  std::vector<double> col(b.n_paths);
  for (std::size_t t = 0; t < b.n_times(); ++t) {
    for (std::size_t p = 0; p < b.n_paths; ++p) {
      double s = 0.0;
      for (double v : b.state(p, t)) s += v * v;
      col[p] = s;
    }
    out.push_back(sample_moments(col));
  }
  return out;
}

}  // namespace ebmvar

#endif  // EBMVAR_COVARIANCE_ENGINE_HPP

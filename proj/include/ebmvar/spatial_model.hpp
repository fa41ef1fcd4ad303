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

#ifndef EBMVAR_SPATIAL_MODEL_HPP
#define EBMVAR_SPATIAL_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "ebmvar/errors.hpp"
#include "ebmvar/model_core.hpp"
#include "ebmvar/parallel.hpp"
#include "ebmvar/rng.hpp"
#include "ebmvar/sde_engine.hpp"

namespace ebmvar {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Uniform rectangular grid on (0, Lx) x (0, Ly). Interior nodes (i, j) with
// 1 <= i <= Nx-1, 1 <= j <= Ny-1 are numbered x-fastest.
struct Grid2D {
  double Lx = 1.0;
  double Ly = 1.0;
  int Nx = 17;
  int Ny = 17;

  void validate() const {
    require(Nx >= 2 && Ny >= 2, "grid Nx, Ny >= 2");
    require(Lx > 0.0 && Ly > 0.0, "grid Lx, Ly > 0");
  }

  double hx() const { return Lx / Nx; }
  double hy() const { return Ly / Ny; }
  int nx_interior() const { return Nx - 1; }
  int ny_interior() const { return Ny - 1; }
  Eigen::Index dim() const { return static_cast<Eigen::Index>(Nx - 1) * (Ny - 1); }

  // Zero-based counterpart of m(i, j) = (j-1)(Nx-1) + i.
  Eigen::Index index(int i, int j) const {
    return static_cast<Eigen::Index>(j - 1) * (Nx - 1) + (i - 1);
  }
  std::pair<int, int> node(Eigen::Index m) const {
    return {static_cast<int>(m % (Nx - 1)) + 1, static_cast<int>(m / (Nx - 1)) + 1};
  }
  std::pair<double, double> coords(Eigen::Index m) const {
    const auto [i, j] = node(m);
    return {i * hx(), j * hy()};
  }
};

// Per-edge constant Dirichlet data. West/east are x = 0 / x = Lx,
// south/north are y = 0 / y = Ly.
struct BoundaryData {
  double west = 281.5;
  double east = 281.5;
  double south = 281.5;
  double north = 281.5;

  static BoundaryData constant(double v) { return {v, v, v, v}; }
  double mean() const { return 0.25 * (west + east + south + north); }
  bool finite() const {
    return std::isfinite(west) && std::isfinite(east) && std::isfinite(south) && std::isfinite(north);
  }
};

struct SpatialField {
  Eigen::VectorXd values;
  BoundaryData boundary;
};

// tridiag(1, -2, 1) of size n.
inline SparseMatrix second_difference(int n) {
  std::vector<Triplet> t;
  t.reserve(3 * static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    t.emplace_back(k, k, -2.0);
    if (k > 0) t.emplace_back(k, k - 1, 1.0);
    if (k + 1 < n) t.emplace_back(k, k + 1, 1.0);
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

inline SparseMatrix sparse_identity(Eigen::Index n) {
  SparseMatrix id(n, n);
  id.setIdentity();
  return id;
}

// Kronecker product of sparse matrices.
inline SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(a.nonZeros()) * static_cast<std::size_t>(b.nonZeros()));
  for (int ka = 0; ka < a.outerSize(); ++ka) {
    for (SparseMatrix::InnerIterator ia(a, ka); ia; ++ia) {
      for (int kb = 0; kb < b.outerSize(); ++kb) {
        for (SparseMatrix::InnerIterator ib(b, kb); ib; ++ib) {
          t.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                         ia.value() * ib.value());
        }
      }
    }
  }
  SparseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

// Five-point Laplacian with homogeneous Dirichlet data:
//   (1/hx^2) I_{Ny-1} (x) Ax + (1/hy^2) Ay (x) I_{Nx-1}.
inline SparseMatrix assemble_laplacian(const Grid2D& g) {
  g.validate();
  const int nx = g.nx_interior(), ny = g.ny_interior();
  SparseMatrix a = kron(sparse_identity(ny), second_difference(nx)) / (g.hx() * g.hx()) +
                   kron(second_difference(ny), sparse_identity(nx)) / (g.hy() * g.hy());
  a.makeCompressed();
  return a;
}

// Dirichlet contributions on boundary-adjacent rows.
inline Eigen::VectorXd dirichlet_lift(const Grid2D& g, const BoundaryData& theta) {
  Eigen::VectorXd gbc = Eigen::VectorXd::Zero(g.dim());
  const double ix2 = 1.0 / (g.hx() * g.hx()), iy2 = 1.0 / (g.hy() * g.hy());
  for (Eigen::Index m = 0; m < g.dim(); ++m) {
    const auto [i, j] = g.node(m);
    if (i == 1) gbc[m] += theta.west * ix2;
    if (i == g.Nx - 1) gbc[m] += theta.east * ix2;
    if (j == 1) gbc[m] += theta.south * iy2;
    if (j == g.Ny - 1) gbc[m] += theta.north * iy2;
  }
  return gbc;
}

inline Eigen::VectorXd co_albedo(const Eigen::VectorXd& T, const EbmParams& p) {
  return T.unaryExpr([&](double t) { return co_albedo(t, p); });
}
inline Eigen::VectorXd co_albedo_slope(const Eigen::VectorXd& T, const EbmParams& p) {
  return T.unaryExpr([&](double t) { return co_albedo_slope(t, p); });
}

struct ProfileOptions {
  int max_iter = 200;
  double tol = 1e-9;
  double min_step = 0x1.0p-20;
  std::optional<Eigen::VectorXd> initial;
};

struct EquilibriumProfile {
  SpatialField T;
  int iterations = 0;
  double residual = 0.0;
};

// A T + g_bc + Q o beta(T) + (lambda - r0) 1 - r1 T.
inline Eigen::VectorXd profile_residual(const SparseMatrix& A, const Eigen::VectorXd& gbc,
                                        const Eigen::VectorXd& q, double lambda,
                                        const EbmParams& p, const Eigen::VectorXd& T) {
  Eigen::VectorXd r = A * T + gbc;
  for (Eigen::Index m = 0; m < T.size(); ++m)
    r[m] += q[m] * co_albedo(T[m], p) + lambda - p.r0 - p.r1 * T[m];
  return r;
}

// Damped semismooth Newton: beta' is frozen at the current iterate's branch,
// steps are halved until the sup-norm residual decreases.
inline EquilibriumProfile solve_equilibrium_profile(const Grid2D& g, const Eigen::VectorXd& q_field,
                                                    double lambda, const BoundaryData& theta,
                                                    const EbmParams& p,
                                                    const ProfileOptions& opt = {}) {
  g.validate();
  p.validate();
  require(q_field.size() == g.dim(), "Q field length must match the grid");
  require(theta.finite() && std::isfinite(lambda), "boundary data and lambda must be finite");
  const SparseMatrix A = assemble_laplacian(g);
  const Eigen::VectorXd gbc = dirichlet_lift(g, theta);

  Eigen::VectorXd T = opt.initial ? *opt.initial : Eigen::VectorXd::Constant(g.dim(), theta.mean());
  require(T.size() == g.dim(), "initial guess length must match the grid");
  Eigen::VectorXd r = profile_residual(A, gbc, q_field, lambda, p, T);
  double rn = r.lpNorm<Eigen::Infinity>();
  Eigen::SparseLU<SparseMatrix> lu;
  int it = 0;
  while (rn > opt.tol) {
    if (it >= opt.max_iter) throw NoConvergenceError(it, rn);
    ++it;
    SparseMatrix J = A;
    const Eigen::VectorXd slope = co_albedo_slope(T, p);
    for (Eigen::Index m = 0; m < T.size(); ++m) J.coeffRef(m, m) += q_field[m] * slope[m] - p.r1;
    lu.compute(J);
    if (lu.info() != Eigen::Success) {
      fail(ErrorKind::singular_jacobian, "frozen-branch Jacobian factorisation failed at iteration " +
                                             std::to_string(it));
    }
    const Eigen::VectorXd step = lu.solve(-r);
    if (!step.allFinite()) fail(ErrorKind::singular_jacobian, "non-finite Newton step");
    double alpha = 1.0;
    Eigen::VectorXd trial, rt;
    double rtn = 0.0;
    for (;;) {
      trial = T + alpha * step;
      rt = profile_residual(A, gbc, q_field, lambda, p, trial);
      rtn = rt.lpNorm<Eigen::Infinity>();
      if (rtn < rn || alpha <= opt.min_step) break;
      alpha *= 0.5;
    }
    T = std::move(trial);
    r = std::move(rt);
    rn = rtn;
  }
  return {{T, theta}, it, rn};
}

struct Coefficients {
  Eigen::VectorXd b;  // r1 - Q beta'(T*)
  Eigen::VectorXd d;  // beta'(T*)
  Eigen::VectorXd f;  // beta(T*)
};

inline Coefficients sample_coefficients(const Eigen::VectorXd& T_star,
                                        const Eigen::VectorXd& q_field, const EbmParams& p) {
  require(T_star.size() == q_field.size(), "fields must share a grid");
  Coefficients c;
  c.d = co_albedo_slope(T_star, p);
  c.f = co_albedo(T_star, p);
  c.b = (p.r1 - q_field.array() * c.d.array()).matrix();
  return c;
}

struct NoiseKernel {
  enum class Kind { identity, exponential };
  Kind kind = Kind::identity;
  double length = 1.0;
  double variance = 1.0;

  void validate() const {
    require(variance > 0.0, "noise.variance > 0");
    if (kind == Kind::exponential) require(length > 0.0, "noise.length > 0");
  }
};

struct NoiseCovariance {
  Eigen::MatrixXd C;
  Eigen::MatrixXd L;
  bool nonnegative = true;
  int jitter_rounds = 0;
};

// Lower Cholesky factor with up to three rounds of 1e-12*scale diagonal jitter.
inline NoiseCovariance factor_covariance(Eigen::MatrixXd C, double scale) {
  NoiseCovariance nc;
  nc.nonnegative = (C.array() >= 0.0).all();
  Eigen::MatrixXd work = C;
  for (int round = 0; round <= 3; ++round) {
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) {
      nc.L = llt.matrixL();
      nc.C = std::move(C);
      nc.jitter_rounds = round;
      return nc;
    }
    work.diagonal().array() += 1e-12 * scale;
  }
  fail(ErrorKind::not_positive_definite, "noise covariance is not positive definite");
}

inline NoiseCovariance build_noise_covariance(const Grid2D& g, const NoiseKernel& kernel) {
  g.validate();
  kernel.validate();
  const Eigen::Index d = g.dim();
  Eigen::MatrixXd C(d, d);
  if (kernel.kind == NoiseKernel::Kind::identity) {
    C = kernel.variance * Eigen::MatrixXd::Identity(d, d);
  } else {
    for (Eigen::Index a = 0; a < d; ++a) {
      const auto [xa, ya] = g.coords(a);
      for (Eigen::Index b = 0; b < d; ++b) {
        const auto [xb, yb] = g.coords(b);
        C(a, b) = kernel.variance * std::exp(-std::hypot(xa - xb, ya - yb) / kernel.length);
      }
    }
  }
  return factor_covariance(std::move(C), kernel.variance);
}

// Linear multiplicative-noise system
//   dY = M Y dt + sqrt(tau) diag(D Y + f) L dW,  M = A_delta - diag(b).
struct SpatialOperators {
  SparseMatrix A_delta;
  SparseMatrix M;
  Eigen::VectorXd b_vec, d_vec, f_vec;
  Eigen::VectorXd q_vec;
  Eigen::MatrixXd C, L;
  double tau = 0.0;
  double r1 = 0.0;
  double slope = 0.0;

  Eigen::Index dim() const { return M.rows(); }

  // r1 - Q(z_m) s >= 0 at every node.
  bool coercive() const {
    if (q_vec.size() == 0) return true;
    return ((r1 - q_vec.array() * slope) >= 0.0).all();
  }
};

inline SpatialOperators make_operators(const Grid2D& g, const Eigen::VectorXd& T_star,
                                       const Eigen::VectorXd& q_field, const EbmParams& p,
                                       const NoiseCovariance& noise) {
  require(T_star.size() == g.dim() && noise.C.rows() == g.dim(), "operator shapes must match grid");
  const auto coef = sample_coefficients(T_star, q_field, p);
  SpatialOperators ops;
  ops.A_delta = assemble_laplacian(g);
  ops.M = ops.A_delta;
  for (Eigen::Index m = 0; m < g.dim(); ++m) ops.M.coeffRef(m, m) -= coef.b[m];
  ops.M.makeCompressed();
  ops.b_vec = coef.b;
  ops.d_vec = coef.d;
  ops.f_vec = coef.f;
  ops.q_vec = q_field;
  ops.C = noise.C;
  ops.L = noise.L;
  ops.tau = p.tau;
  ops.r1 = p.r1;
  ops.slope = ice_slope(p);
  return ops;
}

// Operators given directly by their drift matrix (no grid); used for small
// hand-built systems.
inline SpatialOperators make_linear_operators(const Eigen::MatrixXd& M, Eigen::VectorXd d,
                                              Eigen::VectorXd f, const NoiseCovariance& noise,
                                              double tau) {
  require(M.rows() == M.cols() && d.size() == M.rows() && f.size() == M.rows() &&
              noise.C.rows() == M.rows(),
          "operator shapes must agree");
  SpatialOperators ops;
  ops.M = M.sparseView();
  ops.A_delta = ops.M;
  ops.b_vec = Eigen::VectorXd::Zero(M.rows());
  ops.d_vec = std::move(d);
  ops.f_vec = std::move(f);
  ops.C = noise.C;
  ops.L = noise.L;
  ops.tau = tau;
  return ops;
}

inline bool is_symmetric(const SparseMatrix& a, double tol = 0.0) {
  const SparseMatrix at = a.transpose();
  const SparseMatrix diff = a - at;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it)
      if (std::abs(it.value()) > tol) return false;
  return true;
}

// Real parts of the eigenvalues of a small square matrix, ascending.
inline Eigen::VectorXd eigenvalue_real_parts(const Eigen::MatrixXd& a, bool symmetric) {
  Eigen::VectorXd re;
  if (symmetric) {
    re = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues();
  } else {
    re = Eigen::EigenSolver<Eigen::MatrixXd>(a, false).eigenvalues().real();
    std::sort(re.data(), re.data() + re.size());
  }
  return re;
}

struct DriftSpectrum {
  double abscissa = 0.0;    // max real part
  double most_negative = 0.0;  // min real part
};

inline DriftSpectrum drift_spectrum(const SparseMatrix& M) {
  const Eigen::MatrixXd dense(M);
  const auto re = eigenvalue_real_parts(dense, is_symmetric(M, 1e-14 * dense.cwiseAbs().maxCoeff()));
  return {re[re.size() - 1], re[0]};
}

// Euler-Maruyama for dY = M Y dt + sqrt(tau) diag(D Y + f) L dW.
inline PathBundle simulate_anomaly_field(const SpatialOperators& ops, const SimConfig& cfg,
                                         std::optional<Eigen::VectorXd> y0 = {}) {
  cfg.validate();
  const Eigen::Index d = ops.dim();
  const auto spectrum = drift_spectrum(ops.M);
  if (spectrum.abscissa >= 0.0) {
    fail(ErrorKind::unstable_drift, "spectral abscissa of M = " + std::to_string(spectrum.abscissa));
  }
  if (cfg.dt > 1.8 / std::abs(spectrum.most_negative)) {
    fail(ErrorKind::step_too_large, "dt exceeds 1.8/|lambda_min(M)| = " +
                                        std::to_string(1.8 / std::abs(spectrum.most_negative)));
  }
  const Eigen::VectorXd start = y0 ? *y0 : Eigen::VectorXd::Zero(d);
  require(start.size() == d, "y0 length must match the operators");

  auto bundle = detail::make_bundle(cfg, static_cast<std::size_t>(d));
  bundle.params = {{"tau", ops.tau}, {"dim", static_cast<double>(d)}};
  const double sqrt_tau = std::sqrt(ops.tau);
  const double sqrt_dt = std::sqrt(cfg.dt);
  const Eigen::MatrixXd L = ops.L;
  parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t path) {
    const NormalStream rng(cfg.seed, path);
    detail::Recorder rec(cfg, bundle.path_block(path), static_cast<std::size_t>(d));
    Eigen::VectorXd y = start, z(d), next(d);
    rec.vector(0, y);
    for (std::size_t k = 0; k < cfg.n_steps; ++k) {
      next.noalias() = ops.M * y;
      next = y + cfg.dt * next;
      if (cfg.noise) {
        rng.fill(k, z, static_cast<std::size_t>(d));
        const Eigen::VectorXd correlated = L.triangularView<Eigen::Lower>() * (sqrt_dt * z);
        next.array() += sqrt_tau * (ops.d_vec.array() * y.array() + ops.f_vec.array()) *
                        correlated.array();
      }
      y.swap(next);
      rec.vector(k + 1, y);
    }
  });
  return bundle;
}

}  // namespace ebmvar

#endif  // EBMVAR_SPATIAL_MODEL_HPP

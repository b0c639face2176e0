#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "eigopt/fem.hpp"

namespace eigopt {

struct EigenOpts {
  double tol = 1e-9;       // on the scaled residual |Ax - lambda Mx| / (|Mx| max(1,lambda))
  int max_iter = 0;        // 0 -> 10 * m * sqrt(n)
  int dense_threshold = 96;
  std::uint64_t seed = 0x9e3779b97f4a7c15ull;
};

// The m smallest eigenpairs of (K + alpha W) w = lambda M w on the free dofs.
// Eigenvectors are stored as full nodal fields (zero on the boundary),
// M-orthonormal, with the largest-magnitude entry positive.
struct EigenSet {
  Eigen::VectorXd lambdas;
  std::vector<Eigen::VectorXd> vectors;
  Eigen::VectorXd residual_norms;
  double alpha = 0.0;
};

class EigensolverError : public std::runtime_error {
 public:
  EigensolverError(const std::string& what, Eigen::VectorXd residuals)
      : std::runtime_error(what), achieved_residuals(std::move(residuals)) {}
  Eigen::VectorXd achieved_residuals;
};

namespace detail {

inline double unit_uniform(std::uint64_t& state) {
  // splitmix64, mapped to [-0.5, 0.5); keeps runs reproducible across platforms
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z = z ^ (z >> 31);
  return (z >> 11) * (1.0 / 9007199254740992.0) - 0.5;
}

inline void fix_sign(Eigen::VectorXd& v) {
  int at = 0;
  double best = 0.0;
  for (int i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > best) {
      best = std::abs(v[i]);
      at = i;
    }
  if (v[at] < 0.0) v = -v;
}

}  // namespace detail

inline EigenSet solve_eigenpairs(const SpMat& K, const SpMat& W, const SpMat& M,
                                 const DirichletMap& dmap, double alpha, int m,
                                 const EigenOpts& opts = {},
                                 const std::vector<Eigen::VectorXd>* warm_start = nullptr) {
  const int n = static_cast<int>(dmap.free.size());
  const int nv = static_cast<int>(dmap.free_index.size());
  if (m < 1 || m > n)
    throw std::invalid_argument("solve_eigenpairs: requested " + std::to_string(m) +
                                " pairs, but only " + std::to_string(n) + " free dofs");
  if (alpha < 0.0) throw std::invalid_argument("solve_eigenpairs: alpha must be >= 0");

  SpMat A = restrict_matrix(SpMat(K + alpha * W), dmap);
  SpMat B = restrict_matrix(M, dmap);

  EigenSet out;
  out.alpha = alpha;
  out.lambdas.resize(m);
  out.residual_norms.resize(m);
  out.vectors.resize(m);

  auto finalize = [&](const Eigen::MatrixXd& X, const Eigen::VectorXd& theta) {
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXd x = X.col(j);
      double bn = std::sqrt(x.dot(B * x));
      x /= bn;
      Eigen::VectorXd r = A * x - theta[j] * (B * x);
      out.residual_norms[j] =
          r.norm() / ((B * x).norm() * std::max(1.0, std::abs(theta[j])));
      out.lambdas[j] = theta[j];
      Eigen::VectorXd full = scatter_zero(x, dmap, nv);
      detail::fix_sign(full);
      out.vectors[j] = std::move(full);
    }
  };

  if (n <= std::max(opts.dense_threshold, 2 * m + 6)) {
    Eigen::MatrixXd Ad(A), Bd(B);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Ad, Bd);
    if (ges.info() != Eigen::Success)
      throw EigensolverError("solve_eigenpairs: dense solve failed", Eigen::VectorXd());
    finalize(ges.eigenvectors().leftCols(m), ges.eigenvalues().head(m));
    return out;
  }

  Eigen::SimplicialLLT<SpMat> allt(A);
  if (allt.info() != Eigen::Success)
    throw EigensolverError("solve_eigenpairs: operator factorization failed (not SPD?)",
                           Eigen::VectorXd());

  const int p = std::min(n, std::max(2 * m + 4, m + 8));
  Eigen::MatrixXd X(n, p);
  std::uint64_t rng = opts.seed;
  int filled = 0;
  if (warm_start) {
    for (const auto& w : *warm_start) {
      if (filled >= p || w.size() != nv) break;
      X.col(filled++) = gather(w, dmap.free);
    }
  }
  for (int j = filled; j < p; ++j)
    for (int i = 0; i < n; ++i) X(i, j) = detail::unit_uniform(rng);

  const int cap = opts.max_iter > 0
                      ? opts.max_iter
                      : 10 * m * static_cast<int>(std::ceil(std::sqrt(double(n))));
  Eigen::VectorXd theta(p);
  Eigen::VectorXd scaled = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::max());
  for (int it = 0; it < cap; ++it) {
    Eigen::MatrixXd Y = allt.solve(B * X);
    // B-orthonormalize: Euclidean QR first for conditioning, then B-Cholesky
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
    Y = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    Eigen::MatrixXd G = Y.transpose() * (B * Y);
    Eigen::LLT<Eigen::MatrixXd> chol(G);
    if (chol.info() != Eigen::Success) {
      for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i) Y(i, j) += 1e-12 * detail::unit_uniform(rng);
      G = Y.transpose() * (B * Y);
      chol.compute(G);
      if (chol.info() != Eigen::Success)
        throw EigensolverError("solve_eigenpairs: subspace degenerated", scaled);
    }
    Eigen::MatrixXd U = chol.matrixU();
    Y = U.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(Y);
    Eigen::MatrixXd S = Y.transpose() * (A * Y);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(S);
    theta = ritz.eigenvalues();
    X = Y * ritz.eigenvectors();

    bool done = true;
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXd x = X.col(j);
      Eigen::VectorXd r = A * x - theta[j] * (B * x);
      scaled[j] = r.norm() / ((B * x).norm() * std::max(1.0, std::abs(theta[j])));
      done &= (scaled[j] <= opts.tol);
    }
    if (done) {
      finalize(X.leftCols(m), theta.head(m));
      return out;
    }
  }
  throw EigensolverError("solve_eigenpairs: no convergence within " + std::to_string(cap) +
                             " iterations",
                         scaled);
}

inline double rayleigh_quotient(const SpMat& K, const SpMat& W, const SpMat& M,
                                const DirichletMap& dmap, double alpha,
                                const Eigen::VectorXd& v_full) {
  Eigen::VectorXd v = gather(v_full, dmap.free);
  SpMat A = restrict_matrix(SpMat(K + alpha * W), dmap);
  SpMat B = restrict_matrix(M, dmap);
  double den = v.dot(B * v);
  if (den <= 0.0)
    throw std::invalid_argument("rayleigh_quotient: field vanishes on the free dofs");
  return v.dot(A * v) / den;
}

struct GapReport {
  std::vector<double> rel_gap;   // per queried index
  std::vector<char> degenerate;  // flagged below threshold
  double threshold;
};

// Relative spectral gap of the queried (1-based) eigenvalue indices to their
// neighbors in the set; +inf when there is no neighbor.
inline GapReport multiplicity_gap_report(const EigenSet& es, const std::vector<int>& indices,
                                         double threshold = 1e-6) {
  GapReport rep;
  rep.threshold = threshold;
  const int m = static_cast<int>(es.lambdas.size());
  for (int idx : indices) {
    if (idx < 1 || idx > m)
      throw std::invalid_argument("multiplicity_gap_report: index out of range");
    double lam = es.lambdas[idx - 1];
    double gap = std::numeric_limits<double>::infinity();
    if (idx - 2 >= 0) gap = std::min(gap, std::abs(lam - es.lambdas[idx - 2]));
    if (idx < m) gap = std::min(gap, std::abs(lam - es.lambdas[idx]));
    double rel = gap / std::abs(lam);
    rep.rel_gap.push_back(rel);
    rep.degenerate.push_back(rel < threshold ? 1 : 0);
  }
  return rep;
}

}  // namespace eigopt

// Shared builders and independent oracles for the test suites. Everything
// here recomputes results from first principles (dense linear algebra,
// exhaustive scans) so library regressions cannot hide behind shared code.
#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "npsem/dynamics.hpp"
#include "npsem/llr.hpp"
#include "npsem/random.hpp"
#include "npsem/sequences.hpp"
#include "npsem/simulate.hpp"
#include "npsem/theta.hpp"

namespace npsem::test {

inline SsmSpec affine_spec(const Eigen::MatrixXd& alpha,
                           const Eigen::VectorXd& beta,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                           const Eigen::VectorXd& mu0,
                           const Eigen::MatrixXd& P0,
                           NoiseParameterization param =
                               NoiseParameterization::kFull) {
  GaussianSpec initial;
  initial.mean = mu0;
  initial.cov = P0;
  return SsmSpec{std::make_shared<AffineModel>(AffineModelParams{alpha, beta}),
                 ObservationOperator::identity(static_cast<int>(beta.size())),
                 Theta(Q, R, param), initial};
}

inline SsmSpec scalar_affine_spec(double alpha, double beta, double q,
                                  double r, double mu0 = 0.0, double p0 = 1.0) {
  return affine_spec(Eigen::MatrixXd::Constant(1, 1, alpha),
                     Eigen::VectorXd::Constant(1, beta),
                     Eigen::MatrixXd::Constant(1, 1, q),
                     Eigen::MatrixXd::Constant(1, 1, r),
                     Eigen::VectorXd::Constant(1, mu0),
                     Eigen::MatrixXd::Constant(1, 1, p0),
                     NoiseParameterization::kScalarIsotropic);
}

inline SsmSpec sinus_spec(double q = 0.1, double r = 0.1) {
  GaussianSpec initial;
  initial.mean = Eigen::VectorXd::Zero(1);
  initial.cov = Eigen::MatrixXd::Identity(1, 1);
  return SsmSpec{std::make_shared<SinusModel>(),
                 ObservationOperator::identity(1),
                 Theta::isotropic(1, 1, q, r), initial};
}

/// Bitwise equality with shape check; Eigen's operator== is coefficient-wise
/// and cannot sit inside a CHECK directly.
inline bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

inline Eigen::MatrixXd random_spd(int d, RandomStream& rng,
                                  double jitter = 0.5) {
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = rng.normal();
  return A * A.transpose() + jitter * Eigen::MatrixXd::Identity(d, d);
}

// ---------------------------------------------------------------------------
// Dense joint-Gaussian smoother oracle for affine models with identity H.
// Builds the full covariance of (x_0..x_T), conditions on the observed y's
// with one dense solve, and reads the smoothing moments off the blocks.
struct JointGaussianOracle {
  Eigen::MatrixXd means;              // d x (T+1)
  std::vector<Eigen::MatrixXd> covs;  // T+1
  std::vector<Eigen::MatrixXd> lag1;  // T entries; [t-1] = Cov(x_t, x_{t-1})
  double loglik = 0.0;
};

inline JointGaussianOracle joint_gaussian_smoother(
    const Eigen::MatrixXd& alpha, const Eigen::VectorXd& beta,
    const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
    const Eigen::VectorXd& mu0, const Eigen::MatrixXd& P0,
    const ObservationSequence& y) {
  const int d = static_cast<int>(beta.size());
  const int T = y.horizon();
  const int D = d * (T + 1);

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(D);
  mu.head(d) = mu0;
  for (int t = 1; t <= T; ++t) {
    mu.segment(t * d, d) = alpha * mu.segment((t - 1) * d, d) + beta;
  }

  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(D, D);
  S.topLeftCorner(d, d) = P0;
  for (int t = 1; t <= T; ++t) {
    S.block(t * d, t * d, d, d) =
        alpha * S.block((t - 1) * d, (t - 1) * d, d, d) * alpha.transpose() + Q;
    for (int s = 0; s < t; ++s) {
      S.block(t * d, s * d, d, d) = alpha * S.block((t - 1) * d, s * d, d, d);
      S.block(s * d, t * d, d, d) = S.block(t * d, s * d, d, d).transpose();
    }
  }

  std::vector<int> obs;
  for (int t = 1; t <= T; ++t)
    if (y.observed(t)) obs.push_back(t);
  const int ny = static_cast<int>(obs.size()) * d;

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(ny, D);
  Eigen::VectorXd yv(ny);
  Eigen::MatrixXd Rblk = Eigen::MatrixXd::Zero(ny, ny);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    H.block(static_cast<int>(i) * d, obs[i] * d, d, d).setIdentity();
    yv.segment(static_cast<int>(i) * d, d) = y.value(obs[i]);
    Rblk.block(static_cast<int>(i) * d, static_cast<int>(i) * d, d, d) = R;
  }

  const Eigen::MatrixXd Sy = H * S * H.transpose() + Rblk;
  const Eigen::MatrixXd Sxy = S * H.transpose();
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(Sy);
  const Eigen::VectorXd resid = yv - H * mu;
  const Eigen::VectorXd post_mean = mu + Sxy * ldlt.solve(resid);
  const Eigen::MatrixXd post_cov = S - Sxy * ldlt.solve(Sxy.transpose());

  JointGaussianOracle out;
  out.means.resize(d, T + 1);
  for (int t = 0; t <= T; ++t) {
    out.means.col(t) = post_mean.segment(t * d, d);
    out.covs.push_back(post_cov.block(t * d, t * d, d, d));
    if (t >= 1) {
      out.lag1.push_back(post_cov.block(t * d, (t - 1) * d, d, d));
    }
  }
  const Eigen::VectorXd diag = ldlt.vectorD();
  out.loglik = -0.5 * (ny * std::log(2.0 * M_PI) +
                       diag.array().log().sum() +
                       resid.dot(ldlt.solve(resid)));
  return out;
}

// ---------------------------------------------------------------------------
// Brute-force k-nearest-neighbor oracle: recompute standardization, full
// sort with the (distance, trajectory, time) total order, apply exclusions
// by direct scan.
struct OracleNeighbor {
  int index;
  double dist;
};

inline std::vector<OracleNeighbor> knn_oracle(
    const Eigen::VectorXd& query, const Catalog& catalog, int k,
    const std::vector<ExclusionWindow>& exclusions = {}) {
  const int d = catalog.state_dim();
  const int p = catalog.cov_dim();
  const Eigen::MatrixXd& pts = catalog.points();

  Eigen::VectorXd scale = Eigen::VectorXd::Ones(d + p);
  for (int c = 0; c < p; ++c) {
    const Eigen::VectorXd row = pts.row(d + c).transpose();
    const double mean = row.mean();
    const double sd =
        std::sqrt((row.array() - mean).square().sum() / row.size());
    if (sd > 0) scale(d + c) = sd;
  }

  std::vector<OracleNeighbor> all;
  for (int i = 0; i < catalog.size(); ++i) {
    const TimeTag& tag = catalog.tags()[static_cast<size_t>(i)];
    bool excluded = false;
    for (const ExclusionWindow& w : exclusions) {
      if (w.excludes(tag)) excluded = true;
    }
    if (excluded) continue;
    double d2 = 0.0;
    for (int c = 0; c < d + p; ++c) {
      const double v = (pts(c, i) - query(c)) / scale(c);
      d2 += v * v;
    }
    all.push_back({i, std::sqrt(d2)});
  }
  std::sort(all.begin(), all.end(),
            [&](const OracleNeighbor& a, const OracleNeighbor& b) {
              if (a.dist != b.dist) return a.dist < b.dist;
              const TimeTag& ta = catalog.tags()[static_cast<size_t>(a.index)];
              const TimeTag& tb = catalog.tags()[static_cast<size_t>(b.index)];
              if (ta.traj != tb.traj) return ta.traj < tb.traj;
              return ta.time < tb.time;
            });
  if (static_cast<int>(all.size()) > k) all.resize(static_cast<size_t>(k));
  return all;
}

// Dense weighted-least-squares LLR oracle: brute-force neighbors,
// rectangular-support tricube weights, normal equations solved with LDLT.
inline Eigen::VectorXd llr_oracle(const Eigen::VectorXd& query,
                                  const Catalog& catalog, int k,
                                  const std::vector<ExclusionWindow>& excl = {}) {
  const std::vector<OracleNeighbor> nb = knn_oracle(query, catalog, k, excl);
  const int n = static_cast<int>(nb.size());
  const int q = catalog.query_dim();
  const int d = catalog.state_dim();

  Eigen::MatrixXd diff(q, n);
  for (int i = 0; i < n; ++i) {
    diff.col(i) = catalog.points().col(nb[static_cast<size_t>(i)].index) - query;
  }
  Eigen::VectorXd half = diff.cwiseAbs().rowwise().maxCoeff();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  for (int c = 0; c < q; ++c) {
    if (half(c) <= 0) continue;
    for (int i = 0; i < n; ++i) {
      const double u = std::abs(diff(c, i)) / half(c);
      const double f = u < 1.0 ? std::pow(1.0 - u * u * u, 3) : 0.0;
      w(i) *= f;
    }
  }
  if (w.sum() <= 0) w.setOnes();

  Eigen::MatrixXd X(n, q + 1);
  Eigen::MatrixXd Y(n, d);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X.row(i).tail(q) = diff.col(i).transpose();
    Y.row(i) =
        catalog.successors().col(nb[static_cast<size_t>(i)].index).transpose();
  }
  const Eigen::MatrixXd Xw = w.asDiagonal() * X;
  const Eigen::MatrixXd G = X.transpose() * Xw;
  const Eigen::MatrixXd B = G.ldlt().solve(Xw.transpose() * Y);
  return B.row(0).transpose();
}

inline Catalog sinus_catalog_noiseless(int horizon) {
  Eigen::MatrixXd x(1, horizon + 1);
  RandomStream rng(2024);
  x(0, 0) = 0.37;
  for (int t = 1; t <= horizon; ++t) {
    // iterate the noisy map so predecessors cover the state space, but
    // record noiseless successors
    x(0, t) = std::sin(3.0 * x(0, t - 1)) + 0.3 * rng.normal();
  }
  Eigen::MatrixXd pred(1, horizon), succ(1, horizon);
  std::vector<TimeTag> tags;
  for (int t = 1; t <= horizon; ++t) {
    pred(0, t - 1) = x(0, t - 1);
    succ(0, t - 1) = std::sin(3.0 * x(0, t - 1));
    tags.push_back({1, t});
  }
  return Catalog(pred, Eigen::MatrixXd(0, horizon), succ, std::move(tags));
}

}  // namespace npsem::test

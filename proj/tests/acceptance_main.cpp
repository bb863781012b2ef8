// Acceptance gate: each numbered criterion runs end to end and prints exactly
// one PASS/FAIL line. Invoke with criterion numbers (default: all). Exit code
// is nonzero when any requested criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "npsem/config.hpp"
#include "npsem/cpf_bs.hpp"
#include "npsem/dynamics.hpp"
#include "npsem/errors.hpp"
#include "npsem/estimators.hpp"
#include "npsem/gaussian.hpp"
#include "npsem/harness.hpp"
#include "npsem/kalman.hpp"
#include "npsem/llr.hpp"
#include "npsem/random.hpp"
#include "npsem/sequences.hpp"
#include "npsem/simulate.hpp"
#include "npsem/theta.hpp"
#include "helpers.hpp"

namespace {

using namespace npsem;
using Clock = std::chrono::steady_clock;

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& msg) {
  if (!ok) throw Failure(msg);
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

double median(std::vector<double> v) {
  expect(!v.empty(), "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  expect(in.good(), "cannot read " + p.string());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// 1. Exact-smoother oracle + EM monotonicity.

std::string criterion_1() {
  RandomStream rng(814);
  for (int rep = 1; rep <= 25; ++rep) {
    RandomStream r = rng.lane(static_cast<uint64_t>(rep));
    const double alpha = 0.3 + 0.6 * r.uniform();
    const double beta = 0.5 * r.normal();
    const double q = 0.2 + r.uniform();
    const double rr = 0.2 + r.uniform();
    const double mu0 = r.normal();
    const double p0 = 0.5 + r.uniform();
    const SsmSpec spec = test::scalar_affine_spec(alpha, beta, q, rr, mu0, p0);
    RandomStream sim = r.lane(7);
    SimulatedData data = simulate_ssm(spec, 3, CovariateSequence(), sim);
    if (rep % 3 == 0) data.obs.set_mask(2, false);

    const test::JointGaussianOracle oracle = test::joint_gaussian_smoother(
        Eigen::MatrixXd::Constant(1, 1, alpha),
        Eigen::VectorXd::Constant(1, beta), Eigen::MatrixXd::Constant(1, 1, q),
        Eigen::MatrixXd::Constant(1, 1, rr), Eigen::VectorXd::Constant(1, mu0),
        Eigen::MatrixXd::Constant(1, 1, p0), data.obs);
    const KalmanResult ks = kalman_smoother(spec, data.obs, CovariateSequence());

    expect(std::abs(ks.loglik - oracle.loglik) < 1e-10,
           "log-likelihood off the joint-Gaussian oracle");
    for (int t = 0; t <= 3; ++t) {
      expect(std::abs(ks.means(0, t) - oracle.means(0, t)) < 1e-10,
             "smoothing mean off the oracle at t=" + std::to_string(t));
      expect(std::abs(ks.covs[static_cast<size_t>(t)](0, 0) -
                      oracle.covs[static_cast<size_t>(t)](0, 0)) < 1e-10,
             "smoothing variance off the oracle at t=" + std::to_string(t));
      if (t >= 1) {
        expect(std::abs(ks.lag1[static_cast<size_t>(t - 1)](0, 0) -
                        oracle.lag1[static_cast<size_t>(t - 1)](0, 0)) < 1e-10,
               "lag-one covariance off the oracle at t=" + std::to_string(t));
      }
    }
  }

  const SsmSpec truth = test::scalar_affine_spec(0.85, 0.2, 0.16, 0.09);
  RandomStream sim(99);
  const SimulatedData data = simulate_ssm(truth, 150, CovariateSequence(), sim);
  const SsmSpec start = test::scalar_affine_spec(0.5, 0.0, 1.0, 1.0);
  const EmLinearResult em =
      em_linear(start, data.obs, CovariateSequence(), 100);
  expect(em.trace.records.size() == 101, "EM trace length");
  for (std::size_t i = 1; i < em.trace.records.size(); ++i) {
    expect(em.trace.records[i].loglik_proxy >=
               em.trace.records[i - 1].loglik_proxy - 1e-8,
           "EM log-likelihood decreased at iteration " + std::to_string(i));
  }
  return "moments within 1e-10 on 25 systems; EM monotone over 100 iterations";
}

// ---------------------------------------------------------------------------
// 2. CSMC invariance against the exact smoother.

std::string criterion_2() {
  const SsmSpec spec = test::scalar_affine_spec(0.9, 0.0, 0.3, 0.5);
  RandomStream sim(41);
  const SimulatedData data = simulate_ssm(spec, 50, CovariateSequence(), sim);
  const KalmanResult exact =
      kalman_smoother(spec, data.obs, CovariateSequence());

  SmootherConfig cfg;
  cfg.n_filter = 10;
  cfg.n_smooth = 1;
  const int n_sweeps = 500, burn = 100, kept = n_sweeps - burn;

  RandomStream chain(4242);
  StateSequence conditioning(exact.means);
  Eigen::MatrixXd draws(kept, 51);
  for (int s = 1; s <= n_sweeps; ++s) {
    RandomStream r = chain.lane(static_cast<uint64_t>(s));
    const ParticleSystem ps =
        cpf(spec, data.obs, CovariateSequence(), conditioning, cfg, r);
    const SmoothingEnsemble ens = backward_simulation(ps, spec.theta, 1, r);
    conditioning = StateSequence(ens.member(0));
    if (s > burn) draws.row(s - burn - 1) = ens.member(0).row(0);
  }

  // chain-aware Monte Carlo errors via batch means (20 batches of 20)
  const int nb = 20, bs = kept / nb;
  int mean_hits = 0, var_hits = 0;
  for (int t = 0; t <= 50; ++t) {
    const Eigen::VectorXd col = draws.col(t);
    const double mean_hat = col.mean();
    const double var_hat = (col.array() - mean_hat).square().sum() / kept;
    const Eigen::ArrayXd h = (col.array() - mean_hat).square();
    double se_mean = 0.0, se_var = 0.0;
    {
      Eigen::VectorXd bm(nb), bh(nb);
      for (int b = 0; b < nb; ++b) {
        bm(b) = col.segment(b * bs, bs).mean();
        bh(b) = h.segment(b * bs, bs).mean();
      }
      se_mean = std::sqrt((bm.array() - bm.mean()).square().sum() /
                          (nb - 1) / nb);
      se_var =
          std::sqrt((bh.array() - bh.mean()).square().sum() / (nb - 1) / nb);
    }
    if (std::abs(mean_hat - exact.means(0, t)) <= 3.0 * se_mean) ++mean_hits;
    if (std::abs(var_hat - exact.covs[static_cast<size_t>(t)](0, 0)) <=
        3.0 * se_var) {
      ++var_hits;
    }
  }
  // >= 95% of the 51 time indices must pass both moment checks
  expect(mean_hits >= 49, "chain means disagree with the exact smoother at " +
                              std::to_string(51 - mean_hits) + " of 51 times");
  expect(var_hits >= 49, "chain variances disagree with the exact smoother at " +
                             std::to_string(51 - var_hits) + " of 51 times");
  return "mean " + std::to_string(mean_hits) + "/51, variance " +
         std::to_string(var_hits) + "/51 within 3 MC SE of Kalman";
}

// ---------------------------------------------------------------------------
// 3. Backward simulation against exhaustive path enumeration.

std::string criterion_3() {
  const SsmSpec spec = test::scalar_affine_spec(0.8, 0.1, 0.4, 0.3, 0.2, 0.7);
  RandomStream sim(17);
  const SimulatedData data = simulate_ssm(spec, 2, CovariateSequence(), sim);
  SmootherConfig cfg;
  cfg.n_filter = 3;
  cfg.n_smooth = 1;
  RandomStream r(55);
  const ParticleSystem ps =
      cpf(spec, data.obs, CovariateSequence(), data.states, cfg, r);

  // exact law of the index path (i0, i1, i2) under backward simulation
  const MvNormal q_dens(spec.theta.Q());
  auto trans = [&](int t, int from, int to) {
    const Eigen::VectorXd resid =
        ps.particles[static_cast<size_t>(t + 1)].col(to) -
        ps.forecasts[static_cast<size_t>(t)].col(from);
    return std::exp(q_dens.logpdf_residual(resid));
  };
  double law[3][3][3];
  double total = 0.0;
  for (int i2 = 0; i2 < 3; ++i2) {
    double z1 = 0.0;
    for (int j = 0; j < 3; ++j) z1 += ps.weights(j, 1) * trans(1, j, i2);
    for (int i1 = 0; i1 < 3; ++i1) {
      const double p1 = ps.weights(i1, 1) * trans(1, i1, i2) / z1;
      double z0 = 0.0;
      for (int j = 0; j < 3; ++j) z0 += ps.weights(j, 0) * trans(0, j, i1);
      for (int i0 = 0; i0 < 3; ++i0) {
        const double p0 = ps.weights(i0, 0) * trans(0, i0, i1) / z0;
        law[i0][i1][i2] = ps.weights(i2, 2) * p1 * p0;
        total += law[i0][i1][i2];
      }
    }
  }
  expect(std::abs(total - 1.0) < 1e-12, "enumerated law does not sum to 1");

  const int n_draws = 100000;
  RandomStream bs_rng = r.lane(9);
  const Eigen::MatrixXi idx =
      backward_simulation_indices(ps, spec.theta, n_draws, bs_rng);
  double counts[3][3][3] = {};
  for (int s = 0; s < n_draws; ++s) {
    counts[idx(s, 0)][idx(s, 1)][idx(s, 2)] += 1.0;
  }
  double tv = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        tv += std::abs(counts[a][b][c] / n_draws - law[a][b][c]);
  tv *= 0.5;
  expect(tv < 0.02, "total variation " + fmt(tv) + " exceeds 2%");
  return "TV distance " + fmt(tv) + " over 27 paths and 1e5 draws";
}

// ---------------------------------------------------------------------------
// 4. LLR exactness on affine catalogs + dense WLS oracle equivalence.

std::string criterion_4() {
  RandomStream rng(23);
  Eigen::MatrixXd A(2, 2);
  A << 0.8, 0.1, -0.2, 0.7;
  Eigen::VectorXd b(2);
  b << 0.3, -0.1;
  const int m = 400;
  Eigen::MatrixXd pred(2, m), succ(2, m);
  std::vector<TimeTag> tags;
  for (int c = 0; c < m; ++c) {
    pred(0, c) = rng.normal();
    pred(1, c) = rng.normal();
    succ.col(c) = A * pred.col(c) + b;
    tags.push_back({1, c + 1});
  }
  const Catalog affine_cat(pred, Eigen::MatrixXd(0, m), succ, tags);
  LlrConfig acfg;
  acfg.k = 30;
  double worst_affine = 0.0;
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd q(2);
    q << rng.normal(), rng.normal();
    const Eigen::VectorXd out = llr_predict(q, affine_cat, acfg);
    worst_affine =
        std::max(worst_affine, (out - (A * q + b)).cwiseAbs().maxCoeff());
  }
  expect(worst_affine < 1e-8,
         "affine catalog reproduced only to " + fmt(worst_affine));

  const Catalog sinus = test::sinus_catalog_noiseless(1000);
  LlrConfig scfg;
  scfg.k = 50;
  RandomStream qr(7);
  double worst_oracle = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd q =
        Eigen::VectorXd::Constant(1, 2.0 * qr.uniform() - 1.0);
    const Eigen::VectorXd mine = llr_predict(q, sinus, scfg);
    const Eigen::VectorXd oracle = test::llr_oracle(q, sinus, scfg.k);
    worst_oracle = std::max(worst_oracle, std::abs(mine(0) - oracle(0)));
  }
  expect(worst_oracle < 1e-10,
         "WLS oracle disagreement " + fmt(worst_oracle) + " on sinus queries");
  return "affine error " + fmt(worst_affine) + "; oracle gap " +
         fmt(worst_oracle) + " over 100 queries";
}

// ---------------------------------------------------------------------------
// 5. Bias correction of the learned map on the sinus model.

std::string criterion_5() {
  ExperimentConfig cfg;
  cfg.model = "sinus";
  cfg.true_theta = Theta::isotropic(1, 1, 0.1, 0.1);
  cfg.T = 1000;
  cfg.T_prime = 100;
  cfg.seeds = 20240;
  cfg.replications = 1;
  cfg.algorithms = {"cpf-bs-update"};
  cfg.npsem.iterations = 50;
  cfg.npsem.smoother_cfg.n_filter = 10;
  cfg.npsem.smoother_cfg.n_smooth = 5;
  cfg.rmse_tail = 10;
  cfg.validate();

  const ReplicationData data = simulate_replication(cfg, 1);
  const GaussianSpec initial = default_initial("sinus", 1);
  const InitializationResult init = em_initialize(
      data.learning.obs, initial, NoiseParameterization::kScalarIsotropic);

  auto fit_surrogate = [&](Catalog cat, uint64_t cv_seed) {
    LlrConfig llr = cfg.npsem.llr;
    if (llr.k <= 0) {
      RandomStream cv(cv_seed);
      llr.k = cross_validate_k(cat, llr, cv);
    }
    return LlrSurrogate(std::make_shared<const Catalog>(std::move(cat)), llr);
  };
  const LlrSurrogate noiseless = fit_surrogate(
      catalog_from_states(data.learning.states, CovariateSequence()), 311);
  const LlrSurrogate noisy = fit_surrogate(
      catalog_from_observations(data.learning.obs, CovariateSequence()), 313);

  SemResult fit;
  const AlgorithmScore score =
      run_algorithm(cfg, 1, "cpf-bs-update", data, init, &fit);
  expect(score.ok, "estimation failed: " + score.error);

  auto sup_err = [](const DynamicalModel& m) {
    double worst = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const double x = -1.0 + 0.01 * i;
      const double pred =
          m.evaluate_one(Eigen::VectorXd::Constant(1, x), Eigen::VectorXd())(0);
      worst = std::max(worst, std::abs(pred - std::sin(3.0 * x)));
    }
    return worst;
  };
  const double e_clean = sup_err(noiseless);
  const double e_noisy = sup_err(noisy);
  const double e_npsem = sup_err(*fit.final_dynamics);
  expect(e_noisy > e_clean,
         "noisy-catalog fit (" + fmt(e_noisy) +
             ") not worse than the noiseless fit (" + fmt(e_clean) + ")");
  expect(e_npsem < e_noisy, "final surrogate (" + fmt(e_npsem) +
                                ") did not improve on the noisy fit (" +
                                fmt(e_noisy) + ")");
  return "sup errors on [-1,1]: noiseless " + fmt(e_clean) + " < final " +
         fmt(e_npsem) + " < noisy " + fmt(e_noisy);
}

// ---------------------------------------------------------------------------
// 6 + 7 share one desk-scale comparison (5 replications, T=500) plus a
// shorter-catalog run (T=100) for the monotonicity check.

struct L63Runs {
  ReconstructionReport t500;
  ReconstructionReport t100;
};

const L63Runs& l63_runs() {
  static std::optional<L63Runs> cache;
  if (!cache) {
    ExperimentConfig big;
    big.model = "l63";
    big.true_theta = Theta::isotropic(3, 3, 1.0, 4.0);
    big.T = 500;
    big.T_prime = 100;
    big.seeds = 606;
    big.replications = 5;
    big.algorithms = {"cpf-bs-update", "cpf-bs-no-update", "cpf-bs-true-m",
                      "enks-update", "enks-no-update"};
    big.npsem.iterations = 50;
    big.npsem.smoother_cfg.n_filter = 10;
    big.npsem.smoother_cfg.n_smooth = 5;
    big.npsem.smoother_cfg.n_ens = 20;
    big.rmse_tail = 10;
    big.validate();

    ExperimentConfig small = big;
    small.T = 100;
    small.algorithms = {"cpf-bs-update"};
    small.validate();

    L63Runs runs;
    runs.t500 = run_comparison(big);
    runs.t100 = run_comparison(small);
    cache = std::move(runs);
  }
  return *cache;
}

std::vector<const AlgorithmScore*> entries_for(const ReconstructionReport& rep,
                                               const std::string& tag) {
  std::vector<const AlgorithmScore*> out;
  for (const AlgorithmScore& e : rep.entries) {
    if (e.algorithm != tag) continue;
    expect(e.ok, tag + " failed in replication " +
                     std::to_string(e.replication) + ": " + e.error);
    out.push_back(&e);
  }
  expect(!out.empty(), "no entries for " + tag);
  return out;
}

std::string criterion_6() {
  const auto entries = entries_for(l63_runs().t500, "cpf-bs-update");
  std::vector<double> q_hat, r_hat, q_init, r_init;
  for (const AlgorithmScore* e : entries) {
    q_hat.push_back(e->theta_final.sigma2_Q());
    r_hat.push_back(e->theta_final.sigma2_R());
    q_init.push_back(e->trace.records.front().theta.sigma2_Q());
    r_init.push_back(e->trace.records.front().theta.sigma2_R());
  }
  const double mq = median(q_hat), mr = median(r_hat);
  const double mq0 = median(q_init), mr0 = median(r_init);
  expect(mr >= 2.5 && mr <= 6.0,
         "median sigma2_R " + fmt(mr) + " outside [2.5, 6.0]");
  expect(mq >= 0.4 && mq <= 2.5,
         "median sigma2_Q " + fmt(mq) + " outside [0.4, 2.5]");
  expect(std::abs(mq - 1.0) < std::abs(mq0 - 1.0),
         "sigma2_Q median " + fmt(mq) + " no closer to 1 than the init " +
             fmt(mq0));
  expect(std::abs(mr - 4.0) < std::abs(mr0 - 4.0),
         "sigma2_R median " + fmt(mr) + " no closer to 4 than the init " +
             fmt(mr0));
  return "median sigma2_Q " + fmt(mq) + " (init " + fmt(mq0) +
         "), sigma2_R " + fmt(mr) + " (init " + fmt(mr0) + ")";
}

std::string criterion_7() {
  const L63Runs& runs = l63_runs();
  auto med_rmse = [&](const ReconstructionReport& rep, const std::string& tag) {
    std::vector<double> v;
    for (const AlgorithmScore* e : entries_for(rep, tag)) v.push_back(e->rmse);
    return median(v);
  };
  const double cpf_up = med_rmse(runs.t500, "cpf-bs-update");
  const double cpf_no = med_rmse(runs.t500, "cpf-bs-no-update");
  const double cpf_true = med_rmse(runs.t500, "cpf-bs-true-m");
  const double enks_up = med_rmse(runs.t500, "enks-update");
  const double enks_no = med_rmse(runs.t500, "enks-no-update");
  const double cpf_up_small = med_rmse(runs.t100, "cpf-bs-update");

  expect(cpf_up < cpf_no, "CPF-BS update (" + fmt(cpf_up) +
                              ") not below no-update (" + fmt(cpf_no) + ")");
  expect(enks_up < enks_no, "EnKS update (" + fmt(enks_up) +
                                ") not below no-update (" + fmt(enks_no) + ")");
  expect(cpf_up <= cpf_true + 0.15,
         "CPF-BS update (" + fmt(cpf_up) + ") more than 0.15 above true-m (" +
             fmt(cpf_true) + ")");
  expect(cpf_up <= cpf_up_small,
         "median RMSE grew with the catalog: T=100 " + fmt(cpf_up_small) +
             " vs T=500 " + fmt(cpf_up));
  return "median RMSE: update " + fmt(cpf_up) + " < no-update " + fmt(cpf_no) +
         ", true-m " + fmt(cpf_true) + "; EnKS " + fmt(enks_up) + " < " +
         fmt(enks_no) + "; T=100 " + fmt(cpf_up_small);
}

// ---------------------------------------------------------------------------
// 8. Coverage of the pooled 95% bands on an L63 validation sequence.

std::string criterion_8() {
  ExperimentConfig cfg;
  cfg.model = "l63";
  cfg.true_theta = Theta::isotropic(3, 3, 1.0, 4.0);
  cfg.T = 500;
  cfg.T_prime = 200;
  cfg.seeds = 707;
  cfg.replications = 1;
  cfg.algorithms = {"cpf-bs-update"};
  cfg.npsem.iterations = 50;
  cfg.npsem.smoother_cfg.n_filter = 10;
  cfg.npsem.smoother_cfg.n_smooth = 5;
  cfg.rmse_tail = 10;
  cfg.validate();

  const ReconstructionReport report = run_comparison(cfg);
  expect(report.entries.size() == 1, "unexpected entry count");
  const AlgorithmScore& e = report.entries.front();
  expect(e.ok, "estimation failed: " + e.error);
  expect(e.coverage_components.size() == 3, "expected 3 components");
  std::string detail = "component coverage";
  for (int c = 0; c < 3; ++c) {
    const double cov = e.coverage_components(c);
    expect(cov >= 0.75 && cov <= 0.99,
           "component " + std::to_string(c + 1) + " coverage " + fmt(cov) +
               " outside [0.75, 0.99]");
    detail += " " + fmt(cov);
  }
  return detail;
}

// ---------------------------------------------------------------------------
// 9. Imputation ordering on synthetic wave data across noise levels.

std::string criterion_9() {
  const std::vector<double> levels = {0.1, 0.2, 0.5};
  std::vector<double> np_gaps, em_gaps, np_rmse;
  for (double level : levels) {
    ExperimentConfig cfg;
    cfg.model = "csv-data";
    cfg.true_theta = Theta::isotropic(1, 1, 0.01, level * level);
    cfg.T = 744;
    cfg.T_prime = 744;
    cfg.seeds = 909;
    cfg.replications = 3;
    cfg.algorithms = {"cpf-bs-update"};
    cfg.wave.noise_sd = level;
    cfg.wave.gap_length = 24;
    cfg.wave.n_gaps = 6;
    cfg.npsem.iterations = 30;
    cfg.npsem.smoother_cfg.n_filter = 10;
    cfg.npsem.smoother_cfg.n_smooth = 5;
    cfg.rmse_tail = 10;
    cfg.validate();

    std::vector<double> em_g, np_g, np_r;
    for (const ImputationEntry& e : run_imputation(cfg)) {
      expect(e.ok, e.algorithm + " failed at noise " + fmt(level) + ": " +
                       e.error);
      expect(e.rmse_gaps.has_value(), "missing gap metric");
      if (e.algorithm == "em-ks") {
        em_g.push_back(*e.rmse_gaps);
      } else {
        np_g.push_back(*e.rmse_gaps);
        np_r.push_back(e.rmse);
      }
    }
    em_gaps.push_back(median(em_g));
    np_gaps.push_back(median(np_g));
    np_rmse.push_back(median(np_r));
  }
  std::string detail;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    expect(np_gaps[i] < em_gaps[i],
           "at noise " + fmt(levels[i]) + " npSEM gap error " +
               fmt(np_gaps[i]) + " not below the EM+KS baseline " +
               fmt(em_gaps[i]));
    if (i > 0) {
      expect(np_gaps[i] >= np_gaps[i - 1],
             "gap error decreased when the noise grew to " + fmt(levels[i]));
      expect(np_rmse[i] >= np_rmse[i - 1],
             "rmse decreased when the noise grew to " + fmt(levels[i]));
    }
    if (!detail.empty()) detail += "; ";
    detail += fmt(levels[i]) + ": " + fmt(np_gaps[i]) + " < " +
              fmt(em_gaps[i]);
  }
  return "median gap error (npSEM < EM+KS) at " + detail;
}

// ---------------------------------------------------------------------------
// 10. Byte-identical outputs across reruns and thread counts.

std::string criterion_10() {
#ifndef NPSEM_CLI_PATH
  throw Failure("binary path for the CLI was not compiled in");
#else
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "npsem-acceptance-c10";
  fs::remove_all(base);
  fs::create_directories(base);
  const fs::path cfg_path = base / "config.json";
  {
    std::ofstream cfg(cfg_path);
    cfg << R"({
  "model": "sinus", "T": 60, "T_prime": 40, "replications": 2,
  "seeds": 4242, "algorithms": ["cpf-bs-update", "enks-update"],
  "npsem": {"iterations": 3, "llr": {"k": 8},
            "smoother_cfg": {"n_filter": 6, "n_smooth": 3, "n_ens": 12}},
  "rmse_tail": 2
})";
  }
  auto run = [&](const std::string& out, int threads) {
    std::ostringstream cmd;
    cmd << '"' << NPSEM_CLI_PATH << "\" compare --config \""
        << cfg_path.string() << "\" --out \"" << (base / out).string()
        << "\" --threads " << threads << " > \""
        << (base / (out + ".log")).string() << "\" 2>&1";
    const int rc = std::system(cmd.str().c_str());
    expect(rc == 0, "compare run '" + out + "' exited with status " +
                        std::to_string(rc));
  };
  run("a", 1);
  run("b", 1);
  run("c", 4);

  auto listing = [&](const std::string& out) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(base / out)) {
      names.push_back(e.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
  };
  const std::vector<std::string> names = listing("a");
  expect(names == listing("b") && names == listing("c"),
         "output file sets differ between runs");
  expect(names.size() >= 5, "unexpectedly few output files");
  for (const std::string& name : names) {
    const std::string bytes = slurp(base / "a" / name);
    expect(bytes == slurp(base / "b" / name),
           name + " differs between identical reruns");
    expect(bytes == slurp(base / "c" / name),
           name + " differs across --threads values");
  }
  return std::to_string(names.size()) +
         " files byte-identical across reruns and --threads 1/4";
#endif
}

struct Criterion {
  int id;
  const char* label;
  std::function<std::string()> fn;
  double budget_s;  // 0 = no stated runtime budget
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> catalog = {
      {1, "exact smoother and EM oracle", criterion_1, 1.0},
      {2, "CSMC invariance", criterion_2, 60.0},
      {3, "backward-simulation enumeration", criterion_3, 30.0},
      {4, "LLR exactness and oracle equivalence", criterion_4, 10.0},
      {5, "sinus bias correction", criterion_5, 900.0},
      {6, "L63 parameter recovery", criterion_6, 1800.0},
      {7, "L63 algorithm ordering", criterion_7, 1800.0},
      {8, "coverage sanity", criterion_8, 0.0},
      {9, "imputation ordering", criterion_9, 1200.0},
      {10, "output determinism", criterion_10, 0.0},
  };

  std::vector<int> request;
  for (int i = 1; i < argc; ++i) request.push_back(std::atoi(argv[i]));
  if (request.empty()) {
    for (const Criterion& c : catalog) request.push_back(c.id);
  }

  bool all_ok = true;
  for (int id : request) {
    const auto it =
        std::find_if(catalog.begin(), catalog.end(),
                     [&](const Criterion& c) { return c.id == id; });
    if (it == catalog.end()) {
      std::cout << "FAIL [" << id << "] unknown criterion\n";
      all_ok = false;
      continue;
    }
    const auto start = Clock::now();
    try {
      const std::string detail = it->fn();
      const double secs =
          std::chrono::duration<double>(Clock::now() - start).count();
      if (it->budget_s > 0 && secs > it->budget_s) {
        std::cout << "FAIL [" << id << "] " << it->label
                  << ": runtime budget exceeded (" << fmt(secs) << "s > "
                  << fmt(it->budget_s) << "s)\n";
        all_ok = false;
      } else {
        std::cout << "PASS [" << id << "] " << it->label << ": " << detail
                  << " (" << fmt(secs) << "s)\n";
      }
    } catch (const std::exception& e) {
      std::cout << "FAIL [" << id << "] " << it->label << ": " << e.what()
                << "\n";
      all_ok = false;
    }
    std::cout.flush();
  }
  return all_ok ? 0 : 1;
}

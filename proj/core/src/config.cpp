#include "npsem/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "npsem/errors.hpp"

namespace npsem {

int algorithm_index(const std::string& tag) {
  for (std::size_t i = 0; i < kAlgorithmTags.size(); ++i) {
    if (tag == kAlgorithmTags[i]) return static_cast<int>(i);
  }
  return -1;
}

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      fail("unknown field '" + item.key() + "' in " + where);
    }
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const std::string& where,
         T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail("field '" + key + "' in " + where + " has the wrong type");
  }
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where + " must be a non-empty array");
  // Accept either a matrix (array of rows) or a plain vector.
  if (!j.front().is_array()) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) fail(where + " must be numeric");
      m(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
    }
    return m;
  }
  const std::size_t cols = j.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()),
                    static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      fail(where + " rows have inconsistent widths");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) fail(where + " must be numeric");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j[r][c].get<double>();
    }
  }
  return m;
}

NoiseParameterization parse_parameterization(const std::string& s) {
  if (s == "scalar-isotropic") return NoiseParameterization::kScalarIsotropic;
  if (s == "diagonal") return NoiseParameterization::kDiagonal;
  if (s == "full") return NoiseParameterization::kFull;
  fail("unknown parameterization '" + s + "'");
}

std::string parameterization_name(NoiseParameterization p) {
  switch (p) {
    case NoiseParameterization::kScalarIsotropic:
      return "scalar-isotropic";
    case NoiseParameterization::kDiagonal:
      return "diagonal";
    case NoiseParameterization::kFull:
      return "full";
  }
  return "scalar-isotropic";
}

Theta parse_theta(const json& j, int dim) {
  check_keys(j, "true_theta",
             {"sigma2_Q", "sigma2_R", "Q", "R", "parameterization"});
  const NoiseParameterization param = parse_parameterization(
      get_or<std::string>(j, "parameterization", "true_theta",
                          "scalar-isotropic"));
  if (j.contains("Q") != j.contains("R")) {
    fail("true_theta must specify Q and R together");
  }
  if (j.contains("Q")) {
    Eigen::MatrixXd Q = parse_matrix(j.at("Q"), "true_theta.Q");
    Eigen::MatrixXd R = parse_matrix(j.at("R"), "true_theta.R");
    if (Q.rows() != Q.cols() || R.rows() != R.cols()) {
      fail("true_theta covariance matrices must be square");
    }
    return Theta(std::move(Q), std::move(R), param);
  }
  if (!j.contains("sigma2_Q") || !j.contains("sigma2_R")) {
    fail("true_theta needs sigma2_Q and sigma2_R (or full Q and R)");
  }
  const double q = get_or<double>(j, "sigma2_Q", "true_theta", 0.0);
  const double r = get_or<double>(j, "sigma2_R", "true_theta", 0.0);
  if (q <= 0 || r <= 0) fail("true_theta variances must be positive");
  return Theta::isotropic(dim, dim, q, r);
}

LlrConfig parse_llr(const json& j) {
  check_keys(j, "npsem.llr",
             {"k", "lag_exclusion", "cv_grid", "cv_folds", "cv_max_points"});
  LlrConfig cfg;
  cfg.k = get_or<int>(j, "k", "npsem.llr", cfg.k);
  cfg.lag_exclusion =
      get_or<int>(j, "lag_exclusion", "npsem.llr", cfg.lag_exclusion);
  cfg.cv_grid = get_or<std::vector<int>>(j, "cv_grid", "npsem.llr", {});
  cfg.cv_folds = get_or<int>(j, "cv_folds", "npsem.llr", cfg.cv_folds);
  cfg.cv_max_points =
      get_or<int>(j, "cv_max_points", "npsem.llr", cfg.cv_max_points);
  return cfg;
}

SmootherConfig parse_smoother_cfg(const json& j) {
  check_keys(j, "npsem.smoother_cfg", {"n_filter", "n_smooth", "n_ens"});
  SmootherConfig cfg;
  cfg.n_filter = get_or<int>(j, "n_filter", "npsem.smoother_cfg", cfg.n_filter);
  cfg.n_smooth = get_or<int>(j, "n_smooth", "npsem.smoother_cfg", cfg.n_smooth);
  cfg.n_ens = get_or<int>(j, "n_ens", "npsem.smoother_cfg", cfg.n_ens);
  return cfg;
}

NpSemConfig parse_npsem(const json& j) {
  check_keys(j, "npsem",
             {"iterations", "smoother", "catalog_update", "llr",
              "smoother_cfg", "cv_every"});
  NpSemConfig cfg;
  cfg.iterations = get_or<int>(j, "iterations", "npsem", cfg.iterations);
  const std::string smoother =
      get_or<std::string>(j, "smoother", "npsem", "cpf-bs");
  if (smoother == "cpf-bs") {
    cfg.smoother = SmootherKind::kCpfBs;
  } else if (smoother == "enks") {
    cfg.smoother = SmootherKind::kEnks;
  } else {
    fail("npsem.smoother must be 'cpf-bs' or 'enks'");
  }
  cfg.catalog_update =
      get_or<bool>(j, "catalog_update", "npsem", cfg.catalog_update);
  if (j.contains("llr")) cfg.llr = parse_llr(j.at("llr"));
  if (j.contains("smoother_cfg")) {
    cfg.smoother_cfg = parse_smoother_cfg(j.at("smoother_cfg"));
  }
  cfg.cv_every = get_or<int>(j, "cv_every", "npsem", cfg.cv_every);
  return cfg;
}

WaveOptions parse_wave(const json& j) {
  check_keys(j, "wave", {"data_path", "noise_sd", "gap_length", "n_gaps"});
  WaveOptions w;
  w.data_path = get_or<std::string>(j, "data_path", "wave", w.data_path);
  w.noise_sd = get_or<double>(j, "noise_sd", "wave", w.noise_sd);
  w.gap_length = get_or<int>(j, "gap_length", "wave", w.gap_length);
  w.n_gaps = get_or<int>(j, "n_gaps", "wave", w.n_gaps);
  return w;
}

AffineOptions parse_affine(const json& j) {
  check_keys(j, "affine", {"alpha", "beta"});
  AffineOptions a;
  if (j.contains("alpha")) a.alpha = parse_matrix(j.at("alpha"), "affine.alpha");
  if (j.contains("beta")) {
    const Eigen::MatrixXd b = parse_matrix(j.at("beta"), "affine.beta");
    if (b.cols() != 1) fail("affine.beta must be a vector");
    a.beta = b.col(0);
  }
  return a;
}

json theta_to_json(const Theta& theta) {
  json j;
  j["parameterization"] = parameterization_name(theta.parameterization());
  if (theta.parameterization() == NoiseParameterization::kScalarIsotropic) {
    j["sigma2_Q"] = theta.sigma2_Q();
    j["sigma2_R"] = theta.sigma2_R();
    return j;
  }
  json q = json::array(), r = json::array();
  for (Eigen::Index i = 0; i < theta.Q().rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < theta.Q().cols(); ++c) {
      row.push_back(theta.Q()(i, c));
    }
    q.push_back(row);
  }
  for (Eigen::Index i = 0; i < theta.R().rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < theta.R().cols(); ++c) {
      row.push_back(theta.R()(i, c));
    }
    r.push_back(row);
  }
  j["Q"] = q;
  j["R"] = r;
  return j;
}

}  // namespace

int ExperimentConfig::state_dim() const {
  if (model == "l63") return 3;
  if (model == "affine") {
    return affine.beta.size() > 0 ? static_cast<int>(affine.beta.size()) : 1;
  }
  return 1;  // sinus, csv-data
}

void ExperimentConfig::validate() const {
  if (model != "sinus" && model != "l63" && model != "affine" &&
      model != "csv-data") {
    fail("model must be one of sinus, l63, affine, csv-data");
  }
  if (T < 2 || T_prime < 2) fail("T and T_prime must be >= 2");
  if (replications < 1) fail("replications must be >= 1");
  if (dt <= 0) fail("dt must be positive");
  if (rmse_tail < 1) fail("rmse_tail must be >= 1");
  for (const std::string& tag : algorithms) {
    if (algorithm_index(tag) < 0) fail("unknown algorithm tag '" + tag + "'");
  }
  try {
    npsem.validate();
  } catch (const std::exception& e) {
    fail(std::string("npsem: ") + e.what());
  }
  if (rmse_tail > npsem.iterations) {
    fail("rmse_tail cannot exceed npsem.iterations");
  }
  const int d = state_dim();
  if (true_theta.state_dim() != d || true_theta.obs_dim() != d) {
    fail("true_theta dimensions do not match the model");
  }
  if (model == "affine") {
    if (affine.alpha.rows() != d || affine.alpha.cols() != d ||
        affine.beta.size() != d) {
      fail("affine.alpha/beta dimensions do not match");
    }
  }
  if (model == "csv-data") {
    if (wave.noise_sd <= 0) fail("wave.noise_sd must be positive");
    if (wave.gap_length < 1) fail("wave.gap_length must be >= 1");
    if (wave.n_gaps < 0) fail("wave.n_gaps must be >= 0");
  }
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail("config root must be a JSON object");
  check_keys(j, "config",
             {"model", "T", "T_prime", "dt", "true_theta", "replications",
              "algorithms", "seeds", "npsem", "rmse_tail", "wave", "affine"});

  ExperimentConfig cfg;
  cfg.model = get_or<std::string>(j, "model", "config", cfg.model);
  cfg.T = get_or<int>(j, "T", "config", cfg.T);
  cfg.T_prime = get_or<int>(j, "T_prime", "config", cfg.T_prime);
  cfg.dt = get_or<double>(j, "dt", "config", cfg.dt);
  cfg.replications = get_or<int>(j, "replications", "config", cfg.replications);
  cfg.algorithms =
      get_or<std::vector<std::string>>(j, "algorithms", "config", {});
  cfg.seeds = get_or<std::uint64_t>(j, "seeds", "config", cfg.seeds);
  if (j.contains("npsem")) cfg.npsem = parse_npsem(j.at("npsem"));
  cfg.rmse_tail = get_or<int>(j, "rmse_tail", "config", cfg.rmse_tail);
  if (j.contains("wave")) cfg.wave = parse_wave(j.at("wave"));
  if (j.contains("affine")) cfg.affine = parse_affine(j.at("affine"));

  if (cfg.model == "affine" && cfg.affine.beta.size() == 0) {
    cfg.affine.alpha = Eigen::MatrixXd::Constant(1, 1, 0.9);
    cfg.affine.beta = Eigen::VectorXd::Zero(1);
  }
  if (j.contains("true_theta")) {
    cfg.true_theta = parse_theta(j.at("true_theta"), cfg.state_dim());
  } else {
    const int d = cfg.state_dim();
    if (cfg.model == "sinus") {
      cfg.true_theta = Theta::isotropic(1, 1, 0.1, 0.1);
    } else if (cfg.model == "l63") {
      cfg.true_theta = Theta::isotropic(3, 3, 1.0, 4.0);
    } else if (cfg.model == "csv-data") {
      cfg.true_theta =
          Theta::isotropic(1, 1, 0.01, cfg.wave.noise_sd * cfg.wave.noise_sd);
    } else {
      cfg.true_theta = Theta::isotropic(d, d, 1.0, 1.0);
    }
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["model"] = cfg.model;
  j["T"] = cfg.T;
  j["T_prime"] = cfg.T_prime;
  j["dt"] = cfg.dt;
  j["true_theta"] = theta_to_json(cfg.true_theta);
  j["replications"] = cfg.replications;
  j["algorithms"] = cfg.algorithms.empty()
                        ? std::vector<std::string>(kAlgorithmTags.begin(),
                                                   kAlgorithmTags.end())
                        : cfg.algorithms;
  j["seeds"] = cfg.seeds;
  j["npsem"] = {
      {"iterations", cfg.npsem.iterations},
      {"smoother", to_string(cfg.npsem.smoother)},
      {"catalog_update", cfg.npsem.catalog_update},
      {"llr",
       {{"k", cfg.npsem.llr.k},
        {"lag_exclusion", cfg.npsem.llr.lag_exclusion},
        {"cv_grid", cfg.npsem.llr.cv_grid},
        {"cv_folds", cfg.npsem.llr.cv_folds},
        {"cv_max_points", cfg.npsem.llr.cv_max_points}}},
      {"smoother_cfg",
       {{"n_filter", cfg.npsem.smoother_cfg.n_filter},
        {"n_smooth", cfg.npsem.smoother_cfg.n_smooth},
        {"n_ens", cfg.npsem.smoother_cfg.n_ens}}},
      {"cv_every", cfg.npsem.cv_every},
  };
  j["rmse_tail"] = cfg.rmse_tail;
  if (cfg.model == "csv-data") {
    j["wave"] = {{"data_path", cfg.wave.data_path},
                 {"noise_sd", cfg.wave.noise_sd},
                 {"gap_length", cfg.wave.gap_length},
                 {"n_gaps", cfg.wave.n_gaps}};
  }
  return j.dump(2);
}

}  // namespace npsem

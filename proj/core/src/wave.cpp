#include "npsem/wave.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "npsem/csv.hpp"

namespace npsem {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Generator constants: mean depth/tidal amplitude (m), AR wind and offshore
// sea state, and the latent response coefficients on the log scale.
constexpr double kMeanDepth = 8.0;
constexpr double kTideAmp = 2.5;
constexpr double kTidePeriod = 12.42;  // M2 tide, hours
constexpr double kSpringNeapPeriod = 354.0;
constexpr double kMeanWind = 8.0;
constexpr double kWindAr = 0.92;
constexpr double kWindSd = 1.2;
constexpr double kOffMeanLog = 0.6931471805599453;  // log(2 m)
constexpr double kOffAr = 0.97;
constexpr double kOffSd = 0.07;

double parse_optional(const std::string& s, const std::string& where) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("wave: bad numeric field '" + s + "' in " + where);
  }
}

}  // namespace

double wave_transition(double log_hs, const Eigen::Vector3d& z) {
  const double depth = z(0);
  const double wind = z(1);
  const double log_off = std::log(z(2));
  const double tide = depth - kMeanDepth;
  return 0.55 * log_hs + (0.42 + 0.035 * tide) * log_off + 0.05 * tide +
         0.010 * wind - 0.12;
}

WaveSeries synthesize_wave(int horizon, RandomStream& rng) {
  if (horizon < 2) throw std::invalid_argument("wave: horizon must be >= 2");
  WaveSeries s;
  s.hs.resize(horizon);
  s.covariates.resize(3, horizon);

  const double phase = rng.uniform() * kTwoPi;
  const double spring_phase = rng.uniform() * kTwoPi;
  double wind = kMeanWind + rng.normal() * kWindSd / std::sqrt(1 - kWindAr * kWindAr);
  double log_off =
      kOffMeanLog + rng.normal() * kOffSd / std::sqrt(1 - kOffAr * kOffAr);
  double x = 0.55 + 0.15 * rng.normal();

  const double eta_sd = std::sqrt(kWaveProcessVariance);
  for (int t = 1; t <= horizon; ++t) {
    const double amp =
        kTideAmp + 0.4 * std::sin(kTwoPi * t / kSpringNeapPeriod + spring_phase);
    const double depth = kMeanDepth + amp * std::sin(kTwoPi * t / kTidePeriod + phase);
    wind = kMeanWind + kWindAr * (wind - kMeanWind) + kWindSd * rng.normal();
    wind = std::max(0.0, wind);
    log_off = kOffMeanLog + kOffAr * (log_off - kOffMeanLog) + kOffSd * rng.normal();

    Eigen::Vector3d z(depth, wind, std::exp(log_off));
    x = wave_transition(x, z) + eta_sd * rng.normal();
    s.covariates.col(t - 1) = z;
    s.hs(t - 1) = std::exp(x);
  }
  return s;
}

WaveSeries load_wave_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int c_ts = table.column("timestamp");
  const int c_hs = table.column("hs");
  const int c_depth = table.column("depth");
  const int c_wind = table.column("wind");
  const int c_off = table.column("hs_off");
  if (c_hs < 0 || c_depth < 0 || c_wind < 0 || c_off < 0) {
    throw std::runtime_error(
        "wave: " + path + " must have hs, depth, wind and hs_off columns");
  }
  const int n = static_cast<int>(table.rows.size());
  if (n < 2) throw std::runtime_error("wave: " + path + " has fewer than 2 rows");
  WaveSeries s;
  s.hs.resize(n);
  s.covariates.resize(3, n);
  for (int r = 0; r < n; ++r) {
    const auto& row = table.rows[static_cast<size_t>(r)];
    if (c_ts >= 0) s.timestamps.push_back(row[static_cast<size_t>(c_ts)]);
    s.hs(r) = parse_optional(row[static_cast<size_t>(c_hs)], path);
    s.covariates(0, r) = parse_optional(row[static_cast<size_t>(c_depth)], path);
    s.covariates(1, r) = parse_optional(row[static_cast<size_t>(c_wind)], path);
    s.covariates(2, r) = parse_optional(row[static_cast<size_t>(c_off)], path);
  }
  return s;
}

void write_wave_csv(const std::string& path, const WaveSeries& series) {
  CsvWriter w(path, {"timestamp", "hs", "depth", "wind", "hs_off"});
  std::vector<std::string> row(5);
  for (int t = 0; t < series.length(); ++t) {
    row[0] = t < static_cast<int>(series.timestamps.size())
                 ? series.timestamps[static_cast<size_t>(t)]
                 : std::string();
    row[1] = std::isnan(series.hs(t)) ? std::string()
                                      : format_double(series.hs(t));
    for (int j = 0; j < 3; ++j) row[2 + j] = format_double(series.covariates(j, t));
    w.write_row(row);
  }
  w.close();
}

std::vector<int> sample_gap_starts(int horizon, int gap_length, int n_gaps,
                                   RandomStream& rng) {
  if (gap_length < 1 || n_gaps < 0) {
    throw std::invalid_argument("wave: bad gap layout");
  }
  if (n_gaps == 0) return {};
  const int max_start = horizon - gap_length + 1;
  if (max_start < 1 || static_cast<long>(n_gaps) * gap_length > horizon) {
    throw std::invalid_argument("wave: gaps do not fit in the horizon");
  }
  std::vector<int> starts;
  int attempts = 0;
  while (static_cast<int>(starts.size()) < n_gaps) {
    if (++attempts > 100000) {
      throw std::invalid_argument("wave: cannot place non-overlapping gaps");
    }
    const int start =
        1 + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(max_start)));
    bool clash = false;
    for (int other : starts) {
      if (start < other + gap_length && other < start + gap_length) {
        clash = true;
        break;
      }
    }
    if (!clash) starts.push_back(start);
  }
  std::sort(starts.begin(), starts.end());
  return starts;
}

std::vector<int> expand_gaps(const std::vector<int>& starts, int gap_length,
                             int horizon) {
  std::vector<int> times;
  for (int start : starts) {
    for (int t = start; t < start + gap_length && t <= horizon; ++t) {
      times.push_back(t);
    }
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

}  // namespace npsem

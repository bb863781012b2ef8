#include "npsem/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "npsem/errors.hpp"

namespace npsem {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& header)
    : path_(path), n_cols_(header.size()) {
  if (header.empty()) throw std::invalid_argument("csv: empty header");
  write_row(header);
}

void CsvWriter::write_row(const std::vector<std::string>& fields) {
  if (!open_) throw std::logic_error("csv: writer already closed");
  if (fields.size() != n_cols_) {
    throw std::invalid_argument("csv: row width does not match header");
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += csv_escape(fields[i]);
  }
  buffer_ += '\n';
}

void CsvWriter::close() {
  if (!open_) return;
  open_ = false;
  std::ofstream out(path_, std::ios::binary);
  if (!out) throw std::runtime_error("csv: cannot open " + path_);
  out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  if (!out) throw std::runtime_error("csv: write failed for " + path_);
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool row_started = false;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    if (table.header.empty()) {
      table.header = std::move(row);
    } else {
      table.rows.push_back(std::move(row));
    }
    row.clear();
    row_started = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        row_started = true;
        break;
      case ',':
        end_field();
        row_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field += c;
        row_started = true;
    }
  }
  if (quoted) throw std::runtime_error("csv: unterminated quoted field");
  if (row_started || !field.empty() || !row.empty()) end_row();

  if (table.header.empty()) throw std::runtime_error("csv: missing header row");
  for (const auto& r : table.rows) {
    if (r.size() != table.header.size()) {
      throw std::runtime_error("csv: ragged row width");
    }
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

namespace {

double parse_field_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("csv: bad numeric field '" + s + "' in " + where);
  }
}

int parse_field_int(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw std::runtime_error("csv: bad integer field '" + s + "' in " + where);
  }
}

}  // namespace

void write_catalog_csv(const std::string& path, const Catalog& catalog) {
  const int d = catalog.state_dim();
  const int p = catalog.cov_dim();
  std::vector<std::string> header = {"traj", "i_time"};
  for (int j = 1; j <= d; ++j) header.push_back("pred_" + std::to_string(j));
  for (int j = 1; j <= p; ++j) header.push_back("cov_" + std::to_string(j));
  for (int j = 1; j <= d; ++j) header.push_back("succ_" + std::to_string(j));

  CsvWriter w(path, header);
  const Eigen::MatrixXd& pts = catalog.points();
  const Eigen::MatrixXd& succ = catalog.successors();
  std::vector<std::string> row(header.size());
  for (long c = 0; c < catalog.size(); ++c) {
    const TimeTag& tag = catalog.tags()[static_cast<size_t>(c)];
    row[0] = std::to_string(tag.traj);
    row[1] = std::to_string(tag.time);
    std::size_t at = 2;
    for (int j = 0; j < d + p; ++j) row[at++] = format_double(pts(j, c));
    for (int j = 0; j < d; ++j) row[at++] = format_double(succ(j, c));
    w.write_row(row);
  }
  w.close();
}

Catalog read_catalog_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  int d = 0;
  while (table.column("pred_" + std::to_string(d + 1)) >= 0) ++d;
  int p = 0;
  while (table.column("cov_" + std::to_string(p + 1)) >= 0) ++p;
  if (d == 0 || table.column("traj") < 0 || table.column("i_time") < 0 ||
      table.column("succ_" + std::to_string(d)) < 0) {
    throw std::runtime_error("csv: " + path + " is not a catalog file");
  }
  const long m = static_cast<long>(table.rows.size());
  Eigen::MatrixXd pred(d, m), cov(p, m), succ(d, m);
  std::vector<TimeTag> tags(static_cast<size_t>(m));
  const int c_traj = table.column("traj");
  const int c_time = table.column("i_time");
  for (long r = 0; r < m; ++r) {
    const auto& row = table.rows[static_cast<size_t>(r)];
    tags[static_cast<size_t>(r)].traj = parse_field_int(row[c_traj], path);
    tags[static_cast<size_t>(r)].time = parse_field_int(row[c_time], path);
    for (int j = 0; j < d; ++j) {
      pred(j, r) = parse_field_double(
          row[table.column("pred_" + std::to_string(j + 1))], path);
      succ(j, r) = parse_field_double(
          row[table.column("succ_" + std::to_string(j + 1))], path);
    }
    for (int j = 0; j < p; ++j) {
      cov(j, r) = parse_field_double(
          row[table.column("cov_" + std::to_string(j + 1))], path);
    }
  }
  return Catalog(std::move(pred), std::move(cov), std::move(succ),
                 std::move(tags));
}

void write_ensemble_csv(const std::string& path,
                        const SmoothingEnsemble& ensemble) {
  ensemble.validate();
  const int d = ensemble.dim();
  std::vector<std::string> header = {"member", "t"};
  for (int j = 1; j <= d; ++j) header.push_back("x_" + std::to_string(j));
  CsvWriter w(path, header);
  std::vector<std::string> row(header.size());
  for (int i = 0; i < ensemble.size(); ++i) {
    const Eigen::MatrixXd& traj = ensemble.member(i);
    for (int t = 0; t < traj.cols(); ++t) {
      row[0] = std::to_string(i + 1);
      row[1] = std::to_string(t);
      for (int j = 0; j < d; ++j) row[2 + j] = format_double(traj(j, t));
      w.write_row(row);
    }
  }
  w.close();
}

void write_trace_csv(const std::string& path, const EstimationTrace& trace,
                     bool include_wallclock) {
  std::vector<std::string> header = {"iter", "sigma2_Q", "sigma2_R", "I_hat",
                                     "k"};
  if (include_wallclock) header.push_back("wallclock_s");
  CsvWriter w(path, header);
  std::vector<std::string> row(header.size());
  for (const TraceRecord& rec : trace.records) {
    row[0] = std::to_string(rec.iter);
    row[1] = format_double(rec.theta.sigma2_Q());
    row[2] = format_double(rec.theta.sigma2_R());
    row[3] = format_double(rec.loglik_proxy);
    row[4] = rec.k_selected ? std::to_string(*rec.k_selected) : "";
    if (include_wallclock) row[5] = format_double(rec.wallclock_s);
    w.write_row(row);
  }
  w.close();
}

void write_states_csv(const std::string& path, const StateSequence& states) {
  const int d = states.dim();
  std::vector<std::string> header = {"t"};
  for (int j = 1; j <= d; ++j) header.push_back("x_" + std::to_string(j));
  CsvWriter w(path, header);
  std::vector<std::string> row(header.size());
  for (int t = 0; t <= states.horizon(); ++t) {
    row[0] = std::to_string(t);
    for (int j = 0; j < d; ++j) row[1 + j] = format_double(states.state(t)(j));
    w.write_row(row);
  }
  w.close();
}

void write_observations_csv(const std::string& path,
                            const ObservationSequence& obs) {
  const int d = obs.dim();
  std::vector<std::string> header = {"t"};
  for (int j = 1; j <= d; ++j) header.push_back("y_" + std::to_string(j));
  CsvWriter w(path, header);
  std::vector<std::string> row(header.size());
  for (int t = 1; t <= obs.horizon(); ++t) {
    row[0] = std::to_string(t);
    for (int j = 0; j < d; ++j) {
      row[1 + j] =
          obs.observed(t) ? format_double(obs.value(t)(j)) : std::string();
    }
    w.write_row(row);
  }
  w.close();
}

}  // namespace npsem

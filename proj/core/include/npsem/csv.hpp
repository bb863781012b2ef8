#pragma once

#include <string>
#include <vector>

#include "npsem/estimators.hpp"
#include "npsem/llr.hpp"
#include "npsem/sequences.hpp"
#include "npsem/smoothing.hpp"

namespace npsem {

/// Round-trip exact decimal form of v ("%.17g"); empty optionals/gaps are
/// written as empty fields.
std::string format_double(double v);

/// RFC-4180 quoting: wraps the field in quotes when it contains a comma,
/// quote, CR or LF, doubling embedded quotes.
std::string csv_escape(const std::string& field);

/// Streaming CSV writer. The header is written on construction; every row
/// must match its width. UTF-8, LF line endings.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void write_row(const std::vector<std::string>& fields);
  void close();

 private:
  std::string path_;
  std::size_t n_cols_ = 0;
  std::string buffer_;
  bool open_ = true;
};

/// Fully parsed CSV file (header + rows). Quoted fields may contain commas,
/// quotes and newlines; both LF and CRLF records are accepted.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, -1 when absent.
  int column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

/// `traj,i_time,pred_1..pred_d,cov_1..cov_p,succ_1..succ_d`
void write_catalog_csv(const std::string& path, const Catalog& catalog);
Catalog read_catalog_csv(const std::string& path);

/// `member,t,x_1..x_d`; one row per (member, t) with t = 0..T.
void write_ensemble_csv(const std::string& path,
                        const SmoothingEnsemble& ensemble);

/// `iter,sigma2_Q,sigma2_R,I_hat,k,wallclock_s`. sigma2 columns report the
/// leading diagonal entries of Q and R; k is empty when no surrogate is in
/// play. include_wallclock=false drops the wallclock_s column so repeated
/// runs emit byte-identical files.
void write_trace_csv(const std::string& path, const EstimationTrace& trace,
                     bool include_wallclock);

/// `t,x_1..x_d` with t = 0..T.
void write_states_csv(const std::string& path, const StateSequence& states);

/// `t,y_1..y_d` with t = 1..T; masked times keep the row with empty value
/// fields.
void write_observations_csv(const std::string& path,
                            const ObservationSequence& obs);

}  // namespace npsem

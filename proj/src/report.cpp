#include "pvlab/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace pvlab {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::ostringstream out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\n") != std::string::npos) {
      out << '"';
      for (char c : f) {
        if (c == '"') out << '"';
        out << c;
      }
      out << '"';
    } else {
      out << f;
    }
  }
  out << '\n';
  return out.str();
}

std::string format_context_set(const std::vector<int>& lags) {
  std::ostringstream out;
  out << '{';
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (i) out << ',';
    out << "T-" << lags[i];
  }
  out << '}';
  return out.str();
}

bool OracleReport::monotone(double slack) const { return first_violation(slack) < 0; }

int OracleReport::first_violation(double slack) const {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].l_star > rows[i - 1].l_star + slack) return int(i);
  return -1;
}

bool OracleReport::identity_ok(double tolerance) const {
  for (const OracleRow& row : rows)
    if (row.has_gap && std::abs(row.gap_to_prev - row.lotv_gap) > tolerance) return false;
  return true;
}

std::string OracleReport::csv_header() {
  return "chain_kind,T,d,context_set,L_star,gap_to_prev,equality_flag\n";
}

std::string OracleReport::to_csv() const {
  std::string out = csv_header();
  for (const OracleRow& row : rows) {
    out += csv_line({chain_kind, std::to_string(n_frames), std::to_string(dim),
                     format_context_set(row.context_lags), format_number(row.l_star),
                     row.has_gap ? format_number(row.gap_to_prev) : "",
                     row.has_gap ? (row.equality_flag ? "true" : "false") : ""});
  }
  return out;
}

std::string EvalReport::csv_header() {
  return "chain_kind,T,d,k,n_train,n_test,mse,oracle_lstar,psnr_db,mean_gap,"
         "cov_frobenius_gap,teacher_forced,seed\n";
}

std::string EvalReport::to_csv() const {
  std::string out = csv_header();
  for (const EvalRow& row : rows) {
    out += csv_line({row.chain_kind, std::to_string(row.n_frames), std::to_string(row.dim),
                     std::to_string(row.context_size), std::to_string(row.n_train),
                     std::to_string(row.n_test), format_number(row.mse),
                     format_number(row.oracle_lstar), format_number(row.psnr_db),
                     format_number(row.mean_gap), format_number(row.cov_frobenius_gap),
                     row.teacher_forced ? "true" : "false", std::to_string(row.seed)});
  }
  return out;
}

}  // namespace pvlab

#pragma once

// CSV emission. Numbers use 12 digits after the point in scientific notation
// with a bare exponent (1.000000000000e0, -2.5e-3 style), so output is
// byte-identical for identical inputs.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "davydov_nh/errors.hpp"
#include "davydov_nh/trajectory.hpp"

namespace davydov_nh::cli {

inline std::string format_value(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific, 12);
  std::string s(buf, res.ptr);
  const auto e = s.find('e');
  if (e == std::string::npos) return s;  // nan, inf
  std::string mant = s.substr(0, e);
  std::string exp = s.substr(e + 1);
  bool negative = false;
  if (!exp.empty() && (exp[0] == '+' || exp[0] == '-')) {
    negative = exp[0] == '-';
    exp.erase(0, 1);
  }
  const auto nz = exp.find_first_not_of('0');
  exp = nz == std::string::npos ? "0" : exp.substr(nz);
  return mant + "e" + (negative && exp != "0" ? "-" : "") + exp;
}

inline std::vector<std::string> trajectory_header(const ObservableRecord& first) {
  std::vector<std::string> h{"t", "norm"};
  for (Index s = 0; s < first.populations.size(); ++s) h.push_back("pop_s" + std::to_string(s + 1));
  if (first.sigma_z) h.push_back("sigma_z");
  for (Index k = 0; k < first.mode_occupations.size(); ++k) h.push_back("n_mode_" + std::to_string(k + 1));
  h.push_back("n_total");
  return h;
}

inline std::vector<double> trajectory_row(const ObservableRecord& r) {
  std::vector<double> row{r.time, r.norm};
  for (Index s = 0; s < r.populations.size(); ++s) row.push_back(r.populations(s));
  if (r.sigma_z) row.push_back(*r.sigma_z);
  for (Index k = 0; k < r.mode_occupations.size(); ++k) row.push_back(r.mode_occupations(k));
  row.push_back(r.total_bosons);
  return row;
}

inline std::string csv_text(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_value(row[i]);
    }
    out += '\n';
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  f.close();
  if (!f) throw IoError("write failed: " + path.string());
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  write_text(path, csv_text(header, rows));
}

/// Header t,norm,pop_s1..pop_sN,[sigma_z,]n_mode_1..n_mode_K,n_total and one row per record.
inline void emit_csv(const Trajectory& traj, const std::filesystem::path& path) {
  if (traj.empty()) throw ShapeError("emit_csv: empty trajectory for " + path.string());
  std::vector<std::vector<double>> rows;
  rows.reserve(traj.size());
  for (const auto& r : traj.records) rows.push_back(trajectory_row(r));
  write_csv(path, trajectory_header(traj.records.front()), rows);
}

}  // namespace davydov_nh::cli

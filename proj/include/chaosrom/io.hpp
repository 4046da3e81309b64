#pragma once

// Text formats: trajectory CSV (header `time,x1,...,xn`, blank line between
// trajectories) and helpers for atomic file output.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "chaosrom/errors.hpp"
#include "chaosrom/lorenz96.hpp"

namespace chaosrom {

// 17 significant digits: round-trips every double bit-exactly.
inline std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline bool parse_real(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc{} && res.ptr == text.data() + text.size();
}

inline std::string csv_header(Eigen::Index n) {
  std::string header = "time";
  for (Eigen::Index j = 1; j <= n; ++j) header += ",x" + std::to_string(j);
  return header;
}

inline void write_state_row(std::ostream& os, double time, const StateVector& x) {
  os << format_real(time);
  for (Eigen::Index j = 0; j < x.size(); ++j) os << ',' << format_real(x[j]);
  os << '\n';
}

inline void write_trajectories(std::ostream& os, const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) throw DimensionError("no trajectories to write");
  os << csv_header(trajectories.front().dimension()) << '\n';
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (i > 0) os << '\n';
    const auto& traj = trajectories[i];
    for (std::size_t k = 0; k < traj.size(); ++k) write_state_row(os, traj.times[k], traj.states[k]);
  }
}

inline std::vector<Trajectory> read_trajectories(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index n = -1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (line.rfind("time", 0) != 0) throw ParseError("expected `time,x1,...` header", line_no);
    n = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
    if (line != csv_header(n)) throw ParseError("malformed header", line_no);
    break;
  }
  if (n < 1) throw ParseError("missing header", line_no);

  std::vector<Trajectory> out;
  Trajectory current;
  auto flush = [&] {
    if (current.size() > 0) {
      out.push_back(std::move(current));
      current = Trajectory{};
    }
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.front() == '#') continue;
    std::vector<double> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      double v = 0;
      const std::string_view field(line.data() + start,
                                   (comma == std::string::npos ? line.size() : comma) - start);
      if (!parse_real(field, v)) throw ParseError("bad number `" + std::string(field) + "`", line_no);
      fields.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (static_cast<Eigen::Index>(fields.size()) != n + 1) {
      throw ParseError("expected " + std::to_string(n + 1) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    if (!current.times.empty() && !(fields[0] > current.times.back())) {
      throw ParseError("times must strictly increase within a trajectory", line_no);
    }
    current.times.push_back(fields[0]);
    current.states.push_back(Eigen::Map<const Eigen::VectorXd>(fields.data() + 1, n));
  }
  flush();
  return out;
}

inline std::vector<Trajectory> load_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_trajectories(in);
}

// Writes through a sibling temp file and renames it into place, so readers
// never observe a partially written output.
inline void write_file_atomically(const std::filesystem::path& path,
                                  const std::function<void(std::ostream&)>& writer) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    try {
      writer(out);
    } catch (...) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw;
    }
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

inline void save_trajectories(const std::filesystem::path& path,
                              const std::vector<Trajectory>& trajectories) {
  write_file_atomically(path, [&](std::ostream& os) { write_trajectories(os, trajectories); });
}

}  // namespace chaosrom

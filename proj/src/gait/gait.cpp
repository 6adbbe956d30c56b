#include "terrasim/gait.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace terrasim {

void GaitProgram::validate() const {
  if (!(A_ver >= 0.0) || !(A_hor >= 0.0)) throw ConfigError("gait amplitudes must be >= 0");
  if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("gait frequency must be > 0");
  if (n_joints < 1) throw ConfigError("gait needs at least one joint");
  if (!std::isfinite(phase_step)) throw ConfigError("gait phase step must be finite");
  if (!(ramp_time >= 0.0)) throw ConfigError("gait ramp time must be >= 0");
  if (!signs.empty()) {
    if (static_cast<int>(signs.size()) != n_joints)
      throw ConfigError("gait sign list length must equal the joint count");
    for (int s : signs)
      if (s != 1 && s != -1) throw ConfigError("gait signs must be +1 or -1");
  }
}

int GaitProgram::sign(int joint) const {
  if (!signs.empty()) return signs[joint];
  return joint % 2 == 0 ? 1 : -1;
}

double gait_ramp(const GaitProgram& g, double t) {
  if (g.ramp_time <= 0.0) return 1.0;
  return std::min(1.0, std::max(0.0, t) / g.ramp_time);
}

Eigen::VectorXd gait_sample(const GaitProgram& g, double t) {
  const double ramp = gait_ramp(g, t);
  Eigen::VectorXd q(g.n_joints);
  for (int i = 0; i < g.n_joints; ++i) {
    const double A = i % 2 == 0 ? g.A_ver : g.A_hor;
    q[i] = A * ramp * g.sign(i) * std::sin(2.0 * M_PI * g.f * t + g.phase_step * i);
  }
  return q;
}

Eigen::VectorXd gait_velocity(const GaitProgram& g, double t) {
  const double ramp = gait_ramp(g, t);
  const double ramp_rate = (g.ramp_time > 0.0 && t < g.ramp_time) ? 1.0 / g.ramp_time : 0.0;
  const double w = 2.0 * M_PI * g.f;
  Eigen::VectorXd qd(g.n_joints);
  for (int i = 0; i < g.n_joints; ++i) {
    const double A = (i % 2 == 0 ? g.A_ver : g.A_hor) * g.sign(i);
    const double phase = w * t + g.phase_step * i;
    qd[i] = A * (ramp_rate * std::sin(phase) + ramp * w * std::cos(phase));
  }
  return qd;
}

void gait_to_csv(const GaitProgram& g, double duration, double rate, std::ostream& out) {
  g.validate();
  if (!(rate > 0.0)) throw ConfigError("gait rate must be > 0");
  if (!(duration >= 0.0)) throw ConfigError("gait duration must be >= 0");
  out << "t";
  for (int i = 0; i < g.n_joints; ++i) out << ",q" << i;
  out << '\n';
  const long rows = std::lround(duration * rate);
  char buf[32];
  for (long k = 0; k <= rows; ++k) {
    const double t = static_cast<double>(k) / rate;
    std::snprintf(buf, sizeof buf, "%.17g", t);
    out << buf;
    const Eigen::VectorXd q = gait_sample(g, t);
    for (int i = 0; i < q.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", q[i]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

void gait_to_csv(const GaitProgram& g, double duration, double rate, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  gait_to_csv(g, duration, rate, out);
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

GaitTrajectory::GaitTrajectory(std::vector<double> times, std::vector<Eigen::VectorXd> rows)
    : times_(std::move(times)), rows_(std::move(rows)) {
  if (times_.empty() || times_.size() != rows_.size())
    throw ConfigError("trajectory needs at least one row");
  for (std::size_t k = 1; k < times_.size(); ++k)
    if (!(times_[k] > times_[k - 1])) throw ConfigError("trajectory time must increase");
}

Eigen::VectorXd GaitTrajectory::sample(double t) const {
  if (t <= times_.front()) return rows_.front();
  if (t >= times_.back()) return rows_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times_.begin());
  const double a = (t - times_[k - 1]) / (times_[k] - times_[k - 1]);
  if (a == 0.0) return rows_[k - 1];
  return (1.0 - a) * rows_[k - 1] + a * rows_[k];
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, int line) {
  if (s.empty()) throw ParseError("empty field", line);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("not a number: '" + s + "'", line);
  }
  if (used != s.size() || !std::isfinite(v)) throw ParseError("not a number: '" + s + "'", line);
  return v;
}

}  // namespace

GaitTrajectory gait_from_csv(std::istream& in) {
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty trajectory file", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_commas(line);
  if (header.size() < 2 || header[0] != "t")
    throw ParseError("header must be t,q0,...", line_no);
  const std::size_t cols = header.size();
  std::vector<double> times;
  std::vector<Eigen::VectorXd> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_commas(line);
    if (cells.size() != cols)
      throw ParseError("expected " + std::to_string(cols) + " fields, got " +
                           std::to_string(cells.size()),
                       line_no);
    const double t = parse_number(cells[0], line_no);
    if (!times.empty() && !(t > times.back())) throw ParseError("time is not increasing", line_no);
    Eigen::VectorXd q(cols - 1);
    for (std::size_t c = 1; c < cols; ++c) q[c - 1] = parse_number(cells[c], line_no);
    times.push_back(t);
    rows.push_back(std::move(q));
  }
  if (times.empty()) throw ParseError("trajectory has no rows", line_no);
  return GaitTrajectory(std::move(times), std::move(rows));
}

GaitTrajectory gait_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return gait_from_csv(in);
}

}  // namespace terrasim

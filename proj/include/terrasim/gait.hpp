#pragma once

// Sidewinding joint commands: phase-offset sinusoids with alternating
// vertical and horizontal amplitudes, plus trajectory CSV I/O.

#include "terrasim/contact.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace terrasim {

struct GaitProgram {
  double A_ver = 40.0 * M_PI / 180.0;  // rad, even joints
  double A_hor = 20.0 * M_PI / 180.0;  // rad, odd joints
  double f = 0.4;                      // Hz
  int n_joints = 6;
  double phase_step = M_PI / 6.0;      // rad per joint index
  double ramp_time = 2.0;              // s
  std::vector<int> signs;              // +1/-1 per joint; empty means alternating +,-

  void validate() const;
  int sign(int joint) const;

  static GaitProgram gait1() { return {}; }
  static GaitProgram gait2() {
    GaitProgram g;
    g.A_ver = 60.0 * M_PI / 180.0;
    g.A_hor = 30.0 * M_PI / 180.0;
    g.f = 0.3;
    return g;
  }
};

double gait_ramp(const GaitProgram& g, double t);

/// Joint angles at time t >= 0.
Eigen::VectorXd gait_sample(const GaitProgram& g, double t);
/// Time derivative of gait_sample.
Eigen::VectorXd gait_velocity(const GaitProgram& g, double t);

/// Rows t, q0..q_{n-1} at t = k / rate for k = 0..round(duration * rate).
void gait_to_csv(const GaitProgram& g, double duration, double rate, std::ostream& out);
/// Throws IoError when the file cannot be written.
void gait_to_csv(const GaitProgram& g, double duration, double rate, const std::string& path);

class GaitTrajectory {
 public:
  GaitTrajectory(std::vector<double> times, std::vector<Eigen::VectorXd> rows);

  /// Linear interpolation between rows, clamped to the first and last row.
  Eigen::VectorXd sample(double t) const;

  int joints() const { return static_cast<int>(rows_.front().size()); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Eigen::VectorXd>& rows() const { return rows_; }

 private:
  std::vector<double> times_;
  std::vector<Eigen::VectorXd> rows_;
};

/// Throws ParseError (with the 1-based line) on malformed rows or non-increasing
/// time, IoError when the file cannot be opened.
GaitTrajectory gait_from_csv(std::istream& in);
GaitTrajectory gait_from_csv(const std::string& path);

}  // namespace terrasim

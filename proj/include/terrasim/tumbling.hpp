#pragma once

// Prescribed-spin wheel descending a slope, either on a rigid plane or
// through a DEM bed.

#include "terrasim/dem.hpp"
#include "terrasim/multibody.hpp"

#include <functional>
#include <vector>

namespace terrasim {

struct TumbleConfig {
  WheelParams wheel;                 // radius 0.2 m, width 0.12 m, mass 6 kg
  double omega = M_PI / 4.0;         // rad/s, prescribed spin
  double start_x = 0.3;              // m along the slope
  SmoothedContactParams ground;      // wheel against the rigid floor
  double t_end = 2.0;                // s
  double output_fps = 10.0;
  int wheel_material = 1;
};

struct WheelLogRow {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  double roll = 0.0;
  Vec3 velocity = Vec3::Zero();
  double omega = 0.0;
  Vec3 force = Vec3::Zero();   // grain or ground reaction on the wheel
  Vec3 torque = Vec3::Zero();
  int contacts = 0;
};

struct TumbleResult {
  std::vector<WheelLogRow> frames;  // t = 0, then one row per output frame
  double descent_distance = 0.0;  // m along the slope at t_end
  double mean_slip_ratio = 0.0;
  long steps = 0;
  int nonconverged = 0;
};

struct TumbleCallbacks {
  std::function<void(long step, const GeneralizedState&)> on_step;
  /// Called after each output frame is logged, with its index in frames.
  std::function<void(const DemWorld&, int frame)> on_frame;
};

/// Wheel centre z that just touches the highest grain under the rim, or the
/// floor when the bed is empty.
double wheel_rest_height(const DemWorld& world, const WheelParams& wheel, double x);

/// Wheel driven through the DEM world at the world's timestep. The wheel is
/// advanced by the multibody stepper with the grain reaction as an external
/// load and the floor handled by the smoothed law.
TumbleResult run_tumbling(DemWorld& world, const TumbleConfig& cfg, const TumbleCallbacks& cb = {});

/// The same wheel on the bare inclined plane, multibody only.
TumbleResult run_tumbling_rigid(const TumbleConfig& cfg, double h, const Vec3& gravity,
                                const TumbleCallbacks& cb = {});

}  // namespace terrasim

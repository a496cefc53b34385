// Copyright 2026 The lanekeep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>

#include "lanekeep/geometry.hpp"

namespace lanekeep {

// Defaults are the car1-trb1 values used for all experiments.
struct VehicleParams {
  double cf = 80000.0;  // front cornering stiffness, N/rad
  double cr = 80000.0;  // rear cornering stiffness, N/rad
  double lf = 1.27;     // CG to front axle, m
  double lr = 1.37;     // CG to rear axle, m
  double mass = 1150.0;
  double iz = 2000.0;   // yaw inertia, kg m^2
  double delta_max = 0.35;  // front-wheel lock, rad

  double wheelbase() const { return lf + lr; }
  /// Throws InvalidArgument unless every field is positive and
  /// delta_max <= pi/4.
  void validate() const;
};

struct KinematicState {
  WorldPose pose;
  double v = 0.0;
};

struct ErrorState {
  double e1 = 0.0;
  double e1_dot = 0.0;
  double e2 = 0.0;
  double e2_dot = 0.0;

  Eigen::Vector4d vector() const { return {e1, e1_dot, e2, e2_dot}; }
};

struct ErrorDynamics {
  Eigen::Matrix4d a;
  Eigen::Vector4d b;
};

/// Continuous-time lateral error model at longitudinal speed vx. Throws
/// InvalidArgument for vx <= 0.
ErrorDynamics error_dynamics(const VehicleParams& params, double vx);

/// Kinematic slip angle at the centre of gravity.
double slip_angle(const VehicleParams& params, double delta);

/// One forward-Euler step of the constant-speed kinematic bicycle.
KinematicState kinematic_step(const KinematicState& state,
                              const VehicleParams& params, double delta,
                              double dt);

struct BodyVelocity {
  double vx = 0.0;
  double vy = 0.0;
};

BodyVelocity lateral_velocity(const KinematicState& state,
                              const VehicleParams& params, double delta);

/// Error state from two consecutive Frenet poses, by backward difference.
ErrorState error_state_from_frenet(const TrackPose& current,
                                   const TrackPose& previous, double dt);

inline double kmh_to_ms(double kmh) { return kmh / 3.6; }

}  // namespace lanekeep

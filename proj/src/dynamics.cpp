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

#include "lanekeep/dynamics.hpp"

#include <cmath>
#include <numbers>

namespace lanekeep {

void VehicleParams::validate() const {
  for (double v : {cf, cr, lf, lr, mass, iz, delta_max}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("vehicle parameters must all be positive");
    }
  }
  if (delta_max > std::numbers::pi / 4.0) {
    throw InvalidArgument("delta_max must not exceed pi/4");
  }
}

ErrorDynamics error_dynamics(const VehicleParams& p, double vx) {
  if (!(vx > 0.0)) {
    throw InvalidArgument("error dynamics are singular for vx <= 0");
  }
  const double c_sum = 2.0 * p.cf + 2.0 * p.cr;
  const double c_moment = -2.0 * p.cf * p.lf + 2.0 * p.cr * p.lr;
  ErrorDynamics out;
  out.a.setZero();
  out.a(0, 1) = 1.0;
  out.a(1, 1) = -c_sum / (p.mass * vx);
  out.a(1, 2) = c_sum / p.mass;
  out.a(1, 3) = c_moment / (p.mass * vx);
  out.a(2, 3) = 1.0;
  out.a(3, 1) = c_moment / (p.iz * vx);
  out.a(3, 2) = -c_moment / p.iz;
  // Yaw damping is -(2 Cf lf^2 + 2 Cr lr^2) / (Iz vx); a positive entry here
  // makes the synthesized yaw-rate gain oscillate on the kinematic plant.
  out.a(3, 3) = -(2.0 * p.cf * p.lf * p.lf + 2.0 * p.cr * p.lr * p.lr) /
                (p.iz * vx);
  out.b << 0.0, 2.0 * p.cf / p.mass, 0.0, 2.0 * p.cf * p.lf / p.iz;
  return out;
}

double slip_angle(const VehicleParams& p, double delta) {
  return std::atan(p.lr / (p.lf + p.lr) * std::tan(delta));
}

KinematicState kinematic_step(const KinematicState& state,
                              const VehicleParams& p, double delta,
                              double dt) {
  const double beta = slip_angle(p, delta);
  const double psi = state.pose.psi;
  KinematicState next = state;
  next.pose.x = state.pose.x + state.v * std::cos(psi + beta) * dt;
  next.pose.y = state.pose.y + state.v * std::sin(psi + beta) * dt;
  next.pose.psi = wrap_angle(
      psi + state.v * std::cos(beta) / (p.lf + p.lr) * std::tan(delta) * dt);
  return next;
}

BodyVelocity lateral_velocity(const KinematicState& state,
                              const VehicleParams& p, double delta) {
  const double beta = slip_angle(p, delta);
  return {state.v * std::cos(beta), state.v * std::sin(beta)};
}

ErrorState error_state_from_frenet(const TrackPose& current,
                                   const TrackPose& previous, double dt) {
  ErrorState e;
  e.e1 = current.d;
  e.e2 = current.theta;
  e.e1_dot = (current.d - previous.d) / dt;
  e.e2_dot = wrap_angle(current.theta - previous.theta) / dt;
  return e;
}

}  // namespace lanekeep

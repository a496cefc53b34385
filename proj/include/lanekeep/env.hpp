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

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>

#include "lanekeep/dynamics.hpp"
#include "lanekeep/geometry.hpp"

namespace lanekeep {

inline constexpr double kSpeedNormalizer = 75.0 / 3.6;  // m/s
inline constexpr int kObservationDim = 7;

struct EnvConfig {
  double dt = 0.05;
  int max_steps = 6500;
  double noise_sigma = 0.05;
  double lambda = 1.0;
  double speed = 70.0 / 3.6;
  std::uint64_t seed = 0;
  double heading_lookahead = kDefaultHeadingLookahead;
  double curvature_threshold = kDefaultCurvatureThreshold;

  void validate() const;
};

/// Normalized RL state. sigma = [d/w, theta/pi, one-hot heading class],
/// eta = [vx, vy] / 75 km/h.
struct Observation {
  std::array<double, 5> sigma{};
  std::array<double, 2> eta{};

  std::array<double, kObservationDim> vector() const;
  /// Heading class recovered from the (possibly noisy) one-hot entries.
  HeadingClass hard_class() const;

  bool operator==(const Observation&) const = default;
};

struct StepInfo {
  int step = 0;
  double s_progress = 0.0;  // unwrapped arc length travelled, m
  double d = 0.0;
  double theta = 0.0;
  double raw_action = 0.0;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct EpisodeScore {
  double total = 0.0;
  int steps = 0;
  bool terminated_early = false;
  double mean_abs_d = 0.0;
};

inline constexpr double kTerminalReward = -2.0;

/// cos(theta) - lambda sin|theta| - d/w inside |theta| < pi/2, else -2.
double reward(double theta, double d, double half_width, double lambda);

/// Episode-ending pose: |d| > w (strict) or |theta| >= pi/2.
bool is_terminal_pose(double d, double theta, double half_width);

/// -(0.3 e1^2 + e2^2 + 0.03 delta^2).
double quadratic_reward(double e1, double e2, double delta);

Observation normalize_state(double d, double theta, HeadingClass heading,
                            double vx, double vy, double half_width);

/// Episodic lane-keeping environment on a constant-speed kinematic bicycle
/// stepped at config.dt. Single-threaded; one RNG per instance drives all
/// observation noise, so a seed fixes the whole episode.
class LaneKeepEnv {
 public:
  explicit LaneKeepEnv(Track track, VehicleParams params = {});

  Observation reset(const EnvConfig& config);
  Observation reset(Track track, const EnvConfig& config);

  /// Applies a normalized steering command (clamped to [-1, 1]). Throws
  /// LifecycleError when no episode is running and InvalidArgument for a
  /// non-finite action.
  StepResult step(double action);

  bool started() const { return started_; }
  bool done() const { return done_; }
  /// True when the episode ended by leaving the track or turning backward.
  bool terminated() const { return terminated_; }
  int steps() const { return step_; }
  const Track& track() const { return track_; }
  const VehicleParams& params() const { return params_; }
  const EnvConfig& config() const { return config_; }
  const KinematicState& vehicle() const { return vehicle_; }
  const TrackPose& track_pose() const { return pose_; }
  ErrorState error_state() const;
  const Observation& observation() const { return obs_; }
  double last_delta() const { return delta_; }
  BodyVelocity body_velocity() const;

 private:
  Observation observe();

  Track track_;
  VehicleParams params_;
  EnvConfig config_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  KinematicState vehicle_;
  TrackPose pose_;
  TrackPose prev_pose_;
  Observation obs_;
  double delta_ = 0.0;
  double progress_ = 0.0;
  int step_ = 0;
  bool started_ = false;
  bool done_ = false;
  bool terminated_ = false;
};

/// Everything a controller may read at a control step. `error` is the
/// perceived error state: lateral offset and heading error come from the
/// noisy observation, the rate terms from the vehicle's own motion.
/// `exact_error` is ground truth.
struct ControlInput {
  const Observation& obs;
  const ErrorState& error;
  const ErrorState& exact_error;
  const KinematicState& vehicle;
  const TrackPose& track_pose;
  const Track& track;
  const VehicleParams& params;
  const EnvConfig& config;
};

/// Replaces e1 and e2 with the values carried by the observation.
ErrorState perceived_error_state(const ErrorState& exact,
                                 const Observation& obs, double half_width);

class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset() {}
  /// Normalized steering in [-1, 1].
  virtual double act(const ControlInput& input) = 0;
};

struct TraceRow {
  int step = 0;
  double t = 0.0;
  double s = 0.0;
  double d = 0.0;
  double theta = 0.0;
  double action = 0.0;
  double delta = 0.0;
  double reward = 0.0;
  double vx = 0.0;
  double vy = 0.0;
};

/// Writes the step,t,s,d,theta,action,delta,reward,vx,vy trace format.
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& out);
  void write(const TraceRow& row);

 private:
  std::ostream& out_;
};

/// Runs one episode and sums the per-step rewards. With gamma < 1 the sum is
/// discounted (reporting only).
EpisodeScore score_episode(Controller& controller, const Track& track,
                           const EnvConfig& config,
                           const VehicleParams& params = {},
                           TraceWriter* trace = nullptr, double gamma = 1.0);

}  // namespace lanekeep

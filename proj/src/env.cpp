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

#include "lanekeep/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "lanekeep/format.hpp"

namespace lanekeep {

void EnvConfig::validate() const {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (max_steps <= 0) throw InvalidArgument("max_steps must be positive");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
  if (!(speed > 0.0)) throw InvalidArgument("speed must be positive");
  if (!(heading_lookahead > 0.0)) {
    throw InvalidArgument("heading_lookahead must be positive");
  }
}

std::array<double, kObservationDim> Observation::vector() const {
  return {sigma[0], sigma[1], sigma[2], sigma[3], sigma[4], eta[0], eta[1]};
}

HeadingClass Observation::hard_class() const {
  const auto it = std::max_element(sigma.begin() + 2, sigma.end());
  return static_cast<HeadingClass>(std::distance(sigma.begin() + 2, it));
}

double reward(double theta, double d, double half_width, double lambda) {
  if (std::abs(theta) < std::numbers::pi / 2.0) {
    return std::cos(theta) - lambda * std::sin(std::abs(theta)) -
           d / half_width;
  }
  return kTerminalReward;
}

bool is_terminal_pose(double d, double theta, double half_width) {
  return std::abs(d) > half_width || std::abs(theta) >= std::numbers::pi / 2.0;
}

double quadratic_reward(double e1, double e2, double delta) {
  return -(0.3 * e1 * e1 + e2 * e2 + 0.03 * delta * delta);
}

Observation normalize_state(double d, double theta, HeadingClass heading,
                            double vx, double vy, double half_width) {
  Observation obs;
  obs.sigma[0] = d / half_width;
  obs.sigma[1] = theta / std::numbers::pi;
  obs.sigma[2 + static_cast<int>(heading)] = 1.0;
  obs.eta[0] = vx / kSpeedNormalizer;
  obs.eta[1] = vy / kSpeedNormalizer;
  return obs;
}

LaneKeepEnv::LaneKeepEnv(Track track, VehicleParams params)
    : track_(std::move(track)), params_(params) {
  params_.validate();
}

Observation LaneKeepEnv::reset(Track track, const EnvConfig& config) {
  track_ = std::move(track);
  return reset(config);
}

Observation LaneKeepEnv::reset(const EnvConfig& config) {
  config.validate();
  config_ = config;
  rng_.seed(config.seed);
  normal_.reset();
  vehicle_.pose = track_.centerline_pose(0.0);
  vehicle_.v = config.speed;
  pose_ = track_.world_to_track(vehicle_.pose);
  prev_pose_ = pose_;
  delta_ = 0.0;
  progress_ = 0.0;
  step_ = 0;
  started_ = true;
  done_ = false;
  terminated_ = false;
  obs_ = observe();
  return obs_;
}

BodyVelocity LaneKeepEnv::body_velocity() const {
  return lateral_velocity(vehicle_, params_, delta_);
}

ErrorState LaneKeepEnv::error_state() const {
  return error_state_from_frenet(pose_, prev_pose_, config_.dt);
}

Observation LaneKeepEnv::observe() {
  const BodyVelocity vel = body_velocity();
  Observation obs =
      normalize_state(pose_.d, pose_.theta,
                      track_.heading_class(pose_.s, config_.heading_lookahead,
                                           config_.curvature_threshold),
                      vel.vx, vel.vy, track_.half_width());
  if (config_.noise_sigma > 0.0) {
    for (double& v : obs.sigma) v += config_.noise_sigma * normal_(rng_);
    for (double& v : obs.eta) v += config_.noise_sigma * normal_(rng_);
  }
  return obs;
}

StepResult LaneKeepEnv::step(double action) {
  if (!started_) throw LifecycleError("step called before reset");
  if (done_) throw LifecycleError("episode is done; call reset");
  if (!std::isfinite(action)) throw InvalidArgument("action must be finite");

  const double clamped = std::clamp(action, -1.0, 1.0);
  delta_ = clamped * params_.delta_max;
  vehicle_ = kinematic_step(vehicle_, params_, delta_, config_.dt);
  prev_pose_ = pose_;
  pose_ = track_.world_to_track(vehicle_.pose);
  double ds = pose_.s - prev_pose_.s;
  if (track_.closed()) {
    const double len = track_.total_length();
    if (ds > 0.5 * len) ds -= len;
    if (ds < -0.5 * len) ds += len;
  }
  progress_ += ds;
  ++step_;

  StepResult out;
  if (is_terminal_pose(pose_.d, pose_.theta, track_.half_width())) {
    out.reward = kTerminalReward;
    done_ = true;
    terminated_ = true;
  } else {
    out.reward = reward(pose_.theta, std::abs(pose_.d), track_.half_width(),
                        config_.lambda);
    done_ = step_ >= config_.max_steps;
  }
  obs_ = observe();
  out.obs = obs_;
  out.done = done_;
  out.info = {step_, progress_, pose_.d, pose_.theta, action};
  return out;
}

TraceWriter::TraceWriter(std::ostream& out) : out_(out) {
  out_ << "step,t,s,d,theta,action,delta,reward,vx,vy\n";
}

void TraceWriter::write(const TraceRow& r) {
  out_ << r.step << ',' << format_double(r.t) << ',' << format_double(r.s)
       << ',' << format_double(r.d) << ',' << format_double(r.theta) << ','
       << format_double(r.action) << ',' << format_double(r.delta) << ','
       << format_double(r.reward) << ',' << format_double(r.vx) << ','
       << format_double(r.vy) << '\n';
}

ErrorState perceived_error_state(const ErrorState& exact,
                                 const Observation& obs, double half_width) {
  ErrorState e = exact;
  e.e1 = obs.sigma[0] * half_width;
  e.e2 = obs.sigma[1] * std::numbers::pi;
  return e;
}

EpisodeScore score_episode(Controller& controller, const Track& track,
                           const EnvConfig& config,
                           const VehicleParams& params, TraceWriter* trace,
                           double gamma) {
  LaneKeepEnv env(track, params);
  env.reset(config);
  controller.reset();
  EpisodeScore score;
  double discount = 1.0;
  double abs_d_sum = 0.0;
  while (!env.done()) {
    const ErrorState exact = env.error_state();
    const ErrorState error = perceived_error_state(
        exact, env.observation(), track.half_width());
    const ControlInput input{env.observation(), error,       exact,
                             env.vehicle(),     env.track_pose(),
                             env.track(),       env.params(), env.config()};
    const double action = controller.act(input);
    const StepResult res = env.step(action);
    score.total += discount * res.reward;
    discount *= gamma;
    score.steps = res.info.step;
    abs_d_sum += std::abs(res.info.d);
    if (trace != nullptr) {
      const BodyVelocity vel = env.body_velocity();
      trace->write({res.info.step, res.info.step * config.dt,
                    env.track_pose().s, res.info.d, res.info.theta, action,
                    env.last_delta(), res.reward, vel.vx, vel.vy});
    }
  }
  score.terminated_early = env.terminated();
  score.mean_abs_d = score.steps > 0 ? abs_d_sum / score.steps : 0.0;
  return score;
}

}  // namespace lanekeep

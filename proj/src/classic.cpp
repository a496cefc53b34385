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

#include "lanekeep/classic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "lanekeep/config.hpp"
#include "lanekeep/format.hpp"

namespace lanekeep::classic {

void LqrWeights::validate() const {
  for (double q : {q1, q2, q3, q4}) {
    if (!(q >= 0.0)) throw InvalidArgument("LQR state weights must be >= 0");
  }
  if (!(q1 > 0.0 || q2 > 0.0 || q3 > 0.0 || q4 > 0.0)) {
    throw InvalidArgument("at least one LQR state weight must be positive");
  }
  if (!(rho > 0.0)) throw InvalidArgument("LQR action weight must be positive");
}

Eigen::Matrix4d LqrWeights::q() const {
  return Eigen::Vector4d(q1, q2, q3, q4).asDiagonal();
}

DareSolution solve_dare(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                        const DareOptions& options) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != b.cols() || r.cols() != b.cols()) {
    throw InvalidArgument("Riccati matrices have inconsistent shapes");
  }
  Eigen::MatrixXd p = q;
  if (options.observer) options.observer(p);
  double change = std::numeric_limits<double>::infinity();
  long it = 0;
  while (it < options.max_iterations) {
    const Eigen::MatrixXd bt_p = b.transpose() * p;
    const Eigen::MatrixXd gain = (r + bt_p * b).ldlt().solve(bt_p * a);
    Eigen::MatrixXd next =
        a.transpose() * p * a - a.transpose() * p * b * gain + q;
    next = 0.5 * (next + next.transpose()).eval();
    change = (next - p).cwiseAbs().maxCoeff();
    p = std::move(next);
    ++it;
    if (options.observer) options.observer(p);
    if (!std::isfinite(change)) break;
    if (change < options.tol) {
      DareSolution out;
      const Eigen::MatrixXd bt_p_final = b.transpose() * p;
      out.k = (r + bt_p_final * b).ldlt().solve(bt_p_final * a);
      out.p = std::move(p);
      out.residual = change;
      out.iterations = it;
      return out;
    }
  }
  std::ostringstream msg;
  msg << "Riccati iteration did not converge after " << it
      << " iterations (last change " << change << ")";
  throw SynthesisError(msg.str(), change);
}

DiscreteModel discretize(const VehicleParams& params, double vx, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  const ErrorDynamics c = error_dynamics(params, vx);
  return {Eigen::Matrix4d::Identity() + c.a * dt, c.b * dt};
}

LqrGain lqr_synthesize(const VehicleParams& params, double vx,
                       const LqrWeights& weights, double dt,
                       const DareOptions& options) {
  weights.validate();
  const DiscreteModel m = discretize(params, vx, dt);
  const Eigen::MatrixXd r = Eigen::MatrixXd::Constant(1, 1, weights.rho);
  const DareSolution sol = solve_dare(m.a, m.b, weights.q(), r, options);
  LqrGain gain;
  gain.k = sol.k;
  gain.p = sol.p;
  gain.residual = sol.residual;
  gain.iterations = sol.iterations;
  return gain;
}

double spectral_radius(const Eigen::MatrixXd& m) {
  const Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double closed_loop_spectral_radius(const VehicleParams& params, double vx,
                                   const LqrGain& gain, double dt) {
  const DiscreteModel m = discretize(params, vx, dt);
  return spectral_radius(m.a - m.b * gain.k);
}

double lqr_act(const LqrGain& gain, const ErrorState& e, double delta_max) {
  const double delta = -gain.k.dot(e.vector().transpose());
  return std::clamp(delta, -delta_max, delta_max) / delta_max;
}

double LqrController::act(const ControlInput& input) {
  const double v = input.vehicle.v;
  const double dt = input.config.dt;
  if (!gain_ || gain_speed_ != v || gain_dt_ != dt) {
    gain_ = lqr_synthesize(input.params, v, weights_, dt);
    gain_speed_ = v;
    gain_dt_ = dt;
  }
  return lqr_act(*gain_, input.error, input.params.delta_max);
}

void MpcConfig::validate() const {
  if (horizon < 1) throw InvalidArgument("MPC horizon must be >= 1");
  if (!(delta_min < delta_max)) throw InvalidArgument("MPC needs delta_min < delta_max");
  if (iterations < 1) throw InvalidArgument("MPC needs at least one iteration");
  if (!(dt > 0.0) || !(step_size > 0.0) || !(fd_step > 0.0)) {
    throw InvalidArgument("MPC dt, step size and fd step must be positive");
  }
  if (!(q_y >= 0.0) || !(q_psi >= 0.0) || !(r >= 0.0)) {
    throw InvalidArgument("MPC weights must be >= 0");
  }
}

std::vector<ReferencePoint> mpc_reference(const Track& track,
                                          const WorldPose& pose, double v,
                                          const MpcConfig& config) {
  const TrackPose tp = track.world_to_track(pose);
  const WorldPose anchor = track.centerline_pose(tp.s);
  const double c = std::cos(anchor.psi);
  const double s = std::sin(anchor.psi);
  std::vector<ReferencePoint> ref;
  ref.reserve(config.horizon);
  for (int i = 0; i < config.horizon; ++i) {
    const WorldPose p = track.centerline_pose(tp.s + i * v * config.dt);
    const double dx = p.x - anchor.x;
    const double dy = p.y - anchor.y;
    ref.push_back({-s * dx + c * dy, wrap_angle(p.psi - anchor.psi)});
  }
  return ref;
}

KinematicState to_local_frame(const Track& track, const KinematicState& state) {
  const TrackPose tp = track.world_to_track(state.pose);
  const WorldPose anchor = track.centerline_pose(tp.s);
  const double c = std::cos(anchor.psi);
  const double s = std::sin(anchor.psi);
  const double dx = state.pose.x - anchor.x;
  const double dy = state.pose.y - anchor.y;
  KinematicState local = state;
  local.pose = {c * dx + s * dy, -s * dx + c * dy,
                wrap_angle(state.pose.psi - anchor.psi)};
  return local;
}

double mpc_cost(const KinematicState& state,
                const std::vector<ReferencePoint>& reference,
                const VehicleParams& params, const MpcConfig& config,
                const std::vector<double>& actions) {
  KinematicState xi = state;
  double cost = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (i > 0) {
      const double u = actions[i - 1];
      cost += config.r * u * u;
      xi = kinematic_step(xi, params, u, config.dt);
    }
    const double ey = xi.pose.y - reference[i].y;
    const double epsi = wrap_angle(xi.pose.psi - reference[i].psi);
    cost += config.q_y * ey * ey + config.q_psi * epsi * epsi;
  }
  return cost;
}

std::vector<double> shift_warm_start(const std::vector<double>& actions) {
  if (actions.empty()) return {};
  std::vector<double> out(actions.begin() + 1, actions.end());
  out.push_back(actions.back());
  return out;
}

MpcSolution mpc_solve(const KinematicState& state,
                      const std::vector<ReferencePoint>& reference,
                      const VehicleParams& params, const MpcConfig& config,
                      const std::vector<double>& warm_start) {
  config.validate();
  if (static_cast<int>(reference.size()) != config.horizon) {
    throw InvalidArgument("reference length must equal the horizon");
  }
  const std::size_t n = static_cast<std::size_t>(config.horizon - 1);
  auto project = [&](double u) {
    return std::clamp(u, config.delta_min, config.delta_max);
  };
  std::vector<double> u(n, 0.0);
  if (warm_start.size() == n) {
    std::transform(warm_start.begin(), warm_start.end(), u.begin(), project);
  } else {
    std::transform(u.begin(), u.end(), u.begin(), project);
  }
  auto cost_of = [&](const std::vector<double>& x) {
    return mpc_cost(state, reference, params, config, x);
  };

  MpcSolution sol;
  double cost = cost_of(u);
  std::vector<double> grad(n), trial(n), probe(n);
  int it = 0;
  for (; it < config.iterations && n > 0; ++it) {
    probe = u;
    for (std::size_t j = 0; j < n; ++j) {
      probe[j] = u[j] + config.fd_step;
      const double up = cost_of(probe);
      probe[j] = u[j] - config.fd_step;
      const double down = cost_of(probe);
      probe[j] = u[j];
      grad[j] = (up - down) / (2.0 * config.fd_step);
    }
    double step = config.step_size;
    bool accepted = false;
    double trial_cost = cost;
    for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
      for (std::size_t j = 0; j < n; ++j) trial[j] = project(u[j] - step * grad[j]);
      trial_cost = cost_of(trial);
      if (trial_cost < cost) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      sol.converged = true;
      break;
    }
    const double decrease = cost - trial_cost;
    u.swap(trial);
    cost = trial_cost;
    if (decrease < config.tol) {
      sol.converged = true;
      ++it;
      break;
    }
  }
  if (n == 0) sol.converged = true;
  sol.actions = std::move(u);
  sol.predicted_cost = cost;
  sol.iterations = it;
  return sol;
}

MpcController::MpcController(MpcConfig config) : config_(config) {
  config_.validate();
}

double MpcController::act(const ControlInput& input) {
  KinematicState local = to_local_frame(input.track, input.vehicle);
  // Lateral offset and heading as perceived.
  local.pose.y = input.error.e1;
  local.pose.psi = input.error.e2;
  const auto ref =
      mpc_reference(input.track, input.vehicle.pose, input.vehicle.v, config_);
  last_ = mpc_solve(local, ref, input.params, config_, shift_warm_start(warm_));
  warm_ = last_.actions;
  if (last_.actions.empty()) return 0.0;
  return std::clamp(last_.actions.front() / input.params.delta_max, -1.0, 1.0);
}

const std::vector<TablePreset>& table_presets() {
  static const std::vector<TablePreset> presets = {
      {1, "forza", "oval", {2.0, 1.0, 2.0, 0.2, 0.05}, 8},
      {2, "forza", "oval", {2.0, 0.2, 2.0, 0.1, 0.01}, 10},
      {3, "forza", "oval", {1.0, 0.2, 1.0, 0.1, 0.01}, 12},
      {4, "alpine-2", "switchback", {2.0, 1.0, 2.0, 0.0, 0.05}, 8},
      {5, "alpine-2", "switchback", {2.0, 0.3, 2.0, 0.0, 0.01}, 10},
      {6, "alpine-2", "switchback", {2.0, 0.5, 1.0, 0.0, 0.01}, 12},
      {7, "eroad", "loop", {3.0, 0.2, 1.5, 0.0, 0.03}, 8},
      {8, "eroad", "loop", {1.0, 0.8, 2.5, 0.0, 0.01}, 10},
      {9, "eroad", "loop", {1.5, 0.5, 1.5, 0.03, 0.05}, 12},
      {10, "g-track-3", "river", {2.0, 1.0, 2.0, 1.0, 0.05}, 8},
      {11, "g-track-3", "river", {2.0, 0.2, 2.0, 0.1, 0.01}, 10},
      {12, "g-track-3", "river", {1.0, 0.2, 1.0, 0.1, 0.01}, 12},
  };
  return presets;
}

const TablePreset& table_preset(int row) {
  for (const auto& p : table_presets()) {
    if (p.row == row) return p;
  }
  throw InvalidArgument("no preset row " + std::to_string(row) +
                        " (rows are 1-12)");
}

std::string stand_in_track(const std::string& reference_track) {
  for (const auto& p : table_presets()) {
    if (p.reference_track == reference_track) return p.track;
  }
  return reference_track;
}

std::string presets_to_config(const std::vector<TablePreset>& presets) {
  std::ostringstream out;
  out << "# LQR weights (q1..q4, rho) and MPC horizon per comparison row.\n";
  for (const auto& p : presets) {
    out << "\n[preset." << p.row << "]\n"
        << "reference_track = \"" << p.reference_track << "\"\n"
        << "track = \"" << p.track << "\"\n"
        << "q1 = " << format_double(p.weights.q1) << "\n"
        << "q2 = " << format_double(p.weights.q2) << "\n"
        << "q3 = " << format_double(p.weights.q3) << "\n"
        << "q4 = " << format_double(p.weights.q4) << "\n"
        << "rho = " << format_double(p.weights.rho) << "\n"
        << "horizon = " << p.horizon << "\n";
  }
  return out.str();
}

std::vector<TablePreset> presets_from_config(const std::string& text) {
  const KeyValueConfig cfg = KeyValueConfig::parse(text);
  std::vector<TablePreset> out;
  for (const auto& section : cfg.sections()) {
    if (section.rfind("preset.", 0) != 0) continue;
    const std::string pre = section + ".";
    TablePreset p;
    try {
      p.row = std::stoi(section.substr(7));
    } catch (const std::exception&) {
      throw ConfigError("bad preset section [" + section + "]");
    }
    p.reference_track = cfg.get_string(pre + "reference_track", "");
    p.track = cfg.get_string(pre + "track", "");
    p.weights.q1 = cfg.get_double(pre + "q1", 0.0);
    p.weights.q2 = cfg.get_double(pre + "q2", 0.0);
    p.weights.q3 = cfg.get_double(pre + "q3", 0.0);
    p.weights.q4 = cfg.get_double(pre + "q4", 0.0);
    p.weights.rho = cfg.get_double(pre + "rho", 0.0);
    p.horizon = static_cast<int>(cfg.get_int(pre + "horizon", 10));
    try {
      p.weights.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError("[" + section + "] " + e.what());
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace lanekeep::classic

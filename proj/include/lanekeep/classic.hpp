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

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lanekeep/dynamics.hpp"
#include "lanekeep/env.hpp"

namespace lanekeep::classic {

// ---------------------------------------------------------------------------
// LQR on the lateral error model.
// ---------------------------------------------------------------------------

struct LqrWeights {
  double q1 = 1.0;
  double q2 = 1.0;
  double q3 = 1.0;
  double q4 = 1.0;
  double rho = 1.0;

  void validate() const;
  Eigen::Matrix4d q() const;
};

struct LqrGain {
  Eigen::RowVector4d k = Eigen::RowVector4d::Zero();
  Eigen::Matrix4d p = Eigen::Matrix4d::Zero();
  double residual = 0.0;
  long iterations = 0;
};

struct DareOptions {
  double tol = 1e-10;
  long max_iterations = 1000000;
  /// Called with every iterate, starting with P = Q.
  std::function<void(const Eigen::MatrixXd&)> observer;
};

struct DareSolution {
  Eigen::MatrixXd p;
  Eigen::MatrixXd k;
  double residual = 0.0;
  long iterations = 0;
};

/// Fixed-point iteration of the discrete algebraic Riccati equation from
/// P = Q until the max-abs change drops below tol. Throws SynthesisError if
/// the cap is reached.
DareSolution solve_dare(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                        const DareOptions& options = {});

struct DiscreteModel {
  Eigen::Matrix4d a;
  Eigen::Vector4d b;
};

/// Forward-Euler discretization of the error model at step dt.
DiscreteModel discretize(const VehicleParams& params, double vx, double dt);

LqrGain lqr_synthesize(const VehicleParams& params, double vx,
                       const LqrWeights& weights, double dt,
                       const DareOptions& options = {});

double spectral_radius(const Eigen::MatrixXd& m);

/// Spectral radius of A_d - B_d K.
double closed_loop_spectral_radius(const VehicleParams& params, double vx,
                                   const LqrGain& gain, double dt);

/// delta = -K e, clamped to +-delta_max and returned normalized.
double lqr_act(const LqrGain& gain, const ErrorState& e, double delta_max);

/// LQR on the perceived error state. The gain is synthesized on first use for
/// the vehicle speed and control period seen, and cached.
class LqrController : public Controller {
 public:
  explicit LqrController(LqrWeights weights) : weights_(weights) {
    weights_.validate();
  }
  double act(const ControlInput& input) override;
  const std::optional<LqrGain>& gain() const { return gain_; }

 private:
  LqrWeights weights_;
  std::optional<LqrGain> gain_;
  double gain_speed_ = 0.0;
  double gain_dt_ = 0.0;
};

// ---------------------------------------------------------------------------
// Constrained kinematic MPC.
// ---------------------------------------------------------------------------

struct MpcConfig {
  int horizon = 10;  // Hp
  double q_y = 1.0;
  double q_psi = 1.0;
  double r = 1.0;
  double delta_min = -0.35;
  double delta_max = 0.35;
  double dt = 0.05;
  int iterations = 200;
  double step_size = 0.05;
  double tol = 1e-8;
  double fd_step = 1e-6;

  void validate() const;
};

struct ReferencePoint {
  double y = 0.0;
  double psi = 0.0;
};

struct MpcSolution {
  std::vector<double> actions;  // Hp - 1 front-wheel angles
  double predicted_cost = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Centerline points spaced v*dt ahead of the projection of `pose`, in the
/// frame anchored at that projection (x along the tangent).
std::vector<ReferencePoint> mpc_reference(const Track& track,
                                          const WorldPose& pose, double v,
                                          const MpcConfig& config);

/// Vehicle state expressed in the same anchored frame.
KinematicState to_local_frame(const Track& track, const KinematicState& state);

/// Tracking plus control cost of an action sequence rolled out from `state`.
double mpc_cost(const KinematicState& state,
                const std::vector<ReferencePoint>& reference,
                const VehicleParams& params, const MpcConfig& config,
                const std::vector<double>& actions);

/// Projected finite-difference gradient descent with backtracking; cost is
/// non-increasing across iterations.
MpcSolution mpc_solve(const KinematicState& state,
                      const std::vector<ReferencePoint>& reference,
                      const VehicleParams& params, const MpcConfig& config,
                      const std::vector<double>& warm_start = {});

/// Previous solution advanced by one step, last action repeated.
std::vector<double> shift_warm_start(const std::vector<double>& actions);

/// Receding-horizon MPC; keeps the last solution as the next warm start.
class MpcController : public Controller {
 public:
  explicit MpcController(MpcConfig config);
  void reset() override { warm_.clear(); }
  double act(const ControlInput& input) override;
  const MpcSolution& last_solution() const { return last_; }

 private:
  MpcConfig config_;
  std::vector<double> warm_;
  MpcSolution last_;
};

// ---------------------------------------------------------------------------
// Comparison presets (LQR weights and MPC horizon per row).
// ---------------------------------------------------------------------------

struct TablePreset {
  int row = 0;
  std::string reference_track;  // track name in the original comparison
  std::string track;            // built-in stand-in
  LqrWeights weights;
  int horizon = 10;
};

const std::vector<TablePreset>& table_presets();
const TablePreset& table_preset(int row);

/// Built-in track standing in for a reference track name.
std::string stand_in_track(const std::string& reference_track);

/// Presets in the key/value config format, one [preset.N] section per row.
std::string presets_to_config(const std::vector<TablePreset>& presets);
std::vector<TablePreset> presets_from_config(const std::string& text);

}  // namespace lanekeep::classic

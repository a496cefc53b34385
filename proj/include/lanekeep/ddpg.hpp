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

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lanekeep/env.hpp"
#include "lanekeep/nn.hpp"

namespace lanekeep::ddpg {

struct Transition {
  std::vector<double> s;
  double a = 0.0;
  double r = 0.0;
  std::vector<double> s_next;
  bool done = false;
};

/// Column-per-sample view of a mini-batch.
struct Batch {
  Eigen::MatrixXd s;       // state_dim x m
  Eigen::RowVectorXd a;    // 1 x m
  Eigen::RowVectorXd r;
  Eigen::MatrixXd s_next;
  std::vector<bool> done;

  int size() const { return static_cast<int>(a.size()); }
  static Batch from(const std::vector<Transition>& transitions);
};

/// Fixed-capacity ring of transitions; the oldest entry is overwritten once
/// full. Sampling is uniform with replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return fill_; }
  std::size_t capacity() const { return capacity_; }
  /// i = 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;

  std::vector<std::size_t> sample_indices(std::size_t count,
                                          std::mt19937_64& rng) const;
  Batch sample(std::size_t count, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> ring_;
  std::size_t cursor_ = 0;
  std::size_t fill_ = 0;
};

struct ExplorationSchedule {
  double eps_init = 1.0;
  double eps_min = 0.1;
  double t_eps = 4e5;
  double beta = 1.0;
  double noise_sigma = 0.05;

  /// Linear decay from eps_init to the eps_min floor at t_eps.
  double epsilon(double t) const;
  void validate() const;
};

struct DdpgConfig {
  double gamma = 0.99;
  double tau = 0.001;
  double lr_actor = 1e-3;
  double lr_critic = 1e-4;
  int batch_size = 64;
  std::size_t buffer_capacity = 100000;
  int warmup = 1000;
  std::vector<int> hidden = {64, 64};
  std::uint64_t seed = 1;
  ExplorationSchedule schedule;

  void validate() const;
  /// Buffer fill needed before the first update.
  std::size_t warmup_fill() const;
};

/// Actor-critic pair with soft-updated targets. The critic sees the state in
/// its first layer and the action concatenated at its second layer.
class DdpgAgent {
 public:
  DdpgAgent(int state_dim, DdpgConfig config);

  int state_dim() const { return state_dim_; }
  const DdpgConfig& config() const { return config_; }
  DdpgConfig& mutable_config() { return config_; }

  nn::Mlp& actor() { return actor_; }
  const nn::Mlp& actor() const { return actor_; }
  nn::Mlp& critic() { return critic_; }
  const nn::Mlp& critic() const { return critic_; }
  nn::Mlp& target_actor() { return target_actor_; }
  const nn::Mlp& target_actor() const { return target_actor_; }
  nn::Mlp& target_critic() { return target_critic_; }
  const nn::Mlp& target_critic() const { return target_critic_; }

  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  std::int64_t global_step() const { return global_step_; }
  void set_global_step(std::int64_t t) { global_step_ = t; }
  std::mt19937_64& rng() { return rng_; }

  double epsilon() const;

  /// Deterministic actor output, or its epsilon-greedy Gaussian perturbation
  /// when exploring; always clamped to [-1, 1].
  double act(const Eigen::VectorXd& s, bool explore,
             std::mt19937_64& rng) const;

  /// Bellman targets from the target networks; terminal samples keep r only.
  Eigen::RowVectorXd critic_target(const Batch& batch) const;

  /// One descent step on the mean squared Bellman residual. Returns the loss
  /// before the step.
  double critic_update(const Batch& batch);
  double critic_update();  // samples from the buffer

  /// One ascent step on the mean critic value of the actor's actions.
  /// Returns the mean Q before the step.
  double actor_update(const Batch& batch);
  double actor_update();

  void soft_update();

 private:
  void require_fill() const;

  int state_dim_;
  DdpgConfig config_;
  nn::Mlp actor_, critic_, target_actor_, target_critic_;
  nn::AdamState actor_opt_, critic_opt_;
  ReplayBuffer buffer_;
  std::mt19937_64 rng_;
  std::int64_t global_step_ = 0;
};

struct EpisodeLog {
  int episode = 0;
  int steps = 0;
  double cumulative_reward = 0.0;
  double epsilon = 0.0;
};

struct TrainingLog {
  std::vector<EpisodeLog> episodes;
  std::int64_t update_calls = 0;
  std::int64_t env_steps = 0;

  /// Mean cumulative reward of the first / last n completed episodes.
  double head_mean(std::size_t n) const;
  double tail_mean(std::size_t n) const;
  void write_csv(std::ostream& out) const;
};

/// Interleaves exploring env steps with one critic update, one actor update
/// and one soft update per step once the buffer is warm. Episode k runs with
/// env seed env_config.seed + k.
TrainingLog train(DdpgAgent& agent, const Track& track,
                  const EnvConfig& env_config, std::int64_t total_steps,
                  const VehicleParams& params = {});

/// Greedy policy from a frozen actor.
class DdpgController : public Controller {
 public:
  explicit DdpgController(nn::Mlp actor) : actor_(std::move(actor)) {}
  double act(const ControlInput& input) override;

 private:
  nn::Mlp actor_;
};

/// Writes actor/critic/targets as network checkpoints plus manifest.json.
void save_agent(const DdpgAgent& agent, const std::string& dir);
DdpgAgent load_agent(const std::string& dir);
nn::Mlp load_actor(const std::string& dir);

}  // namespace lanekeep::ddpg

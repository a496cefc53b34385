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

#include "lanekeep/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "lanekeep/format.hpp"

namespace lanekeep::ddpg {

Batch Batch::from(const std::vector<Transition>& transitions) {
  Batch b;
  const auto m = static_cast<Eigen::Index>(transitions.size());
  const auto dim = m > 0 ? static_cast<Eigen::Index>(transitions[0].s.size()) : 0;
  b.s.resize(dim, m);
  b.s_next.resize(dim, m);
  b.a.resize(m);
  b.r.resize(m);
  b.done.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Transition& t = transitions[j];
    if (static_cast<Eigen::Index>(t.s.size()) != dim ||
        static_cast<Eigen::Index>(t.s_next.size()) != dim) {
      throw InvalidArgument("transitions have inconsistent state sizes");
    }
    for (Eigen::Index i = 0; i < dim; ++i) {
      b.s(i, j) = t.s[i];
      b.s_next(i, j) = t.s_next[i];
    }
    b.a(j) = t.a;
    b.r(j) = t.r;
    b.done[j] = t.done;
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidArgument("replay capacity must be positive");
  ring_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
  } else {
    ring_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
  fill_ = std::min(fill_ + 1, capacity_);
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= fill_) throw InvalidArgument("replay index out of range");
  const std::size_t oldest = fill_ < capacity_ ? 0 : cursor_;
  return ring_[(oldest + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(
    std::size_t count, std::mt19937_64& rng) const {
  if (fill_ == 0) throw InvalidArgument("cannot sample an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, fill_ - 1);
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

Batch ReplayBuffer::sample(std::size_t count, std::mt19937_64& rng) const {
  std::vector<Transition> picked;
  picked.reserve(count);
  for (std::size_t i : sample_indices(count, rng)) picked.push_back(at(i));
  return Batch::from(picked);
}

double ExplorationSchedule::epsilon(double t) const {
  return std::max(eps_min, eps_init - (eps_init - eps_min) * t / t_eps);
}

void ExplorationSchedule::validate() const {
  if (!(eps_init >= eps_min) || !(eps_min > 0.0) || !(t_eps > 0.0)) {
    throw InvalidArgument(
        "exploration schedule needs eps_init >= eps_min > 0 and t_eps > 0");
  }
  if (!(beta >= 0.0) || !(noise_sigma >= 0.0)) {
    throw InvalidArgument("exploration noise scale must be >= 0");
  }
}

void DdpgConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must be in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("tau must be in (0, 1]");
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) {
    throw InvalidArgument("learning rates must be positive");
  }
  if (batch_size <= 0) throw InvalidArgument("batch_size must be positive");
  if (buffer_capacity == 0) throw InvalidArgument("buffer capacity must be positive");
  if (hidden.empty()) throw InvalidArgument("need at least one hidden layer");
  schedule.validate();
}

std::size_t DdpgConfig::warmup_fill() const {
  return static_cast<std::size_t>(std::max(batch_size, warmup));
}

DdpgAgent::DdpgAgent(int state_dim, DdpgConfig config)
    : state_dim_(state_dim),
      config_(std::move(config)),
      buffer_(config_.buffer_capacity),
      rng_(config_.seed ^ 0x9e3779b97f4a7c15ULL) {
  // gamma == 0 is allowed for analysis (pure one-step targets).
  if (config_.gamma != 0.0) config_.validate();
  std::vector<int> dims = {state_dim};
  dims.insert(dims.end(), config_.hidden.begin(), config_.hidden.end());
  dims.push_back(1);
  actor_ = nn::Mlp::init(dims, config_.seed, nn::Activation::kTanh);
  // Action joins at the second layer when there is one.
  const int side_layer = dims.size() > 2 ? 1 : 0;
  critic_ = nn::Mlp::init(dims, config_.seed + 1, nn::Activation::kLinear,
                          nn::Activation::kRelu, 1, side_layer);
  target_actor_ = actor_;
  target_critic_ = critic_;
  actor_opt_ = nn::AdamState::for_net(actor_, config_.lr_actor);
  critic_opt_ = nn::AdamState::for_net(critic_, config_.lr_critic);
}

double DdpgAgent::epsilon() const {
  return config_.schedule.epsilon(static_cast<double>(global_step_));
}

double DdpgAgent::act(const Eigen::VectorXd& s, bool explore,
                      std::mt19937_64& rng) const {
  if (s.size() != state_dim_) throw InvalidArgument("state has the wrong size");
  double a = actor_.forward(s)(0);
  if (explore) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double p = 1.0 - unit(rng);  // (0, 1]
    if (!(p > epsilon())) {
      std::normal_distribution<double> normal(0.0, 1.0);
      a += config_.schedule.beta * config_.schedule.noise_sigma * normal(rng);
    }
  }
  return std::clamp(a, -1.0, 1.0);
}

Eigen::RowVectorXd DdpgAgent::critic_target(const Batch& batch) const {
  const Eigen::MatrixXd next_a = target_actor_.forward(batch.s_next);
  const Eigen::MatrixXd next_q = target_critic_.forward(batch.s_next, next_a);
  Eigen::RowVectorXd y = batch.r;
  for (int j = 0; j < batch.size(); ++j) {
    if (!batch.done[j]) y(j) += config_.gamma * next_q(0, j);
  }
  return y;
}

void DdpgAgent::require_fill() const {
  if (buffer_.size() < static_cast<std::size_t>(config_.batch_size)) {
    throw LifecycleError("replay buffer holds fewer transitions than a batch");
  }
}

double DdpgAgent::critic_update(const Batch& batch) {
  const Eigen::RowVectorXd y = critic_target(batch);
  const Eigen::MatrixXd a = batch.a;
  const nn::ForwardCache cache = nn::forward_cached(critic_, batch.s, a);
  const Eigen::RowVectorXd residual = y - cache.output();
  const double m = batch.size();
  const double loss = residual.squaredNorm() / m;
  // d/dQ of (1/m) sum (y - Q)^2
  const Eigen::MatrixXd grad_out = (-2.0 / m) * residual;
  const nn::Gradients g = nn::backward(critic_, cache, grad_out);
  nn::adam_step(critic_opt_, critic_, g, nn::Direction::kDescend);
  return loss;
}

double DdpgAgent::critic_update() {
  require_fill();
  return critic_update(buffer_.sample(config_.batch_size, rng_));
}

double DdpgAgent::actor_update(const Batch& batch) {
  const double m = batch.size();
  const nn::ForwardCache actor_cache = nn::forward_cached(actor_, batch.s);
  const Eigen::MatrixXd& actions = actor_cache.output();
  const nn::ForwardCache critic_cache =
      nn::forward_cached(critic_, batch.s, actions);
  const double mean_q = critic_cache.output().sum() / m;
  const Eigen::MatrixXd dq = Eigen::MatrixXd::Constant(1, batch.size(), 1.0 / m);
  const nn::Gradients critic_grads = nn::backward(critic_, critic_cache, dq);
  const nn::Gradients actor_grads =
      nn::backward(actor_, actor_cache, critic_grads.side);
  nn::adam_step(actor_opt_, actor_, actor_grads, nn::Direction::kAscend);
  return mean_q;
}

double DdpgAgent::actor_update() {
  require_fill();
  return actor_update(buffer_.sample(config_.batch_size, rng_));
}

void DdpgAgent::soft_update() {
  nn::blend_into(target_actor_, actor_, config_.tau);
  nn::blend_into(target_critic_, critic_, config_.tau);
}

double TrainingLog::head_mean(std::size_t n) const {
  n = std::min(n, episodes.size());
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += episodes[i].cumulative_reward;
  return sum / static_cast<double>(n);
}

double TrainingLog::tail_mean(std::size_t n) const {
  n = std::min(n, episodes.size());
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = episodes.size() - n; i < episodes.size(); ++i) {
    sum += episodes[i].cumulative_reward;
  }
  return sum / static_cast<double>(n);
}

void TrainingLog::write_csv(std::ostream& out) const {
  out << "episode,steps,cumulative_reward,epsilon\n";
  for (const auto& e : episodes) {
    out << e.episode << ',' << e.steps << ',' << format_double(e.cumulative_reward)
        << ',' << format_double(e.epsilon) << '\n';
  }
}

namespace {

std::vector<double> to_std(const Observation& obs) {
  const auto v = obs.vector();
  return {v.begin(), v.end()};
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TrainingLog train(DdpgAgent& agent, const Track& track,
                  const EnvConfig& env_config, std::int64_t total_steps,
                  const VehicleParams& params) {
  if (agent.state_dim() != kObservationDim) {
    throw InvalidArgument("agent state size does not match the environment");
  }
  TrainingLog log;
  if (total_steps <= 0) return log;
  LaneKeepEnv env(track, params);
  EnvConfig cfg = env_config;
  int episode = 0;
  cfg.seed = env_config.seed + static_cast<std::uint64_t>(episode);
  std::vector<double> s = to_std(env.reset(cfg));
  double cumulative = 0.0;
  const std::size_t warm = agent.config().warmup_fill();

  for (std::int64_t t = 0; t < total_steps; ++t) {
    const double a = agent.act(to_eigen(s), true, agent.rng());
    const StepResult res = env.step(a);
    std::vector<double> s_next = to_std(res.obs);
    cumulative += res.reward;
    agent.buffer().push({s, a, res.reward, s_next, res.done});
    if (agent.buffer().size() >= warm) {
      agent.critic_update();
      agent.actor_update();
      agent.soft_update();
      ++log.update_calls;
    }
    agent.set_global_step(agent.global_step() + 1);
    ++log.env_steps;
    if (res.done) {
      log.episodes.push_back(
          {episode, res.info.step, cumulative, agent.epsilon()});
      ++episode;
      cfg.seed = env_config.seed + static_cast<std::uint64_t>(episode);
      s = to_std(env.reset(cfg));
      cumulative = 0.0;
    } else {
      s = std::move(s_next);
    }
  }
  return log;
}

double DdpgController::act(const ControlInput& input) {
  const auto v = input.obs.vector();
  const Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
  return std::clamp(actor_.forward(s)(0), -1.0, 1.0);
}

namespace {

constexpr int kManifestVersion = 1;
constexpr const char* kNetFiles[] = {"actor.lkn", "critic.lkn",
                                     "target_actor.lkn", "target_critic.lkn"};

nlohmann::json read_manifest(const std::string& dir) {
  const auto path = std::filesystem::path(dir) / "manifest.json";
  std::ifstream in(path);
  if (!in) throw CheckpointError("missing checkpoint manifest " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad manifest: ") + e.what());
  }
}

}  // namespace

void save_agent(const DdpgAgent& agent, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto root = std::filesystem::path(dir);
  nn::save_checkpoint(agent.actor(), (root / kNetFiles[0]).string());
  nn::save_checkpoint(agent.critic(), (root / kNetFiles[1]).string());
  nn::save_checkpoint(agent.target_actor(), (root / kNetFiles[2]).string());
  nn::save_checkpoint(agent.target_critic(), (root / kNetFiles[3]).string());
  const DdpgConfig& c = agent.config();
  nlohmann::ordered_json m;
  m["format_version"] = kManifestVersion;
  m["state_dim"] = agent.state_dim();
  m["global_step"] = agent.global_step();
  m["gamma"] = c.gamma;
  m["tau"] = c.tau;
  m["lr_actor"] = c.lr_actor;
  m["lr_critic"] = c.lr_critic;
  m["batch_size"] = c.batch_size;
  m["buffer_capacity"] = c.buffer_capacity;
  m["warmup"] = c.warmup;
  m["hidden"] = c.hidden;
  m["seed"] = c.seed;
  m["eps_init"] = c.schedule.eps_init;
  m["eps_min"] = c.schedule.eps_min;
  m["t_eps"] = c.schedule.t_eps;
  m["beta"] = c.schedule.beta;
  m["noise_sigma"] = c.schedule.noise_sigma;
  m["networks"] = {kNetFiles[0], kNetFiles[1], kNetFiles[2], kNetFiles[3]};
  std::ofstream out(root / "manifest.json");
  if (!out) throw CheckpointError("cannot write manifest in " + dir);
  out << m.dump(2) << '\n';
}

DdpgAgent load_agent(const std::string& dir) {
  const nlohmann::json m = read_manifest(dir);
  try {
    if (m.at("format_version").get<int>() != kManifestVersion) {
      throw CheckpointError("unsupported manifest version");
    }
    DdpgConfig c;
    c.gamma = m.at("gamma").get<double>();
    c.tau = m.at("tau").get<double>();
    c.lr_actor = m.at("lr_actor").get<double>();
    c.lr_critic = m.at("lr_critic").get<double>();
    c.batch_size = m.at("batch_size").get<int>();
    c.buffer_capacity = m.at("buffer_capacity").get<std::size_t>();
    c.warmup = m.at("warmup").get<int>();
    c.hidden = m.at("hidden").get<std::vector<int>>();
    c.seed = m.at("seed").get<std::uint64_t>();
    c.schedule.eps_init = m.at("eps_init").get<double>();
    c.schedule.eps_min = m.at("eps_min").get<double>();
    c.schedule.t_eps = m.at("t_eps").get<double>();
    c.schedule.beta = m.at("beta").get<double>();
    c.schedule.noise_sigma = m.at("noise_sigma").get<double>();
    DdpgAgent agent(m.at("state_dim").get<int>(), c);
    agent.set_global_step(m.at("global_step").get<std::int64_t>());
    const auto root = std::filesystem::path(dir);
    agent.actor() = nn::load_checkpoint((root / kNetFiles[0]).string());
    agent.critic() = nn::load_checkpoint((root / kNetFiles[1]).string());
    agent.target_actor() = nn::load_checkpoint((root / kNetFiles[2]).string());
    agent.target_critic() = nn::load_checkpoint((root / kNetFiles[3]).string());
    return agent;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad manifest: ") + e.what());
  }
}

nn::Mlp load_actor(const std::string& dir) {
  const nlohmann::json m = read_manifest(dir);
  nn::Mlp actor =
      nn::load_checkpoint((std::filesystem::path(dir) / kNetFiles[0]).string());
  if (m.contains("state_dim") && actor.input_dim() != m["state_dim"].get<int>()) {
    throw CheckpointError("actor input size disagrees with the manifest");
  }
  return actor;
}

}  // namespace lanekeep::ddpg

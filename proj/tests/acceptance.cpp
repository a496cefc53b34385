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

// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "lanekeep/classic.hpp"
#include "lanekeep/cli.hpp"
#include "lanekeep/ddpg.hpp"
#include "lanekeep/env.hpp"
#include "lanekeep/nn.hpp"
#include "lanekeep/protocol.hpp"

namespace fs = std::filesystem;
using namespace lanekeep;
using namespace lanekeep::cli;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << x;
  return s.str();
}

// ---------------------------------------------------------------------------
// 1. Riccati

Eigen::Matrix4d oracle_a(const VehicleParams& p, double vx) {
  const double m = p.mass, iz = p.iz, cf = p.cf, cr = p.cr, lf = p.lf,
               lr = p.lr;
  Eigen::Matrix4d a;
  a << 0, 1, 0, 0,                                                     //
      0, -(2 * cf + 2 * cr) / (m * vx), (2 * cf + 2 * cr) / m,         //
      (-2 * cf * lf + 2 * cr * lr) / (m * vx),                         //
      0, 0, 0, 1,                                                      //
      0, -(2 * cf * lf - 2 * cr * lr) / (iz * vx),                     //
      (2 * cf * lf - 2 * cr * lr) / iz,                                //
      -(2 * cf * lf * lf + 2 * cr * lr * lr) / (iz * vx);
  return a;
}

Eigen::Vector4d oracle_b(const VehicleParams& p) {
  return {0.0, 2 * p.cf / p.mass, 0.0, 2 * p.cf * p.lf / p.iz};
}

// Plain backward recursion of the finite-horizon Riccati difference
// equation, run for a fixed number of steps.
Eigen::RowVector4d backward_recursion_gain(const Eigen::Matrix4d& a,
                                           const Eigen::Vector4d& b,
                                           const Eigen::Matrix4d& q,
                                           double r, long steps) {
  Eigen::Matrix4d p = q;
  for (long k = 0; k < steps; ++k) {
    const Eigen::RowVector4d bt_p_a = b.transpose() * p * a;
    const double s = r + b.dot(p * b);
    p = q + a.transpose() * p * a - bt_p_a.transpose() * bt_p_a / s;
  }
  return (b.transpose() * p * a) / (r + b.dot(p * b));
}

Outcome riccati() {
  Outcome o{true, ""};
  auto scalar = [](double a, double b, double q, double r) {
    Eigen::MatrixXd A(1, 1), B(1, 1), Q(1, 1), R(1, 1);
    A << a;
    B << b;
    Q << q;
    R << r;
    return classic::solve_dare(A, B, Q, R).p(0, 0);
  };
  const double p0 = scalar(0, 1, 1, 1);
  const double p1 = scalar(1, 1, 1, 1);
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  const double e_scalar =
      std::max(std::abs(p0 - 1.0), std::abs(p1 - golden));
  o.pass = e_scalar <= 1e-10;

  const VehicleParams params;
  const double vx = 70.0 / 3.6, dt = 0.05;
  const Eigen::Matrix4d ad = Eigen::Matrix4d::Identity() + oracle_a(params, vx) * dt;
  const Eigen::Vector4d bd = oracle_b(params) * dt;
  double e_gain = 0.0;
  for (const classic::LqrWeights w :
       {classic::LqrWeights{}, classic::table_preset(7).weights,
        classic::table_preset(1).weights}) {
    const classic::LqrGain g = classic::lqr_synthesize(params, vx, w, dt);
    const Eigen::RowVector4d k =
        backward_recursion_gain(ad, bd, w.q(), w.rho, 1000000);
    e_gain = std::max(e_gain, (g.k - k).cwiseAbs().maxCoeff());
  }
  o.pass = o.pass && e_gain <= 1e-8;
  o.detail = "scalar err " + fmt(e_scalar) + ", 4x4 gain err " + fmt(e_gain) +
             " vs 1e6-step recursion";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Closed-loop stability

Outcome stability() {
  const VehicleParams params;
  double worst = 0.0;
  int checked = 0;
  for (const auto& preset : classic::table_presets()) {
    for (double kmh : {60.0, 70.0, 75.0}) {
      const double vx = kmh / 3.6;
      const classic::LqrGain g =
          classic::lqr_synthesize(params, vx, preset.weights, 0.05);
      const Eigen::Matrix4d ad =
          Eigen::Matrix4d::Identity() + oracle_a(params, vx) * 0.05;
      const Eigen::Vector4d bd = oracle_b(params) * 0.05;
      const Eigen::Matrix4d cl = ad - bd * g.k;
      const double rho =
          Eigen::EigenSolver<Eigen::Matrix4d>(cl).eigenvalues().cwiseAbs().maxCoeff();
      worst = std::max(worst, rho);
      ++checked;
    }
  }
  return {checked == 36 && worst < 1.0,
          std::to_string(checked) + " cases, max spectral radius " +
              fmt(worst, 8)};
}

// ---------------------------------------------------------------------------
// 3. Gradients

double scalar_out(const nn::Mlp& net, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& side, const Eigen::VectorXd& w) {
  return net.forward(x, side).dot(w);
}

// Max over checked coordinates of |g - fd| / max(|g|, |fd|, 1e-6).
double gradient_case(std::mt19937_64& rng, bool critic) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const nn::Mlp base =
      critic ? nn::Mlp::init({7, 64, 64, 1}, rng(), nn::Activation::kLinear,
                             nn::Activation::kRelu, 1, 1)
             : nn::Mlp::init({7, 64, 64, 1}, rng(), nn::Activation::kTanh);
  Eigen::VectorXd x(7), side, w(1);
  for (int i = 0; i < 7; ++i) x(i) = u(rng);
  if (critic) {
    side.resize(1);
    side(0) = u(rng);
  }
  w(0) = 1.0 + u(rng);
  const nn::Gradients g = nn::backward(base, x, w, side);

  std::vector<double> analytic;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    const auto& gw = g.weights[l];
    for (int r = 0; r < gw.rows(); ++r) {
      for (int c = 0; c < gw.cols(); ++c) analytic.push_back(gw(r, c));
    }
    for (int i = 0; i < g.biases[l].size(); ++i) {
      analytic.push_back(g.biases[l](i));
    }
  }
  const std::vector<double> theta = base.flat_parameters();
  if (analytic.size() != theta.size()) return 1e9;

  const double h = 1e-6;
  double worst = 0.0;
  auto rel = [](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
  };
  std::uniform_int_distribution<std::size_t> pick(0, theta.size() - 1);
  nn::Mlp probe = base;
  for (int k = 0; k < 400; ++k) {
    const std::size_t i = pick(rng);
    std::vector<double> t = theta;
    t[i] = theta[i] + h;
    probe.set_flat_parameters(t);
    const double fp = scalar_out(probe, x, side, w);
    t[i] = theta[i] - h;
    probe.set_flat_parameters(t);
    const double fm = scalar_out(probe, x, side, w);
    worst = std::max(worst, rel(analytic[i], (fp - fm) / (2 * h)));
  }
  for (int i = 0; i < 7; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    const double fd = (scalar_out(base, xp, side, w) -
                       scalar_out(base, xm, side, w)) / (2 * h);
    worst = std::max(worst, rel(g.input(i, 0), fd));
  }
  if (critic) {
    Eigen::VectorXd sp = side, sm = side;
    sp(0) += h;
    sm(0) -= h;
    const double fd =
        (scalar_out(base, x, sp, w) - scalar_out(base, x, sm, w)) / (2 * h);
    worst = std::max(worst, rel(g.side(0, 0), fd));
  }
  return worst;
}

Outcome gradients() {
  std::mt19937_64 rng(2024);
  double worst_actor = 0.0, worst_critic = 0.0;
  const int cases = 100;
  for (int c = 0; c < cases; ++c) {
    worst_actor = std::max(worst_actor, gradient_case(rng, false));
    worst_critic = std::max(worst_critic, gradient_case(rng, true));
  }
  return {worst_actor < 1e-4 && worst_critic < 1e-4,
          std::to_string(cases) + " actor + " + std::to_string(cases) +
              " critic cases, max rel err actor " + fmt(worst_actor) +
              ", critic " + fmt(worst_critic)};
}

// ---------------------------------------------------------------------------
// 4. Reward and exploration schedule

Outcome formulas() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double err = 0.0;
  int terminal = 0, floor_hits = 0;
  const ddpg::ExplorationSchedule sched;
  for (int i = 0; i < 10000; ++i) {
    const double w = 1.0 + 9.0 * u(rng);
    const double theta = (u(rng) * 2.0 - 1.0) * 2.2;
    const double d = u(rng) * w;
    const double lambda = 2.0 * u(rng);
    const double want =
        std::abs(theta) >= std::numbers::pi / 2
            ? -2.0
            : std::cos(theta) - lambda * std::sin(std::abs(theta)) - d / w;
    terminal += want == -2.0;
    err = std::max(err, std::abs(reward(theta, d, w, lambda) - want));

    const double t = u(rng) * 8e5;
    const double eps_want = t >= 4e5 ? 0.1 : 1.0 - 0.9 * t / 4e5;
    floor_hits += t >= 4e5;
    err = std::max(err, std::abs(sched.epsilon(t) - eps_want));
  }
  err = std::max(err, std::abs(reward(std::numbers::pi / 2, 0.0, 5.0, 1.0) + 2.0));
  err = std::max(err, std::abs(sched.epsilon(4e5) - 0.1));
  return {err <= 1e-12 && terminal > 0 && floor_hits > 0,
          "1e4 points, max err " + fmt(err) + ", " + std::to_string(terminal) +
              " terminal, " + std::to_string(floor_hits) + " at the floor"};
}

// ---------------------------------------------------------------------------
// 5. MPC against exhaustive grid search

struct GridCase {
  std::string name;
  int horizon;
  double kappa;  // reference curvature, 0 for straight
  double y0, psi0;
};

struct OracleState {
  double y, psi;
};

OracleState oracle_step(OracleState s, double v, double delta, double dt,
                        const VehicleParams& p) {
  const double beta = std::atan(p.lr * std::tan(delta) / (p.lf + p.lr));
  return {s.y + v * std::sin(s.psi + beta) * dt,
          s.psi + v / p.lr * std::sin(beta) * dt};
}

Outcome mpc_grid() {
  const VehicleParams p;
  const double v = 70.0 / 3.6, dt = 0.05;
  const std::vector<GridCase> cases = {
      {"straight hp2 offset", 2, 0.0, 0.4, 0.0},
      {"straight hp2 lock", 2, 0.0, -3.0, -0.3},
      {"arc hp2", 2, 0.02, 0.0, 0.0},
      {"arc hp2 lock", 2, -0.08, 0.5, 0.2},
      {"straight hp3 offset", 3, 0.0, 0.3, -0.02},
      {"straight hp3 lock", 3, 0.0, 2.5, 0.25},
      {"arc hp3", 3, 0.015, -0.1, 0.01},
      {"arc hp3 lock", 3, 0.1, -1.0, -0.1},
  };
  double worst = 0.0;
  int active = 0;
  std::string worst_name;
  const double lo = -0.35, hi = 0.35, res = 1e-4;
  const int n = static_cast<int>(std::lround((hi - lo) / res)) + 1;
  for (const GridCase& gc : cases) {
    std::vector<classic::ReferencePoint> ref;
    for (int i = 0; i < gc.horizon; ++i) {
      const double s = i * v * dt;
      if (gc.kappa == 0.0) {
        ref.push_back({0.0, 0.0});
      } else {
        ref.push_back({(1.0 - std::cos(gc.kappa * s)) / gc.kappa,
                       gc.kappa * s});
      }
    }
    auto stage = [&](OracleState s, int i) {
      const double ey = s.y - ref[i].y;
      const double ep = s.psi - ref[i].psi;
      return ey * ey + ep * ep;
    };
    const OracleState s0{gc.y0, gc.psi0};
    std::vector<double> best;
    double best_cost = INFINITY;
    for (int i = 0; i < n; ++i) {
      const double u1 = lo + i * res;
      const OracleState s1 = oracle_step(s0, v, u1, dt, p);
      const double c1 = stage(s0, 0) + u1 * u1 + stage(s1, 1);
      if (gc.horizon == 2) {
        if (c1 < best_cost) best_cost = c1, best = {u1};
        continue;
      }
      for (int j = 0; j < n; ++j) {
        const double u2 = lo + j * res;
        const double c = c1 + u2 * u2 + stage(oracle_step(s1, v, u2, dt, p), 2);
        if (c < best_cost) best_cost = c, best = {u1, u2};
      }
    }
    classic::MpcConfig cfg;
    cfg.horizon = gc.horizon;
    KinematicState st;
    st.pose = {0.0, gc.y0, gc.psi0};
    st.v = v;
    const classic::MpcSolution sol = classic::mpc_solve(st, ref, p, cfg);
    for (std::size_t k = 0; k < best.size(); ++k) {
      const double e = std::abs(sol.actions[k] - best[k]);
      if (e > worst) worst = e, worst_name = gc.name;
      active += std::abs(std::abs(best[k]) - 0.35) < 1e-12;
    }
  }
  return {worst <= 2e-3 && active > 0,
          std::to_string(cases.size()) + " cases (" + std::to_string(active) +
              " actions at the lock), max |u - u_grid| " + fmt(worst) +
              (worst_name.empty() ? "" : " (" + worst_name + ")")};
}

// ---------------------------------------------------------------------------
// 6. Controller quality with noise off

struct Best {
  int row = 0;
  EpisodeScore score;
};

Best best_lqr(const Track& track, const EnvConfig& cfg) {
  Best best;
  best.score.total = -INFINITY;
  for (const auto& preset : classic::table_presets()) {
    classic::LqrController c(preset.weights);
    const EpisodeScore s = score_episode(c, track, cfg);
    if (s.total > best.score.total) best = {preset.row, s};
  }
  return best;
}

Outcome quality() {
  EnvConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.seed = 1;
  bool pass = true;
  std::ostringstream detail;
  for (const char* name : {"oval", "river", "switchback"}) {
    const Track track = builtin_track(name);
    const bool strict = std::string(name) != "switchback";
    const Best lqr = best_lqr(track, cfg);
    classic::MpcController mpc(classic::MpcConfig{});
    const EpisodeScore m = score_episode(mpc, track, cfg);
    for (const EpisodeScore& s : {lqr.score, m}) {
      pass = pass && !s.terminated_early && s.steps == cfg.max_steps;
      if (strict) pass = pass && s.total / s.steps >= 0.95;
    }
    detail << name << " lqr(row " << lqr.row << ") "
           << fmt(lqr.score.total / std::max(lqr.score.steps, 1)) << "/step x"
           << lqr.score.steps << ", mpc "
           << fmt(m.total / std::max(m.steps, 1)) << "/step x" << m.steps
           << "; ";
  }
  std::string text = detail.str();
  text.resize(text.size() - 2);
  return {pass, text};
}

// ---------------------------------------------------------------------------
// 7. DDPG learning

Outcome learning() {
  // Defaults match `lanekeep train` / `lanekeep eval` with no flags.
  const std::uint64_t seed = 1;
  const long steps = 200000;
  const Track track = builtin_track("oval");
  EnvConfig cfg;
  cfg.seed = seed;
  ddpg::DdpgConfig dc;
  dc.seed = seed;
  ddpg::DdpgAgent agent(kObservationDim, dc);
  const ddpg::TrainingLog log = ddpg::train(agent, track, cfg, steps);
  ddpg::DdpgController policy(agent.actor());
  const EpisodeScore s = score_episode(policy, track, cfg);
  const Best lqr = best_lqr(track, cfg);
  const double ratio = s.total / lqr.score.total;
  const bool pass = log.env_steps <= steps && !s.terminated_early &&
                    s.steps == cfg.max_steps && s.mean_abs_d < 0.5 &&
                    ratio >= 0.95;
  return {pass, std::to_string(log.env_steps) + " training steps; ddpg " +
                    fmt(s.total, 6) + " over " + std::to_string(s.steps) +
                    " steps, mean|d| " + fmt(s.mean_abs_d, 3) +
                    " m; best lqr (row " + std::to_string(lqr.row) + ") " +
                    fmt(lqr.score.total, 6) + "; ratio " + fmt(ratio, 4)};
}

// ---------------------------------------------------------------------------
// 8. Wire equivalence

Outcome wire() {
  using protocol::Message;
  using protocol::MessageType;
  const std::string golden_step =
      protocol::encode({MessageType::kStep, 1, {{"action", {0.0}}}});
  bool pass = golden_step ==
              std::string("\0\0\0\x26", 4) +
                  R"({"type":"step","seq":1,"action":[0.0]})";
  pass = pass && protocol::encode({MessageType::kBye, 2, nlohmann::json::object()}) ==
                     std::string("\0\0\0\x16", 4) + R"({"type":"bye","seq":2})";

  protocol::Server server(protocol::ServerOptions{});
  const std::uint16_t port = server.bind();
  std::thread th([&] { server.serve(3); });
  long compared = 0;
  std::string failure;
  try {
    const Track track = builtin_track("oval");
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      EnvConfig cfg;
      cfg.seed = seed;
      cfg.max_steps = 1000;
      LaneKeepEnv env(track);
      env.reset(cfg);
      classic::LqrController ctrl(classic::table_preset(7).weights);

      protocol::Client c;
      c.connect("127.0.0.1", port);
      c.request(MessageType::kHello,
                {{"seed", seed}, {"max_steps", 1000}, {"track", "oval"}});
      const Message first = c.request(MessageType::kReset);
      if (protocol::observation_from_json(first.body["obs"]) !=
          env.observation()) {
        failure = "reset observation differs";
      }
      while (!env.done() && failure.empty()) {
        const ErrorState exact = env.error_state();
        const ErrorState err =
            perceived_error_state(exact, env.observation(), track.half_width());
        const double a = ctrl.act({env.observation(), err, exact,
                                   env.vehicle(), env.track_pose(), env.track(),
                                   env.params(), env.config()});
        const StepResult want = env.step(a);
        const Message got = c.request(MessageType::kStep, {{"action", a}});
        if (protocol::observation_from_json(got.body["obs"]) != want.obs ||
            got.body["reward"].get<double>() != want.reward ||
            got.body["done"].get<bool>() != want.done) {
          failure = "seed " + std::to_string(seed) + " step " +
                    std::to_string(want.info.step) + " differs";
        }
        ++compared;
      }
      c.request(MessageType::kBye);
    }
  } catch (const std::exception& e) {
    failure = e.what();
  }
  server.stop();
  th.join();
  pass = pass && failure.empty() && compared == 3000;
  return {pass, std::to_string(compared) + " steps over 3 seeds compared" +
                    (failure.empty() ? "; golden frames match"
                                     : "; " + failure)};
}

// ---------------------------------------------------------------------------
// 9. Determinism of train and eval

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path root =
      fs::temp_directory_path() / ("lanekeep_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) {
    return run_cli(std::move(args), sink, sink);
  };
  bool ok = true;
  for (const char* tag : {"a", "b"}) {
    const fs::path dir = root / tag;
    ok = ok && run({"train", "--track", "oval", "--steps", "5000", "--seed",
                    "3", "--out", (dir / "ckpt").string()}) == kExitOk;
    ok = ok && run({"eval", "--track", "oval", "--controller", "ddpg",
                    "--checkpoint", (dir / "ckpt").string(), "--seed", "3",
                    "--out", (dir / "ddpg.csv").string()}) == kExitOk;
    ok = ok && run({"eval", "--track", "river", "--controller", "lqr",
                    "--seed", "3", "--out", (dir / "lqr.csv").string()}) ==
                   kExitOk;
    ok = ok && run({"eval", "--track", "loop", "--controller", "mpc",
                    "--seed", "3", "--max-steps", "1500", "--out",
                    (dir / "mpc.csv").string()}) == kExitOk;
  }
  int files = 0, identical = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    const std::string a = slurp(entry.path());
    identical += !a.empty() && a == slurp(root / "b" / rel);
  }
  fs::remove_all(root);
  return {ok && files > 0 && identical == files,
          std::to_string(identical) + "/" + std::to_string(files) +
              " output files bit-identical across two runs"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"riccati correctness", riccati},
      {"lqr closed-loop stability", stability},
      {"gradient correctness", gradients},
      {"reward and schedule oracles", formulas},
      {"mpc grid-search equivalence", mpc_grid},
      {"controller quality, noise off", quality},
      {"ddpg learning", learning},
      {"wire equivalence", wire},
      {"train/eval determinism", determinism},
  };
  // Runtime budgets in seconds.
  const double budget[] = {1, 5, 30, 1, 120, 300, 2700, 10, 600};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    const bool in_time = secs <= budget[i];
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << "criterion " << id << " [" << criteria[i].first << "]: "
              << (pass ? "PASS" : "FAIL") << " (" << fmt(secs, 3) << " s"
              << (in_time ? "" : ", over the " + fmt(budget[i]) + " s budget")
              << ") " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

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

#include "lanekeep/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "lanekeep/classic.hpp"
#include "lanekeep/config.hpp"
#include "lanekeep/ddpg.hpp"
#include "lanekeep/format.hpp"
#include "lanekeep/geometry.hpp"
#include "lanekeep/protocol.hpp"

namespace lanekeep::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> tracks{"oval"};
  std::vector<std::string> controllers{"lqr"};
  std::string preset;  // row number, "all" or "track"
  std::optional<int> horizon;
  std::uint64_t seed = 1;
  long long steps = 200000;
  int episodes = 1;
  int seeds = 5;
  std::string noise = "on";
  std::optional<int> max_steps;
  int port = 0;
  int sessions = -1;
  std::string out;
  std::string checkpoint;
  double gamma = 1.0;
  int jobs = 0;
  std::vector<std::string> positional;
};

/// Settings after layering defaults, the config file and flags.
struct Resolved {
  EnvConfig env;
  ddpg::DdpgConfig ddpg;
  classic::MpcConfig mpc;
  std::vector<classic::TablePreset> presets;
};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("expected a comma-separated integer list, got '" +
                        text + "'");
    }
  }
  return out;
}

Resolved resolve(const Options& o) {
  Resolved r;
  r.presets = classic::table_presets();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot open config file " + o.config_path);
    std::stringstream text;
    text << in.rdbuf();
    KeyValueConfig kv;
    try {
      kv = KeyValueConfig::parse(text.str());
    } catch (const ConfigError& e) {
      throw ConfigError(o.config_path + ": " + e.what());
    }

    EnvConfig& e = r.env;
    e.dt = kv.get_double("env.dt", e.dt);
    e.max_steps = static_cast<int>(kv.get_int("env.max_steps", e.max_steps));
    e.noise_sigma = kv.get_double("env.noise_sigma", e.noise_sigma);
    e.lambda = kv.get_double("env.lambda", e.lambda);
    if (kv.has("env.speed_kmh")) {
      e.speed = kmh_to_ms(kv.get_double("env.speed_kmh", 70.0));
    }
    e.heading_lookahead =
        kv.get_double("env.heading_lookahead", e.heading_lookahead);
    e.curvature_threshold =
        kv.get_double("env.curvature_threshold", e.curvature_threshold);

    ddpg::DdpgConfig& d = r.ddpg;
    d.gamma = kv.get_double("ddpg.gamma", d.gamma);
    d.tau = kv.get_double("ddpg.tau", d.tau);
    d.lr_actor = kv.get_double("ddpg.lr_actor", d.lr_actor);
    d.lr_critic = kv.get_double("ddpg.lr_critic", d.lr_critic);
    d.batch_size = static_cast<int>(kv.get_int("ddpg.batch_size", d.batch_size));
    d.buffer_capacity = static_cast<std::size_t>(kv.get_int(
        "ddpg.buffer_capacity", static_cast<std::int64_t>(d.buffer_capacity)));
    d.warmup = static_cast<int>(kv.get_int("ddpg.warmup", d.warmup));
    if (auto h = kv.get_string("ddpg.hidden")) d.hidden = parse_int_list(*h);
    d.schedule.eps_init = kv.get_double("ddpg.eps_init", d.schedule.eps_init);
    d.schedule.eps_min = kv.get_double("ddpg.eps_min", d.schedule.eps_min);
    d.schedule.t_eps = kv.get_double("ddpg.t_eps", d.schedule.t_eps);
    d.schedule.beta = kv.get_double("ddpg.beta", d.schedule.beta);
    d.schedule.noise_sigma =
        kv.get_double("ddpg.noise_sigma", d.schedule.noise_sigma);

    classic::MpcConfig& m = r.mpc;
    m.horizon = static_cast<int>(kv.get_int("mpc.horizon", m.horizon));
    m.q_y = kv.get_double("mpc.q_y", m.q_y);
    m.q_psi = kv.get_double("mpc.q_psi", m.q_psi);
    m.r = kv.get_double("mpc.r", m.r);
    m.iterations = static_cast<int>(kv.get_int("mpc.iterations", m.iterations));
    m.step_size = kv.get_double("mpc.step_size", m.step_size);
    m.tol = kv.get_double("mpc.tol", m.tol);

    const auto custom = classic::presets_from_config(text.str());
    for (const auto& p : custom) {
      auto it = std::find_if(r.presets.begin(), r.presets.end(),
                             [&](const auto& q) { return q.row == p.row; });
      if (it != r.presets.end()) {
        *it = p;
      } else {
        r.presets.push_back(p);
      }
    }
  }
  r.env.seed = o.seed;
  r.ddpg.seed = o.seed;
  if (o.noise == "off") r.env.noise_sigma = 0.0;
  if (o.max_steps) r.env.max_steps = *o.max_steps;
  r.mpc.dt = r.env.dt;
  r.env.validate();
  r.ddpg.validate();
  return r;
}

const classic::TablePreset& find_preset(const Resolved& r, int row) {
  for (const auto& p : r.presets) {
    if (p.row == row) return p;
  }
  throw ConfigError("no preset row " + std::to_string(row));
}

/// Presets selected by --preset for one track.
std::vector<classic::TablePreset> select_presets(const Resolved& r,
                                                 const std::string& spec,
                                                 const std::string& track) {
  if (spec == "all") return r.presets;
  if (spec.empty() || spec == "track") {
    std::vector<classic::TablePreset> out;
    for (const auto& p : r.presets) {
      if (p.track == track) out.push_back(p);
    }
    return out.empty() ? r.presets : out;
  }
  std::vector<classic::TablePreset> out;
  for (int row : parse_int_list(spec)) out.push_back(find_preset(r, row));
  return out;
}

std::string checkpoint_for(const std::string& base, const std::string& track) {
  if (base.empty()) {
    throw ConfigError("the ddpg controller needs --checkpoint");
  }
  const fs::path per_track = fs::path(base) / track;
  if (fs::exists(per_track / "manifest.json")) return per_track.string();
  return base;
}

std::string track_label(const std::string& name_or_path) {
  const fs::path p(name_or_path);
  return p.has_extension() ? p.stem().string() : name_or_path;
}

std::unique_ptr<Controller> make_controller(const std::string& kind,
                                            const classic::TablePreset* preset,
                                            const Resolved& r,
                                            const Options& o,
                                            const std::string& track) {
  if (kind == "lqr") {
    const auto w = preset ? preset->weights : classic::LqrWeights{};
    return std::make_unique<classic::LqrController>(w);
  }
  if (kind == "mpc") {
    classic::MpcConfig m = r.mpc;
    if (o.horizon) {
      m.horizon = *o.horizon;
    } else if (preset) {
      m.horizon = preset->horizon;
    }
    return std::make_unique<classic::MpcController>(m);
  }
  return std::make_unique<ddpg::DdpgController>(
      ddpg::load_actor(checkpoint_for(o.checkpoint, track)));
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

int cmd_train(const Options& o, std::ostream& out) {
  if (o.steps < 0) throw InvalidArgument("--steps must be >= 0");
  const Resolved r = resolve(o);
  const std::string track_name = o.tracks.front();
  const Track track = resolve_track(track_name);
  const fs::path dir = o.out.empty() ? fs::path("run") : fs::path(o.out);

  ddpg::DdpgAgent agent(kObservationDim, r.ddpg);
  const ddpg::TrainingLog log = ddpg::train(agent, track, r.env, o.steps);

  fs::create_directories(dir);
  ddpg::save_agent(agent, dir.string());
  std::ostringstream csv;
  log.write_csv(csv);
  write_file(dir / "train_log.csv", csv.str());

  out << "track " << track_name << ", " << log.env_steps << " steps, "
      << log.episodes.size() << " episodes\n";
  if (!log.episodes.empty()) {
    out << "first-10 mean reward " << format_double(log.head_mean(10))
        << "\nlast-10 mean reward " << format_double(log.tail_mean(10))
        << '\n';
  }
  out << "checkpoint written to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  if (o.episodes < 1) throw InvalidArgument("--episodes must be >= 1");
  const Resolved r = resolve(o);
  const std::string track_name = o.tracks.front();
  const std::string kind = o.controllers.front();
  const Track track = resolve_track(track_name);
  const std::string label = track_label(track_name);

  std::optional<classic::TablePreset> preset;
  if (kind != "ddpg") {
    const auto chosen = select_presets(r, o.preset, label);
    if (!o.preset.empty() && o.preset != "track" && chosen.size() != 1) {
      throw ConfigError("eval takes a single --preset row");
    }
    preset = chosen.front();
  }
  auto controller =
      make_controller(kind, preset ? &*preset : nullptr, r, o, label);

  out << "track " << label << ", controller " << kind;
  if (preset) out << ", preset " << preset->row;
  out << '\n';

  double sum = 0.0;
  for (int k = 0; k < o.episodes; ++k) {
    EnvConfig cfg = r.env;
    cfg.seed = o.seed + static_cast<std::uint64_t>(k);
    std::ostringstream trace_text;
    TraceWriter trace(trace_text);
    const EpisodeScore s = score_episode(
        *controller, track, cfg, {}, o.out.empty() ? nullptr : &trace,
        o.gamma);
    if (!o.out.empty()) {
      fs::path path(o.out);
      if (o.episodes > 1) {
        path = path.parent_path() /
               (path.stem().string() + ".ep" + std::to_string(k + 1) +
                path.extension().string());
      }
      write_file(path, trace_text.str());
    }
    sum += s.total;
    out << "episode " << k + 1 << " seed " << cfg.seed << " score "
        << format_double(s.total) << " steps " << s.steps << " terminated "
        << (s.terminated_early ? "yes" : "no") << " mean|d| "
        << format_double(s.mean_abs_d) << '\n';
  }
  out << "mean score " << format_double(sum / o.episodes) << '\n';
  return kExitOk;
}

struct Cell {
  std::string track;
  std::string controller;
  std::optional<classic::TablePreset> preset;
  std::vector<double> scores;
  int terminated = 0;
  std::string error;
};

std::string setup_text(const Cell& c) {
  if (!c.preset) return "learned";
  std::ostringstream s;
  if (c.controller == "lqr") {
    const auto& w = c.preset->weights;
    s << "q=(" << format_double(w.q1) << "," << format_double(w.q2) << ","
      << format_double(w.q3) << "," << format_double(w.q4)
      << ") rho=" << format_double(w.rho);
  } else {
    s << "Hp=" << c.preset->horizon;
  }
  return s.str();
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {NAN, NAN};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd =
      v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  return {mean, sd};
}

int cmd_compare(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.seeds < 1) throw InvalidArgument("--seeds must be >= 1");
  const Resolved r = resolve(o);

  std::vector<Cell> cells;
  std::map<std::string, Track> tracks;
  for (const auto& name : o.tracks) {
    const std::string label = track_label(name);
    tracks.emplace(label, resolve_track(name));
    const auto presets = select_presets(r, o.preset, label);
    for (const auto& p : presets) {
      for (const auto& kind : o.controllers) {
        if (kind != "ddpg") cells.push_back({label, kind, p, {}, 0, {}});
      }
    }
    if (std::find(o.controllers.begin(), o.controllers.end(), "ddpg") !=
        o.controllers.end()) {
      cells.push_back({label, "ddpg", std::nullopt, {}, 0, {}});
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      Cell& c = cells[i];
      try {
        auto controller = make_controller(
            c.controller, c.preset ? &*c.preset : nullptr, r, o, c.track);
        for (int k = 0; k < o.seeds; ++k) {
          EnvConfig cfg = r.env;
          cfg.seed = o.seed + static_cast<std::uint64_t>(k);
          const EpisodeScore s = score_episode(*controller, tracks.at(c.track),
                                               cfg, {}, nullptr, o.gamma);
          c.scores.push_back(s.total);
          c.terminated += s.terminated_early ? 1 : 0;
        }
      } catch (const std::exception& e) {
        c.error = e.what();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t jobs = std::min<std::size_t>(
      o.jobs > 0 ? static_cast<std::size_t>(o.jobs) : hw,
      std::max<std::size_t>(cells.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream csv;
  csv << "track,controller,preset,q1,q2,q3,q4,rho,hp,seeds,score_mean,"
         "score_std,terminated,status\n";
  std::ostringstream table;
  table << "Scores: " << (o.gamma == 1.0 ? "undiscounted" : "discounted")
        << " episode return, mean +/- std over " << o.seeds
        << " seed(s) starting at " << o.seed
        << " (single-run scores in the reference table)\n";
  table << std::left << std::setw(12) << "track" << std::setw(6) << "ctrl"
        << std::setw(7) << "preset" << std::setw(30) << "setup"
        << std::setw(24) << "score" << "terminated\n";
  int failures = 0;
  for (const auto& c : cells) {
    const auto [mean, sd] = mean_std(c.scores);
    const std::string row = c.preset ? std::to_string(c.preset->row) : "";
    csv << c.track << ',' << c.controller << ',' << row << ',';
    if (c.preset && c.controller == "lqr") {
      const auto& w = c.preset->weights;
      csv << format_double(w.q1) << ',' << format_double(w.q2) << ','
          << format_double(w.q3) << ',' << format_double(w.q4) << ','
          << format_double(w.rho) << ",,";
    } else if (c.preset) {
      csv << ",,,,," << c.preset->horizon << ',';
    } else {
      csv << ",,,,,,";
    }
    csv << o.seeds << ',';
    std::string score_cell;
    if (c.error.empty()) {
      csv << format_double(mean) << ',' << format_double(sd) << ','
          << c.terminated << ",ok\n";
      std::ostringstream s;
      s << std::fixed << std::setprecision(1) << mean << " +/- " << sd;
      score_cell = s.str();
    } else {
      ++failures;
      std::string msg = c.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      csv << ",,,failed: " << msg << '\n';
      score_cell = "FAILED";
      err << "cell " << c.track << '/' << c.controller << ' ' << row
          << " failed: " << c.error << '\n';
    }
    table << std::left << std::setw(12) << c.track << std::setw(6)
          << c.controller << std::setw(7) << row << std::setw(30)
          << setup_text(c) << std::setw(24) << score_cell
          << (c.error.empty() ? std::to_string(c.terminated) : "-") << '\n';
  }
  out << table.str();
  if (!o.out.empty()) {
    write_file(o.out, csv.str());
    out << "table written to " << o.out << '\n';
  }
  return failures == 0 ? kExitOk : kExitFailure;
}

std::atomic<protocol::Server*> g_server{nullptr};

extern "C" void on_interrupt(int) {
  if (auto* s = g_server.load()) s->stop();
}

int cmd_serve(const Options& o, std::ostream& out) {
  if (o.port < 0 || o.port > 65535) throw InvalidArgument("bad --port");
  const Resolved r = resolve(o);
  protocol::ServerOptions so;
  so.port = static_cast<std::uint16_t>(o.port);
  so.defaults.track = o.tracks.front();
  so.defaults.env = r.env;
  builtin_track(so.defaults.track);  // fail early on unknown names
  protocol::Server server(so);
  const std::uint16_t port = server.bind();
  out << "listening on 127.0.0.1:" << port << '\n' << std::flush;
  g_server.store(&server);
  auto old_int = std::signal(SIGINT, on_interrupt);
  auto old_term = std::signal(SIGTERM, on_interrupt);
  try {
    server.serve(o.sessions, &out);
  } catch (...) {
    g_server.store(nullptr);
    std::signal(SIGINT, old_int);
    std::signal(SIGTERM, old_term);
    throw;
  }
  g_server.store(nullptr);
  std::signal(SIGINT, old_int);
  std::signal(SIGTERM, old_term);
  out << "served " << server.sessions_served() << " session(s)\n";
  return kExitOk;
}

int cmd_tracks(const std::string& action, const Options& o,
               std::ostream& out) {
  if (action == "list") {
    out << std::left << std::setw(12) << "name" << std::setw(10) << "segments"
        << std::setw(12) << "length_m" << std::setw(12) << "half_width"
        << "max_curvature\n";
    for (const auto& name : builtin_track_names()) {
      const Track t = builtin_track(name);
      double kmax = 0.0;
      for (const auto& seg : t.segments()) {
        kmax = std::max(kmax, std::abs(seg.curvature));
      }
      std::ostringstream len;
      len << std::fixed << std::setprecision(1) << t.total_length();
      out << std::setw(12) << name << std::setw(10) << t.segments().size()
          << std::setw(12) << len.str() << std::setw(12)
          << format_double(t.half_width()) << format_double(kmax) << '\n';
    }
    return kExitOk;
  }
  if (o.positional.size() != 1) {
    throw InvalidArgument("tracks " + action + " takes exactly one argument");
  }
  const std::string& arg = o.positional.front();
  if (action == "emit") {
    const Track t = builtin_track(arg);
    const std::string path = o.out.empty() ? arg + ".json" : o.out;
    save_track(t, path);
    out << "wrote " << path << '\n';
    return kExitOk;
  }
  const Track t = load_track(arg);
  std::ostringstream len;
  len << std::fixed << std::setprecision(3) << t.total_length();
  out << arg << ": ok (" << t.segments().size() << " segments, length "
      << len.str() << " m)\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  Options o;
  CLI::App app{"Lateral control laboratory: LQR, MPC and DDPG lane keeping",
               "lanekeep"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lanekeep 1.0.0");

  const std::vector<std::string> kinds{"lqr", "mpc", "ddpg"};
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Key/value config file")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Base seed");
    sub->add_option("--noise", o.noise, "Observation noise")
        ->check(CLI::IsMember({"on", "off"}));
    sub->add_option("--max-steps", o.max_steps, "Episode step limit");
  };

  auto* train = app.add_subcommand("train", "Train a DDPG agent");
  common(train);
  train->add_option("--track", o.tracks, "Track name or file")
      ->expected(1);
  train->add_option("--steps", o.steps, "Environment steps");
  train->add_option("--out", o.out, "Output directory");

  auto* eval = app.add_subcommand("eval", "Evaluate a controller");
  common(eval);
  eval->add_option("--track", o.tracks, "Track name or file")->expected(1);
  eval->add_option("--controller", o.controllers, "lqr, mpc or ddpg")
      ->expected(1)
      ->check(CLI::IsMember(kinds));
  eval->add_option("--preset", o.preset, "Comparison row (LQR weights, Hp)");
  eval->add_option("--horizon", o.horizon, "MPC horizon override");
  eval->add_option("--episodes", o.episodes, "Episodes (seed, seed+1, ...)");
  eval->add_option("--checkpoint", o.checkpoint, "DDPG checkpoint directory");
  eval->add_option("--out", o.out, "Trace CSV path");
  eval->add_option("--gamma", o.gamma, "Discount for reported scores")
      ->check(CLI::Range(0.0, 1.0));

  auto* compare = app.add_subcommand("compare", "Controller score table");
  common(compare);
  compare->add_option("--track", o.tracks, "Tracks, comma separated")
      ->delimiter(',');
  auto* compare_kinds = compare->add_option(
      "--controller", o.controllers,
      "Controllers, comma separated (default: lqr,mpc, plus ddpg with "
      "--checkpoint)")
      ->delimiter(',')
      ->check(CLI::IsMember(kinds));
  compare->add_option("--preset", o.preset,
                      "'track' (default), 'all' or a row list");
  compare->add_option("--horizon", o.horizon, "MPC horizon override");
  compare->add_option("--seeds", o.seeds, "Seeds in the bank");
  compare->add_option("--checkpoint", o.checkpoint,
                      "DDPG checkpoint directory (or one per track)");
  compare->add_option("--out", o.out, "CSV path");
  compare->add_option("--gamma", o.gamma, "Discount for reported scores")
      ->check(CLI::Range(0.0, 1.0));
  compare->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)");

  auto* serve = app.add_subcommand("serve", "Run the environment server");
  common(serve);
  serve->add_option("--track", o.tracks, "Default track")->expected(1);
  serve->add_option("--port", o.port, "TCP port (0 = any free port)");
  serve->add_option("--sessions", o.sessions,
                    "Exit after this many sessions (default: run forever)");

  auto* tracks = app.add_subcommand("tracks", "Built-in tracks and files");
  tracks->require_subcommand(1);
  auto* list = tracks->add_subcommand("list", "List built-in tracks");
  auto* emit = tracks->add_subcommand("emit", "Write a built-in as JSON");
  emit->add_option("name", o.positional, "Built-in name")->required();
  emit->add_option("--out", o.out, "Output path");
  auto* validate = tracks->add_subcommand("validate", "Check a track file");
  validate->add_option("file", o.positional, "Track JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "lanekeep 1.0.0\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    for (auto* sub : app.get_subcommands()) {
      err << "run 'lanekeep " << sub->get_name() << " --help' for usage\n";
    }
    if (app.get_subcommands().empty()) err << app.help();
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*compare) {
      if (compare_kinds->count() == 0) {
        o.controllers = {"lqr", "mpc"};
        if (!o.checkpoint.empty()) o.controllers.push_back("ddpg");
      }
      return cmd_compare(o, out, err);
    }
    if (*serve) return cmd_serve(o, out);
    if (*list) return cmd_tracks("list", o, out);
    if (*emit) return cmd_tracks("emit", o, out);
    if (*validate) return cmd_tracks("validate", o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("lanekeep");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace lanekeep::cli

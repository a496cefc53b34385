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

#include "lanekeep/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace lanekeep {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kCorridorFactor = 10.0;

std::size_t line_at_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + offset, '\n'));
}

std::size_t line_of_key(std::string_view text, std::string_view key) {
  const std::string quoted = "\"" + std::string(key) + "\"";
  const auto pos = text.find(quoted);
  return pos == std::string_view::npos ? 1 : line_at_offset(text, pos);
}

// Line on which the index-th object of the "segments" array opens.
std::size_t line_of_segment(std::string_view text, std::size_t index) {
  auto pos = text.find("\"segments\"");
  if (pos == std::string_view::npos) return 1;
  pos = text.find('[', pos);
  if (pos == std::string_view::npos) return line_of_key(text, "segments");
  int depth = 0;
  std::size_t seen = 0;
  bool in_string = false;
  for (std::size_t i = pos + 1; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      if (depth == 0 && c == '{') {
        if (seen == index) return line_at_offset(text, i);
        ++seen;
      }
      ++depth;
    } else if (c == '}' || c == ']') {
      if (depth == 0) break;
      --depth;
    }
  }
  return line_of_key(text, "segments");
}

std::string kind_name(TrackSegment::Kind kind) {
  return kind == TrackSegment::Kind::kStraight ? "straight" : "arc";
}

void validate_segment(const TrackSegment& seg, std::size_t i) {
  const std::string where = "segment " + std::to_string(i) + ": ";
  if (!(seg.length > 0.0) || !std::isfinite(seg.length)) {
    throw TrackError(where + "length must be positive");
  }
  if (seg.kind == TrackSegment::Kind::kStraight && seg.curvature != 0.0) {
    throw TrackError(where + "straight segment must have zero curvature");
  }
  if (seg.kind == TrackSegment::Kind::kArc &&
      (!(std::abs(seg.curvature) > 0.0) || !std::isfinite(seg.curvature))) {
    throw TrackError(where + "arc segment needs nonzero curvature");
  }
}

}  // namespace

double wrap_angle(double angle) {
  if (angle > -kPi && angle <= kPi) return angle;
  double r = std::remainder(angle, kTwoPi);  // [-pi, pi]
  if (r <= -kPi) r += kTwoPi;
  return r;
}

TrackSegment TrackSegment::Turn(double radius, double angle) {
  return Arc(radius * std::abs(angle), (angle > 0.0 ? 1.0 : -1.0) / radius);
}

std::string_view to_string(HeadingClass c) {
  switch (c) {
    case HeadingClass::kLeft:
      return "left";
    case HeadingClass::kStraight:
      return "straight";
    case HeadingClass::kRight:
      return "right";
  }
  return "?";
}

Track::Track(std::string name, std::vector<TrackSegment> segments,
             double half_width, bool closed)
    : name_(std::move(name)),
      segments_(std::move(segments)),
      half_width_(half_width),
      closed_(closed) {
  if (segments_.empty()) throw TrackError("track has no segments");
  if (!(half_width_ > 0.0) || !std::isfinite(half_width_)) {
    throw TrackError("half_width must be positive");
  }
  starts_.reserve(segments_.size());
  start_poses_.reserve(segments_.size());
  WorldPose pose;
  double s = 0.0;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    validate_segment(segments_[i], i);
    starts_.push_back(s);
    start_poses_.push_back(pose);
    pose = pose_on_segment(i, segments_[i].length);
    s += segments_[i].length;
  }
  total_length_ = s;
  if (closed_) {
    if (closure_gap() > kClosureTolerance ||
        closure_heading_gap() > kClosureHeadingTolerance) {
      std::ostringstream msg;
      msg << "closed track does not return to its start: gap "
          << closure_gap() << " m, heading " << closure_heading_gap()
          << " rad";
      throw TrackError(msg.str());
    }
  }
}

WorldPose Track::pose_on_segment(std::size_t i, double local_s) const {
  const WorldPose& p0 = start_poses_[i];
  const double k = segments_[i].curvature;
  if (segments_[i].kind == TrackSegment::Kind::kStraight) {
    return {p0.x + local_s * std::cos(p0.psi),
            p0.y + local_s * std::sin(p0.psi), p0.psi};
  }
  const double psi = p0.psi + k * local_s;
  return {p0.x + (std::sin(psi) - std::sin(p0.psi)) / k,
          p0.y - (std::cos(psi) - std::cos(p0.psi)) / k, wrap_angle(psi)};
}

WorldPose Track::end_pose() const {
  return pose_on_segment(segments_.size() - 1, segments_.back().length);
}

double Track::closure_gap() const {
  const WorldPose end = end_pose();
  return std::hypot(end.x, end.y);
}

double Track::closure_heading_gap() const {
  return std::abs(wrap_angle(end_pose().psi));
}

double Track::wrap_s(double s) const {
  if (!closed_) return s;
  double r = std::fmod(s, total_length_);
  if (r < 0.0) r += total_length_;
  if (r >= total_length_) r = 0.0;
  return r;
}

std::size_t Track::segment_index(double s) const {
  const double ws = wrap_s(s);
  auto it = std::upper_bound(starts_.begin(), starts_.end(), ws);
  if (it == starts_.begin()) return 0;
  return static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
}

WorldPose Track::centerline_pose(double s) const {
  const double ws = wrap_s(s);
  const std::size_t i = segment_index(ws);
  return pose_on_segment(i, ws - starts_[i]);
}

double Track::curvature_at(double s) const {
  return segments_[segment_index(s)].curvature;
}

TrackPose Track::world_to_track(const WorldPose& pose) const {
  double best_dist = std::numeric_limits<double>::infinity();
  std::size_t best_seg = 0;
  double best_local = 0.0;

  auto consider = [&](std::size_t i, double local_s) {
    const WorldPose c = pose_on_segment(i, local_s);
    const double dist = std::hypot(pose.x - c.x, pose.y - c.y);
    if (dist < best_dist) {
      best_dist = dist;
      best_seg = i;
      best_local = local_s;
    }
  };

  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const TrackSegment& seg = segments_[i];
    const WorldPose& p0 = start_poses_[i];
    if (seg.kind == TrackSegment::Kind::kStraight) {
      const double t = (pose.x - p0.x) * std::cos(p0.psi) +
                       (pose.y - p0.y) * std::sin(p0.psi);
      consider(i, std::clamp(t, 0.0, seg.length));
      continue;
    }
    const double k = seg.curvature;
    const double cx = p0.x - std::sin(p0.psi) / k;
    const double cy = p0.y + std::cos(p0.psi) / k;
    const double a0 = std::atan2(p0.y - cy, p0.x - cx);
    const double a = std::atan2(pose.y - cy, pose.x - cx);
    const double base = wrap_angle(a - a0) / k;
    const double period = kTwoPi / std::abs(k);
    // Candidates in ascending s so ties resolve to the smaller s.
    consider(i, 0.0);
    const int turns = static_cast<int>(std::ceil(seg.length / period)) + 1;
    for (int n = -turns; n <= turns; ++n) {
      const double cand = base + n * period;
      if (cand > 0.0 && cand < seg.length) consider(i, cand);
    }
    consider(i, seg.length);
  }

  if (!(best_dist <= kCorridorFactor * half_width_)) {
    std::ostringstream msg;
    msg << "pose (" << pose.x << ", " << pose.y << ") is " << best_dist
        << " m from the centerline of " << name_;
    throw OutOfCorridorError(msg.str());
  }

  const WorldPose c = pose_on_segment(best_seg, best_local);
  TrackPose out;
  out.s = wrap_s(starts_[best_seg] + best_local);
  out.d = -(pose.x - c.x) * std::sin(c.psi) + (pose.y - c.y) * std::cos(c.psi);
  out.theta = wrap_angle(pose.psi - c.psi);
  return out;
}

double Track::mean_curvature(double s, double lookahead) const {
  if (!(lookahead > 0.0)) throw InvalidArgument("lookahead must be positive");
  const std::size_t n = segments_.size();
  double pos = wrap_s(s);
  std::size_t i = segment_index(pos);
  double local = pos - starts_[i];
  double remaining = lookahead;
  double integral = 0.0;
  while (remaining > 0.0) {
    const bool unbounded = !closed_ && i + 1 == n;
    const double avail =
        unbounded ? remaining : std::max(0.0, segments_[i].length - local);
    const double take = std::min(remaining, avail);
    integral += segments_[i].curvature * take;
    remaining -= take;
    if (remaining <= 0.0) break;
    i = closed_ ? (i + 1) % n : i + 1;
    local = 0.0;
  }
  return integral / lookahead;
}

HeadingClass Track::heading_class(double s, double lookahead,
                                  double threshold) const {
  const double k = mean_curvature(s, lookahead);
  if (k > threshold) return HeadingClass::kLeft;
  if (k < -threshold) return HeadingClass::kRight;
  return HeadingClass::kStraight;
}

Track Track::mirrored() const {
  std::vector<TrackSegment> segs = segments_;
  for (auto& seg : segs) seg.curvature = -seg.curvature;
  return Track(name_, std::move(segs), half_width_, closed_);
}

std::vector<std::string> builtin_track_names() {
  return {"oval", "river", "switchback", "loop"};
}

Track builtin_track(std::string_view name) {
  using S = TrackSegment;
  // Each closed track repeats a half (turning pi) twice or a quarter
  // (turning pi/2) four times, which closes the loop exactly.
  auto repeat = [](const std::vector<S>& part, int times) {
    std::vector<S> out;
    for (int t = 0; t < times; ++t) out.insert(out.end(), part.begin(), part.end());
    return out;
  };
  if (name == "oval") {
    return Track("oval", repeat({S::Straight(1000.0), S::Turn(150.0, kPi)}, 2),
                 5.0, true);
  }
  if (name == "river") {
    return Track("river",
                 repeat({S::Straight(500.0), S::Turn(400.0, kPi / 3.0),
                         S::Straight(200.0), S::Turn(500.0, -kPi / 6.0),
                         S::Straight(300.0), S::Turn(300.0, 5.0 * kPi / 6.0)},
                        2),
                 5.0, true);
  }
  if (name == "switchback") {
    return Track(
        "switchback",
        repeat({S::Straight(150.0), S::Turn(40.0, kPi / 2.0),
                S::Straight(80.0), S::Turn(35.0, -kPi / 2.0),
                S::Straight(100.0), S::Turn(30.0, 2.0 * kPi / 3.0),
                S::Straight(60.0), S::Turn(40.0, -kPi / 3.0),
                S::Turn(45.0, 2.0 * kPi / 3.0)},
               2),
        4.0, true);
  }
  if (name == "loop") {
    return Track("loop",
                 repeat({S::Straight(120.0), S::Turn(80.0, kPi / 3.0),
                         S::Turn(100.0, -kPi / 6.0), S::Turn(60.0, kPi / 3.0)},
                        4),
                 5.0, true);
  }
  throw TrackError("unknown built-in track '" + std::string(name) + "'");
}

Track track_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw TrackError("line " + std::to_string(line_at_offset(text, e.byte)) +
                     ": " + e.what());
  }
  auto fail = [&](std::size_t line, const std::string& msg) -> TrackError {
    return TrackError("line " + std::to_string(line) + ": " + msg);
  };
  if (!doc.is_object()) throw fail(1, "track document must be an object");
  for (const char* key : {"name", "half_width", "closed", "segments"}) {
    if (!doc.contains(key)) {
      throw fail(1, std::string("missing key '") + key + "'");
    }
  }
  if (!doc["name"].is_string()) {
    throw fail(line_of_key(text, "name"), "name must be a string");
  }
  if (!doc["half_width"].is_number()) {
    throw fail(line_of_key(text, "half_width"), "half_width must be a number");
  }
  if (!doc["closed"].is_boolean()) {
    throw fail(line_of_key(text, "closed"), "closed must be a boolean");
  }
  if (!doc["segments"].is_array() || doc["segments"].empty()) {
    throw fail(line_of_key(text, "segments"),
               "segments must be a non-empty array");
  }
  std::vector<TrackSegment> segments;
  std::size_t i = 0;
  for (const auto& js : doc["segments"]) {
    const std::size_t line = line_of_segment(text, i);
    if (!js.is_object() || !js.contains("kind") || !js.contains("length") ||
        !js["kind"].is_string() || !js["length"].is_number()) {
      throw fail(line, "segment " + std::to_string(i) +
                           ": needs string kind and numeric length");
    }
    TrackSegment seg;
    const auto kind = js["kind"].get<std::string>();
    if (kind == "straight") {
      seg.kind = TrackSegment::Kind::kStraight;
    } else if (kind == "arc") {
      seg.kind = TrackSegment::Kind::kArc;
    } else {
      throw fail(line, "segment " + std::to_string(i) + ": unknown kind '" +
                           kind + "'");
    }
    seg.length = js["length"].get<double>();
    if (js.contains("curvature")) {
      if (!js["curvature"].is_number()) {
        throw fail(line, "segment " + std::to_string(i) +
                             ": curvature must be a number");
      }
      seg.curvature = js["curvature"].get<double>();
    }
    try {
      validate_segment(seg, i);
    } catch (const TrackError& e) {
      throw fail(line, e.what());
    }
    segments.push_back(seg);
    ++i;
  }
  try {
    return Track(doc["name"].get<std::string>(), std::move(segments),
                 doc["half_width"].get<double>(), doc["closed"].get<bool>());
  } catch (const TrackError& e) {
    const std::string msg = e.what();
    const auto line = msg.find("half_width") != std::string::npos
                          ? line_of_key(text, "half_width")
                          : line_of_key(text, "closed");
    throw fail(line, msg);
  }
}

std::string track_to_json(const Track& track) {
  nlohmann::ordered_json doc;
  doc["name"] = track.name();
  doc["half_width"] = track.half_width();
  doc["closed"] = track.closed();
  doc["segments"] = nlohmann::ordered_json::array();
  for (const auto& seg : track.segments()) {
    nlohmann::ordered_json js;
    js["kind"] = kind_name(seg.kind);
    js["length"] = seg.length;
    js["curvature"] = seg.curvature;
    doc["segments"].push_back(js);
  }
  return doc.dump(2) + "\n";
}

Track load_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TrackError("cannot open track file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return track_from_json(buf.str());
}

void save_track(const Track& track, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw TrackError("cannot write track file " + path);
  out << track_to_json(track);
}

Track resolve_track(const std::string& name_or_path) {
  for (const auto& name : builtin_track_names()) {
    if (name == name_or_path) return builtin_track(name);
  }
  return load_track(name_or_path);
}

}  // namespace lanekeep

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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "lanekeep/errors.hpp"

namespace lanekeep {

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

struct TrackSegment {
  enum class Kind { kStraight, kArc };

  Kind kind = Kind::kStraight;
  double length = 0.0;     // m
  double curvature = 0.0;  // 1/m, positive turns left

  static TrackSegment Straight(double length) {
    return {Kind::kStraight, length, 0.0};
  }
  static TrackSegment Arc(double length, double curvature) {
    return {Kind::kArc, length, curvature};
  }
  /// Arc that turns through `angle` radians (signed) at radius `radius`.
  static TrackSegment Turn(double radius, double angle);
};

struct WorldPose {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
};

struct TrackPose {
  double s = 0.0;
  double d = 0.0;
  double theta = 0.0;
};

enum class HeadingClass { kLeft = 0, kStraight = 1, kRight = 2 };

std::string_view to_string(HeadingClass c);

inline constexpr double kDefaultCurvatureThreshold = 0.005;
inline constexpr double kDefaultHeadingLookahead = 30.0;

/// Piecewise constant-curvature centerline with a lane half-width. Segment
/// start poses are integrated once at construction; the first segment starts
/// at the origin heading along +x. Immutable after construction.
class Track {
 public:
  Track(std::string name, std::vector<TrackSegment> segments,
        double half_width, bool closed);

  const std::string& name() const { return name_; }
  const std::vector<TrackSegment>& segments() const { return segments_; }
  double half_width() const { return half_width_; }
  bool closed() const { return closed_; }
  double total_length() const { return total_length_; }

  /// Arc length at which segment `i` starts.
  double segment_start(std::size_t i) const { return starts_[i]; }

  /// Pose reached at the end of the last segment.
  WorldPose end_pose() const;

  /// Distance and heading mismatch between the end pose and the start pose.
  double closure_gap() const;
  double closure_heading_gap() const;

  /// Wraps s into [0, total) for closed tracks; identity otherwise.
  double wrap_s(double s) const;

  /// Index of the segment containing s; at a boundary the segment beginning
  /// there wins. Open tracks clamp to the first/last segment.
  std::size_t segment_index(double s) const;

  WorldPose centerline_pose(double s) const;
  double curvature_at(double s) const;

  /// Nearest centerline point. Throws OutOfCorridorError beyond
  /// 10 * half_width.
  TrackPose world_to_track(const WorldPose& pose) const;

  /// Mean curvature over [s, s + lookahead].
  double mean_curvature(double s, double lookahead) const;

  HeadingClass heading_class(
      double s, double lookahead = kDefaultHeadingLookahead,
      double threshold = kDefaultCurvatureThreshold) const;

  /// Same track with every curvature negated.
  Track mirrored() const;

 private:
  WorldPose pose_on_segment(std::size_t i, double local_s) const;

  std::string name_;
  std::vector<TrackSegment> segments_;
  double half_width_;
  bool closed_;
  std::vector<double> starts_;
  std::vector<WorldPose> start_poses_;
  double total_length_ = 0.0;
};

inline constexpr double kClosureTolerance = 1e-6;
inline constexpr double kClosureHeadingTolerance = 1e-8;

// Free-function forms of the Track queries.
inline WorldPose centerline_pose(const Track& track, double s) {
  return track.centerline_pose(s);
}
inline TrackPose world_to_track(const Track& track, const WorldPose& pose) {
  return track.world_to_track(pose);
}
inline double curvature_at(const Track& track, double s) {
  return track.curvature_at(s);
}
inline HeadingClass heading_class(
    const Track& track, double s, double lookahead = kDefaultHeadingLookahead,
    double threshold = kDefaultCurvatureThreshold) {
  return track.heading_class(s, lookahead, threshold);
}

/// Names of the four built-in closed tracks.
std::vector<std::string> builtin_track_names();
Track builtin_track(std::string_view name);

/// Track JSON: {name, half_width, closed, segments:[{kind, length,
/// curvature}]}. Parse failures and invariant violations throw TrackError
/// with a "line N:" prefix pointing into the document.
Track track_from_json(std::string_view text);
std::string track_to_json(const Track& track);
Track load_track(const std::string& path);
void save_track(const Track& track, const std::string& path);

/// Built-in name or path to a track JSON file.
Track resolve_track(const std::string& name_or_path);

}  // namespace lanekeep

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "patchpipe/core.hpp"

namespace patchpipe {

struct TrackerParams {
  double gate_px = 80.0;
  int max_gap_frames = 15;
};

/// Association point of a pose: the waist, else the centroid of what is present.
Point2 anchor_point(const Pose& pose);

struct ActiveTrack {
  Track track;
  std::int64_t last_frame = 0;
};

struct Assignment {
  std::size_t pose_index = 0;
  std::int64_t track_id = 0;
  bool new_track = false;
};

/// Greedy nearest-pair tracker. Single owner; mutate through step().
class TrackerState {
 public:
  explicit TrackerState(TrackerParams params = {}, std::int64_t first_track_id = 0);

  /// Associates one frame's poses. Returns one assignment per pose, in pose order.
  std::vector<Assignment> step(const FrameDetections& frame);

  /// Moves out tracks retired so far (in retirement order).
  std::vector<Track> take_retired();
  /// Retires every active track and returns all tracks, sorted by id.
  std::vector<Track> finish();

  const std::vector<ActiveTrack>& active() const { return active_; }
  std::int64_t next_track_id() const { return next_track_id_; }
  const TrackerParams& params() const { return params_; }

 private:
  TrackerParams params_;
  std::vector<ActiveTrack> active_;
  std::vector<Track> retired_;
  std::int64_t next_track_id_;
  std::int64_t last_frame_ = 0;
  bool started_ = false;
};

std::vector<Track> run_tracker(std::span<const FrameDetections> frames, const TrackerParams& params = {});

}  // namespace patchpipe

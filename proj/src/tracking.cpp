#include "patchpipe/tracking.hpp"

#include <algorithm>
#include <tuple>

namespace patchpipe {

Point2 anchor_point(const Pose& pose) {
  if (pose.waist) return *pose.waist;
  double sx = 0.0, sy = 0.0;
  int n = 0;
  for (auto k : {Keypoint::head, Keypoint::neck, Keypoint::waist, Keypoint::abdomen}) {
    if (const auto& p = pose.get(k)) {
      sx += p->x;
      sy += p->y;
      ++n;
    }
  }
  if (n == 0) throw Error("pose has no keypoints");
  return {sx / n, sy / n};
}

TrackerState::TrackerState(TrackerParams params, std::int64_t first_track_id)
    : params_(params), next_track_id_(first_track_id) {}

std::vector<Assignment> TrackerState::step(const FrameDetections& frame) {
  if (started_ && frame.frame_index <= last_frame_) {
    throw Error("tracker received non-increasing frame index " + std::to_string(frame.frame_index));
  }
  started_ = true;
  last_frame_ = frame.frame_index;

  // Retire tracks that have been silent for more than max_gap frames.
  auto silent = [&](const ActiveTrack& a) {
    return frame.frame_index - a.last_frame - 1 > params_.max_gap_frames;
  };
  for (auto& a : active_) {
    if (silent(a)) retired_.push_back(std::move(a.track));
  }
  std::erase_if(active_, silent);

  struct Candidate {
    double dist;
    std::int64_t track_id;
    std::size_t track_slot;
    std::size_t pose_index;
  };
  std::vector<Point2> pose_anchor;
  pose_anchor.reserve(frame.poses.size());
  for (const auto& p : frame.poses) pose_anchor.push_back(anchor_point(p));

  std::vector<Candidate> candidates;
  for (std::size_t t = 0; t < active_.size(); ++t) {
    const Point2 ta = anchor_point(active_[t].track.entries.back().pose);
    for (std::size_t p = 0; p < frame.poses.size(); ++p) {
      const double d = point_distance(ta, pose_anchor[p]);
      if (d < params_.gate_px) candidates.push_back({d, active_[t].track.track_id, t, p});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.dist, a.track_id, a.pose_index) < std::tie(b.dist, b.track_id, b.pose_index);
  });

  std::vector<Assignment> out(frame.poses.size());
  std::vector<bool> pose_taken(frame.poses.size(), false);
  std::vector<bool> track_taken(active_.size(), false);
  for (const auto& c : candidates) {
    if (pose_taken[c.pose_index] || track_taken[c.track_slot]) continue;
    pose_taken[c.pose_index] = true;
    track_taken[c.track_slot] = true;
    out[c.pose_index] = {c.pose_index, c.track_id, false};
  }
  for (std::size_t p = 0; p < frame.poses.size(); ++p) {
    if (pose_taken[p]) {
      auto it = std::find_if(active_.begin(), active_.end(),
                             [&](const ActiveTrack& a) { return a.track.track_id == out[p].track_id; });
      it->track.entries.push_back({frame.frame_index, frame.poses[p]});
      it->last_frame = frame.frame_index;
    } else {
      const std::int64_t id = next_track_id_++;
      active_.push_back({Track{id, {{frame.frame_index, frame.poses[p]}}}, frame.frame_index});
      out[p] = {p, id, true};
    }
  }
  return out;
}

std::vector<Track> TrackerState::take_retired() {
  std::vector<Track> out;
  out.swap(retired_);
  return out;
}

std::vector<Track> TrackerState::finish() {
  std::vector<Track> all = take_retired();
  for (auto& a : active_) all.push_back(std::move(a.track));
  active_.clear();
  std::sort(all.begin(), all.end(), [](const Track& a, const Track& b) { return a.track_id < b.track_id; });
  return all;
}

std::vector<Track> run_tracker(std::span<const FrameDetections> frames, const TrackerParams& params) {
  TrackerState state(params);
  std::vector<Track> done;
  for (const auto& f : frames) {
    state.step(f);
    auto retired = state.take_retired();
    std::move(retired.begin(), retired.end(), std::back_inserter(done));
  }
  auto rest = state.finish();
  std::move(rest.begin(), rest.end(), std::back_inserter(done));
  std::sort(done.begin(), done.end(), [](const Track& a, const Track& b) { return a.track_id < b.track_id; });
  return done;
}

}  // namespace patchpipe

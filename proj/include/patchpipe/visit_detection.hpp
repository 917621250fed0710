#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "patchpipe/core.hpp"

namespace patchpipe {

struct VisitParams {
  /// Absolute visit radius; when unset, r_visit = well_multiple * well radius.
  std::optional<double> r_visit_px;
  double r_visit_well_multiple = 2.0;
  /// Overrides every flower's well radius for visit purposes when set.
  std::optional<double> well_radius_px;
  int gap_max_frames = 5;
  int min_len_frames = 3;
  int overlap_min_frames = 1;

  double radius_for(const Flower& f) const;
};

struct HitRecord {
  std::int64_t frame = 0;
  std::int64_t track_id = 0;
  int flower_id = 0;
};

struct EventMetrics {
  std::size_t n_annotated = 0;
  std::size_t n_predicted = 0;
  double recall = 0.0;
  double duplication_rate = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (predicted, annotated)
};

/// Closed test: the head must be present and within r_visit of the well.
bool frame_hit(const Pose& pose, const Flower& flower, double r_visit);

/// Merges hits per (track, flower) into runs whose consecutive hit frames
/// differ by at most gap_max; runs spanning fewer than min_len frames are
/// dropped. Output is in canonical event order.
std::vector<VisitEvent> agglomerate(std::span<const HitRecord> hits, int gap_max, int min_len);

std::vector<VisitEvent> detect_visits(std::span<const Track> tracks, std::span<const Flower> flowers,
                                      const VisitParams& params = {});

EventMetrics evaluate_events(std::span<const VisitEvent> predicted, std::span<const VisitEvent> annotated,
                             int overlap_min = 1);

/// Streaming counterpart of detect_visits. Events are released in canonical
/// order as soon as no later frame can produce an event sorting before them.
class OnlineVisitDetector {
 public:
  OnlineVisitDetector(std::vector<Flower> flowers, VisitParams params);

  /// Feed the poses matched to tracks in one frame; returns released events.
  std::vector<VisitEvent> push_frame(std::int64_t frame,
                                     std::span<const std::pair<std::int64_t, const Pose*>> tracked);
  /// Closes every open run and returns the remaining events.
  std::vector<VisitEvent> finish();

 private:
  struct Run {
    std::int64_t start;
    std::int64_t last;
  };
  void close_run(std::int64_t track_id, int flower_id, const Run& run);
  std::vector<VisitEvent> release(std::int64_t bound);

  std::vector<Flower> flowers_;
  VisitParams params_;
  std::map<std::pair<std::int64_t, int>, Run> open_;
  std::vector<VisitEvent> pending_;
};

}  // namespace patchpipe

#include "patchpipe/visit_detection.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

namespace patchpipe {

double VisitParams::radius_for(const Flower& f) const {
  if (r_visit_px) return *r_visit_px;
  return r_visit_well_multiple * well_radius_px.value_or(f.well_radius);
}

bool frame_hit(const Pose& pose, const Flower& flower, double r_visit) {
  return pose.head && point_distance(*pose.head, flower.center_well) <= r_visit;
}

std::vector<VisitEvent> agglomerate(std::span<const HitRecord> hits, int gap_max, int min_len) {
  std::map<std::pair<std::int64_t, int>, std::vector<std::int64_t>> by_key;
  for (const auto& h : hits) {
    auto& frames = by_key[{h.track_id, h.flower_id}];
    if (frames.empty() || frames.back() != h.frame) frames.push_back(h.frame);
  }
  std::vector<VisitEvent> events;
  for (auto& [key, frames] : by_key) {
    std::sort(frames.begin(), frames.end());
    auto emit = [&](std::int64_t s, std::int64_t e) {
      if (e - s + 1 >= min_len) events.push_back({key.second, key.first, s, e});
    };
    std::int64_t start = frames.front();
    std::int64_t last = frames.front();
    for (std::size_t i = 1; i < frames.size(); ++i) {
      if (frames[i] - last <= gap_max) {
        last = frames[i];
      } else {
        emit(start, last);
        start = last = frames[i];
      }
    }
    emit(start, last);
  }
  std::sort(events.begin(), events.end(), event_order);
  return events;
}

std::vector<VisitEvent> detect_visits(std::span<const Track> tracks, std::span<const Flower> flowers,
                                      const VisitParams& params) {
  std::vector<HitRecord> hits;
  for (const auto& t : tracks) {
    for (const auto& e : t.entries) {
      for (const auto& f : flowers) {
        if (frame_hit(e.pose, f, params.radius_for(f))) hits.push_back({e.frame, t.track_id, f.flower_id});
      }
    }
  }
  std::stable_sort(hits.begin(), hits.end(), [](const HitRecord& a, const HitRecord& b) { return a.frame < b.frame; });
  return agglomerate(hits, params.gap_max_frames, params.min_len_frames);
}

EventMetrics evaluate_events(std::span<const VisitEvent> predicted, std::span<const VisitEvent> annotated,
                             int overlap_min) {
  EventMetrics m;
  m.n_annotated = annotated.size();
  m.n_predicted = predicted.size();

  // "Earlier annotation" means earlier start, then input order.
  std::vector<std::size_t> ann_rank(annotated.size());
  {
    std::vector<std::size_t> order(annotated.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return annotated[a].start_frame < annotated[b].start_frame;
    });
    for (std::size_t r = 0; r < order.size(); ++r) ann_rank[order[r]] = r;
  }

  struct Pair {
    std::int64_t overlap;
    std::size_t ann_rank;
    std::size_t pred;
    std::size_t ann;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    for (std::size_t a = 0; a < annotated.size(); ++a) {
      if (predicted[p].flower_id != annotated[a].flower_id) continue;
      const std::int64_t ov = std::min(predicted[p].end_frame, annotated[a].end_frame) -
                              std::max(predicted[p].start_frame, annotated[a].start_frame) + 1;
      if (ov >= overlap_min && ov > 0) pairs.push_back({ov, ann_rank[a], p, a});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
    if (x.overlap != y.overlap) return x.overlap > y.overlap;
    return std::tie(x.ann_rank, x.pred) < std::tie(y.ann_rank, y.pred);
  });

  std::vector<bool> pred_used(predicted.size(), false);
  std::vector<std::size_t> ann_hits(annotated.size(), 0);
  for (const auto& pr : pairs) {
    if (pred_used[pr.pred]) continue;
    pred_used[pr.pred] = true;
    ++ann_hits[pr.ann];
    m.matches.emplace_back(pr.pred, pr.ann);
  }
  std::sort(m.matches.begin(), m.matches.end());

  if (!annotated.empty()) {
    std::size_t recalled = 0, duplicates = 0;
    for (auto h : ann_hits) {
      if (h > 0) {
        ++recalled;
        duplicates += h - 1;
      }
    }
    m.recall = static_cast<double>(recalled) / static_cast<double>(annotated.size());
    m.duplication_rate = static_cast<double>(duplicates) / static_cast<double>(annotated.size());
  }
  return m;
}

// ---------------------------------------------------------------------------

OnlineVisitDetector::OnlineVisitDetector(std::vector<Flower> flowers, VisitParams params)
    : flowers_(std::move(flowers)), params_(params) {}

void OnlineVisitDetector::close_run(std::int64_t track_id, int flower_id, const Run& run) {
  if (run.last - run.start + 1 >= params_.min_len_frames) {
    pending_.push_back({flower_id, track_id, run.start, run.last});
  }
}

std::vector<VisitEvent> OnlineVisitDetector::push_frame(
    std::int64_t frame, std::span<const std::pair<std::int64_t, const Pose*>> tracked) {
  const int gap = params_.gap_max_frames;
  auto close_expired = [&](std::int64_t next_possible) {
    for (auto it = open_.begin(); it != open_.end();) {
      if (next_possible - it->second.last > gap) {
        close_run(it->first.first, it->first.second, it->second);
        it = open_.erase(it);
      } else {
        ++it;
      }
    }
  };
  close_expired(frame);

  for (const auto& [track_id, pose] : tracked) {
    for (const auto& f : flowers_) {
      if (!frame_hit(*pose, f, params_.radius_for(f))) continue;
      auto [it, inserted] = open_.try_emplace({track_id, f.flower_id}, Run{frame, frame});
      if (!inserted) it->second.last = frame;
    }
  }
  close_expired(frame + 1);

  std::int64_t bound = frame + 1;
  for (const auto& [key, run] : open_) bound = std::min(bound, run.start);
  return release(bound);
}

std::vector<VisitEvent> OnlineVisitDetector::release(std::int64_t bound) {
  std::sort(pending_.begin(), pending_.end(), event_order);
  auto split = std::find_if(pending_.begin(), pending_.end(),
                            [bound](const VisitEvent& e) { return e.start_frame >= bound; });
  std::vector<VisitEvent> out(pending_.begin(), split);
  pending_.erase(pending_.begin(), split);
  return out;
}

std::vector<VisitEvent> OnlineVisitDetector::finish() {
  for (const auto& [key, run] : open_) close_run(key.first, key.second, run);
  open_.clear();
  return release(std::numeric_limits<std::int64_t>::max());
}

}  // namespace patchpipe

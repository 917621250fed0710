#include "patchpipe/core.hpp"

#include <cmath>
#include <tuple>
#include <utility>

namespace patchpipe {

bool Point2::finite() const { return std::isfinite(x) && std::isfinite(y); }

const std::optional<Point2>& Pose::get(Keypoint k) const {
  switch (k) {
    case Keypoint::head: return head;
    case Keypoint::neck: return neck;
    case Keypoint::waist: return waist;
    case Keypoint::abdomen: break;
  }
  return abdomen;
}

std::optional<Point2>& Pose::get(Keypoint k) {
  return const_cast<std::optional<Point2>&>(std::as_const(*this).get(k));
}

std::size_t Pose::keypoint_count() const {
  return static_cast<std::size_t>(head.has_value()) + neck.has_value() +
         waist.has_value() + abdomen.has_value();
}

void Pose::validate() const {
  if (keypoint_count() == 0) throw Error("pose has no keypoints");
  for (auto k : {Keypoint::head, Keypoint::neck, Keypoint::waist, Keypoint::abdomen}) {
    if (get(k) && !get(k)->finite()) throw Error("pose keypoint is not finite");
  }
  if (!(score >= 0.0 && score <= 1.0)) throw Error("pose score outside [0,1]");
}

bool event_order(const VisitEvent& a, const VisitEvent& b) {
  return std::tie(a.start_frame, a.flower_id, a.track_id, a.end_frame) <
         std::tie(b.start_frame, b.flower_id, b.track_id, b.end_frame);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0) throw DimensionError("negative image size");
  if (channels != 1 && channels != 3) throw DimensionError("image channels must be 1 or 3");
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width < 0 || height < 0) throw DimensionError("negative image size");
  if (channels != 1 && channels != 3) throw DimensionError("image channels must be 1 or 3");
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw DimensionError("image data length does not match width*height*channels");
  }
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("embedding length mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double euclidean_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  return euclidean_distance(std::span<const double>(a.values), std::span<const double>(b.values));
}

double point_distance(const Point2& p, const Point2& q) { return std::hypot(p.x - q.x, p.y - q.y); }

long round_half_up(double v) { return static_cast<long>(std::floor(v + 0.5)); }

}  // namespace patchpipe

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace patchpipe {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Pixel coordinates; origin top-left, x to the right, y downward.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
  bool finite() const;
};

enum class Keypoint { head, neck, waist, abdomen };

struct Pose {
  std::optional<Point2> head;
  std::optional<Point2> neck;
  std::optional<Point2> waist;
  std::optional<Point2> abdomen;
  double score = 1.0;

  friend bool operator==(const Pose&, const Pose&) = default;

  const std::optional<Point2>& get(Keypoint k) const;
  std::optional<Point2>& get(Keypoint k);
  std::size_t keypoint_count() const;
  /// Throws Error unless at least one keypoint is present, all present
  /// keypoints are finite, and score lies in [0,1].
  void validate() const;
};

struct FrameDetections {
  std::int64_t frame_index = 0;
  std::vector<Pose> poses;

  friend bool operator==(const FrameDetections&, const FrameDetections&) = default;
};

struct TrackEntry {
  std::int64_t frame = 0;
  Pose pose;

  friend bool operator==(const TrackEntry&, const TrackEntry&) = default;
};

struct Track {
  std::int64_t track_id = 0;
  std::vector<TrackEntry> entries;

  friend bool operator==(const Track&, const Track&) = default;
};

struct Flower {
  int flower_id = 0;
  Point2 center_well;
  double well_radius = 1.0;
  double square_side = 1.0;
  std::string color_tag;

  friend bool operator==(const Flower&, const Flower&) = default;
};

struct VisitEvent {
  int flower_id = 0;
  std::int64_t track_id = 0;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;

  std::int64_t n_frames() const { return end_frame - start_frame + 1; }
  friend bool operator==(const VisitEvent&, const VisitEvent&) = default;
};

/// Canonical event order: start frame, then flower, then track, then end.
bool event_order(const VisitEvent& a, const VisitEvent& b);

inline constexpr std::size_t kEmbeddingDim = 128;

/// Identity feature. Trained embedders produce unit-norm 128-d vectors;
/// PCA baseline vectors have model-dependent length and are flagged.
struct EmbeddingVector {
  std::vector<double> values;
  bool pca_baseline = false;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// Row-major interleaved 8-bit image with 1 or 3 channels.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, std::uint8_t fill = 0);
  ImageBuffer(int width, int height, int channels, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  std::uint8_t& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

double euclidean_distance(std::span<const double> a, std::span<const double> b);
double euclidean_distance(const EmbeddingVector& a, const EmbeddingVector& b);
double point_distance(const Point2& p, const Point2& q);

/// Round-half-up to the nearest integer, used wherever a fractional count
/// or intensity has to be made integral.
long round_half_up(double v);

}  // namespace patchpipe

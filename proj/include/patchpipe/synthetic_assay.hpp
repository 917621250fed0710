#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "patchpipe/core.hpp"
#include "patchpipe/crop_align.hpp"
#include "patchpipe/flower_geometry.hpp"
#include "patchpipe/io_formats.hpp"

namespace patchpipe {

using Rgb = std::array<std::uint8_t, 3>;

/// Raised when the requested schedule would force bees to overlap.
class OverDenseWorldError : public Error {
 public:
  using Error::Error;
};

struct PaintDot {
  Rgb color{};
  int palette_index = 0;
  double along = 0.0;   // body frame, px towards the head from the waist
  double across = 0.0;  // body frame, px to the bee's left
};

struct SyntheticBee {
  std::string id_label;
  std::vector<PaintDot> paint;  // 1 or 2 dots on the thorax
  double stripe_phase = 0.0;
  double stripe_contrast = 0.5;
  double body_scale = 1.0;
};

struct FlowerLayout {
  double cx = 0.0;
  double cy = 0.0;
  double side = 320.0;
  Rgb color{240, 240, 240};
  std::string tag = "white";
};

struct ScriptedVisit {
  int bee = 0;
  int flower = 0;
  std::int64_t start = 0;
  std::int64_t end = 0;
};

struct WorldConfig {
  int width = 1184;
  int height = 1184;
  /// Empty means the default rig: one white and one blue flower.
  std::vector<FlowerLayout> flowers;
  int bees = 2;
  /// 0 derives the length from the schedule.
  std::int64_t frames = 0;

  /// Explicit dwell intervals; when non-empty the random schedule is unused.
  std::vector<ScriptedVisit> visits;
  /// Number of randomly scheduled appearances, one drinking visit each.
  int appearances = 0;
  int dwell_min = 20;
  int dwell_max = 60;
  int min_gap_frames = 30;
  double walk_speed = 12.0;

  double keypoint_jitter = 0.5;
  double gain_min = 0.9;
  double gain_max = 1.1;
  double pixel_noise = 3.0;
  /// Per-frame stripe phase wobble of the abdomen (telescoping), radians.
  double abdomen_phase_jitter = 0.6;

  /// Crops sampled per appearance, uniform in [min, max] ...
  int images_per_track_min = 4;
  int images_per_track_max = 8;
  /// ... unless a total is given, in which case it is spread evenly.
  int dataset_images = 0;

  std::uint64_t seed = 0;
};

WorldConfig world_config_from_json(std::string_view text);
std::string world_config_to_json(const WorldConfig& cfg);

/// One contiguous on-screen stay of a bee; the ground-truth short-term track.
struct Appearance {
  int bee = 0;
  int flower = 0;
  std::int64_t track_id = 0;
  std::int64_t begin = 0;  // first visible frame
  std::int64_t dwell_start = 0;
  std::int64_t dwell_end = 0;
  std::int64_t end = 0;  // last visible frame
  Point2 outward;        // unit vector from the well towards the landing spot
  double walk_len = 0.0;
  double wobble_phase = 0.0;
  int turn_sign = 1;
  int n_images = 0;
};

struct BeeInstance {
  int bee = 0;
  std::int64_t track_id = 0;
  Point2 waist;
  double heading = 0.0;  // radians, direction from waist towards head
  double abdomen_phase = 0.0;
};

struct WorldState {
  std::int64_t frame = 0;
  std::vector<BeeInstance> bees;
};

struct World {
  WorldConfig config;
  std::vector<FlowerLayout> layout;
  std::vector<Flower> flowers;  // ground truth, ids in (y, x) order
  std::vector<SyntheticBee> bees;
  std::vector<Appearance> appearances;
  std::int64_t n_frames = 0;
  std::vector<FrameDetections> poses;     // observed (jittered) stream, one entry per frame
  std::vector<Track> truth_tracks;        // exact keypoints
  std::vector<VisitEvent> truth_events;   // canonical order

  WorldState state_at(std::int64_t frame) const;
};

/// Exact keypoints of a bee instance.
Pose bee_pose(const World& world, const BeeInstance& bee);

World generate_world(const WorldConfig& cfg);

/// Renders `state`; `roi` limits output to a window of frame coordinates.
ImageBuffer render_frame(const World& world, const WorldState& state, std::optional<PixelBox> roi = std::nullopt);
/// Flowers-only frame at frame 0 lighting, used for flower detection.
ImageBuffer render_reference(const World& world);

struct CropSample {
  DatasetRecord record;
  CropRegion region = CropRegion::full;
  ImageBuffer image;
};

struct ExportSummary {
  std::vector<DatasetRecord> records;
  std::size_t alignment_errors = 0;
  std::size_t multi_bee_skipped = 0;
};

/// Crops every sampled appearance frame for each region using exact poses.
/// `sink` receives each crop; the summary lists one record per sampled image.
ExportSummary export_crops(const World& world, const CropGeometry& geometry, std::span<const CropRegion> regions,
                           const std::function<void(const CropSample&)>& sink);

/// Eight saturated paint colours.
const std::array<Rgb, 8>& paint_palette();

}  // namespace patchpipe

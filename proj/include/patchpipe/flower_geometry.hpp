#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "patchpipe/core.hpp"

namespace patchpipe {

class NoFlowersError : public Error {
 public:
  using Error::Error;
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1, row-major

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t count() const;
};

struct PixelBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

struct SquareRegion {
  Point2 centroid;
  PixelBox bbox;
  std::size_t area = 0;
  double fill_ratio = 0.0;
};

/// Either a fixed cutoff or Otsu's histogram method.
struct ThresholdMethod {
  bool otsu = true;
  int fixed = 128;

  static ThresholdMethod otsu_method() { return {true, 0}; }
  static ThresholdMethod fixed_at(int t) { return {false, t}; }
};

struct ManualFlower {
  int id = 0;
  double cx = 0.0;
  double cy = 0.0;
  double well_radius = 1.0;
  /// Optional; derived from well_radius / well_fraction when absent.
  std::optional<double> side;
};

struct FlowerParams {
  ThresholdMethod threshold = ThresholdMethod::otsu_method();
  int min_area_px2 = 400;
  double aspect_tol = 0.2;
  double fill_min = 0.8;
  double well_fraction = 0.08;
  /// Offset of the well from the square centroid, pixels.
  double well_offset_x = 0.0;
  double well_offset_y = 0.0;
  std::vector<ManualFlower> manual;
};

/// Luma 0.299R + 0.587G + 0.114B rounded half up; grayscale input is copied.
ImageBuffer to_grayscale(const ImageBuffer& img);

/// Otsu cutoff: the t maximizing between-class variance of {v < t} vs {v >= t}.
int otsu_threshold(const ImageBuffer& gray);
BinaryMask threshold_image(const ImageBuffer& gray, ThresholdMethod method);

/// 4-connected components with area >= min_area, in raster order of first pixel.
std::vector<SquareRegion> connected_components(const BinaryMask& mask, std::size_t min_area = 1);

/// Finds bright square flowers; throws NoFlowersError when nothing qualifies.
std::vector<Flower> detect_flowers(const ImageBuffer& img, const FlowerParams& params = {});
std::vector<Flower> flowers_from_config(const FlowerParams& params);

}  // namespace patchpipe

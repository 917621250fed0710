#pragma once

#include <string>
#include <string_view>

#include "patchpipe/core.hpp"

namespace patchpipe {

class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Maps source-image coordinates to crop coordinates: c = R(rotation) * s + t.
struct RigidTransform {
  double rotation = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  Point2 apply(const Point2& s) const;
  Point2 inverse(const Point2& c) const;
};

enum class CropRegion { full, abdomen, thorax, unaligned };

std::string_view to_string(CropRegion r);
CropRegion crop_region_from_string(std::string_view s);

/// Window geometry shared by all aligned variants.
struct CropGeometry {
  int full_w = 150;
  int full_h = 200;
  double anchor_x = 75.0;
  double anchor_y = 120.0;
  int split_row = 100;
  int unaligned_side = 200;
};

struct CropSpec {
  CropRegion region = CropRegion::full;
  int width = 150;
  int height = 200;
  /// First row of the full alignment window covered by this crop.
  int row_offset = 0;
  double anchor_x = 75.0;
  double anchor_y = 120.0;
};

CropSpec make_crop_spec(CropRegion region, const CropGeometry& geometry = {});

/// Rotation puts the neck->waist direction straight down and the waist on
/// the anchor. Throws AlignmentError for missing or coincident keypoints.
RigidTransform alignment_transform(const Pose& pose, const CropSpec& spec);

/// Bilinear sample at (x, y); neighbours outside the image read as zero.
void sample_bilinear(const ImageBuffer& img, double x, double y, std::uint8_t* out);

ImageBuffer extract_crop(const ImageBuffer& img, const RigidTransform& t, const CropSpec& spec);
ImageBuffer extract_unaligned(const ImageBuffer& img, const Point2& waist, const CropSpec& spec);
ImageBuffer augment_rotation(const ImageBuffer& img, double angle);

}  // namespace patchpipe

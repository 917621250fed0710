#include "patchpipe/crop_align.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace patchpipe {

Point2 RigidTransform::apply(const Point2& s) const {
  const double c = std::cos(rotation), sn = std::sin(rotation);
  return {c * s.x - sn * s.y + tx, sn * s.x + c * s.y + ty};
}

Point2 RigidTransform::inverse(const Point2& p) const {
  const double c = std::cos(rotation), sn = std::sin(rotation);
  const double dx = p.x - tx, dy = p.y - ty;
  return {c * dx + sn * dy, -sn * dx + c * dy};
}

std::string_view to_string(CropRegion r) {
  switch (r) {
    case CropRegion::full: return "full";
    case CropRegion::abdomen: return "abdomen";
    case CropRegion::thorax: return "thorax";
    case CropRegion::unaligned: break;
  }
  return "unaligned";
}

CropRegion crop_region_from_string(std::string_view s) {
  for (auto r : {CropRegion::full, CropRegion::abdomen, CropRegion::thorax, CropRegion::unaligned}) {
    if (s == to_string(r)) return r;
  }
  throw Error("unknown crop variant '" + std::string(s) + "'");
}

CropSpec make_crop_spec(CropRegion region, const CropGeometry& g) {
  if (g.full_w <= 0 || g.full_h <= 0 || g.unaligned_side <= 0) throw Error("crop sizes must be positive");
  if (g.split_row <= 0 || g.split_row >= g.full_h) throw Error("crop split_row must lie inside the full window");
  CropSpec s;
  s.region = region;
  s.anchor_x = g.anchor_x;
  s.anchor_y = g.anchor_y;
  switch (region) {
    case CropRegion::full:
      s.width = g.full_w;
      s.height = g.full_h;
      break;
    case CropRegion::thorax:
      s.width = g.full_w;
      s.height = g.split_row;
      break;
    case CropRegion::abdomen:
      s.width = g.full_w;
      s.height = g.full_h - g.split_row;
      s.row_offset = g.split_row;
      break;
    case CropRegion::unaligned:
      s.width = s.height = g.unaligned_side;
      break;
  }
  return s;
}

RigidTransform alignment_transform(const Pose& pose, const CropSpec& spec) {
  if (!pose.neck || !pose.waist) throw AlignmentError("alignment needs neck and waist keypoints");
  const double vx = pose.waist->x - pose.neck->x;
  const double vy = pose.waist->y - pose.neck->y;
  if (std::hypot(vx, vy) < 1e-9) throw AlignmentError("neck and waist coincide");
  double rot = std::numbers::pi / 2 - std::atan2(vy, vx);
  if (rot > std::numbers::pi) rot -= 2 * std::numbers::pi;
  if (rot <= -std::numbers::pi) rot += 2 * std::numbers::pi;
  RigidTransform t{rot, 0.0, 0.0};
  const Point2 w = t.apply(*pose.waist);
  t.tx = spec.anchor_x - w.x;
  t.ty = spec.anchor_y - w.y;
  return t;
}

void sample_bilinear(const ImageBuffer& img, double x, double y, std::uint8_t* out) {
  const int ch = img.channels();
  const double fx = std::floor(x), fy = std::floor(y);
  const double ax = x - fx, ay = y - fy;
  const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
  double acc[3] = {0.0, 0.0, 0.0};
  const double wts[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
  const long xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const long ys[4] = {y0, y0, y0 + 1, y0 + 1};
  for (int k = 0; k < 4; ++k) {
    if (wts[k] == 0.0 || xs[k] < 0 || ys[k] < 0 || xs[k] >= img.width() || ys[k] >= img.height()) continue;
    for (int c = 0; c < ch; ++c) {
      acc[c] += wts[k] * img.at(static_cast<int>(xs[k]), static_cast<int>(ys[k]), c);
    }
  }
  for (int c = 0; c < ch; ++c) out[c] = static_cast<std::uint8_t>(std::clamp<long>(round_half_up(acc[c]), 0, 255));
}

ImageBuffer extract_crop(const ImageBuffer& img, const RigidTransform& t, const CropSpec& spec) {
  ImageBuffer out(spec.width, spec.height, img.channels());
  const double c = std::cos(t.rotation), sn = std::sin(t.rotation);
  for (int v = 0; v < spec.height; ++v) {
    const double dy = static_cast<double>(v + spec.row_offset) - t.ty;
    for (int u = 0; u < spec.width; ++u) {
      const double dx = static_cast<double>(u) - t.tx;
      sample_bilinear(img, c * dx + sn * dy, -sn * dx + c * dy, &out.at(u, v));
    }
  }
  return out;
}

ImageBuffer extract_unaligned(const ImageBuffer& img, const Point2& waist, const CropSpec& spec) {
  ImageBuffer out(spec.width, spec.height, img.channels());
  const double x0 = waist.x - spec.width / 2.0;
  const double y0 = waist.y - spec.height / 2.0;
  for (int v = 0; v < spec.height; ++v) {
    for (int u = 0; u < spec.width; ++u) sample_bilinear(img, x0 + u, y0 + v, &out.at(u, v));
  }
  return out;
}

ImageBuffer augment_rotation(const ImageBuffer& img, double angle) {
  if (img.width() != img.height()) throw DimensionError("augment_rotation needs a square image");
  ImageBuffer out(img.width(), img.height(), img.channels());
  const double cx = (img.width() - 1) / 2.0, cy = (img.height() - 1) / 2.0;
  const double c = std::cos(angle), sn = std::sin(angle);
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      const double dx = u - cx, dy = v - cy;
      sample_bilinear(img, c * dx + sn * dy + cx, -sn * dx + c * dy + cy, &out.at(u, v));
    }
  }
  return out;
}

}  // namespace patchpipe

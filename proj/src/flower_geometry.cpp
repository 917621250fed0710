#include "patchpipe/flower_geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <tuple>

namespace patchpipe {

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

ImageBuffer to_grayscale(const ImageBuffer& img) {
  if (img.channels() == 1) return img;
  ImageBuffer gray(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double luma = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
      gray.at(x, y) = static_cast<std::uint8_t>(std::clamp<long>(round_half_up(luma), 0, 255));
    }
  }
  return gray;
}

int otsu_threshold(const ImageBuffer& gray) {
  if (gray.channels() != 1) throw DimensionError("otsu threshold needs a grayscale image");
  std::array<double, 256> hist{};
  for (auto v : gray.data()) hist[v] += 1.0;
  const double total = static_cast<double>(gray.data().size());
  if (total == 0) return 0;
  double sum_all = 0.0;
  for (int v = 0; v < 256; ++v) sum_all += v * hist[v];

  // Class 0 holds values < t; t runs over 1..255 so both classes can be non-empty.
  int best_t = 0;
  double best = -1.0;
  double w0 = 0.0, sum0 = 0.0;
  for (int t = 1; t < 256; ++t) {
    w0 += hist[t - 1];
    sum0 += (t - 1) * hist[t - 1];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

BinaryMask threshold_image(const ImageBuffer& gray, ThresholdMethod method) {
  if (gray.channels() != 1) throw DimensionError("threshold_image needs a grayscale image");
  const int t = method.otsu ? otsu_threshold(gray) : method.fixed;
  BinaryMask mask{gray.width(), gray.height(), std::vector<std::uint8_t>(gray.data().size())};
  std::transform(gray.data().begin(), gray.data().end(), mask.bits.begin(),
                 [t](std::uint8_t v) { return static_cast<std::uint8_t>(v >= t); });
  return mask;
}

std::vector<SquareRegion> connected_components(const BinaryMask& mask, std::size_t min_area) {
  std::vector<SquareRegion> regions;
  std::vector<std::uint8_t> visited(mask.bits.size(), 0);
  std::vector<std::pair<int, int>> stack;
  for (int y0 = 0; y0 < mask.height; ++y0) {
    for (int x0 = 0; x0 < mask.width; ++x0) {
      const std::size_t idx0 = static_cast<std::size_t>(y0) * mask.width + x0;
      if (!mask.bits[idx0] || visited[idx0]) continue;
      visited[idx0] = 1;
      stack.assign(1, {x0, y0});
      std::size_t area = 0;
      double sx = 0.0, sy = 0.0;
      int xmin = x0, xmax = x0, ymin = y0, ymax = y0;
      while (!stack.empty()) {
        auto [x, y] = stack.back();
        stack.pop_back();
        ++area;
        sx += x;
        sy += y;
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
        const std::array<std::pair<int, int>, 4> nbrs{{{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}}};
        for (auto [nx, ny] : nbrs) {
          if (nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height) continue;
          const std::size_t n = static_cast<std::size_t>(ny) * mask.width + nx;
          if (mask.bits[n] && !visited[n]) {
            visited[n] = 1;
            stack.emplace_back(nx, ny);
          }
        }
      }
      if (area < min_area) continue;
      SquareRegion r;
      r.area = area;
      r.centroid = {sx / static_cast<double>(area), sy / static_cast<double>(area)};
      r.bbox = {xmin, ymin, xmax - xmin + 1, ymax - ymin + 1};
      r.fill_ratio = static_cast<double>(area) / (static_cast<double>(r.bbox.w) * r.bbox.h);
      regions.push_back(r);
    }
  }
  return regions;
}

std::vector<Flower> detect_flowers(const ImageBuffer& img, const FlowerParams& params) {
  const ImageBuffer gray = to_grayscale(img);
  const BinaryMask mask = threshold_image(gray, params.threshold);
  const auto regions = connected_components(mask, static_cast<std::size_t>(std::max(1, params.min_area_px2)));

  std::vector<SquareRegion> kept;
  for (const auto& r : regions) {
    const double aspect = static_cast<double>(r.bbox.w) / r.bbox.h;
    if (aspect < 1.0 - params.aspect_tol || aspect > 1.0 + params.aspect_tol) continue;
    if (r.fill_ratio < params.fill_min) continue;
    kept.push_back(r);
  }
  if (kept.empty()) throw NoFlowersError("no flowers found: no bright square region passed the shape filters");
  std::sort(kept.begin(), kept.end(), [](const SquareRegion& a, const SquareRegion& b) {
    return std::tie(a.centroid.y, a.centroid.x) < std::tie(b.centroid.y, b.centroid.x);
  });

  std::vector<Flower> flowers;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    Flower f;
    f.flower_id = static_cast<int>(i);
    f.center_well = {kept[i].centroid.x + params.well_offset_x, kept[i].centroid.y + params.well_offset_y};
    f.square_side = (kept[i].bbox.w + kept[i].bbox.h) / 2.0;
    f.well_radius = params.well_fraction * f.square_side;
    flowers.push_back(f);
  }
  return flowers;
}

std::vector<Flower> flowers_from_config(const FlowerParams& params) {
  std::vector<Flower> flowers;
  std::set<int> ids;
  for (const auto& m : params.manual) {
    if (!ids.insert(m.id).second) throw Error("duplicate flower id " + std::to_string(m.id));
    if (!(m.well_radius > 0.0)) throw Error("flower well_radius must be positive");
    Flower f;
    f.flower_id = m.id;
    f.center_well = {m.cx, m.cy};
    f.well_radius = m.well_radius;
    f.square_side = m.side.value_or(m.well_radius / params.well_fraction);
    if (!(f.square_side > 0.0)) throw Error("flower side must be positive");
    flowers.push_back(f);
  }
  return flowers;
}

}  // namespace patchpipe

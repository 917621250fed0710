#include <random>

#include "doctest.h"
#include "patchpipe/flower_geometry.hpp"
#include "patchpipe/synthetic_assay.hpp"
#include "patchpipe/tracking.hpp"

using namespace patchpipe;

TEST_CASE("otsu splits a bimodal histogram between the modes") {
  ImageBuffer g(100, 10, 1);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 100; ++x) g.at(x, y) = x < 60 ? 40 + (x % 5) : 200 + (x % 7);
  }
  const int t = otsu_threshold(g);
  CHECK(t >= 44);
  CHECK(t < 200);
  const BinaryMask m = threshold_image(g, ThresholdMethod::otsu_method());
  CHECK(m.count() == 400);
}

TEST_CASE("connected components reports bbox, area and fill") {
  BinaryMask m{10, 10, std::vector<std::uint8_t>(100, 0)};
  for (int y = 2; y < 6; ++y) {
    for (int x = 3; x < 7; ++x) m.bits[static_cast<std::size_t>(y * 10 + x)] = 1;
  }
  m.bits[99] = 1;
  const auto cc = connected_components(m, 2);
  REQUIRE(cc.size() == 1);
  CHECK(cc[0].area == 16);
  CHECK(cc[0].bbox == PixelBox{3, 2, 4, 4});
  CHECK(cc[0].fill_ratio == doctest::Approx(1.0));
  CHECK(cc[0].centroid.x == doctest::Approx(4.5));
}

TEST_CASE("flowers are found in a rendered reference frame") {
  WorldConfig cfg;
  cfg.seed = 9;
  const World w = generate_world(cfg);
  const auto found = detect_flowers(render_reference(w));
  REQUIRE(found.size() == w.flowers.size());
  for (std::size_t i = 0; i < found.size(); ++i) {
    CHECK(point_distance(found[i].center_well, w.flowers[i].center_well) < 2.0);
    CHECK(found[i].square_side == doctest::Approx(w.flowers[i].square_side).epsilon(0.02));
    CHECK(found[i].well_radius == doctest::Approx(0.08 * found[i].square_side));
    CHECK(found[i].flower_id == static_cast<int>(i));
  }
}

TEST_CASE("a frame without bright squares has no flowers") {
  CHECK_THROWS_AS(detect_flowers(ImageBuffer(120, 60, 3, 90)), NoFlowersError);
  ImageBuffer img(120, 120, 3, 60);
  for (int x = 10; x < 110; ++x) {
    for (int y = 50; y < 60; ++y) {
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = 230;
    }
  }
  CHECK_THROWS_AS(detect_flowers(img), NoFlowersError);
}

TEST_CASE("manual flowers come from config") {
  FlowerParams p;
  p.manual.push_back({1, 10.0, 20.0, 3.0, std::nullopt});
  p.manual.push_back({0, 50.0, 20.0, 4.0, 40.0});
  const auto f = flowers_from_config(p);
  REQUIRE(f.size() == 2);
  p.manual.push_back({0, 1.0, 1.0, 1.0, std::nullopt});
  CHECK_THROWS(flowers_from_config(p));
}

namespace {
Pose at(double x, double y) {
  Pose p;
  p.neck = Point2{x, y};
  p.waist = Point2{x, y + 20};
  return p;
}
}  // namespace

TEST_CASE("tracker keeps two separated walkers apart") {
  std::vector<FrameDetections> frames;
  for (int f = 0; f < 30; ++f) {
    FrameDetections fd{f, {}};
    fd.poses.push_back(at(100 + 5.0 * f, 100));
    if (f >= 3) fd.poses.push_back(at(500 - 5.0 * f, 400));
    frames.push_back(fd);
  }
  const auto tracks = run_tracker(frames);
  REQUIRE(tracks.size() == 2);
  CHECK(tracks[0].track_id == 0);
  CHECK(tracks[0].entries.size() == 30);
  CHECK(tracks[1].entries.front().frame == 3);
  for (const auto& e : tracks[0].entries) CHECK(e.pose.neck->y == 100);
}

TEST_CASE("tracker starts a new track after a long gap or a jump") {
  std::vector<FrameDetections> frames;
  for (int f = 0; f < 5; ++f) frames.push_back({f, {at(100, 100)}});
  for (int f = 5; f < 30; ++f) frames.push_back({f, {}});
  frames.push_back({30, {at(100, 100)}});
  frames.push_back({31, {at(400, 100)}});
  const auto tracks = run_tracker(frames);
  CHECK(tracks.size() == 3);
}

TEST_CASE("tracker recovers synthetic ground-truth tracks") {
  WorldConfig cfg;
  cfg.bees = 5;
  cfg.appearances = 30;
  cfg.seed = 4;
  const World w = generate_world(cfg);
  const auto tracks = run_tracker(w.poses);
  REQUIRE(tracks.size() == w.truth_tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    CHECK(tracks[i].entries.size() == w.truth_tracks[i].entries.size());
    CHECK(tracks[i].entries.front().frame == w.truth_tracks[i].entries.front().frame);
  }
}

TEST_CASE("streaming tracker equals batch tracker") {
  WorldConfig cfg;
  cfg.bees = 3;
  cfg.appearances = 12;
  cfg.seed = 2;
  const World w = generate_world(cfg);
  TrackerState st;
  for (const auto& f : w.poses) {
    const auto a = st.step(f);
    CHECK(a.size() == f.poses.size());
  }
  CHECK(st.finish() == run_tracker(w.poses));
}

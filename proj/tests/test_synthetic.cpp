#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "patchpipe/io_formats.hpp"
#include "patchpipe/synthetic_assay.hpp"

using namespace patchpipe;

TEST_CASE("default world has two flowers at quarter widths") {
  const World w = generate_world(WorldConfig{});
  REQUIRE(w.flowers.size() == 2);
  CHECK(w.flowers[0].center_well == Point2{296.0, 592.0});
  CHECK(w.flowers[1].center_well == Point2{888.0, 592.0});
  CHECK(w.flowers[0].well_radius == doctest::Approx(0.08 * 320.0));
}

TEST_CASE("world generation is deterministic per seed") {
  WorldConfig cfg;
  cfg.bees = 4;
  cfg.appearances = 16;
  cfg.seed = 12;
  const World a = generate_world(cfg), b = generate_world(cfg);
  CHECK(a.poses == b.poses);
  CHECK(a.truth_events == b.truth_events);
  CHECK(render_frame(a, a.state_at(100)) == render_frame(b, b.state_at(100)));
  cfg.seed = 13;
  CHECK_FALSE(generate_world(cfg).poses == a.poses);
}

TEST_CASE("truth events are the dwell intervals of each appearance") {
  WorldConfig cfg;
  cfg.bees = 3;
  cfg.appearances = 10;
  cfg.seed = 5;
  const World w = generate_world(cfg);
  REQUIRE(w.truth_events.size() == w.appearances.size());
  REQUIRE(w.truth_tracks.size() == w.appearances.size());
  for (const auto& a : w.appearances) {
    const VisitEvent e{a.flower, a.track_id, a.dwell_start, a.dwell_end};
    CHECK(std::find(w.truth_events.begin(), w.truth_events.end(), e) != w.truth_events.end());
    CHECK(a.dwell_end - a.dwell_start + 1 >= cfg.dwell_min);
  }
}

TEST_CASE("region renders agree with the full frame") {
  WorldConfig cfg;
  cfg.bees = 2;
  cfg.appearances = 4;
  cfg.seed = 8;
  const World w = generate_world(cfg);
  const WorldState st = w.state_at(w.appearances.front().dwell_start);
  const ImageBuffer full = render_frame(w, st);
  const PixelBox box{200, 500, 64, 48};
  const ImageBuffer part = render_frame(w, st, box);
  for (int y = 0; y < box.h; ++y) {
    for (int x = 0; x < box.w; ++x) {
      for (int c = 0; c < 3; ++c) CHECK(part.at(x, y, c) == full.at(box.x + x, box.y + y, c));
    }
  }
}

TEST_CASE("scripted visits that collide are rejected") {
  WorldConfig cfg;
  cfg.bees = 2;
  cfg.visits = {{0, 0, 100, 130}, {1, 0, 120, 150}};
  CHECK_THROWS_AS(generate_world(cfg), OverDenseWorldError);
  cfg.visits = {{0, 0, 100, 130}, {0, 1, 120, 150}};
  CHECK_THROWS_AS(generate_world(cfg), OverDenseWorldError);
  cfg.visits = {{0, 0, 100, 130}, {1, 1, 100, 130}};
  CHECK_NOTHROW(generate_world(cfg));
}

TEST_CASE("world config json round trip and strict keys") {
  WorldConfig cfg;
  cfg.bees = 5;
  cfg.appearances = 7;
  cfg.seed = 99;
  cfg.visits = {{1, 0, 50, 80}};
  cfg.flowers = {{100, 120, 80, {250, 250, 250}, "white"}};
  const WorldConfig back = world_config_from_json(world_config_to_json(cfg));
  CHECK(back.bees == 5);
  CHECK(back.seed == 99);
  REQUIRE(back.visits.size() == 1);
  CHECK(back.visits[0].end == 80);
  REQUIRE(back.flowers.size() == 1);
  CHECK(back.flowers[0].side == 80);
  CHECK(world_config_to_json(back) == world_config_to_json(cfg));
  CHECK_THROWS(world_config_from_json(R"({"beez": 3})"));
  CHECK_THROWS(world_config_from_json("[1,2]"));
}

TEST_CASE("paint codes are unique per bee") {
  WorldConfig cfg;
  cfg.bees = 27;
  const World w = generate_world(cfg);
  std::set<std::vector<std::pair<int, long>>> codes;
  for (const auto& b : w.bees) {
    std::vector<std::pair<int, long>> code;
    for (const auto& d : b.paint) code.emplace_back(d.palette_index, std::lround(d.across));
    codes.insert(code);
  }
  CHECK(codes.size() == 27);
}

TEST_CASE("exported crops have the requested geometry") {
  WorldConfig cfg;
  cfg.bees = 2;
  cfg.appearances = 3;
  cfg.seed = 6;
  const World w = generate_world(cfg);
  const CropRegion regions[] = {CropRegion::full, CropRegion::abdomen, CropRegion::unaligned};
  std::map<CropRegion, int> seen;
  const ExportSummary s = export_crops(w, CropGeometry{}, regions, [&](const CropSample& c) {
    ++seen[c.region];
    const CropSpec spec = make_crop_spec(c.region);
    CHECK(c.image.width() == spec.width);
    CHECK(c.image.height() == spec.height);
  });
  CHECK(seen[CropRegion::full] == static_cast<int>(s.records.size()));
  CHECK(seen[CropRegion::unaligned] == static_cast<int>(s.records.size()));
  CHECK(s.alignment_errors == 0);
}

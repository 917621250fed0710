#include <random>
#include <sstream>

#include "doctest.h"
#include "patchpipe/io_formats.hpp"

using namespace patchpipe;

TEST_CASE("ppm round trip for colour and grey images") {
  std::mt19937 rng(1);
  for (int channels : {1, 3}) {
    ImageBuffer img(7, 5, channels);
    for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng() % 256);
    CHECK(parse_ppm(write_ppm(img)) == img);
  }
}

TEST_CASE("ppm header comments are skipped") {
  const std::string text = "P5\n# made by hand\n2 1\n255\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  bytes.push_back(10);
  bytes.push_back(200);
  const ImageBuffer img = parse_ppm(bytes);
  CHECK(img.width() == 2);
  CHECK(img.at(1, 0) == 200);
}

TEST_CASE("ppm errors carry a byte offset") {
  const std::string bad_maxval = "P6\n1 1\n65535\n";
  std::vector<std::uint8_t> bytes(bad_maxval.begin(), bad_maxval.end());
  CHECK_THROWS_AS(parse_ppm(bytes), FormatError);

  const std::string truncated = "P6\n2 2\n255\nabc";
  bytes.assign(truncated.begin(), truncated.end());
  try {
    parse_ppm(bytes);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() > 0);
  }
}

TEST_CASE("pose stream round trip keeps missing keypoints") {
  FrameDetections f0{0, {}};
  Pose p;
  p.head = Point2{1.5, 2.25};
  p.waist = Point2{-3.0, 1e-7};
  p.score = 0.75;
  f0.poses.push_back(p);
  FrameDetections f1{1, {}};
  const std::vector<FrameDetections> frames{f0, f1};
  const auto back = parse_pose_stream(write_pose_stream(frames));
  CHECK(back == frames);
}

TEST_CASE("pose stream rejects bad lines with their line number") {
  const std::string text = R"({"frame":0,"detections":[]}
{"frame":1,"detections":[{"head":[1,2],"score":1.5}]}
)";
  try {
    parse_pose_stream(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_pose_stream(std::string_view(R"({"frame":3,"detections":[]}
{"frame":2,"detections":[]}
)")),
                  ParseError);
}

TEST_CASE("incremental reader matches batch parser") {
  std::vector<FrameDetections> frames;
  for (int i = 0; i < 5; ++i) {
    FrameDetections f{i, {}};
    Pose p;
    p.neck = Point2{i * 1.0, 2.0};
    f.poses.push_back(p);
    frames.push_back(f);
  }
  std::istringstream in(write_pose_stream(frames));
  PoseStreamReader r(in);
  std::vector<FrameDetections> got;
  FrameDetections f;
  while (r.next(f)) got.push_back(f);
  CHECK(got == frames);
}

TEST_CASE("event stream is written in canonical order") {
  std::vector<VisitEvent> ev{{1, 4, 10, 20}, {0, 7, 10, 12}, {0, 2, 3, 9}};
  const auto back = parse_event_stream(write_event_stream(ev));
  REQUIRE(back.size() == 3);
  CHECK(back[0] == VisitEvent{0, 2, 3, 9});
  CHECK(back[1] == VisitEvent{0, 7, 10, 12});
  CHECK(back[2] == VisitEvent{1, 4, 10, 20});
}

TEST_CASE("dataset index, embeddings and flowers round trip") {
  const std::vector<DatasetRecord> recs{{"a.ppm", "bee01", 3, 40}, {"b.ppm", "bee02", 4, 41}};
  CHECK(parse_dataset_index(write_dataset_index(recs)) == recs);

  EmbeddingTable t;
  t["x"] = EmbeddingVector{{0.1, -2.5, 1.0 / 3.0}, false};
  t["y"] = EmbeddingVector{{4.0, 5.0, 6.0}, false};
  CHECK(read_embeddings(write_embeddings(t)) == t);

  const std::vector<Flower> fl{{0, {296.0, 592.0}, 25.6, 320.0, "white"}, {1, {888.5, 591.5}, 25.5, 319.0, "blue"}};
  CHECK(parse_flowers(write_flowers(fl)) == fl);
}

TEST_CASE("real formatting round-trips exactly") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    CHECK(parse_real(format_real(v)) == v);
  }
  CHECK_THROWS(parse_real("1.5x"));
  CHECK_THROWS(parse_int("12 "));
}

TEST_CASE("round half up") {
  CHECK(round_half_up(2.5) == 3);
  CHECK(round_half_up(-2.5) == -2);
  CHECK(round_half_up(6.75) == 7);
  CHECK(round_half_up(0.49) == 0);
}

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <filesystem>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "patchpipe/cli.hpp"
#include "patchpipe/config.hpp"
#include "patchpipe/io_formats.hpp"
#include "patchpipe/rt_pipeline.hpp"
#include "patchpipe/synthetic_assay.hpp"
#include "patchpipe/tracking.hpp"

using namespace patchpipe;
namespace fs = std::filesystem;

TEST_CASE("bounded queue blocks producers and drains after close") {
  BoundedQueue<int> q(2);
  CHECK(q.try_push(1));
  CHECK(q.try_push(2));
  CHECK(q.full());
  CHECK_FALSE(q.try_push(3));
  bool stalled = false;
  std::thread producer([&] { q.push(3, &stalled); });
  int v = 0;
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  CHECK(q.pop(v));
  CHECK(v == 1);
  producer.join();
  CHECK(stalled);
  q.close();
  CHECK(q.pop(v));
  CHECK(q.pop(v));
  CHECK(v == 3);
  CHECK_FALSE(q.pop(v));
  CHECK_FALSE(q.push(4));
}

TEST_CASE("latency summary uses nearest rank") {
  std::vector<double> v;
  for (int i = 1; i <= 20; ++i) v.push_back(i);
  const LatencySummary s = summarize_latency(v);
  CHECK(s.mean_ms == doctest::Approx(10.5));
  CHECK(s.p50_ms == 10);
  CHECK(s.p95_ms == 19);
  CHECK(s.max_ms == 20);
  CHECK(summarize_latency({}).max_ms == 0.0);
}

TEST_CASE("stats csv round trip and bench verdicts") {
  StageStats st;
  st.frames = 100;
  st.events = 4;
  st.throughput_fps = 1234.5;
  st.end_to_end = {1.25, 1.0, 3.5, 4.0};
  st.stages = {{"track", {0.5, 0.4, 0.9, 1.0}}, {"visit", {0.1, 0.1, 0.2, 0.3}}};
  const StageStats back = parse_stats_csv(write_stats_csv(st));
  CHECK(back.frames == 100);
  CHECK(back.end_to_end.p95_ms == 3.5);
  REQUIRE(back.stages.size() == 2);
  CHECK(back.stages[1].first == "visit");
  CHECK(bench(st, 20.0).verdict == BenchVerdict::pass);
  CHECK(bench(st, 1000.0).verdict == BenchVerdict::fail);
  CHECK(bench(StageStats{}, 20.0).verdict == BenchVerdict::indeterminate);
  CHECK(to_string(BenchVerdict::fail) == "fail");
}

TEST_CASE("pipeline output matches offline detection; drop mode counts drops") {
  WorldConfig cfg;
  cfg.bees = 3;
  cfg.appearances = 8;
  cfg.seed = 21;
  const World w = generate_world(cfg);
  const std::string offline = write_event_stream(detect_visits(run_tracker(w.poses), w.flowers));
  StringSink sink;
  PipelineOptions o;
  o.threads = 2;
  o.queue_capacity = 3;
  const PipelineResult r = run_pipeline(vector_source(w.poses), w.flowers, sink, o);
  CHECK_FALSE(r.error);
  CHECK(sink.text() == offline);
  CHECK(r.stats.frames == w.poses.size());

  StringSink dropped;
  o.drop_when_full = true;
  o.queue_capacity = 1;
  const PipelineResult d = run_pipeline(vector_source(w.poses), w.flowers, dropped, o);
  CHECK(d.stats.frames + d.stats.dropped_frames == w.poses.size());
}

TEST_CASE("sink targets are validated") {
  CHECK_THROWS_AS(sink_ndjson("udp:1.2.3.4:5"), SinkError);
  CHECK_THROWS_AS(sink_ndjson("tcp:localhost"), SinkError);
}

TEST_CASE("tcp sink delivers lines over loopback") {
  const int srv = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(srv >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  REQUIRE(::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
  REQUIRE(::listen(srv, 1) == 0);
  socklen_t len = sizeof(addr);
  ::getsockname(srv, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);

  std::string received;
  std::thread server([&] {
    const int c = ::accept(srv, nullptr, nullptr);
    char buf[256];
    ssize_t n;
    while ((n = ::read(c, buf, sizeof(buf))) > 0) received.append(buf, static_cast<std::size_t>(n));
    ::close(c);
  });
  {
    auto sink = sink_ndjson("tcp:127.0.0.1:" + std::to_string(port));
    sink->write_line("{\"a\":1}\n");
    sink->write_line("{\"b\":2}\n");
    sink->close();
  }
  server.join();
  ::close(srv);
  CHECK(received == "{\"a\":1}\n{\"b\":2}\n");
}

TEST_CASE("config defaults, overrides and range errors") {
  const AssayConfig d = parse_config("{}");
  CHECK(d.feature_downsample == 5);
  CHECK(d.train.margin == 0.2);
  CHECK(d.visit.gap_max_frames == 5);
  const AssayConfig o = parse_config(R"({"visit.gap_max_frames": 8, "split.id_frac": 0.5})");
  CHECK(o.visit.gap_max_frames == 8);
  CHECK(o.split.id_frac == 0.5);
  CHECK_THROWS_AS(parse_config(R"({"visit.well_radius_px": -1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"visit.nope": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"train.dropout_in": 1.0})"), ConfigError);
  const AssayConfig r = parse_config(write_config(o));
  CHECK(write_config(r) == write_config(o));
}

namespace {
int run(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  std::vector<const char*> argv{"patchpipe"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}
}  // namespace

TEST_CASE("cli exit codes") {
  std::string out;
  CHECK(run({"--help"}, &out) == 0);
  CHECK(out.find("detect-visits") != std::string::npos);
  CHECK(run({"no-such-command"}) == 1);
  CHECK(run({"track"}) == 1);
  CHECK(run({"track", "--poses", "/nonexistent/poses.ndjson"}) == 2);
  CHECK(run({"split", "--index", "x.csv", "--mode", "sideways", "--out", "y"}) != 0);
}

TEST_CASE("cli runs the visit workflow end to end") {
  const fs::path dir = fs::temp_directory_path() / "patchpipe_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string();
  write_text_file(d + "/w.json", R"({"bees": 3, "appearances": 6, "seed": 2})");
  REQUIRE(run({"--config", d + "/w.json", "synth", "--out", d + "/world"}) == 0);
  REQUIRE(run({"detect-flowers", "--image", d + "/world/reference.ppm", "--out", d + "/flowers.json"}) == 0);
  REQUIRE(run({"track", "--poses", d + "/world/poses.ndjson", "--out", d + "/tracks.csv"}) == 0);
  REQUIRE(run({"detect-visits", "--tracks", d + "/tracks.csv", "--flowers", d + "/flowers.json", "--out",
               d + "/events.ndjson"}) == 0);
  std::string metrics;
  REQUIRE(run({"eval-visits", "--pred", d + "/events.ndjson", "--truth", d + "/world/truth_events.ndjson"},
              &metrics) == 0);
  CHECK(metrics.find("\"recall\": 1.0") != std::string::npos);
  REQUIRE(run({"run", "--poses", d + "/world/poses.ndjson", "--flowers", d + "/flowers.json", "--sink",
               "file:" + d + "/online.ndjson", "--stats", d + "/stats.csv"}) == 0);
  CHECK(read_text_file(d + "/online.ndjson") == read_text_file(d + "/events.ndjson"));
  std::string verdict;
  CHECK(run({"bench-report", "--stats", d + "/stats.csv"}, &verdict) == 0);
  CHECK(verdict.find("pass") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("cli pca baseline and external embeddings give the same scores") {
  const fs::path dir = fs::temp_directory_path() / "patchpipe_cli_reid";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string();
  write_text_file(d + "/w.json", R"({"bees": 4, "appearances": 24, "seed": 3})");
  REQUIRE(run({"--config", d + "/w.json", "synth", "--out", d + "/world"}) == 0);
  REQUIRE(run({"crops", "--world", d + "/world", "--variants", "thorax", "--out", d + "/crops"}) == 0);
  REQUIRE(run({"split", "--index", d + "/crops/index.csv", "--mode", "closed", "--out", d + "/split"}) == 0);
  REQUIRE(run({"train", "--index", d + "/split/train.csv", "--images", d + "/crops", "--input-variant", "thorax",
               "--features", "pca", "--out", d + "/pca.json"}) == 0);
  REQUIRE(run({"embed", "--model", d + "/pca.json", "--index", d + "/crops/index.csv", "--images", d + "/crops",
               "--variant", "thorax", "--out", d + "/emb.csv"}) == 0);
  const std::vector<std::string> common{"--setting", "closed", "--variant", "thorax", "--galleries", "200",
                                        "--negatives", "3", "--split", d + "/split", "--report", ""};
  std::vector<std::string> a{"eval", "--features", "pca", "--images", d + "/crops", "--model", d + "/pca.json"};
  std::vector<std::string> b{"eval", "--features", "external", "--embeddings", d + "/emb.csv"};
  a.insert(a.end(), common.begin(), common.end());
  b.insert(b.end(), common.begin(), common.end());
  std::string out_a, out_b;
  REQUIRE(run(a, &out_a) == 0);
  REQUIRE(run(b, &out_b) == 0);
  const auto scores = [](const std::string& t) {
    const std::string last = t.substr(t.find_last_of('\n', t.size() - 2));
    return last.substr(last.find('|'));
  };
  CHECK(scores(out_a) == scores(out_b));
  fs::remove_all(dir);
}

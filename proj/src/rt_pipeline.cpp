#include "patchpipe/rt_pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include "patchpipe/io_formats.hpp"

namespace patchpipe {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

// ---------------------------------------------------------------------------
// sinks

class StdoutSink : public EventSink {
 public:
  void write_line(std::string_view line) override {
    std::cout << line;
    std::cout.flush();
    if (!std::cout) throw SinkError("write to stdout failed");
  }
};

class FileSink : public EventSink {
 public:
  explicit FileSink(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw SinkError("cannot open sink file '" + path + "'");
  }
  void write_line(std::string_view line) override {
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw SinkError("write to '" + path_ + "' failed");
  }
  void close() override { out_.close(); }

 private:
  std::string path_;
  std::ofstream out_;
};

class TcpSink : public EventSink {
 public:
  TcpSink(std::string host, std::string port) : host_(std::move(host)), port_(std::move(port)) {
    if (!connect_once()) throw SinkError("cannot connect to " + host_ + ":" + port_);
  }
  ~TcpSink() override { close(); }

  void write_line(std::string_view line) override {
    if (fd_ >= 0 && send_all(line)) return;
    if (reconnected_ || !connect_once()) throw SinkError("connection to " + host_ + ":" + port_ + " lost");
    reconnected_ = true;
    if (!send_all(line)) throw SinkError("connection to " + host_ + ":" + port_ + " lost after reconnect");
  }

  void close() override {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  bool connect_once() {
    close();
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host_.c_str(), port_.c_str(), &hints, &res) != 0) return false;
    for (addrinfo* p = res; p; p = p->ai_next) {
      const int fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) {
        fd_ = fd;
        break;
      }
      ::close(fd);
    }
    ::freeaddrinfo(res);
    return fd_ >= 0;
  }

  bool send_all(std::string_view data) {
    while (!data.empty()) {
      const ssize_t n = ::send(fd_, data.data(), data.size(), MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        close();
        return false;
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
  }

  std::string host_;
  std::string port_;
  int fd_ = -1;
  bool reconnected_ = false;
};

}  // namespace

std::unique_ptr<EventSink> sink_ndjson(const std::string& target) {
  if (target == "stdout" || target == "-") return std::make_unique<StdoutSink>();
  if (target.rfind("file:", 0) == 0) return std::make_unique<FileSink>(target.substr(5));
  if (target.rfind("tcp:", 0) == 0) {
    const std::string rest = target.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
      throw SinkError("tcp sink needs tcp:HOST:PORT, got '" + target + "'");
    }
    return std::make_unique<TcpSink>(rest.substr(0, colon), rest.substr(colon + 1));
  }
  throw SinkError("unknown sink '" + target + "' (expected stdout, file:PATH or tcp:HOST:PORT)");
}

// ---------------------------------------------------------------------------
// stats

LatencySummary summarize_latency(std::vector<double> v) {
  LatencySummary s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  const auto rank = [&](double p) {
    const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(idx, 1, v.size()) - 1];
  };
  s.mean_ms = sum / static_cast<double>(v.size());
  s.p50_ms = rank(0.50);
  s.p95_ms = rank(0.95);
  s.max_ms = v.back();
  return s;
}

std::string write_stats_csv(const StageStats& s) {
  std::string out = "metric,value\n";
  auto row = [&](const std::string& k, const std::string& v) { out += k + "," + v + "\n"; };
  row("frames", std::to_string(s.frames));
  row("events", std::to_string(s.events));
  row("throughput_fps", format_real(s.throughput_fps));
  row("queue_full_stalls", std::to_string(s.queue_full_stalls));
  row("dropped_frames", std::to_string(s.dropped_frames));
  auto summary = [&](const std::string& name, const LatencySummary& l) {
    row(name + ".mean_ms", format_real(l.mean_ms));
    row(name + ".p50_ms", format_real(l.p50_ms));
    row(name + ".p95_ms", format_real(l.p95_ms));
    row(name + ".max_ms", format_real(l.max_ms));
  };
  for (const auto& [name, l] : s.stages) summary("stage." + name, l);
  summary("end_to_end", s.end_to_end);
  return out;
}

StageStats parse_stats_csv(std::string_view csv) {
  StageStats s;
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> stage_slot;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "metric,value") throw ParseError("stats CSV must start with 'metric,value'", 1);
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("expected metric,value", line_no);
    const std::string key = line.substr(0, comma);
    const std::string value = line.substr(comma + 1);
    try {
      if (key == "frames") s.frames = static_cast<std::size_t>(parse_int(value));
      else if (key == "events") s.events = static_cast<std::size_t>(parse_int(value));
      else if (key == "throughput_fps") s.throughput_fps = parse_real(value);
      else if (key == "queue_full_stalls") s.queue_full_stalls = static_cast<std::size_t>(parse_int(value));
      else if (key == "dropped_frames") s.dropped_frames = static_cast<std::size_t>(parse_int(value));
      else {
        const auto dot = key.rfind('.');
        if (dot == std::string::npos) throw ParseError("unknown metric '" + key + "'", line_no);
        const std::string owner = key.substr(0, dot);
        const std::string field = key.substr(dot + 1);
        LatencySummary* l = nullptr;
        if (owner == "end_to_end") {
          l = &s.end_to_end;
        } else if (owner.rfind("stage.", 0) == 0) {
          const std::string name = owner.substr(6);
          auto [it, inserted] = stage_slot.try_emplace(name, s.stages.size());
          if (inserted) s.stages.emplace_back(name, LatencySummary{});
          l = &s.stages[it->second].second;
        } else {
          throw ParseError("unknown metric '" + key + "'", line_no);
        }
        const double v = parse_real(value);
        if (field == "mean_ms") l->mean_ms = v;
        else if (field == "p50_ms") l->p50_ms = v;
        else if (field == "p95_ms") l->p95_ms = v;
        else if (field == "max_ms") l->max_ms = v;
        else throw ParseError("unknown metric '" + key + "'", line_no);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// sources

FrameSource vector_source(const std::vector<FrameDetections>& frames) {
  auto pos = std::make_shared<std::size_t>(0);
  return [&frames, pos](FrameDetections& out) {
    if (*pos >= frames.size()) return false;
    out = frames[(*pos)++];
    return true;
  };
}

FrameSource stream_source(std::istream& in) {
  auto reader = std::make_shared<PoseStreamReader>(in);
  return [reader](FrameDetections& out) { return reader->next(out); };
}

FrameSource paced_source(FrameSource inner, double fps) {
  if (!(fps > 0)) throw Error("replay fps must be positive");
  struct State {
    bool started = false;
    Clock::time_point t0;
    std::int64_t n = 0;
  };
  auto st = std::make_shared<State>();
  return [inner = std::move(inner), fps, st](FrameDetections& out) {
    if (!st->started) {
      st->started = true;
      st->t0 = Clock::now();
    }
    const auto deadline =
        st->t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(st->n / fps));
    std::this_thread::sleep_until(deadline);
    ++st->n;
    return inner(out);
  };
}

// ---------------------------------------------------------------------------
// pipeline

int pipeline_threads_from_env() {
  const char* v = std::getenv("PATCHPIPE_THREADS");
  if (!v || !*v) return 1;
  try {
    return static_cast<int>(std::clamp<std::int64_t>(parse_int(v), 1, 3));
  } catch (const Error&) {
    return 1;
  }
}

namespace {

struct Message {
  FrameDetections frame;
  std::vector<Assignment> assignments;
  std::vector<VisitEvent> events;
  Clock::time_point t_in;
  bool last = false;
};

constexpr std::size_t kStages = 3;
constexpr const char* kStageNames[kStages] = {"track", "visit", "export"};

}  // namespace

PipelineResult run_pipeline(const FrameSource& source, const std::vector<Flower>& flowers, EventSink& sink,
                            const PipelineOptions& options) {
  const int threads = std::clamp(options.threads > 0 ? options.threads : pipeline_threads_from_env(), 1,
                                 static_cast<int>(kStages));

  TrackerState tracker(options.tracker);
  OnlineVisitDetector visits(flowers, options.visit);
  std::vector<double> stage_ms[kStages];
  std::vector<double> total_ms;

  // Stage bodies. Each runs on exactly one thread.
  auto track_stage = [&](Message& m) {
    if (!m.last) m.assignments = tracker.step(m.frame);
  };
  auto visit_stage = [&](Message& m) {
    if (m.last) {
      m.events = visits.finish();
      return;
    }
    std::vector<std::pair<std::int64_t, const Pose*>> tracked;
    tracked.reserve(m.assignments.size());
    for (const auto& a : m.assignments) tracked.emplace_back(a.track_id, &m.frame.poses[a.pose_index]);
    m.events = visits.push_frame(m.frame.frame_index, tracked);
  };
  std::size_t n_events = 0;
  auto export_stage = [&](Message& m) {
    for (const auto& e : m.events) {
      sink.write_line(write_event_line(e));
      ++n_events;
    }
  };
  const std::function<void(Message&)> stages[kStages] = {track_stage, visit_stage, export_stage};

  auto run_stage = [&](std::size_t i, Message& m) {
    const auto t0 = Clock::now();
    stages[i](m);
    if (!m.last) stage_ms[i].push_back(ms_between(t0, Clock::now()));
  };
  auto complete = [&](const Message& m) {
    if (!m.last) total_ms.push_back(ms_between(m.t_in, Clock::now()));
  };

  // Contiguous stage groups, one per thread.
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  for (int g = 0; g < threads; ++g) {
    groups.emplace_back(kStages * static_cast<std::size_t>(g) / static_cast<std::size_t>(threads),
                        kStages * static_cast<std::size_t>(g + 1) / static_cast<std::size_t>(threads));
  }

  std::atomic<std::size_t> stalls{0};
  std::size_t dropped = 0;
  std::optional<std::string> error;
  std::mutex error_mu;

  std::vector<std::unique_ptr<BoundedQueue<Message>>> queues;
  for (std::size_t g = 1; g < groups.size(); ++g) {
    queues.push_back(std::make_unique<BoundedQueue<Message>>(options.queue_capacity));
  }
  auto fail = [&](const std::string& what) {
    {
      std::lock_guard lock(error_mu);
      if (!error) error = what;
    }
    for (auto& q : queues) q->close();
  };
  auto forward = [&](std::size_t g, Message&& m) {
    if (g + 1 == groups.size()) {
      complete(m);
      return true;
    }
    bool stalled = false;
    const bool ok = queues[g]->push(std::move(m), &stalled);
    if (stalled) ++stalls;
    return ok;
  };
  auto run_group = [&](std::size_t g, Message& m) {
    for (std::size_t s = groups[g].first; s < groups[g].second; ++s) run_stage(s, m);
  };

  auto worker = [&](std::size_t g) {
    try {
      Message m;
      while (queues[g - 1]->pop(m)) {
        const bool last = m.last;
        run_group(g, m);
        if (!forward(g, std::move(m)) || last) break;
      }
    } catch (const std::exception& e) {
      fail(e.what());
    }
  };

  std::vector<std::thread> pool;
  for (std::size_t g = 1; g < groups.size(); ++g) pool.emplace_back(worker, g);

  const auto t_start = Clock::now();
  try {
    for (;;) {
      Message m;
      if (!source(m.frame)) {
        m.last = true;
        m.t_in = Clock::now();
        run_group(0, m);
        forward(0, std::move(m));
        break;
      }
      m.t_in = Clock::now();
      if (options.drop_when_full && !queues.empty() && queues[0]->full()) {
        ++dropped;
        continue;
      }
      run_group(0, m);
      if (!forward(0, std::move(m))) break;
      {
        std::lock_guard lock(error_mu);
        if (error) break;
      }
    }
  } catch (const std::exception& e) {
    fail(e.what());
  }
  for (auto& t : pool) t.join();
  const auto t_end = Clock::now();
  try {
    sink.close();
  } catch (const std::exception& e) {
    if (!error) error = e.what();
  }

  PipelineResult result;
  auto& st = result.stats;
  for (std::size_t i = 0; i < kStages; ++i) st.stages.emplace_back(kStageNames[i], summarize_latency(stage_ms[i]));
  st.end_to_end = summarize_latency(total_ms);
  st.frames = total_ms.size();
  st.queue_full_stalls = stalls.load();
  st.dropped_frames = dropped;
  st.events = n_events;
  const double wall_s = std::chrono::duration<double>(t_end - t_start).count();
  st.throughput_fps = st.frames > 0 && wall_s > 0 ? static_cast<double>(st.frames) / wall_s : 0.0;
  result.error = error;
  return result;
}

// ---------------------------------------------------------------------------
// bench

std::string_view to_string(BenchVerdict v) {
  switch (v) {
    case BenchVerdict::pass:
      return "pass";
    case BenchVerdict::fail:
      return "fail";
    case BenchVerdict::indeterminate:
      break;
  }
  return "indeterminate";
}

BenchSummary bench(const StageStats& stats, double budget_fps) {
  BenchSummary b;
  b.budget_ms = budget_fps > 0 ? 1000.0 / budget_fps : 0.0;
  b.mean_ms = stats.end_to_end.mean_ms;
  if (stats.frames == 0 || !(budget_fps > 0)) {
    b.verdict = BenchVerdict::indeterminate;
  } else {
    b.verdict = b.mean_ms <= b.budget_ms ? BenchVerdict::pass : BenchVerdict::fail;
  }
  char line[256];
  std::string text;
  std::snprintf(line, sizeof(line), "frames %zu, events %zu, throughput %.1f fps, queue-full stalls %zu\n",
                stats.frames, stats.events, stats.throughput_fps, stats.queue_full_stalls);
  text += line;
  std::snprintf(line, sizeof(line), "%-12s %9s %9s %9s %9s\n", "stage", "mean_ms", "p50_ms", "p95_ms", "max_ms");
  text += line;
  auto add = [&](const std::string& name, const LatencySummary& l) {
    std::snprintf(line, sizeof(line), "%-12s %9.4f %9.4f %9.4f %9.4f\n", name.c_str(), l.mean_ms, l.p50_ms, l.p95_ms,
                  l.max_ms);
    text += line;
  };
  for (const auto& [name, l] : stats.stages) add(name, l);
  add("end_to_end", stats.end_to_end);
  std::snprintf(line, sizeof(line), "budget %.1f fps (%.2f ms/frame): mean %.4f ms -> %s\n", budget_fps, b.budget_ms,
                b.mean_ms, std::string(to_string(b.verdict)).c_str());
  text += line;
  b.text = std::move(text);
  b.csv = "verdict,mean_ms,budget_ms,budget_fps,frames\n" + std::string(to_string(b.verdict)) + "," +
          format_real(b.mean_ms) + "," + format_real(b.budget_ms) + "," + format_real(budget_fps) + "," +
          std::to_string(stats.frames) + "\n";
  return b;
}

}  // namespace patchpipe

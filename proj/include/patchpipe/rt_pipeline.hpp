#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "patchpipe/core.hpp"
#include "patchpipe/tracking.hpp"
#include "patchpipe/visit_detection.hpp"

namespace patchpipe {

class SinkError : public Error {
 public:
  using Error::Error;
};

/// Bounded FIFO with blocking push/pop and close-to-drain semantics.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  /// Blocks while full. Returns false if the queue was closed. `stalled` is
  /// set when the call had to wait for space.
  bool push(T item, bool* stalled = nullptr) {
    std::unique_lock lock(mu_);
    if (items_.size() >= capacity_ && !closed_) {
      if (stalled) *stalled = true;
      not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    }
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  /// Non-blocking push; false when full or closed.
  bool try_push(T item) {
    std::lock_guard lock(mu_);
    if (closed_ || items_.size() >= capacity_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  /// Blocks until an item arrives; false once closed and drained.
  bool pop(T& out) {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return false;
    out = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return true;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  bool full() {
    std::lock_guard lock(mu_);
    return items_.size() >= capacity_;
  }

  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  bool closed_ = false;
  std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
};

/// Destination for NDJSON event lines.
class EventSink {
 public:
  virtual ~EventSink() = default;
  /// Writes one complete line (including the trailing newline) and flushes.
  virtual void write_line(std::string_view line) = 0;
  virtual void close() {}
};

/// Accumulates lines in memory.
class StringSink : public EventSink {
 public:
  void write_line(std::string_view line) override { text_ += line; }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

/// "stdout", "file:PATH" or "tcp:HOST:PORT".
std::unique_ptr<EventSink> sink_ndjson(const std::string& target);

struct LatencySummary {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
};

/// Nearest-rank percentiles over per-frame samples.
LatencySummary summarize_latency(std::vector<double> samples_ms);

struct StageStats {
  std::vector<std::pair<std::string, LatencySummary>> stages;
  LatencySummary end_to_end;
  double throughput_fps = 0.0;
  std::size_t frames = 0;
  std::size_t queue_full_stalls = 0;
  std::size_t dropped_frames = 0;
  std::size_t events = 0;
};

std::string write_stats_csv(const StageStats& stats);
StageStats parse_stats_csv(std::string_view csv);

/// Yields the next frame; false at end of stream.
using FrameSource = std::function<bool(FrameDetections&)>;

FrameSource vector_source(const std::vector<FrameDetections>& frames);
FrameSource stream_source(std::istream& in);
/// Paces `inner` to `fps` frames per second with sleep-until-deadline.
FrameSource paced_source(FrameSource inner, double fps);

struct PipelineOptions {
  std::size_t queue_capacity = 64;
  /// Stage parallelism; 0 reads PATCHPIPE_THREADS (default 1).
  int threads = 0;
  /// Drop incoming frames instead of blocking while the first queue is full.
  bool drop_when_full = false;
  TrackerParams tracker;
  VisitParams visit;
};

struct PipelineResult {
  StageStats stats;
  std::optional<std::string> error;
};

/// Tracking, visit detection and event export as a chain of stages linked by
/// bounded queues. Events reach the sink in canonical order.
PipelineResult run_pipeline(const FrameSource& source, const std::vector<Flower>& flowers, EventSink& sink,
                            const PipelineOptions& options = {});

/// Thread count from PATCHPIPE_THREADS, clamped to [1, 3].
int pipeline_threads_from_env();

enum class BenchVerdict { pass, fail, indeterminate };

struct BenchSummary {
  BenchVerdict verdict = BenchVerdict::indeterminate;
  double mean_ms = 0.0;
  double budget_ms = 0.0;
  std::string text;
  std::string csv;
};

/// Compares end-to-end mean frame latency with 1000 / budget_fps ms.
BenchSummary bench(const StageStats& stats, double budget_fps = 20.0);

std::string_view to_string(BenchVerdict v);

}  // namespace patchpipe

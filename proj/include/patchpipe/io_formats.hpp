#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "patchpipe/core.hpp"

namespace patchpipe {

/// Malformed binary input; carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Malformed line-oriented input; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct DatasetRecord {
  std::string image_ref;
  std::string id_label;
  std::int64_t track_id = 0;
  std::int64_t time_key = 0;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

// Binary PPM/PGM with maxval 255.
ImageBuffer parse_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_ppm(const ImageBuffer& img);
ImageBuffer read_ppm_file(const std::string& path);
void write_ppm_file(const std::string& path, const ImageBuffer& img);

// Pose stream NDJSON: {"frame":int,"detections":[{"head":[x,y]|null,...,"score":s}]}
std::vector<FrameDetections> parse_pose_stream(std::istream& in);
std::vector<FrameDetections> parse_pose_stream(std::string_view text);
std::string write_pose_line(const FrameDetections& frame);
std::string write_pose_stream(std::span<const FrameDetections> frames);

/// Incremental pose-stream reader used by replay sources.
class PoseStreamReader {
 public:
  explicit PoseStreamReader(std::istream& in) : in_(in) {}
  /// Returns false at end of stream.
  bool next(FrameDetections& out);

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
  std::int64_t last_frame_ = 0;
  bool have_last_ = false;
};

// Visit events NDJSON, one object per line in canonical event order.
std::string write_event_line(const VisitEvent& e);
std::string write_event_stream(std::vector<VisitEvent> events);
std::vector<VisitEvent> parse_event_stream(std::string_view text);

// Dataset index CSV with header "image,id,track,time".
std::vector<DatasetRecord> parse_dataset_index(std::string_view csv);
std::string write_dataset_index(std::span<const DatasetRecord> records);

// Embedding table CSV with header "image,f0,...,f{d-1}".
using EmbeddingTable = std::map<std::string, EmbeddingVector>;
EmbeddingTable read_embeddings(std::string_view csv);
std::string write_embeddings(const EmbeddingTable& table);

// Track table CSV, one row per track entry; empty cells mark missing keypoints.
std::string write_tracks(std::span<const Track> tracks);
std::vector<Track> parse_tracks(std::string_view csv);

// Flower list JSON: [{"id":..,"cx":..,"cy":..,"well_radius":..,"side":..,"tag":..}].
std::string write_flowers(std::span<const Flower> flowers);
std::vector<Flower> parse_flowers(std::string_view json_text);

/// Shortest decimal text that parses back to exactly `v` (locale independent).
std::string format_real(double v);
/// Strict locale-independent parse; the whole field must be consumed.
double parse_real(std::string_view s);
std::int64_t parse_int(std::string_view s);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace patchpipe

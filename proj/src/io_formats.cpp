#include "patchpipe/io_formats.hpp"

#include <array>
#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace patchpipe {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

FormatError::FormatError(const std::string& what, std::size_t offset)
    : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

ParseError::ParseError(const std::string& what, std::size_t line)
    : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

// ---------------------------------------------------------------------------
// numbers

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("cannot format real");
  return std::string(buf, ptr);
}

double parse_real(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error("invalid real number '" + std::string(s) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error("invalid integer '" + std::string(s) + "'");
  }
  return v;
}

// ---------------------------------------------------------------------------
// files

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// PPM

namespace {

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

class HeaderCursor {
 public:
  explicit HeaderCursor(std::span<const std::uint8_t> b) : bytes_(b) {}

  void skip_separators() {
    bool any = false;
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
        any = true;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
        any = true;
      } else {
        break;
      }
    }
    if (!any) throw FormatError("expected whitespace in header", pos_);
  }

  long number() {
    const std::size_t start = pos_;
    long v = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000'000L) throw FormatError("header value too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError("expected decimal number in header", start);
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

ImageBuffer parse_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("bad magic, expected P5 or P6", 0);
  }
  const int channels = bytes[1] == '6' ? 3 : 1;
  HeaderCursor cur(bytes);
  cur.advance(2);
  cur.skip_separators();
  const long width = cur.number();
  cur.skip_separators();
  const long height = cur.number();
  cur.skip_separators();
  const std::size_t maxval_pos = cur.pos();
  const long maxval = cur.number();
  if (maxval != 255) throw FormatError("maxval must be 255, got " + std::to_string(maxval), maxval_pos);
  if (cur.pos() >= bytes.size() || !is_space(bytes[cur.pos()])) {
    throw FormatError("expected single whitespace before raster", cur.pos());
  }
  cur.advance(1);
  if (width <= 0 || height <= 0) throw FormatError("image dimensions must be positive", 2);
  const std::size_t need = static_cast<std::size_t>(width) * height * channels;
  const std::size_t have = bytes.size() - cur.pos();
  if (have < need) throw FormatError("truncated raster data", bytes.size());
  if (have > need) throw FormatError("trailing bytes after raster", cur.pos() + need);
  std::vector<std::uint8_t> data(bytes.begin() + static_cast<std::ptrdiff_t>(cur.pos()), bytes.end());
  return ImageBuffer(static_cast<int>(width), static_cast<int>(height), channels, std::move(data));
}

std::vector<std::uint8_t> write_ppm(const ImageBuffer& img) {
  if (img.channels() != 1 && img.channels() != 3) throw DimensionError("unsupported channel count");
  const std::string header = std::string(img.channels() == 3 ? "P6 " : "P5 ") +
                             std::to_string(img.width()) + " " + std::to_string(img.height()) +
                             " 255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data().begin(), img.data().end());
  return out;
}

ImageBuffer read_ppm_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_ppm({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what(), e.offset());
  }
}

void write_ppm_file(const std::string& path, const ImageBuffer& img) {
  const auto bytes = write_ppm(img);
  write_text_file(path, {reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

// ---------------------------------------------------------------------------
// pose stream

namespace {

constexpr std::array<std::pair<const char*, Keypoint>, 4> kKeypointNames{{
    {"head", Keypoint::head},
    {"neck", Keypoint::neck},
    {"waist", Keypoint::waist},
    {"abdomen", Keypoint::abdomen},
}};

std::optional<Point2> keypoint_from_json(const json& j, const char* name, std::size_t line) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ParseError(std::string("keypoint '") + name + "' must be null or [x,y]", line);
  }
  return Point2{j[0].get<double>(), j[1].get<double>()};
}

FrameDetections frame_from_line(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
  }
  if (!j.is_object()) throw ParseError("expected JSON object", line_no);
  for (const auto& [key, _] : j.items()) {
    if (key != "frame" && key != "detections") throw ParseError("unknown key '" + key + "'", line_no);
  }
  if (!j.contains("frame") || !j["frame"].is_number_integer()) {
    throw ParseError("missing integer 'frame'", line_no);
  }
  FrameDetections fd;
  fd.frame_index = j["frame"].get<std::int64_t>();
  if (fd.frame_index < 0) throw ParseError("negative frame index", line_no);
  if (!j.contains("detections") || !j["detections"].is_array()) {
    throw ParseError("missing array 'detections'", line_no);
  }
  for (const auto& d : j["detections"]) {
    if (!d.is_object()) throw ParseError("detection must be an object", line_no);
    Pose pose;
    for (const auto& [key, value] : d.items()) {
      if (key == "score") {
        if (!value.is_number()) throw ParseError("score must be a number", line_no);
        pose.score = value.get<double>();
        continue;
      }
      auto it = std::find_if(kKeypointNames.begin(), kKeypointNames.end(),
                             [&](const auto& kv) { return key == kv.first; });
      if (it == kKeypointNames.end()) throw ParseError("unknown detection key '" + key + "'", line_no);
      pose.get(it->second) = keypoint_from_json(value, it->first, line_no);
    }
    try {
      pose.validate();
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    }
    fd.poses.push_back(std::move(pose));
  }
  return fd;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return is_space(static_cast<std::uint8_t>(c)); });
}

}  // namespace

bool PoseStreamReader::next(FrameDetections& out) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (blank(line)) continue;
    out = frame_from_line(line, line_no_);
    if (have_last_ && out.frame_index <= last_frame_) {
      throw ParseError("frame index " + std::to_string(out.frame_index) +
                           " does not increase (previous " + std::to_string(last_frame_) + ")",
                       line_no_);
    }
    last_frame_ = out.frame_index;
    have_last_ = true;
    return true;
  }
  return false;
}

std::vector<FrameDetections> parse_pose_stream(std::istream& in) {
  PoseStreamReader reader(in);
  std::vector<FrameDetections> frames;
  FrameDetections fd;
  while (reader.next(fd)) frames.push_back(std::move(fd));
  return frames;
}

std::vector<FrameDetections> parse_pose_stream(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_pose_stream(in);
}

std::string write_pose_line(const FrameDetections& frame) {
  ordered_json j;
  j["frame"] = frame.frame_index;
  j["detections"] = ordered_json::array();
  for (const auto& pose : frame.poses) {
    ordered_json d;
    for (const auto& [name, k] : kKeypointNames) {
      const auto& p = pose.get(k);
      d[name] = p ? ordered_json::array({p->x, p->y}) : ordered_json(nullptr);
    }
    d["score"] = pose.score;
    j["detections"].push_back(std::move(d));
  }
  return j.dump() + "\n";
}

std::string write_pose_stream(std::span<const FrameDetections> frames) {
  std::string out;
  for (const auto& f : frames) out += write_pose_line(f);
  return out;
}

// ---------------------------------------------------------------------------
// events

std::string write_event_line(const VisitEvent& e) {
  ordered_json j;
  j["type"] = "visit";
  j["flower_id"] = e.flower_id;
  j["track_id"] = e.track_id;
  j["start_frame"] = e.start_frame;
  j["end_frame"] = e.end_frame;
  j["n_frames"] = e.n_frames();
  return j.dump() + "\n";
}

std::string write_event_stream(std::vector<VisitEvent> events) {
  std::sort(events.begin(), events.end(), event_order);
  std::string out;
  for (const auto& e : events) out += write_event_line(e);
  return out;
}

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t c = line.find(',', pos);
    if (c == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, c - pos));
    pos = c + 1;
  }
  return out;
}

template <typename F>
auto with_line(std::size_t line, F&& f) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what(), line);
  }
}

}  // namespace

std::vector<VisitEvent> parse_event_stream(std::string_view text) {
  std::vector<VisitEvent> events;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (blank(lines[i])) continue;
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    static const std::set<std::string> keys{"type", "flower_id", "track_id", "start_frame",
                                            "end_frame", "n_frames"};
    if (!j.is_object()) throw ParseError("expected JSON object", line_no);
    for (const auto& [key, _] : j.items()) {
      if (!keys.count(key)) throw ParseError("unknown key '" + key + "'", line_no);
    }
    if (j.value("type", std::string()) != "visit") throw ParseError("type must be \"visit\"", line_no);
    auto integer = [&](const char* key) {
      if (!j.contains(key) || !j[key].is_number_integer()) {
        throw ParseError(std::string("missing integer '") + key + "'", line_no);
      }
      return j[key].get<std::int64_t>();
    };
    VisitEvent e;
    e.flower_id = static_cast<int>(integer("flower_id"));
    e.track_id = integer("track_id");
    e.start_frame = integer("start_frame");
    e.end_frame = integer("end_frame");
    if (e.start_frame > e.end_frame) throw ParseError("start_frame after end_frame", line_no);
    if (j.contains("n_frames") && integer("n_frames") != e.n_frames()) {
      throw ParseError("n_frames inconsistent with frame bounds", line_no);
    }
    events.push_back(e);
  }
  return events;
}

// ---------------------------------------------------------------------------
// dataset index

std::vector<DatasetRecord> parse_dataset_index(std::string_view csv) {
  const auto lines = split_lines(csv);
  if (lines.empty()) throw ParseError("missing header", 1);
  const auto header = split_fields(lines[0]);
  int col_image = -1, col_id = -1, col_track = -1, col_time = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    int* slot = header[c] == "image"   ? &col_image
                : header[c] == "id"    ? &col_id
                : header[c] == "track" ? &col_track
                : header[c] == "time"  ? &col_time
                                       : nullptr;
    if (!slot) throw ParseError("unexpected column '" + std::string(header[c]) + "'", 1);
    if (*slot >= 0) throw ParseError("duplicate column '" + std::string(header[c]) + "'", 1);
    *slot = static_cast<int>(c);
  }
  for (auto [col, name] : {std::pair{col_image, "image"}, {col_id, "id"}, {col_track, "track"}, {col_time, "time"}}) {
    if (col < 0) throw ParseError(std::string("missing column '") + name + "'", 1);
  }
  std::vector<DatasetRecord> records;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto f = split_fields(lines[i]);
    if (f.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()), line_no);
    }
    DatasetRecord r;
    r.image_ref = std::string(f[col_image]);
    r.id_label = std::string(f[col_id]);
    if (r.image_ref.empty()) throw ParseError("empty image reference", line_no);
    if (r.id_label.empty()) throw ParseError("empty id label", line_no);
    r.track_id = with_line(line_no, [&] { return parse_int(f[col_track]); });
    r.time_key = with_line(line_no, [&] { return parse_int(f[col_time]); });
    if (!seen.insert(r.image_ref).second) {
      throw ParseError("duplicate image reference '" + r.image_ref + "'", line_no);
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::string write_dataset_index(std::span<const DatasetRecord> records) {
  std::string out = "image,id,track,time\n";
  for (const auto& r : records) {
    out += r.image_ref + "," + r.id_label + "," + std::to_string(r.track_id) + "," +
           std::to_string(r.time_key) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// embeddings

EmbeddingTable read_embeddings(std::string_view csv) {
  const auto lines = split_lines(csv);
  if (lines.empty()) throw ParseError("missing header", 1);
  const auto header = split_fields(lines[0]);
  if (header.size() < 2 || header[0] != "image") throw ParseError("header must be image,f0,...", 1);
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] != "f" + std::to_string(c - 1)) {
      throw ParseError("unexpected column '" + std::string(header[c]) + "'", 1);
    }
  }
  EmbeddingTable table;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto f = split_fields(lines[i]);
    if (f.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " columns, got " + std::to_string(f.size()), line_no);
    }
    EmbeddingVector v;
    v.values.reserve(f.size() - 1);
    for (std::size_t c = 1; c < f.size(); ++c) {
      v.values.push_back(with_line(line_no, [&] { return parse_real(f[c]); }));
    }
    if (!table.emplace(std::string(f[0]), std::move(v)).second) {
      throw ParseError("duplicate image reference '" + std::string(f[0]) + "'", line_no);
    }
  }
  return table;
}

std::string write_embeddings(const EmbeddingTable& table) {
  std::size_t dim = table.empty() ? kEmbeddingDim : table.begin()->second.values.size();
  std::string out = "image";
  for (std::size_t c = 0; c < dim; ++c) out += ",f" + std::to_string(c);
  out += "\n";
  for (const auto& [ref, v] : table) {
    if (v.values.size() != dim) throw DimensionError("embedding table has mixed dimensions");
    out += ref;
    for (double x : v.values) out += "," + format_real(x);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// tracks

namespace {
constexpr std::string_view kTrackHeader =
    "track,frame,head_x,head_y,neck_x,neck_y,waist_x,waist_y,abdomen_x,abdomen_y,score";
}

std::string write_tracks(std::span<const Track> tracks) {
  std::string out = std::string(kTrackHeader) + "\n";
  for (const auto& t : tracks) {
    for (const auto& e : t.entries) {
      out += std::to_string(t.track_id) + "," + std::to_string(e.frame);
      for (const auto& [name, k] : kKeypointNames) {
        const auto& p = e.pose.get(k);
        out += p ? "," + format_real(p->x) + "," + format_real(p->y) : std::string(",,");
      }
      out += "," + format_real(e.pose.score) + "\n";
    }
  }
  return out;
}

std::vector<Track> parse_tracks(std::string_view csv) {
  const auto lines = split_lines(csv);
  if (lines.empty() || lines[0] != kTrackHeader) throw ParseError("bad track table header", 1);
  std::vector<Track> tracks;
  std::map<std::int64_t, std::size_t> slot;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto f = split_fields(lines[i]);
    if (f.size() != 11) throw ParseError("expected 11 fields", line_no);
    const std::int64_t id = with_line(line_no, [&] { return parse_int(f[0]); });
    TrackEntry e;
    e.frame = with_line(line_no, [&] { return parse_int(f[1]); });
    for (std::size_t k = 0; k < 4; ++k) {
      const auto xs = f[2 + 2 * k];
      const auto ys = f[3 + 2 * k];
      if (xs.empty() != ys.empty()) throw ParseError("keypoint has only one coordinate", line_no);
      if (!xs.empty()) {
        e.pose.get(kKeypointNames[k].second) =
            with_line(line_no, [&] { return Point2{parse_real(xs), parse_real(ys)}; });
      }
    }
    e.pose.score = with_line(line_no, [&] { return parse_real(f[10]); });
    with_line(line_no, [&] {
      e.pose.validate();
      return 0;
    });
    auto [it, inserted] = slot.emplace(id, tracks.size());
    if (inserted) tracks.push_back(Track{id, {}});
    auto& t = tracks[it->second];
    if (!t.entries.empty() && t.entries.back().frame >= e.frame) {
      throw ParseError("track entries must be strictly time-ordered", line_no);
    }
    t.entries.push_back(std::move(e));
  }
  return tracks;
}

// ---------------------------------------------------------------------------
// flowers

std::string write_flowers(std::span<const Flower> flowers) {
  ordered_json arr = ordered_json::array();
  for (const auto& f : flowers) {
    arr.push_back(ordered_json{{"id", f.flower_id},
                               {"cx", f.center_well.x},
                               {"cy", f.center_well.y},
                               {"well_radius", f.well_radius},
                               {"side", f.square_side},
                               {"tag", f.color_tag}});
  }
  return arr.dump(2) + "\n";
}

std::vector<Flower> parse_flowers(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("flowers: ") + e.what(), 1);
  }
  if (!j.is_array()) throw ParseError("flowers: expected a JSON array", 1);
  std::vector<Flower> out;
  try {
    for (const auto& f : j) {
      Flower fl;
      fl.flower_id = f.at("id").get<int>();
      fl.center_well = {f.at("cx").get<double>(), f.at("cy").get<double>()};
      fl.well_radius = f.at("well_radius").get<double>();
      fl.square_side = f.at("side").get<double>();
      fl.color_tag = f.value("tag", std::string());
      if (!(fl.well_radius > 0) || !(fl.square_side > 0)) throw ParseError("flowers: radius and side must be positive", 1);
      out.push_back(std::move(fl));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("flowers: ") + e.what(), 1);
  }
  return out;
}

}  // namespace patchpipe

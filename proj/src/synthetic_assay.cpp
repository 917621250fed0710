#include "patchpipe/synthetic_assay.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>

#include <json.hpp>

namespace patchpipe {

namespace {

using json = nlohmann::json;
constexpr double kPi = std::numbers::pi;

// Body model, pixels along the body axis from the waist (head positive).
constexpr double kHeadAlong = 62.0;
constexpr double kNeckAlong = 45.0;
constexpr double kAbdomenAlong = -55.0;
struct Ellipse {
  double center_along, semi_along, semi_across;
};
constexpr Ellipse kAbdomenShape{-28.0, 30.0, 20.0};
constexpr Ellipse kThoraxShape{24.0, 22.0, 17.0};
constexpr Ellipse kHeadShape{56.0, 10.0, 12.0};
constexpr double kDotAlong = 28.0;
constexpr double kDotAcross = 8.0;
constexpr double kDotRadius = 4.5;
constexpr double kStripePeriod = 13.0;
constexpr double kBeeRadius = 72.0;

constexpr double kWobbleAmplitude = 10.0 * kPi / 180.0;
constexpr double kWobblePeriod = 25.0;
constexpr int kTurnFrames = 10;
constexpr int kExitFrames = 8;
constexpr double kScriptedWalk = 96.0;

constexpr Rgb kAbdomenBase{190, 140, 60};
constexpr Rgb kAbdomenBand{45, 35, 25};
constexpr Rgb kThoraxColor{80, 60, 40};
constexpr Rgb kHeadColor{40, 32, 25};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_of(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto p : parts) h = splitmix(h ^ p);
  return h;
}

double unit_from(std::uint64_t h) { return (static_cast<double>(h >> 11) + 0.5) * (1.0 / 9007199254740992.0); }

double normal_from(std::uint64_t h) {
  const double u1 = unit_from(h);
  const double u2 = unit_from(splitmix(h));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double frame_gain(const WorldConfig& cfg, std::int64_t frame) {
  const double u = unit_from(hash_of({cfg.seed, 0x6761696eULL, static_cast<std::uint64_t>(frame)}));
  return cfg.gain_min + (cfg.gain_max - cfg.gain_min) * u;
}

double background_level(double x, double y) { return 110.0 + 12.0 * std::sin(x / 37.0) * std::cos(y / 53.0); }

bool inside(const Ellipse& e, double along, double across, double scale) {
  const double a = (along - e.center_along * scale) / (e.semi_along * scale);
  const double b = across / (e.semi_across * scale);
  return a * a + b * b <= 1.0;
}

std::vector<FlowerLayout> default_layout(const WorldConfig& cfg) {
  const double cy = std::round(cfg.height / 2.0);
  const double side = 320.0;
  return {FlowerLayout{std::round(cfg.width * 0.25), cy, side, Rgb{240, 240, 240}, "white"},
          FlowerLayout{std::round(cfg.width * 0.75), cy, side, Rgb{180, 210, 255}, "blue"}};
}

Point2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

}  // namespace

const std::array<Rgb, 8>& paint_palette() {
  static const std::array<Rgb, 8> palette{{{230, 30, 30},
                                           {30, 200, 60},
                                           {40, 80, 240},
                                           {240, 220, 30},
                                           {220, 40, 200},
                                           {30, 210, 220},
                                           {250, 130, 20},
                                           {250, 250, 250}}};
  return palette;
}

// ---------------------------------------------------------------------------
// config

WorldConfig world_config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("world config: ") + e.what());
  }
  if (!j.is_object()) throw Error("world config must be a JSON object");
  WorldConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "width") c.width = v.get<int>();
      else if (key == "height") c.height = v.get<int>();
      else if (key == "bees") c.bees = v.get<int>();
      else if (key == "frames") c.frames = v.get<std::int64_t>();
      else if (key == "appearances") c.appearances = v.get<int>();
      else if (key == "dwell_min") c.dwell_min = v.get<int>();
      else if (key == "dwell_max") c.dwell_max = v.get<int>();
      else if (key == "min_gap_frames") c.min_gap_frames = v.get<int>();
      else if (key == "walk_speed") c.walk_speed = v.get<double>();
      else if (key == "keypoint_jitter") c.keypoint_jitter = v.get<double>();
      else if (key == "gain_min") c.gain_min = v.get<double>();
      else if (key == "gain_max") c.gain_max = v.get<double>();
      else if (key == "pixel_noise") c.pixel_noise = v.get<double>();
      else if (key == "abdomen_phase_jitter") c.abdomen_phase_jitter = v.get<double>();
      else if (key == "images_per_track_min") c.images_per_track_min = v.get<int>();
      else if (key == "images_per_track_max") c.images_per_track_max = v.get<int>();
      else if (key == "dataset_images") c.dataset_images = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "flowers") {
        for (const auto& f : v) {
          FlowerLayout fl;
          fl.cx = f.at("cx").get<double>();
          fl.cy = f.at("cy").get<double>();
          fl.side = f.at("side").get<double>();
          if (f.contains("color")) fl.color = f.at("color").get<Rgb>();
          fl.tag = f.value("tag", std::string("white"));
          c.flowers.push_back(fl);
        }
      } else if (key == "visits") {
        for (const auto& s : v) {
          c.visits.push_back({s.at("bee").get<int>(), s.at("flower").get<int>(), s.at("start").get<std::int64_t>(),
                              s.at("end").get<std::int64_t>()});
        }
      } else {
        throw Error("world config: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(std::string("world config: ") + e.what());
  }
  return c;
}

std::string world_config_to_json(const WorldConfig& c) {
  json j{{"width", c.width},
         {"height", c.height},
         {"bees", c.bees},
         {"frames", c.frames},
         {"appearances", c.appearances},
         {"dwell_min", c.dwell_min},
         {"dwell_max", c.dwell_max},
         {"min_gap_frames", c.min_gap_frames},
         {"walk_speed", c.walk_speed},
         {"keypoint_jitter", c.keypoint_jitter},
         {"gain_min", c.gain_min},
         {"gain_max", c.gain_max},
         {"pixel_noise", c.pixel_noise},
         {"abdomen_phase_jitter", c.abdomen_phase_jitter},
         {"images_per_track_min", c.images_per_track_min},
         {"images_per_track_max", c.images_per_track_max},
         {"dataset_images", c.dataset_images},
         {"seed", c.seed}};
  j["flowers"] = json::array();
  for (const auto& f : c.flowers) {
    j["flowers"].push_back({{"cx", f.cx}, {"cy", f.cy}, {"side", f.side}, {"color", f.color}, {"tag", f.tag}});
  }
  j["visits"] = json::array();
  for (const auto& v : c.visits) {
    j["visits"].push_back({{"bee", v.bee}, {"flower", v.flower}, {"start", v.start}, {"end", v.end}});
  }
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// world state

WorldState World::state_at(std::int64_t frame) const {
  WorldState s;
  s.frame = frame;
  for (const auto& a : appearances) {
    if (frame < a.begin || frame > a.end) continue;
    const Flower& flower = flowers[static_cast<std::size_t>(a.flower)];
    const double scale = bees[static_cast<std::size_t>(a.bee)].body_scale;
    const double base = std::atan2(-a.outward.y, -a.outward.x);
    const Point2 dwell_waist{flower.center_well.x + a.outward.x * kHeadAlong * scale,
                             flower.center_well.y + a.outward.y * kHeadAlong * scale};
    auto wobble = [&](std::int64_t f) {
      return kWobbleAmplitude * std::sin(2.0 * kPi * static_cast<double>(f - a.dwell_start) / kWobblePeriod + a.wobble_phase);
    };
    BeeInstance b;
    b.bee = a.bee;
    b.track_id = a.track_id;
    if (frame < a.dwell_start) {
      const double s_frac = static_cast<double>(frame - a.begin) / static_cast<double>(a.dwell_start - a.begin);
      const double remaining = a.walk_len * (1.0 - s_frac);
      b.waist = {dwell_waist.x + a.outward.x * remaining, dwell_waist.y + a.outward.y * remaining};
      b.heading = base;
    } else if (frame <= a.dwell_end) {
      b.waist = dwell_waist;
      b.heading = base + wobble(frame);
    } else if (frame <= a.dwell_end + kTurnFrames) {
      b.waist = dwell_waist;
      b.heading = base + wobble(a.dwell_end) + a.turn_sign * kPi * static_cast<double>(frame - a.dwell_end) / kTurnFrames;
    } else {
      const double out = config.walk_speed * static_cast<double>(frame - a.dwell_end - kTurnFrames);
      b.waist = {dwell_waist.x + a.outward.x * out, dwell_waist.y + a.outward.y * out};
      b.heading = base + wobble(a.dwell_end) + a.turn_sign * kPi;
    }
    const double jitter = config.abdomen_phase_jitter *
                          normal_from(hash_of({config.seed, 0x61626430ULL, static_cast<std::uint64_t>(a.track_id),
                                               static_cast<std::uint64_t>(frame)}));
    b.abdomen_phase = bees[static_cast<std::size_t>(a.bee)].stripe_phase + jitter;
    s.bees.push_back(b);
  }
  return s;
}

Pose bee_pose(const World& world, const BeeInstance& b) {
  const double scale = world.bees[static_cast<std::size_t>(b.bee)].body_scale;
  const Point2 h = unit(b.heading);
  auto along = [&](double d) { return Point2{b.waist.x + h.x * d * scale, b.waist.y + h.y * d * scale}; };
  Pose p;
  p.head = along(kHeadAlong);
  p.neck = along(kNeckAlong);
  p.waist = b.waist;
  p.abdomen = along(kAbdomenAlong);
  p.score = 1.0;
  return p;
}

// ---------------------------------------------------------------------------
// generation

namespace {

std::vector<SyntheticBee> make_bees(int count, std::mt19937_64& rng) {
  const auto& palette = paint_palette();
  std::vector<std::vector<int>> codes;
  for (int i = 0; i < 8; ++i) codes.push_back({i});
  for (int i = 0; i < 8; ++i) {
    for (int j = i + 1; j < 8; ++j) codes.push_back({i, j});
  }
  if (count > static_cast<int>(codes.size())) {
    throw Error("at most " + std::to_string(codes.size()) + " distinct paint codes are available");
  }
  std::shuffle(codes.begin(), codes.end(), rng);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::uniform_real_distribution<double> contrast(0.35, 1.0);
  std::uniform_real_distribution<double> nudge(-1.5, 1.5);
  std::bernoulli_distribution flip(0.5);

  std::vector<SyntheticBee> bees;
  for (int b = 0; b < count; ++b) {
    SyntheticBee bee;
    char label[16];
    std::snprintf(label, sizeof(label), "bee%02d", b);
    bee.id_label = label;
    auto code = codes[static_cast<std::size_t>(b)];
    if (code.size() == 2 && flip(rng)) std::swap(code[0], code[1]);
    for (std::size_t d = 0; d < code.size(); ++d) {
      PaintDot dot;
      dot.palette_index = code[d];
      dot.color = palette[static_cast<std::size_t>(code[d])];
      dot.along = kDotAlong + nudge(rng);
      dot.across = (code.size() == 1 ? 0.0 : (d == 0 ? kDotAcross : -kDotAcross)) + nudge(rng);
      bee.paint.push_back(dot);
    }
    bee.stripe_phase = phase(rng);
    bee.stripe_contrast = contrast(rng);
    bees.push_back(std::move(bee));
  }
  return bees;
}

double outward_base_angle(const std::vector<FlowerLayout>& layout, std::size_t f) {
  double mx = 0.0, my = 0.0;
  for (const auto& l : layout) {
    mx += l.cx;
    my += l.cy;
  }
  mx /= static_cast<double>(layout.size());
  my /= static_cast<double>(layout.size());
  const double dx = layout[f].cx - mx, dy = layout[f].cy - my;
  return std::hypot(dx, dy) < 1e-9 ? kPi : std::atan2(dy, dx);
}

void check_no_overlap(const std::vector<Appearance>& apps, bool by_bee, std::int64_t gap) {
  std::map<int, std::vector<const Appearance*>> groups;
  for (const auto& a : apps) groups[by_bee ? a.bee : a.flower].push_back(&a);
  for (auto& [key, list] : groups) {
    std::sort(list.begin(), list.end(), [](auto* x, auto* y) { return x->begin < y->begin; });
    for (std::size_t i = 1; i < list.size(); ++i) {
      if (list[i]->begin <= list[i - 1]->end + gap) {
        throw OverDenseWorldError(std::string("over-dense schedule: ") + (by_bee ? "bee " : "flower ") +
                                  std::to_string(key) + " is needed by two visits around frame " +
                                  std::to_string(list[i]->begin));
      }
    }
  }
}

}  // namespace

World generate_world(const WorldConfig& cfg) {
  if (cfg.width <= 0 || cfg.height <= 0) throw Error("world size must be positive");
  if (cfg.bees < 0 || cfg.appearances < 0 || cfg.frames < 0) throw Error("world counts must be non-negative");
  if (cfg.keypoint_jitter < 0 || cfg.pixel_noise < 0 || cfg.abdomen_phase_jitter < 0) {
    throw Error("noise levels must be non-negative");
  }
  if (cfg.dwell_min < 1 || cfg.dwell_max < cfg.dwell_min) throw Error("invalid dwell range");
  if (cfg.images_per_track_min < 1 || cfg.images_per_track_max < cfg.images_per_track_min) {
    throw Error("invalid images-per-track range");
  }
  if (!(cfg.walk_speed > 0)) throw Error("walk_speed must be positive");

  World w;
  w.config = cfg;
  w.layout = cfg.flowers.empty() ? default_layout(cfg) : cfg.flowers;
  std::stable_sort(w.layout.begin(), w.layout.end(),
                   [](const FlowerLayout& a, const FlowerLayout& b) { return std::tie(a.cy, a.cx) < std::tie(b.cy, b.cx); });
  for (std::size_t i = 0; i < w.layout.size(); ++i) {
    const auto& l = w.layout[i];
    w.flowers.push_back({static_cast<int>(i), {l.cx, l.cy}, 0.08 * l.side, l.side, l.tag});
  }

  std::mt19937_64 rng(cfg.seed);
  w.bees = make_bees(cfg.bees, rng);

  std::uniform_real_distribution<double> spread(-kPi / 3.0, kPi / 3.0);
  std::uniform_real_distribution<double> walk(60.0, 160.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::bernoulli_distribution turn(0.5);
  auto make_appearance = [&](int bee, int flower, double walk_len, std::int64_t dwell_start, std::int64_t dwell_end) {
    Appearance a;
    a.bee = bee;
    a.flower = flower;
    a.outward = unit(outward_base_angle(w.layout, static_cast<std::size_t>(flower)) + spread(rng));
    a.walk_len = walk_len;
    const auto walk_frames = static_cast<std::int64_t>(std::ceil(walk_len / cfg.walk_speed));
    a.dwell_start = dwell_start;
    a.dwell_end = dwell_end;
    a.begin = dwell_start - walk_frames;
    a.end = dwell_end + kTurnFrames + kExitFrames;
    a.wobble_phase = phase(rng);
    a.turn_sign = turn(rng) ? 1 : -1;
    return a;
  };

  if (!cfg.visits.empty()) {
    for (const auto& v : cfg.visits) {
      if (v.bee < 0 || v.bee >= cfg.bees) throw Error("scripted visit names unknown bee " + std::to_string(v.bee));
      if (v.flower < 0 || v.flower >= static_cast<int>(w.flowers.size())) {
        throw Error("scripted visit names unknown flower " + std::to_string(v.flower));
      }
      if (v.end < v.start) throw Error("scripted visit ends before it starts");
      Appearance a = make_appearance(v.bee, v.flower, kScriptedWalk, v.start, v.end);
      if (a.begin < 0) throw Error("scripted visit at frame " + std::to_string(v.start) + " starts too early to walk in");
      w.appearances.push_back(a);
    }
    check_no_overlap(w.appearances, true, 0);
    check_no_overlap(w.appearances, false, 0);
  } else if (cfg.appearances > 0) {
    if (cfg.bees < 1) throw Error("random appearances need at least one bee");
    if (w.flowers.empty()) throw Error("random appearances need at least one flower");
    std::vector<int> perm(static_cast<std::size_t>(cfg.bees));
    for (int b = 0; b < cfg.bees; ++b) perm[static_cast<std::size_t>(b)] = b;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::int64_t> flower_free(w.flowers.size(), 0), bee_free(static_cast<std::size_t>(cfg.bees), 0);
    std::uniform_int_distribution<int> dwell(cfg.dwell_min, cfg.dwell_max);
    std::uniform_int_distribution<int> slack(0, 10);
    for (int i = 0; i < cfg.appearances; ++i) {
      const int bee = perm[static_cast<std::size_t>(i % cfg.bees)];
      std::size_t flower = 0;
      for (std::size_t f = 1; f < w.flowers.size(); ++f) {
        if (flower_free[f] < flower_free[flower]) flower = f;
      }
      const double walk_len = walk(rng);
      const auto walk_frames = static_cast<std::int64_t>(std::ceil(walk_len / cfg.walk_speed));
      const std::int64_t begin = std::max(flower_free[flower], bee_free[static_cast<std::size_t>(bee)]) + slack(rng);
      const std::int64_t dwell_start = begin + walk_frames;
      Appearance a = make_appearance(bee, static_cast<int>(flower), walk_len, dwell_start, dwell_start + dwell(rng) - 1);
      flower_free[flower] = a.end + cfg.min_gap_frames + 1;
      bee_free[static_cast<std::size_t>(bee)] = a.end + cfg.min_gap_frames + 1;
      w.appearances.push_back(a);
    }
  }

  std::stable_sort(w.appearances.begin(), w.appearances.end(), [](const Appearance& a, const Appearance& b) {
    return std::tie(a.begin, a.bee) < std::tie(b.begin, b.bee);
  });
  for (std::size_t i = 0; i < w.appearances.size(); ++i) w.appearances[i].track_id = static_cast<std::int64_t>(i);

  // Crops per appearance.
  if (!w.appearances.empty()) {
    const auto n = static_cast<int>(w.appearances.size());
    if (cfg.dataset_images > 0) {
      const int base = cfg.dataset_images / n;
      const int extra = cfg.dataset_images % n;
      if (base < 1) throw Error("dataset_images is smaller than the number of tracks");
      std::vector<int> idx(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
      std::shuffle(idx.begin(), idx.end(), rng);
      for (int i = 0; i < n; ++i) {
        w.appearances[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])].n_images = base + (i < extra ? 1 : 0);
      }
    } else {
      std::uniform_int_distribution<int> count(cfg.images_per_track_min, cfg.images_per_track_max);
      for (auto& a : w.appearances) a.n_images = count(rng);
    }
    for (const auto& a : w.appearances) {
      if (a.n_images > a.end - a.begin + 1) throw Error("appearance too short for its crop count");
    }
  }

  std::int64_t last = -1;
  for (const auto& a : w.appearances) last = std::max(last, a.end);
  w.n_frames = cfg.frames > 0 ? cfg.frames : (last >= 0 ? last + 11 : 0);
  if (last >= w.n_frames) throw OverDenseWorldError("schedule does not fit in the requested number of frames");

  // Walk frames, checking for overlapping bodies and emitting the streams.
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::map<std::int64_t, std::size_t> track_slot;
  for (const auto& a : w.appearances) {
    track_slot[a.track_id] = w.truth_tracks.size();
    w.truth_tracks.push_back(Track{a.track_id, {}});
  }
  w.poses.reserve(static_cast<std::size_t>(w.n_frames));
  for (std::int64_t f = 0; f < w.n_frames; ++f) {
    const WorldState state = w.state_at(f);
    for (std::size_t i = 0; i < state.bees.size(); ++i) {
      for (std::size_t j = i + 1; j < state.bees.size(); ++j) {
        if (point_distance(state.bees[i].waist, state.bees[j].waist) < 1.5 * (kHeadAlong - kAbdomenAlong)) {
          throw OverDenseWorldError("over-dense world: bees of tracks " + std::to_string(state.bees[i].track_id) +
                                    " and " + std::to_string(state.bees[j].track_id) + " overlap at frame " +
                                    std::to_string(f));
        }
      }
    }
    FrameDetections fd;
    fd.frame_index = f;
    for (const auto& b : state.bees) {
      const Pose truth = bee_pose(w, b);
      w.truth_tracks[track_slot[b.track_id]].entries.push_back({f, truth});
      Pose seen = truth;
      for (auto k : {Keypoint::head, Keypoint::neck, Keypoint::waist, Keypoint::abdomen}) {
        auto& p = seen.get(k);
        p->x += cfg.keypoint_jitter * jitter(rng);
        p->y += cfg.keypoint_jitter * jitter(rng);
      }
      seen.score = 0.95;
      fd.poses.push_back(seen);
    }
    w.poses.push_back(std::move(fd));
  }
  for (const auto& a : w.appearances) w.truth_events.push_back({a.flower, a.track_id, a.dwell_start, a.dwell_end});
  std::sort(w.truth_events.begin(), w.truth_events.end(), event_order);
  return w;
}

// ---------------------------------------------------------------------------
// rendering

namespace {

struct Color {
  double r, g, b;
};

Color to_color(const Rgb& c) { return {double(c[0]), double(c[1]), double(c[2])}; }

Color mix(const Color& a, const Color& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

struct BeeGeom {
  const BeeInstance* inst;
  const SyntheticBee* bee;
  double c, s;
};

// Irwin-Hall sum of four 16-bit uniforms, rescaled to unit variance.
double approx_normal(std::uint64_t h) {
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) sum += static_cast<double>((h >> (16 * i)) & 0xffff) / 65536.0;
  return (sum - 2.0) * 1.7320508075688772;
}

Color scene_color(const World& w, double x, double y, double background) {
  for (const auto& f : w.layout) {
    const double half = f.side / 2.0;
    if (std::abs(x - f.cx) < half && std::abs(y - f.cy) < half) {
      const double well = 0.08 * f.side;
      const double k = std::hypot(x - f.cx, y - f.cy) <= well ? 0.92 : 1.0;
      const Color c = to_color(f.color);
      return {c.r * k, c.g * k, c.b * k};
    }
  }
  return {background, background, background};
}

Color scene_color(const World& w, double x, double y) { return scene_color(w, x, y, background_level(x, y)); }

// Returns true and sets `out` when (x, y) falls on the bee body.
bool bee_color(const BeeGeom& g, double x, double y, Color& out) {
  const double dx = x - g.inst->waist.x, dy = y - g.inst->waist.y;
  const double along = dx * g.c + dy * g.s;
  const double across = -dx * g.s + dy * g.c;
  const double scale = g.bee->body_scale;
  for (const auto& dot : g.bee->paint) {
    if (std::hypot(along - dot.along * scale, across - dot.across * scale) <= kDotRadius * scale) {
      out = to_color(dot.color);
      return true;
    }
  }
  if (inside(kHeadShape, along, across, scale)) {
    out = to_color(kHeadColor);
    return true;
  }
  if (inside(kThoraxShape, along, across, scale)) {
    out = to_color(kThoraxColor);
    return true;
  }
  if (inside(kAbdomenShape, along, across, scale)) {
    const double band = 0.5 + 0.5 * std::cos(2.0 * kPi * along / (kStripePeriod * scale) + g.inst->abdomen_phase);
    out = mix(to_color(kAbdomenBase), to_color(kAbdomenBand), g.bee->stripe_contrast * band);
    return true;
  }
  return false;
}

}  // namespace

ImageBuffer render_frame(const World& w, const WorldState& state, std::optional<PixelBox> roi) {
  const PixelBox box = roi.value_or(PixelBox{0, 0, w.config.width, w.config.height});
  ImageBuffer img(box.w, box.h, 3);
  const double gain = frame_gain(w.config, state.frame);

  std::vector<BeeGeom> geoms;
  for (const auto& b : state.bees) {
    const double r = kBeeRadius * w.bees[static_cast<std::size_t>(b.bee)].body_scale;
    if (b.waist.x + r < box.x || b.waist.x - r > box.x + box.w || b.waist.y + r < box.y || b.waist.y - r > box.y + box.h) {
      continue;
    }
    geoms.push_back({&b, &w.bees[static_cast<std::size_t>(b.bee)], std::cos(b.heading), std::sin(b.heading)});
  }

  static constexpr double kSub[4][2] = {{-0.25, -0.25}, {0.25, -0.25}, {-0.25, 0.25}, {0.25, 0.25}};
  const std::uint64_t frame_key = splitmix(w.config.seed ^ (static_cast<std::uint64_t>(state.frame) * 0x9e3779b97f4a7c15ULL));
  std::vector<double> col_wave(static_cast<std::size_t>(box.w));
  for (int u = 0; u < box.w; ++u) col_wave[static_cast<std::size_t>(u)] = std::sin((box.x + u) / 37.0);
  for (int v = 0; v < box.h; ++v) {
    const int y = box.y + v;
    const double row_wave = std::cos(y / 53.0);
    for (int u = 0; u < box.w; ++u) {
      const int x = box.x + u;
      const BeeGeom* near = nullptr;
      for (const auto& g : geoms) {
        const double r = kBeeRadius * g.bee->body_scale;
        const double dx = x - g.inst->waist.x, dy = y - g.inst->waist.y;
        if (dx * dx + dy * dy <= r * r) {
          near = &g;
          break;
        }
      }
      Color c{0, 0, 0};
      if (near) {
        for (const auto& off : kSub) {
          const double sx = x + off[0], sy = y + off[1];
          Color sample;
          if (!bee_color(*near, sx, sy, sample)) sample = scene_color(w, sx, sy);
          c.r += sample.r / 4;
          c.g += sample.g / 4;
          c.b += sample.b / 4;
        }
      } else {
        c = scene_color(w, x, y, 110.0 + 12.0 * col_wave[static_cast<std::size_t>(u)] * row_wave);
      }
      const double vals[3] = {c.r, c.g, c.b};
      const std::uint64_t pixel_key =
          splitmix(frame_key ^ ((static_cast<std::uint64_t>(y) << 32) | static_cast<std::uint32_t>(x)));
      for (int ch = 0; ch < 3; ++ch) {
        double value = vals[ch] * gain;
        if (w.config.pixel_noise > 0) value += w.config.pixel_noise * approx_normal(splitmix(pixel_key + ch));
        img.at(u, v, ch) = static_cast<std::uint8_t>(std::clamp<long>(round_half_up(value), 0, 255));
      }
    }
  }
  return img;
}

ImageBuffer render_reference(const World& w) { return render_frame(w, WorldState{0, {}}); }

// ---------------------------------------------------------------------------
// crop export

ExportSummary export_crops(const World& w, const CropGeometry& geometry, std::span<const CropRegion> regions,
                           const std::function<void(const CropSample&)>& sink) {
  ExportSummary summary;
  std::vector<CropSpec> specs;
  double reach = 0.0;
  for (auto r : regions) {
    specs.push_back(make_crop_spec(r, geometry));
    const auto& s = specs.back();
    if (r == CropRegion::unaligned) {
      reach = std::max(reach, std::hypot(s.width / 2.0, s.height / 2.0));
    } else {
      const double dx = std::max(s.anchor_x, geometry.full_w - s.anchor_x);
      const double dy = std::max(s.anchor_y, geometry.full_h - s.anchor_y);
      reach = std::max(reach, std::hypot(dx, dy));
    }
  }
  const int margin = static_cast<int>(std::ceil(reach)) + 2;

  for (const auto& a : w.appearances) {
    const auto len = a.end - a.begin + 1;
    for (int k = 0; k < a.n_images; ++k) {
      const std::int64_t frame = a.begin + static_cast<std::int64_t>(std::floor((k + 0.5) * static_cast<double>(len) / a.n_images));
      const WorldState state = w.state_at(frame);
      const BeeInstance* self = nullptr;
      bool crowded = false;
      for (const auto& b : state.bees) {
        if (b.track_id == a.track_id) self = &b;
      }
      for (const auto& b : state.bees) {
        if (&b != self && point_distance(b.waist, self->waist) < reach + kBeeRadius) crowded = true;
      }
      if (crowded) {
        ++summary.multi_bee_skipped;
        continue;
      }
      const Pose pose = bee_pose(w, *self);
      const int x0 = std::max(0, static_cast<int>(std::floor(self->waist.x)) - margin);
      const int y0 = std::max(0, static_cast<int>(std::floor(self->waist.y)) - margin);
      const int x1 = std::min(w.config.width, static_cast<int>(std::floor(self->waist.x)) + margin + 1);
      const int y1 = std::min(w.config.height, static_cast<int>(std::floor(self->waist.y)) + margin + 1);
      char ref[64];
      std::snprintf(ref, sizeof(ref), "%s_t%05lld_f%06lld.ppm", w.bees[static_cast<std::size_t>(a.bee)].id_label.c_str(),
                    static_cast<long long>(a.track_id), static_cast<long long>(frame));
      DatasetRecord record{ref, w.bees[static_cast<std::size_t>(a.bee)].id_label, a.track_id, frame};
      if (specs.empty()) {
        summary.records.push_back(record);
        continue;
      }
      if (x1 <= x0 || y1 <= y0) {
        ++summary.alignment_errors;
        continue;
      }
      const ImageBuffer window = render_frame(w, state, PixelBox{x0, y0, x1 - x0, y1 - y0});
      Pose local = pose;
      for (auto kp : {Keypoint::head, Keypoint::neck, Keypoint::waist, Keypoint::abdomen}) {
        local.get(kp)->x -= x0;
        local.get(kp)->y -= y0;
      }

      std::vector<CropSample> crops;
      try {
        for (const auto& spec : specs) {
          CropSample sample{record, spec.region, {}};
          sample.image = spec.region == CropRegion::unaligned
                             ? extract_unaligned(window, *local.waist, spec)
                             : extract_crop(window, alignment_transform(local, spec), spec);
          crops.push_back(std::move(sample));
        }
      } catch (const AlignmentError&) {
        ++summary.alignment_errors;
        continue;
      }
      for (const auto& c : crops) sink(c);
      summary.records.push_back(record);
    }
  }
  return summary;
}

}  // namespace patchpipe

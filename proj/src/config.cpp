#include "patchpipe/config.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include <json.hpp>

namespace patchpipe {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

double real_in(const json& v, const std::string& key, double lo, double hi, bool lo_open = false) {
  if (!v.is_number()) throw ConfigError(key + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x) || x > hi || x < lo || (lo_open && x == lo)) {
    throw ConfigError(key + ": value " + format_real(x) + " out of range");
  }
  return x;
}

long long int_in(const json& v, const std::string& key, long long lo, long long hi) {
  if (!v.is_number_integer()) throw ConfigError(key + ": expected an integer");
  const auto x = v.get<long long>();
  if (x < lo || x > hi) throw ConfigError(key + ": value " + std::to_string(x) + " out of range");
  return x;
}

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr long long kBig = 1LL << 40;

using Setter = std::function<void(AssayConfig&, const json&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"flower.threshold",
       [](AssayConfig& c, const json& v, const std::string& k) {
         if (v.is_string() && v.get<std::string>() == "otsu") {
           c.flower.threshold = ThresholdMethod::otsu_method();
         } else {
           c.flower.threshold = ThresholdMethod::fixed_at(static_cast<int>(int_in(v, k, 0, 256)));
         }
       }},
      {"flower.min_area_px2",
       [](AssayConfig& c, const json& v, const std::string& k) { c.flower.min_area_px2 = static_cast<int>(int_in(v, k, 1, kBig)); }},
      {"flower.aspect_tol", [](AssayConfig& c, const json& v, const std::string& k) { c.flower.aspect_tol = real_in(v, k, 0, 1); }},
      {"flower.fill_min", [](AssayConfig& c, const json& v, const std::string& k) { c.flower.fill_min = real_in(v, k, 0, 1); }},
      {"flower.well_fraction",
       [](AssayConfig& c, const json& v, const std::string& k) { c.flower.well_fraction = real_in(v, k, 0, 0.5, true); }},
      {"flower.well_offset_x",
       [](AssayConfig& c, const json& v, const std::string& k) { c.flower.well_offset_x = real_in(v, k, -kInf, kInf); }},
      {"flower.well_offset_y",
       [](AssayConfig& c, const json& v, const std::string& k) { c.flower.well_offset_y = real_in(v, k, -kInf, kInf); }},
      {"flower.manual",
       [](AssayConfig& c, const json& v, const std::string& k) {
         if (!v.is_array()) throw ConfigError(k + ": expected a list");
         c.flower.manual.clear();
         for (const auto& f : v) {
           if (!f.is_object()) throw ConfigError(k + ": entries must be objects");
           for (const auto& [field, _] : f.items()) {
             if (field != "id" && field != "cx" && field != "cy" && field != "well_radius" && field != "side") {
               throw ConfigError(k + ": unknown field '" + field + "'");
             }
           }
           if (!f.contains("id") || !f.contains("cx") || !f.contains("cy") || !f.contains("well_radius")) {
             throw ConfigError(k + ": entries need id, cx, cy, well_radius");
           }
           ManualFlower m;
           m.id = static_cast<int>(int_in(f["id"], k + ".id", 0, kBig));
           m.cx = real_in(f["cx"], k + ".cx", -kInf, kInf);
           m.cy = real_in(f["cy"], k + ".cy", -kInf, kInf);
           m.well_radius = real_in(f["well_radius"], k + ".well_radius", 0, kInf, true);
           if (f.contains("side")) m.side = real_in(f["side"], k + ".side", 0, kInf, true);
           c.flower.manual.push_back(m);
         }
       }},
      {"track.gate_px", [](AssayConfig& c, const json& v, const std::string& k) { c.track.gate_px = real_in(v, k, 0, kInf, true); }},
      {"track.max_gap_frames",
       [](AssayConfig& c, const json& v, const std::string& k) { c.track.max_gap_frames = static_cast<int>(int_in(v, k, 0, kBig)); }},
      {"visit.r_visit_px",
       [](AssayConfig& c, const json& v, const std::string& k) { c.visit.r_visit_px = real_in(v, k, 0, kInf, true); }},
      {"visit.r_visit_well_multiple",
       [](AssayConfig& c, const json& v, const std::string& k) { c.visit.r_visit_well_multiple = real_in(v, k, 0, kInf, true); }},
      {"visit.well_radius_px",
       [](AssayConfig& c, const json& v, const std::string& k) { c.visit.well_radius_px = real_in(v, k, 0, kInf, true); }},
      {"visit.gap_max_frames",
       [](AssayConfig& c, const json& v, const std::string& k) { c.visit.gap_max_frames = static_cast<int>(int_in(v, k, 1, kBig)); }},
      {"visit.min_len_frames",
       [](AssayConfig& c, const json& v, const std::string& k) { c.visit.min_len_frames = static_cast<int>(int_in(v, k, 1, kBig)); }},
      {"visit.overlap_min_frames",
       [](AssayConfig& c, const json& v, const std::string& k) { c.visit.overlap_min_frames = static_cast<int>(int_in(v, k, 1, kBig)); }},
      {"crop.full_w", [](AssayConfig& c, const json& v, const std::string& k) { c.crop.full_w = static_cast<int>(int_in(v, k, 1, 1 << 14)); }},
      {"crop.full_h", [](AssayConfig& c, const json& v, const std::string& k) { c.crop.full_h = static_cast<int>(int_in(v, k, 2, 1 << 14)); }},
      {"crop.anchor_x", [](AssayConfig& c, const json& v, const std::string& k) { c.crop.anchor_x = real_in(v, k, 0, 1 << 14); }},
      {"crop.anchor_y", [](AssayConfig& c, const json& v, const std::string& k) { c.crop.anchor_y = real_in(v, k, 0, 1 << 14); }},
      {"crop.split_row",
       [](AssayConfig& c, const json& v, const std::string& k) { c.crop.split_row = static_cast<int>(int_in(v, k, 1, 1 << 14)); }},
      {"crop.unaligned_side",
       [](AssayConfig& c, const json& v, const std::string& k) { c.crop.unaligned_side = static_cast<int>(int_in(v, k, 1, 1 << 14)); }},
      {"train.margin", [](AssayConfig& c, const json& v, const std::string& k) { c.train.margin = real_in(v, k, 0, kInf); }},
      {"train.learning_rate",
       [](AssayConfig& c, const json& v, const std::string& k) { c.train.learning_rate = real_in(v, k, 0, kInf, true); }},
      {"train.max_epochs",
       [](AssayConfig& c, const json& v, const std::string& k) { c.train.max_epochs = static_cast<int>(int_in(v, k, 1, kBig)); }},
      {"train.patience",
       [](AssayConfig& c, const json& v, const std::string& k) { c.train.patience = static_cast<int>(int_in(v, k, 1, kBig)); }},
      {"train.dropout_in", [](AssayConfig& c, const json& v, const std::string& k) { c.train.dropout_in = real_in(v, k, 0, 0.99); }},
      {"train.dropout_out", [](AssayConfig& c, const json& v, const std::string& k) { c.train.dropout_out = real_in(v, k, 0, 0.99); }},
      {"train.batch_ids",
       [](AssayConfig& c, const json& v, const std::string& k) { c.train.batch_ids = static_cast<int>(int_in(v, k, 2, 1 << 14)); }},
      {"train.images_per_id",
       [](AssayConfig& c, const json& v, const std::string& k) { c.train.images_per_id = static_cast<int>(int_in(v, k, 2, 1 << 14)); }},
      {"train.val_frac", [](AssayConfig& c, const json& v, const std::string& k) { c.train.val_frac = real_in(v, k, 0, 0.9); }},
      {"train.embedding_dim",
       [](AssayConfig& c, const json& v, const std::string& k) { c.train.embedding_dim = static_cast<int>(int_in(v, k, 1, 1 << 14)); }},
      {"train.downsample",
       [](AssayConfig& c, const json& v, const std::string& k) { c.feature_downsample = static_cast<int>(int_in(v, k, 1, 64)); }},
      {"split.train_frac", [](AssayConfig& c, const json& v, const std::string& k) { c.split.train_frac = real_in(v, k, 0, 1, true); }},
      {"split.id_frac", [](AssayConfig& c, const json& v, const std::string& k) { c.split.id_frac = real_in(v, k, 0, 1, true); }},
      {"split.ref_frac", [](AssayConfig& c, const json& v, const std::string& k) { c.split.ref_frac = real_in(v, k, 0, 1, true); }},
      {"eval.galleries",
       [](AssayConfig& c, const json& v, const std::string& k) { c.eval.galleries = static_cast<std::size_t>(int_in(v, k, 1, kBig)); }},
      {"eval.negatives",
       [](AssayConfig& c, const json& v, const std::string& k) { c.eval.negatives = static_cast<std::size_t>(int_in(v, k, 1, 1 << 14)); }},
  };
  return table;
}

}  // namespace

AssayConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  AssayConfig cfg;
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(cfg, value, key);
  }
  if (cfg.crop.split_row >= cfg.crop.full_h) throw ConfigError("crop.split_row must lie inside crop.full_h");
  if (cfg.crop.anchor_x > cfg.crop.full_w || cfg.crop.anchor_y > cfg.crop.full_h) {
    throw ConfigError("crop anchor must lie inside the crop window");
  }
  try {
    cfg.train.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

std::string write_config(const AssayConfig& c) {
  ordered_json j;
  if (c.flower.threshold.otsu) {
    j["flower.threshold"] = "otsu";
  } else {
    j["flower.threshold"] = c.flower.threshold.fixed;
  }
  j["flower.min_area_px2"] = c.flower.min_area_px2;
  j["flower.aspect_tol"] = c.flower.aspect_tol;
  j["flower.fill_min"] = c.flower.fill_min;
  j["flower.well_fraction"] = c.flower.well_fraction;
  j["flower.well_offset_x"] = c.flower.well_offset_x;
  j["flower.well_offset_y"] = c.flower.well_offset_y;
  j["flower.manual"] = ordered_json::array();
  for (const auto& m : c.flower.manual) {
    ordered_json f{{"id", m.id}, {"cx", m.cx}, {"cy", m.cy}, {"well_radius", m.well_radius}};
    if (m.side) f["side"] = *m.side;
    j["flower.manual"].push_back(f);
  }
  j["track.gate_px"] = c.track.gate_px;
  j["track.max_gap_frames"] = c.track.max_gap_frames;
  if (c.visit.r_visit_px) j["visit.r_visit_px"] = *c.visit.r_visit_px;
  j["visit.r_visit_well_multiple"] = c.visit.r_visit_well_multiple;
  if (c.visit.well_radius_px) j["visit.well_radius_px"] = *c.visit.well_radius_px;
  j["visit.gap_max_frames"] = c.visit.gap_max_frames;
  j["visit.min_len_frames"] = c.visit.min_len_frames;
  j["visit.overlap_min_frames"] = c.visit.overlap_min_frames;
  j["crop.full_w"] = c.crop.full_w;
  j["crop.full_h"] = c.crop.full_h;
  j["crop.anchor_x"] = c.crop.anchor_x;
  j["crop.anchor_y"] = c.crop.anchor_y;
  j["crop.split_row"] = c.crop.split_row;
  j["crop.unaligned_side"] = c.crop.unaligned_side;
  j["train.margin"] = c.train.margin;
  j["train.learning_rate"] = c.train.learning_rate;
  j["train.max_epochs"] = c.train.max_epochs;
  j["train.patience"] = c.train.patience;
  j["train.dropout_in"] = c.train.dropout_in;
  j["train.dropout_out"] = c.train.dropout_out;
  j["train.batch_ids"] = c.train.batch_ids;
  j["train.images_per_id"] = c.train.images_per_id;
  j["train.val_frac"] = c.train.val_frac;
  j["train.embedding_dim"] = c.train.embedding_dim;
  j["train.downsample"] = c.feature_downsample;
  j["split.train_frac"] = c.split.train_frac;
  j["split.id_frac"] = c.split.id_frac;
  j["split.ref_frac"] = c.split.ref_frac;
  j["eval.galleries"] = c.eval.galleries;
  j["eval.negatives"] = c.eval.negatives;
  return j.dump(2) + "\n";
}

}  // namespace patchpipe

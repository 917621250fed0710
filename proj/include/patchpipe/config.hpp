#pragma once

#include <string>
#include <string_view>

#include "patchpipe/crop_align.hpp"
#include "patchpipe/embedding.hpp"
#include "patchpipe/flower_geometry.hpp"
#include "patchpipe/tracking.hpp"
#include "patchpipe/visit_detection.hpp"

namespace patchpipe {

/// Out-of-range or unknown configuration entry.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct SplitParams {
  double train_frac = 0.70;
  double id_frac = 0.60;
  double ref_frac = 0.25;
};

struct EvalParams {
  std::size_t galleries = 10000;
  std::size_t negatives = 9;
};

/// Every tunable of the toolkit. Keys are flat and dotted, e.g. "visit.gap_max_frames".
struct AssayConfig {
  FlowerParams flower;
  TrackerParams track;
  VisitParams visit;
  CropGeometry crop;
  TrainConfig train;
  int feature_downsample = 5;
  SplitParams split;
  EvalParams eval;
};

AssayConfig parse_config(std::string_view json_text);
std::string write_config(const AssayConfig& cfg);

}  // namespace patchpipe

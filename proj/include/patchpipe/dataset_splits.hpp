#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "patchpipe/io_formats.hpp"

namespace patchpipe {

enum class SplitMode { closed, open };

struct SplitSpec {
  SplitMode mode = SplitMode::closed;
  std::set<std::string> train;
  std::set<std::string> test;
  std::set<std::string> reference;  // open mode only
  std::set<std::string> query;      // open mode only
  std::uint64_t seed = 0;
};

/// Drops tracks with fewer than `min_track_images` images, then ids with
/// fewer than `min_id_tracks` tracks, until neither rule removes anything.
std::vector<DatasetRecord> filter_dataset(std::span<const DatasetRecord> records, std::size_t min_track_images = 4,
                                          std::size_t min_id_tracks = 2);

/// Per id: whole tracks ordered by earliest time; the first
/// clamp(round(train_frac * T), 1, T-1) go to train.
SplitSpec closed_split(std::span<const DatasetRecord> records, double train_frac = 0.70);

/// Seeded id partition; per test id, the earliest max(1, round(ref_frac * T))
/// tracks become reference and the rest query.
SplitSpec open_split(std::span<const DatasetRecord> records, double id_frac = 0.60, double ref_frac = 0.25,
                     std::uint64_t seed = 0);

/// Records whose image ref belongs to `subset`, in input order.
std::vector<DatasetRecord> select(std::span<const DatasetRecord> records, const std::set<std::string>& subset);

}  // namespace patchpipe

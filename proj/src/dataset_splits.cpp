#include "patchpipe/dataset_splits.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <tuple>

namespace patchpipe {

namespace {

struct TrackGroup {
  std::int64_t track_id;
  std::int64_t first_time;
  std::vector<const DatasetRecord*> images;
};

// id -> tracks sorted by (earliest time, track id)
std::map<std::string, std::vector<TrackGroup>> group_by_id(std::span<const DatasetRecord> records) {
  std::map<std::string, std::map<std::int64_t, TrackGroup>> tmp;
  for (const auto& r : records) {
    auto [it, inserted] = tmp[r.id_label].try_emplace(r.track_id, TrackGroup{r.track_id, r.time_key, {}});
    it->second.first_time = std::min(it->second.first_time, r.time_key);
    it->second.images.push_back(&r);
  }
  std::map<std::string, std::vector<TrackGroup>> out;
  for (auto& [id, tracks] : tmp) {
    auto& v = out[id];
    for (auto& [tid, g] : tracks) v.push_back(std::move(g));
    std::sort(v.begin(), v.end(), [](const TrackGroup& a, const TrackGroup& b) {
      return std::tie(a.first_time, a.track_id) < std::tie(b.first_time, b.track_id);
    });
  }
  return out;
}

std::size_t clamped_count(double frac, std::size_t total, std::size_t lo) {
  const long raw = round_half_up(frac * static_cast<double>(total));
  const long hi = static_cast<long>(total) - 1;
  return static_cast<std::size_t>(std::clamp<long>(raw, static_cast<long>(lo), std::max<long>(hi, static_cast<long>(lo))));
}

void add_track(std::set<std::string>& dst, const TrackGroup& g) {
  for (const auto* r : g.images) dst.insert(r->image_ref);
}

}  // namespace

std::vector<DatasetRecord> filter_dataset(std::span<const DatasetRecord> records, std::size_t min_track_images,
                                          std::size_t min_id_tracks) {
  std::vector<DatasetRecord> current(records.begin(), records.end());
  while (true) {
    const std::size_t before = current.size();
    std::map<std::pair<std::string, std::int64_t>, std::size_t> track_size;
    for (const auto& r : current) ++track_size[{r.id_label, r.track_id}];
    std::erase_if(current, [&](const DatasetRecord& r) { return track_size[{r.id_label, r.track_id}] < min_track_images; });

    std::map<std::string, std::set<std::int64_t>> id_tracks;
    for (const auto& r : current) id_tracks[r.id_label].insert(r.track_id);
    std::erase_if(current, [&](const DatasetRecord& r) { return id_tracks[r.id_label].size() < min_id_tracks; });
    if (current.size() == before) return current;
  }
}

SplitSpec closed_split(std::span<const DatasetRecord> records, double train_frac) {
  SplitSpec s;
  s.mode = SplitMode::closed;
  for (const auto& [id, tracks] : group_by_id(records)) {
    if (tracks.size() < 2) throw Error("id '" + id + "' has fewer than 2 tracks; closed split impossible");
    const std::size_t n_train = clamped_count(train_frac, tracks.size(), 1);
    for (std::size_t i = 0; i < tracks.size(); ++i) add_track(i < n_train ? s.train : s.test, tracks[i]);
  }
  return s;
}

SplitSpec open_split(std::span<const DatasetRecord> records, double id_frac, double ref_frac, std::uint64_t seed) {
  SplitSpec s;
  s.mode = SplitMode::open;
  s.seed = seed;
  auto groups = group_by_id(records);
  if (groups.size() < 2) throw Error("open split needs at least 2 ids");

  std::vector<std::string> ids;
  for (const auto& [id, _] : groups) ids.push_back(id);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::size_t n_train = clamped_count(id_frac, ids.size(), 1);

  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& tracks = groups[ids[i]];
    if (i < n_train) {
      for (const auto& g : tracks) add_track(s.train, g);
      continue;
    }
    const std::size_t n_ref = clamped_count(ref_frac, tracks.size(), 1);
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      add_track(s.test, tracks[t]);
      add_track(t < n_ref ? s.reference : s.query, tracks[t]);
    }
  }
  return s;
}

std::vector<DatasetRecord> select(std::span<const DatasetRecord> records, const std::set<std::string>& subset) {
  std::vector<DatasetRecord> out;
  for (const auto& r : records) {
    if (subset.count(r.image_ref)) out.push_back(r);
  }
  return out;
}

}  // namespace patchpipe

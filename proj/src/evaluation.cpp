#include "patchpipe/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <sstream>
#include <tuple>

namespace patchpipe {

namespace {

struct Pool {
  std::vector<const DatasetRecord*> images;
  std::map<std::string, std::vector<const DatasetRecord*>> by_id;
};

Pool make_pool(std::span<const DatasetRecord> records, const std::set<std::string>& members) {
  Pool p;
  for (const auto& r : records) {
    if (!members.count(r.image_ref)) continue;
    p.images.push_back(&r);
    p.by_id[r.id_label].push_back(&r);
  }
  return p;
}

const EmbeddingVector& lookup(const EmbeddingTable& t, const std::string& ref) {
  auto it = t.find(ref);
  if (it == t.end()) throw Error("missing embedding for image '" + ref + "'");
  return it->second;
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

}  // namespace

GallerySet sample_galleries(std::span<const DatasetRecord> records, const SplitSpec& split, std::size_t n,
                            std::size_t n_neg, std::uint64_t seed) {
  const bool closed = split.mode == SplitMode::closed;
  const Pool anchors = make_pool(records, closed ? split.test : split.query);
  const Pool gallery = make_pool(records, closed ? split.train : split.reference);
  GallerySet out;
  if (n == 0) return out;
  if (anchors.images.empty()) throw Error("gallery sampling: anchor pool is empty");
  for (const auto& [id, _] : anchors.by_id) {
    if (!gallery.by_id.count(id)) throw Error("gallery sampling: anchor id '" + id + "' absent from the positive pool");
  }

  std::mt19937_64 rng(seed);
  out.trials.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    GalleryTrial trial;
    const DatasetRecord* anchor = pick(anchors.images, rng);
    trial.anchor = anchor->image_ref;
    trial.positive = pick(gallery.by_id.at(anchor->id_label), rng)->image_ref;

    std::vector<const std::string*> other_ids;
    for (const auto& [id, _] : gallery.by_id) {
      if (id != anchor->id_label) other_ids.push_back(&id);
    }
    if (other_ids.size() >= n_neg) {
      for (std::size_t k = 0; k < n_neg; ++k) {
        std::uniform_int_distribution<std::size_t> d(k, other_ids.size() - 1);
        std::swap(other_ids[k], other_ids[d(rng)]);
        trial.negatives.push_back(pick(gallery.by_id.at(*other_ids[k]), rng)->image_ref);
      }
    } else {
      out.repeated_negative_ids = true;
      std::vector<const DatasetRecord*> candidates;
      for (const auto* r : gallery.images) {
        if (r->id_label != anchor->id_label) candidates.push_back(r);
      }
      if (candidates.size() < n_neg) throw Error("gallery sampling: not enough negative images");
      for (std::size_t k = 0; k < n_neg; ++k) {
        std::uniform_int_distribution<std::size_t> d(k, candidates.size() - 1);
        std::swap(candidates[k], candidates[d(rng)]);
        trial.negatives.push_back(candidates[k]->image_ref);
      }
    }
    out.trials.push_back(std::move(trial));
  }
  return out;
}

std::map<int, double> cmc(std::span<const GalleryTrial> trials, const EmbeddingTable& embeddings,
                          std::span<const int> ranks) {
  std::map<int, std::size_t> hits;
  for (int r : ranks) hits[r] = 0;
  std::vector<std::pair<double, const std::string*>> scored;
  for (const auto& trial : trials) {
    const auto& a = lookup(embeddings, trial.anchor);
    scored.clear();
    scored.emplace_back(euclidean_distance(a, lookup(embeddings, trial.positive)), &trial.positive);
    for (const auto& neg : trial.negatives) scored.emplace_back(euclidean_distance(a, lookup(embeddings, neg)), &neg);
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
      return x.first != y.first ? x.first < y.first : *x.second < *y.second;
    });
    const auto pos = std::find_if(scored.begin(), scored.end(), [&](const auto& s) { return s.second == &trial.positive; });
    const int rank = static_cast<int>(pos - scored.begin()) + 1;
    for (auto& [r, count] : hits) {
      if (rank <= r) ++count;
    }
  }
  std::map<int, double> out;
  for (const auto& [r, count] : hits) {
    out[r] = trials.empty() ? 0.0 : static_cast<double>(count) / static_cast<double>(trials.size());
  }
  return out;
}

double knn_eval(std::span<const DatasetRecord> reference, std::span<const DatasetRecord> query,
                const EmbeddingTable& embeddings, int k) {
  if (reference.empty()) throw Error("kNN needs a non-empty reference set");
  if (k < 1 || static_cast<std::size_t>(k) > reference.size()) {
    throw Error("kNN k=" + std::to_string(k) + " exceeds reference size " + std::to_string(reference.size()));
  }
  if (query.empty()) return 0.0;
  std::vector<const EmbeddingVector*> ref_vec;
  for (const auto& r : reference) ref_vec.push_back(&lookup(embeddings, r.image_ref));

  std::size_t correct = 0;
  std::vector<std::pair<double, std::size_t>> dist(reference.size());
  for (const auto& q : query) {
    const auto& qv = lookup(embeddings, q.image_ref);
    for (std::size_t i = 0; i < reference.size(); ++i) dist[i] = {euclidean_distance(qv, *ref_vec[i]), i};
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end(), [&](const auto& x, const auto& y) {
      return x.first != y.first ? x.first < y.first : reference[x.second].image_ref < reference[y.second].image_ref;
    });
    // Votes in neighbour order; the first label reaching the top count is the nearest among tied classes.
    std::map<std::string, int> votes;
    for (int i = 0; i < k; ++i) ++votes[reference[dist[i].second].id_label];
    int top = 0;
    for (const auto& [_, v] : votes) top = std::max(top, v);
    std::string predicted;
    for (int i = 0; i < k; ++i) {
      const auto& label = reference[dist[i].second].id_label;
      if (votes[label] == top) {
        predicted = label;
        break;
      }
    }
    if (predicted == q.id_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(query.size());
}

// ---------------------------------------------------------------------------
// report

namespace {

std::string cell(const std::optional<SettingScores>& s, double SettingScores::*field) {
  if (!s) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", (*s).*field);
  return buf;
}

std::string csv_cell(const std::optional<SettingScores>& s, double SettingScores::*field) {
  return s ? format_real((*s).*field) : std::string();
}

constexpr double SettingScores::*kFields[4] = {&SettingScores::top1, &SettingScores::top3, &SettingScores::knn1,
                                                &SettingScores::knn3};

}  // namespace

EvalReport build_report(std::span<const EvalResult> results) {
  EvalReport rep;
  for (const auto& r : results) {
    auto it = std::find_if(rep.rows.begin(), rep.rows.end(),
                           [&](const ReportRow& row) { return row.features == r.features && row.variant == r.variant; });
    if (it == rep.rows.end()) {
      rep.rows.push_back({r.features, r.variant, std::nullopt, std::nullopt});
      it = std::prev(rep.rows.end());
    }
    (r.setting == SplitMode::closed ? it->closed : it->open) = r.scores;
  }

  std::ostringstream t;
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %-10s | %-31s | %-31s\n", "", "", "Closed Set Setting", "Open Set Setting");
  t << line;
  std::snprintf(line, sizeof(line), "%-10s %-10s | %7s %7s %7s %7s | %7s %7s %7s %7s\n", "Features", "Input", "Top-1",
                "Top-3", "1NN", "3NN", "Top-1", "Top-3", "1NN", "3NN");
  t << line;
  for (const auto& row : rep.rows) {
    std::snprintf(line, sizeof(line), "%-10s %-10s |", row.features.c_str(), row.variant.c_str());
    t << line;
    for (const auto* side : {&row.closed, &row.open}) {
      for (auto f : kFields) {
        std::snprintf(line, sizeof(line), " %7s", cell(*side, f).c_str());
        t << line;
      }
      t << (side == &row.closed ? " |" : "\n");
    }
  }
  rep.table = t.str();

  std::string csv = "features,variant,closed_top1,closed_top3,closed_1nn,closed_3nn,open_top1,open_top3,open_1nn,open_3nn\n";
  for (const auto& row : rep.rows) {
    csv += row.features + "," + row.variant;
    for (auto f : kFields) csv += "," + csv_cell(row.closed, f);
    for (auto f : kFields) csv += "," + csv_cell(row.open, f);
    csv += "\n";
  }
  rep.csv = std::move(csv);
  return rep;
}

std::vector<ReportRow> parse_report_csv(std::string_view csv) {
  std::vector<ReportRow> rows;
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line.rfind("features,variant,", 0) != 0) throw ParseError("bad report header", 1);
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 10) throw ParseError("expected 10 report columns", line_no);
    ReportRow row{f[0], f[1], std::nullopt, std::nullopt};
    for (int side = 0; side < 2; ++side) {
      const std::size_t base = 2 + 4 * static_cast<std::size_t>(side);
      if (f[base].empty()) continue;
      SettingScores s;
      for (std::size_t k = 0; k < 4; ++k) s.*kFields[k] = parse_real(f[base + k]);
      (side == 0 ? row.closed : row.open) = s;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace patchpipe

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "patchpipe/dataset_splits.hpp"
#include "patchpipe/io_formats.hpp"

namespace patchpipe {

struct GalleryTrial {
  std::string anchor;
  std::string positive;
  std::vector<std::string> negatives;
};

struct GallerySet {
  std::vector<GalleryTrial> trials;
  /// Set when fewer than n_neg distinct negative ids existed for some trial.
  bool repeated_negative_ids = false;
};

/// Closed split: anchors from test, gallery from train. Open split: anchors
/// from query, gallery from reference. Negatives come from distinct ids
/// whenever enough ids exist.
GallerySet sample_galleries(std::span<const DatasetRecord> records, const SplitSpec& split, std::size_t n = 10000,
                            std::size_t n_neg = 9, std::uint64_t seed = 0);

/// Fraction of trials whose positive ranks within r (distance ascending,
/// ties by image ref) for each requested r.
std::map<int, double> cmc(std::span<const GalleryTrial> trials, const EmbeddingTable& embeddings,
                          std::span<const int> ranks);

/// Image-level kNN accuracy with unweighted majority vote; vote ties go to
/// the class with the nearest member.
double knn_eval(std::span<const DatasetRecord> reference, std::span<const DatasetRecord> query,
                const EmbeddingTable& embeddings, int k);

struct SettingScores {
  double top1 = 0.0;
  double top3 = 0.0;
  double knn1 = 0.0;
  double knn3 = 0.0;
  bool repeated_negative_ids = false;
};

struct EvalResult {
  std::string features;  // e.g. "PixPCA", "Triplet", "External"
  std::string variant;   // full | abdomen | thorax | unaligned
  SplitMode setting = SplitMode::closed;
  SettingScores scores;
};

struct ReportRow {
  std::string features;
  std::string variant;
  std::optional<SettingScores> closed;
  std::optional<SettingScores> open;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::string table;
  std::string csv;
};

EvalReport build_report(std::span<const EvalResult> results);
std::vector<ReportRow> parse_report_csv(std::string_view csv);

}  // namespace patchpipe

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "patchpipe/config.hpp"
#include "patchpipe/crop_align.hpp"
#include "patchpipe/dataset_splits.hpp"
#include "patchpipe/embedding.hpp"
#include "patchpipe/evaluation.hpp"

namespace patchpipe {

/// Run geometry of a crop variant.
FeatureSpec feature_spec_for(CropRegion region, const CropGeometry& geometry, int downsample);

using ImageLoader = std::function<ImageBuffer(const DatasetRecord&)>;

/// Reads `dir/<image_ref>` as PPM.
ImageLoader directory_loader(std::string dir);

/// One flattened feature row per record.
Eigen::MatrixXd feature_matrix(std::span<const DatasetRecord> records, const ImageLoader& load, const FeatureSpec& spec);

/// Labels are indices of sorted distinct id labels. With `rotation_augment`,
/// every draw rotates the source image by a uniform angle before flattening.
TrainingSet make_training_set(std::span<const DatasetRecord> records, Eigen::MatrixXd features, const FeatureSpec& spec);
TrainingSet make_training_set(std::span<const DatasetRecord> records, const ImageLoader& load, const FeatureSpec& spec,
                              bool rotation_augment);

EmbeddingTable embed_rows(const LinearEmbedder& model, std::span<const DatasetRecord> records,
                          const Eigen::MatrixXd& features);
EmbeddingTable embed_rows(const PCAModel& model, std::span<const DatasetRecord> records,
                          const Eigen::MatrixXd& features);

/// CMC top-1/top-3 over sampled galleries plus 1NN/3NN accuracy. Closed
/// setting: train is the gallery/reference side, test the anchors/queries.
SettingScores evaluate_setting(std::span<const DatasetRecord> records, const SplitSpec& split,
                               const EmbeddingTable& table, const EvalParams& params, std::uint64_t seed);

}  // namespace patchpipe

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "patchpipe/core.hpp"
#include "patchpipe/io_formats.hpp"

namespace patchpipe {

class TrainingError : public Error {
 public:
  using Error::Error;
};

class MissingEmbeddingError : public Error {
 public:
  using Error::Error;
};

/// Input geometry of one run. Images are box-averaged by `downsample`
/// before flattening, so dim() = (w/ds) * (h/ds) * channels.
struct FeatureSpec {
  int width = 150;
  int height = 200;
  int channels = 3;
  int downsample = 1;

  std::size_t dim() const;
  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

/// Row-major channel-interleaved flattening with samples scaled to [0,1].
Eigen::VectorXd image_to_feature(const ImageBuffer& img, const FeatureSpec& spec);

struct PCAModel {
  FeatureSpec feature;
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // k x D, orthonormal rows
  std::vector<double> explained_ratio;

  std::size_t k() const { return static_cast<std::size_t>(components.rows()); }
};

/// Rows of `samples` are observations. Keeps the fewest leading right-singular
/// vectors whose cumulative explained variance reaches var_target.
PCAModel fit_pca(const Eigen::MatrixXd& samples, double var_target = 0.95);
Eigen::VectorXd pca_embed(const PCAModel& model, const Eigen::VectorXd& feature);

struct TrainConfig {
  double margin = 0.2;
  double learning_rate = 0.001;
  int max_epochs = 1000;
  int patience = 100;
  double dropout_in = 0.5;
  double dropout_out = 0.2;
  int batch_ids = 8;
  int images_per_id = 4;
  double val_frac = 0.10;
  int embedding_dim = static_cast<int>(kEmbeddingDim);
  std::uint64_t seed = 0;

  void validate() const;
};

struct TripletLossResult {
  double loss = 0.0;
  std::size_t n_triplets = 0;  // selected (anchor, positive, negative) triplets
  std::size_t n_active = 0;    // selected triplets with positive hinge
  std::size_t n_semihard = 0;  // selected triplets whose negative was semi-hard
  Eigen::MatrixXd grad;        // d loss / d embeddings, when requested
};

/// Semi-hard batch triplet loss over all anchor-positive pairs. For each
/// pair the nearest negative inside (d_ap, d_ap + margin) is used; failing
/// that, the farthest negative with d_an <= d_ap; otherwise the pair is
/// skipped. Rows of `embeddings` are samples.
TripletLossResult triplet_loss(const Eigen::MatrixXd& embeddings, std::span<const int> labels, double margin,
                               bool with_grad = false);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct LinearEmbedder {
  FeatureSpec feature;
  /// Inputs are standardized as (x - input_mean) * input_scale before W.
  Eigen::VectorXd input_mean;  // empty means zero
  double input_scale = 1.0;
  Eigen::MatrixXd weights;  // E x D
  Eigen::VectorXd bias;     // E
  bool trained = false;
  TrainConfig config;
  std::vector<EpochLog> log;
  int best_epoch = 0;

  /// Inference path (no dropout); output has unit norm.
  EmbeddingVector embed_feature(const Eigen::VectorXd& feature) const;
};

/// Dropout masks for one batch; empty matrices mean "no dropout".
struct DropoutMasks {
  Eigen::MatrixXd input;   // B x D, entries 0 or 1/(1-p)
  Eigen::MatrixXd output;  // B x E
};

struct BatchGradient {
  TripletLossResult loss;
  Eigen::MatrixXd grad_weights;
  Eigen::VectorXd grad_bias;
};

/// Forward + exact backward of the training objective on one batch.
BatchGradient linear_triplet_gradient(const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias,
                                      const Eigen::MatrixXd& batch, std::span<const int> labels, double margin,
                                      const DropoutMasks& masks = {});

struct TrainingSet {
  FeatureSpec feature;
  Eigen::MatrixXd features;  // n x D
  std::vector<int> labels;
  std::vector<std::int64_t> tracks;
  /// Optional per-draw augmentation: writes a fresh feature for sample i.
  std::function<void(std::size_t, std::mt19937_64&, Eigen::Ref<Eigen::VectorXd>)> augment;
};

LinearEmbedder train_embedder(const TrainingSet& data, const TrainConfig& cfg);

EmbeddingVector embed(const LinearEmbedder& model, const ImageBuffer& img);
EmbeddingVector embed(const PCAModel& model, const ImageBuffer& img);
EmbeddingVector embed(const EmbeddingTable& table, const std::string& image_ref);

std::string save_embedder(const LinearEmbedder& model);
LinearEmbedder load_embedder(std::string_view json_text);
std::string save_pca(const PCAModel& model);
PCAModel load_pca(std::string_view json_text);

}  // namespace patchpipe

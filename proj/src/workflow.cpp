#include "patchpipe/workflow.hpp"

#include <map>
#include <memory>
#include <numbers>

namespace patchpipe {

FeatureSpec feature_spec_for(CropRegion region, const CropGeometry& geometry, int downsample) {
  const CropSpec crop = make_crop_spec(region, geometry);
  FeatureSpec f{crop.width, crop.height, 3, downsample};
  if (downsample < 1 || crop.width % downsample != 0 || crop.height % downsample != 0) {
    throw Error("downsample " + std::to_string(downsample) + " does not divide the " + std::string(to_string(region)) +
                " crop size " + std::to_string(crop.width) + "x" + std::to_string(crop.height));
  }
  return f;
}

ImageLoader directory_loader(std::string dir) {
  return [dir = std::move(dir)](const DatasetRecord& r) { return read_ppm_file(dir + "/" + r.image_ref); };
}

Eigen::MatrixXd feature_matrix(std::span<const DatasetRecord> records, const ImageLoader& load, const FeatureSpec& spec) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(spec.dim()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = image_to_feature(load(records[i]), spec).transpose();
  }
  return m;
}

TrainingSet make_training_set(std::span<const DatasetRecord> records, Eigen::MatrixXd features, const FeatureSpec& spec) {
  std::map<std::string, int> label_of;
  for (const auto& r : records) label_of.emplace(r.id_label, 0);
  int next = 0;
  for (auto& [_, v] : label_of) v = next++;
  TrainingSet t;
  t.feature = spec;
  t.features = std::move(features);
  for (const auto& r : records) {
    t.labels.push_back(label_of.at(r.id_label));
    t.tracks.push_back(r.track_id);
  }
  return t;
}

TrainingSet make_training_set(std::span<const DatasetRecord> records, const ImageLoader& load, const FeatureSpec& spec,
                              bool rotation_augment) {
  if (!rotation_augment) return make_training_set(records, feature_matrix(records, load, spec), spec);
  auto images = std::make_shared<std::vector<ImageBuffer>>();
  Eigen::MatrixXd features(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(spec.dim()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    images->push_back(load(records[i]));
    features.row(static_cast<Eigen::Index>(i)) = image_to_feature(images->back(), spec).transpose();
  }
  TrainingSet t = make_training_set(records, std::move(features), spec);
  t.augment = [images, spec](std::size_t i, std::mt19937_64& rng, Eigen::Ref<Eigen::VectorXd> out) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    out = image_to_feature(augment_rotation((*images)[i], angle(rng)), spec);
  };
  return t;
}

EmbeddingTable embed_rows(const LinearEmbedder& model, std::span<const DatasetRecord> records,
                          const Eigen::MatrixXd& features) {
  EmbeddingTable table;
  for (std::size_t i = 0; i < records.size(); ++i) {
    table[records[i].image_ref] = model.embed_feature(features.row(static_cast<Eigen::Index>(i)).transpose());
  }
  return table;
}

EmbeddingTable embed_rows(const PCAModel& model, std::span<const DatasetRecord> records, const Eigen::MatrixXd& features) {
  EmbeddingTable table;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Eigen::VectorXd v = pca_embed(model, features.row(static_cast<Eigen::Index>(i)).transpose());
    table[records[i].image_ref] = EmbeddingVector{std::vector<double>(v.data(), v.data() + v.size()), true};
  }
  return table;
}

SettingScores evaluate_setting(std::span<const DatasetRecord> records, const SplitSpec& split,
                               const EmbeddingTable& table, const EvalParams& params, std::uint64_t seed) {
  const bool closed = split.mode == SplitMode::closed;
  const GallerySet galleries = sample_galleries(records, split, params.galleries, params.negatives, seed);
  const int ranks[] = {1, 3};
  const auto c = cmc(galleries.trials, table, ranks);
  const auto reference = select(records, closed ? split.train : split.reference);
  const auto query = select(records, closed ? split.test : split.query);
  SettingScores s;
  s.top1 = c.at(1);
  s.top3 = c.at(3);
  s.knn1 = knn_eval(reference, query, table, 1);
  s.knn3 = knn_eval(reference, query, table, 3);
  s.repeated_negative_ids = galleries.repeated_negative_ids;
  return s;
}

}  // namespace patchpipe

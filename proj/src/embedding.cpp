#include "patchpipe/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>

namespace patchpipe {

using json = nlohmann::json;

std::size_t FeatureSpec::dim() const {
  if (downsample < 1) throw Error("feature downsample must be >= 1");
  return static_cast<std::size_t>(width / downsample) * static_cast<std::size_t>(height / downsample) *
         static_cast<std::size_t>(channels);
}

Eigen::VectorXd image_to_feature(const ImageBuffer& img, const FeatureSpec& spec) {
  if (img.width() != spec.width || img.height() != spec.height || img.channels() != spec.channels) {
    throw DimensionError("image " + std::to_string(img.width()) + "x" + std::to_string(img.height()) + "x" +
                         std::to_string(img.channels()) + " does not match run size " +
                         std::to_string(spec.width) + "x" + std::to_string(spec.height) + "x" +
                         std::to_string(spec.channels));
  }
  const int ds = spec.downsample;
  const int ow = spec.width / ds, oh = spec.height / ds, ch = spec.channels;
  Eigen::VectorXd out(spec.dim());
  const double scale = 1.0 / (255.0 * ds * ds);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int dy = 0; dy < ds; ++dy) {
          for (int dx = 0; dx < ds; ++dx) acc += img.at(x * ds + dx, y * ds + dy, c);
        }
        out[(static_cast<Eigen::Index>(y) * ow + x) * ch + c] = acc * scale;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// PCA

PCAModel fit_pca(const Eigen::MatrixXd& samples, double var_target) {
  if (samples.rows() < 2) throw Error("PCA needs at least 2 samples");
  if (!(var_target > 0.0 && var_target <= 1.0)) throw Error("PCA variance target must lie in (0,1]");
  PCAModel m;
  m.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - m.mean.transpose();
  const double total = centered.squaredNorm();
  if (!(total > 1e-12 * std::max(1.0, samples.squaredNorm()))) {
    throw Error("PCA input has zero variance (k = 0)");
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  std::size_t k = 0;
  double cumulative = 0.0;
  while (k < static_cast<std::size_t>(sv.size())) {
    const double ratio = sv[static_cast<Eigen::Index>(k)] * sv[static_cast<Eigen::Index>(k)] / total;
    m.explained_ratio.push_back(ratio);
    cumulative += ratio;
    ++k;
    if (cumulative >= var_target) break;
  }
  m.components = svd.matrixV().leftCols(static_cast<Eigen::Index>(k)).transpose();
  // Sign convention: the largest-magnitude entry of each component is positive.
  for (Eigen::Index r = 0; r < m.components.rows(); ++r) {
    Eigen::Index arg = 0;
    m.components.row(r).cwiseAbs().maxCoeff(&arg);
    if (m.components(r, arg) < 0) m.components.row(r) *= -1.0;
  }
  return m;
}

Eigen::VectorXd pca_embed(const PCAModel& model, const Eigen::VectorXd& feature) {
  if (feature.size() != model.mean.size()) {
    throw DimensionError("PCA input has " + std::to_string(feature.size()) + " dims, model expects " +
                         std::to_string(model.mean.size()));
  }
  return model.components * (feature - model.mean);
}

// ---------------------------------------------------------------------------
// triplet loss

void TrainConfig::validate() const {
  if (!(margin >= 0.0)) throw Error("margin must be non-negative");
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (max_epochs < 1 || patience < 1) throw Error("max_epochs and patience must be positive");
  if (!(dropout_in >= 0.0 && dropout_in < 1.0) || !(dropout_out >= 0.0 && dropout_out < 1.0)) {
    throw Error("dropout rates must lie in [0,1)");
  }
  if (batch_ids < 2 || images_per_id < 2) throw Error("batches need at least 2 ids and 2 images per id");
  if (!(val_frac >= 0.0 && val_frac < 1.0)) throw Error("val_frac must lie in [0,1)");
  if (embedding_dim < 1) throw Error("embedding_dim must be positive");
}

TripletLossResult triplet_loss(const Eigen::MatrixXd& embeddings, std::span<const int> labels, double margin,
                               bool with_grad) {
  const Eigen::Index m = embeddings.rows();
  if (static_cast<std::size_t>(m) != labels.size()) throw DimensionError("labels do not match embedding rows");
  {
    std::map<int, int> counts;
    for (int l : labels) ++counts[l];
    for (const auto& [l, c] : counts) {
      if (c < 2) throw Error("triplet batch has a singleton label " + std::to_string(l));
    }
  }
  Eigen::MatrixXd dist(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    dist(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      dist(i, j) = dist(j, i) = (embeddings.row(i) - embeddings.row(j)).norm();
    }
  }

  TripletLossResult r;
  if (with_grad) r.grad = Eigen::MatrixXd::Zero(m, embeddings.cols());
  double total = 0.0;
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index p = 0; p < m; ++p) {
      if (p == a || labels[a] != labels[p]) continue;
      const double d_ap = dist(a, p);
      Eigen::Index semi = -1, viol = -1;
      for (Eigen::Index n = 0; n < m; ++n) {
        if (labels[n] == labels[a]) continue;
        const double d_an = dist(a, n);
        if (d_an > d_ap && d_an < d_ap + margin) {
          if (semi < 0 || d_an < dist(a, semi)) semi = n;
        } else if (d_an <= d_ap) {
          if (viol < 0 || d_an > dist(a, viol)) viol = n;
        }
      }
      const Eigen::Index n = semi >= 0 ? semi : viol;
      if (n < 0) continue;
      ++r.n_triplets;
      if (semi >= 0) ++r.n_semihard;
      const double hinge = d_ap - dist(a, n) + margin;
      if (hinge <= 0.0) continue;
      ++r.n_active;
      total += hinge;
      if (with_grad) {
        if (d_ap > 0.0) {
          const Eigen::RowVectorXd u = (embeddings.row(a) - embeddings.row(p)) / d_ap;
          r.grad.row(a) += u;
          r.grad.row(p) -= u;
        }
        if (dist(a, n) > 0.0) {
          const Eigen::RowVectorXd v = (embeddings.row(a) - embeddings.row(n)) / dist(a, n);
          r.grad.row(a) -= v;
          r.grad.row(n) += v;
        }
      }
    }
  }
  if (r.n_triplets > 0) {
    r.loss = total / static_cast<double>(r.n_triplets);
    if (with_grad) r.grad /= static_cast<double>(r.n_triplets);
  }
  return r;
}

// ---------------------------------------------------------------------------
// linear embedder

namespace {

constexpr double kNormFloor = 1e-12;

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& z, Eigen::VectorXd& norms) {
  norms = z.rowwise().norm().cwiseMax(kNormFloor);
  return norms.cwiseInverse().asDiagonal() * z;
}

Eigen::MatrixXd embed_rows(const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = x * weights.transpose();
  z.rowwise() += bias.transpose();
  Eigen::VectorXd norms;
  return normalize_rows(z, norms);
}

}  // namespace

EmbeddingVector LinearEmbedder::embed_feature(const Eigen::VectorXd& feature) const {
  if (feature.size() != weights.cols()) {
    throw DimensionError("embedder input has " + std::to_string(feature.size()) + " dims, expected " +
                         std::to_string(weights.cols()));
  }
  Eigen::VectorXd z = input_mean.size() ? Eigen::VectorXd(weights * ((feature - input_mean) * input_scale) + bias)
                                         : Eigen::VectorXd(weights * (feature * input_scale) + bias);
  z /= std::max(z.norm(), kNormFloor);
  return EmbeddingVector{std::vector<double>(z.data(), z.data() + z.size()), false};
}

BatchGradient linear_triplet_gradient(const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias,
                                      const Eigen::MatrixXd& batch, std::span<const int> labels, double margin,
                                      const DropoutMasks& masks) {
  const Eigen::MatrixXd x = masks.input.size() ? Eigen::MatrixXd(batch.cwiseProduct(masks.input)) : batch;
  Eigen::MatrixXd z = x * weights.transpose();
  z.rowwise() += bias.transpose();
  if (masks.output.size()) z = z.cwiseProduct(masks.output);
  Eigen::VectorXd norms;
  const Eigen::MatrixXd y = normalize_rows(z, norms);

  BatchGradient g;
  g.loss = triplet_loss(y, labels, margin, true);
  const Eigen::MatrixXd& gy = g.loss.grad;
  // d/dz of z/|z| applied to gy: (gy - y (y . gy)) / |z|
  const Eigen::VectorXd radial = y.cwiseProduct(gy).rowwise().sum();
  Eigen::MatrixXd gz = norms.cwiseInverse().asDiagonal() * (gy - radial.asDiagonal() * y);
  if (masks.output.size()) gz = gz.cwiseProduct(masks.output);
  g.grad_weights = gz.transpose() * x;
  g.grad_bias = gz.colwise().sum().transpose();
  return g;
}

namespace {

struct Adam {
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;
  Eigen::MatrixXd mw, vw;
  Eigen::VectorXd mb, vb;

  Adam(double learning_rate, Eigen::Index rows, Eigen::Index cols)
      : lr(learning_rate),
        mw(Eigen::MatrixXd::Zero(rows, cols)),
        vw(Eigen::MatrixXd::Zero(rows, cols)),
        mb(Eigen::VectorXd::Zero(rows)),
        vb(Eigen::VectorXd::Zero(rows)) {}

  void step(Eigen::MatrixXd& w, Eigen::VectorXd& b, const Eigen::MatrixXd& gw, const Eigen::VectorXd& gb) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    mw = beta1 * mw + (1 - beta1) * gw;
    vw = beta2 * vw + (1 - beta2) * gw.cwiseAbs2();
    mb = beta1 * mb + (1 - beta1) * gb;
    vb = beta2 * vb + (1 - beta2) * gb.cwiseAbs2();
    w.array() -= lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);
    b.array() -= lr * (mb.array() / c1) / ((vb.array() / c2).sqrt() + eps);
  }
};

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return {};
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = keep(rng) ? scale : 0.0;
  }
  return m;
}

}  // namespace

LinearEmbedder train_embedder(const TrainingSet& data, const TrainConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = data.features.rows();
  const Eigen::Index dim = data.features.cols();
  if (static_cast<std::size_t>(n) != data.labels.size() || data.labels.size() != data.tracks.size()) {
    throw DimensionError("training labels/tracks do not match feature rows");
  }
  std::mt19937_64 rng(cfg.seed);

  // Whole-track validation hold-out, per label.
  std::map<int, std::map<std::int64_t, std::vector<Eigen::Index>>> by_label;
  for (Eigen::Index i = 0; i < n; ++i) by_label[data.labels[i]][data.tracks[i]].push_back(i);
  std::map<int, std::vector<Eigen::Index>> train_idx;
  std::vector<Eigen::Index> val_idx;
  for (auto& [label, tracks] : by_label) {
    std::vector<std::int64_t> ids;
    for (const auto& [t, _] : tracks) ids.push_back(t);
    std::shuffle(ids.begin(), ids.end(), rng);
    const long want = round_half_up(cfg.val_frac * static_cast<double>(ids.size()));
    const std::size_t n_val = static_cast<std::size_t>(std::clamp<long>(want, 0, static_cast<long>(ids.size()) - 1));
    for (std::size_t k = 0; k < ids.size(); ++k) {
      auto& dst = k < n_val ? val_idx : train_idx[label];
      const auto& members = tracks[ids[k]];
      dst.insert(dst.end(), members.begin(), members.end());
    }
  }
  std::vector<int> eligible;
  for (auto& [label, idx] : train_idx) {
    std::sort(idx.begin(), idx.end());
    if (idx.size() >= 2) eligible.push_back(label);
  }
  if (eligible.size() < 2) throw TrainingError("training needs at least 2 ids with 2 or more images");

  // Validation labels must appear at least twice.
  std::sort(val_idx.begin(), val_idx.end());
  {
    std::map<int, int> counts;
    for (auto i : val_idx) ++counts[data.labels[i]];
    std::erase_if(val_idx, [&](Eigen::Index i) { return counts[data.labels[i]] < 2; });
    std::set<int> distinct;
    for (auto i : val_idx) distinct.insert(data.labels[i]);
    if (distinct.size() < 2) val_idx.clear();
  }
  LinearEmbedder model;
  model.feature = data.feature;
  model.config = cfg;

  // Standardize with statistics of the rows used for gradient steps.
  {
    model.input_mean = Eigen::VectorXd::Zero(dim);
    std::size_t count = 0;
    for (const auto& [_, idx] : train_idx) {
      for (auto i : idx) model.input_mean += data.features.row(i).transpose();
      count += idx.size();
    }
    model.input_mean /= static_cast<double>(count);
    double ss = 0.0;
    for (const auto& [_, idx] : train_idx) {
      for (auto i : idx) ss += (data.features.row(i).transpose() - model.input_mean).squaredNorm();
    }
    const double rms = std::sqrt(ss / (static_cast<double>(count) * static_cast<double>(dim)));
    model.input_scale = rms > 0.0 ? 1.0 / rms : 1.0;
  }
  const Eigen::RowVectorXd mean_row = model.input_mean.transpose();
  const double scale = model.input_scale;

  Eigen::MatrixXd val_x(static_cast<Eigen::Index>(val_idx.size()), dim);
  std::vector<int> val_labels;
  for (std::size_t k = 0; k < val_idx.size(); ++k) {
    val_x.row(static_cast<Eigen::Index>(k)) = (data.features.row(val_idx[k]) - mean_row) * scale;
    val_labels.push_back(data.labels[val_idx[k]]);
  }
  const Eigen::Index out_dim = cfg.embedding_dim;
  {
    std::normal_distribution<double> init(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    model.weights.resize(out_dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      for (Eigen::Index i = 0; i < out_dim; ++i) model.weights(i, j) = init(rng);
    }
    model.bias = Eigen::VectorXd::Zero(out_dim);
  }
  Adam adam(cfg.learning_rate, out_dim, dim);

  Eigen::MatrixXd best_w = model.weights;
  Eigen::VectorXd best_b = model.bias;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<int> order = eligible;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<int>> chunks;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg.batch_ids)) {
      chunks.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + cfg.batch_ids)));
    }
    if (chunks.size() > 1 && chunks.back().size() < 2) {
      chunks[chunks.size() - 2].push_back(chunks.back().front());
      chunks.pop_back();
    }

    double epoch_loss = 0.0;
    for (const auto& chunk : chunks) {
      std::vector<Eigen::Index> rows;
      std::vector<int> labels;
      for (int label : chunk) {
        std::vector<Eigen::Index> pool = train_idx[label];
        const std::size_t take = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(cfg.images_per_id));
        for (std::size_t k = 0; k < take; ++k) {
          std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
          std::swap(pool[k], pool[pick(rng)]);
          rows.push_back(pool[k]);
          labels.push_back(label);
        }
      }
      Eigen::MatrixXd batch(static_cast<Eigen::Index>(rows.size()), dim);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (data.augment) {
          Eigen::VectorXd v(dim);
          data.augment(static_cast<std::size_t>(rows[r]), rng, v);
          batch.row(static_cast<Eigen::Index>(r)) = (v.transpose() - mean_row) * scale;
        } else {
          batch.row(static_cast<Eigen::Index>(r)) = (data.features.row(rows[r]) - mean_row) * scale;
        }
      }
      DropoutMasks masks;
      masks.input = dropout_mask(batch.rows(), dim, cfg.dropout_in, rng);
      masks.output = dropout_mask(batch.rows(), out_dim, cfg.dropout_out, rng);
      const BatchGradient g = linear_triplet_gradient(model.weights, model.bias, batch, labels, cfg.margin, masks);
      if (!std::isfinite(g.loss.loss) || !g.grad_weights.allFinite()) {
        throw TrainingError("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
      }
      adam.step(model.weights, model.bias, g.grad_weights, g.grad_bias);
      epoch_loss += g.loss.loss;
    }
    epoch_loss /= static_cast<double>(chunks.size());

    double monitored = epoch_loss;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    if (!val_idx.empty()) {
      val_loss = triplet_loss(embed_rows(model.weights, model.bias, val_x), val_labels, cfg.margin).loss;
      monitored = val_loss;
    }
    if (!std::isfinite(monitored)) {
      throw TrainingError("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
    }
    model.log.push_back({epoch, epoch_loss, val_loss});
    if (monitored < best) {
      best = monitored;
      best_w = model.weights;
      best_b = model.bias;
      model.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  model.weights = std::move(best_w);
  model.bias = std::move(best_b);
  model.trained = true;
  return model;
}

// ---------------------------------------------------------------------------
// embed

EmbeddingVector embed(const LinearEmbedder& model, const ImageBuffer& img) {
  return model.embed_feature(image_to_feature(img, model.feature));
}

EmbeddingVector embed(const PCAModel& model, const ImageBuffer& img) {
  const Eigen::VectorXd v = pca_embed(model, image_to_feature(img, model.feature));
  return EmbeddingVector{std::vector<double>(v.data(), v.data() + v.size()), true};
}

EmbeddingVector embed(const EmbeddingTable& table, const std::string& image_ref) {
  auto it = table.find(image_ref);
  if (it == table.end()) throw MissingEmbeddingError("no embedding for image '" + image_ref + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// persistence

namespace {

json feature_json(const FeatureSpec& f) {
  return {{"width", f.width}, {"height", f.height}, {"channels", f.channels}, {"downsample", f.downsample}};
}

FeatureSpec feature_from(const json& j) {
  return {j.at("width").get<int>(), j.at("height").get<int>(), j.at("channels").get<int>(),
          j.at("downsample").get<int>()};
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error("model matrix row has wrong length");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <typename F>
auto parse_model(std::string_view text, const char* kind, F&& f) {
  try {
    return f(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(std::string("invalid ") + kind + " model file: " + e.what());
  }
}

}  // namespace

std::string save_embedder(const LinearEmbedder& model) {
  const auto& c = model.config;
  json j;
  j["type"] = "linear_triplet";
  j["feature"] = feature_json(model.feature);
  j["trained"] = model.trained;
  j["best_epoch"] = model.best_epoch;
  j["config"] = {{"margin", c.margin},         {"learning_rate", c.learning_rate}, {"max_epochs", c.max_epochs},
                 {"patience", c.patience},     {"dropout_in", c.dropout_in},       {"dropout_out", c.dropout_out},
                 {"batch_ids", c.batch_ids},   {"images_per_id", c.images_per_id}, {"val_frac", c.val_frac},
                 {"embedding_dim", c.embedding_dim}, {"seed", c.seed}};
  json log = json::array();
  for (const auto& e : model.log) {
    log.push_back({e.epoch, e.train_loss, std::isfinite(e.val_loss) ? json(e.val_loss) : json(nullptr)});
  }
  j["log"] = std::move(log);
  j["input_mean"] = vector_json(model.input_mean);
  j["input_scale"] = model.input_scale;
  j["bias"] = vector_json(model.bias);
  j["weights"] = matrix_json(model.weights);
  return j.dump();
}

LinearEmbedder load_embedder(std::string_view text) {
  return parse_model(text, "embedder", [](const json& j) {
    if (j.at("type") != "linear_triplet") throw Error("not a linear embedder model");
    LinearEmbedder m;
    m.feature = feature_from(j.at("feature"));
    m.trained = j.at("trained").get<bool>();
    m.best_epoch = j.value("best_epoch", 0);
    const auto& c = j.at("config");
    m.config.margin = c.at("margin").get<double>();
    m.config.learning_rate = c.at("learning_rate").get<double>();
    m.config.max_epochs = c.at("max_epochs").get<int>();
    m.config.patience = c.at("patience").get<int>();
    m.config.dropout_in = c.at("dropout_in").get<double>();
    m.config.dropout_out = c.at("dropout_out").get<double>();
    m.config.batch_ids = c.at("batch_ids").get<int>();
    m.config.images_per_id = c.at("images_per_id").get<int>();
    m.config.val_frac = c.at("val_frac").get<double>();
    m.config.embedding_dim = c.at("embedding_dim").get<int>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("log")) {
      m.log.push_back({e.at(0).get<int>(), e.at(1).get<double>(),
                       e.at(2).is_null() ? std::numeric_limits<double>::quiet_NaN() : e.at(2).get<double>()});
    }
    m.input_mean = vector_from(j.at("input_mean"));
    m.input_scale = j.at("input_scale").get<double>();
    m.bias = vector_from(j.at("bias"));
    m.weights = matrix_from(j.at("weights"), static_cast<Eigen::Index>(m.feature.dim()));
    if (m.input_mean.size() && m.input_mean.size() != m.weights.cols()) throw Error("embedder input mean has wrong size");
    if (m.weights.rows() != m.bias.size()) throw Error("embedder weights and bias disagree");
    return m;
  });
}

std::string save_pca(const PCAModel& model) {
  json j;
  j["type"] = "pixel_pca";
  j["feature"] = feature_json(model.feature);
  j["explained_ratio"] = model.explained_ratio;
  j["mean"] = vector_json(model.mean);
  j["components"] = matrix_json(model.components);
  return j.dump();
}

PCAModel load_pca(std::string_view text) {
  return parse_model(text, "PCA", [](const json& j) {
    if (j.at("type") != "pixel_pca") throw Error("not a PCA model");
    PCAModel m;
    m.feature = feature_from(j.at("feature"));
    m.explained_ratio = j.at("explained_ratio").get<std::vector<double>>();
    m.mean = vector_from(j.at("mean"));
    m.components = matrix_from(j.at("components"), m.mean.size());
    return m;
  });
}

}  // namespace patchpipe

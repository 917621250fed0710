#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "patchpipe/embedding.hpp"
#include "patchpipe/evaluation.hpp"

using namespace patchpipe;

TEST_CASE("triplet loss hand example: semi-hard negative") {
  // a at 0, p at 0.1, both negatives at 0.2.
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(4, 2);
  e(1, 0) = 0.1;
  e(2, 0) = 0.2;
  e(3, 0) = 0.2;
  const std::vector<int> labels{0, 0, 1, 1};
  const TripletLossResult r = triplet_loss(e, labels, 0.2);
  // (a,p): semi-hard at 0.2, hinge 0.1. (p,a): negatives at 0.1 <= d_ap, hinge 0.2.
  // Negative pairs: d_ap 0, semi-hard p at 0.1, hinge 0.1 each.
  CHECK(r.n_triplets == 4);
  CHECK(r.n_semihard == 3);
  CHECK(r.loss == doctest::Approx(0.5 / 4));

  Eigen::MatrixXd far = Eigen::MatrixXd::Zero(4, 2);
  far(2, 0) = far(3, 0) = 1.0;
  const TripletLossResult z = triplet_loss(far, labels, 0.2);
  CHECK(z.loss == 0.0);
  CHECK(z.n_active == 0);

  CHECK_THROWS(triplet_loss(e.topRows(3), std::vector<int>{0, 0, 1}, 0.2));
}

TEST_CASE("triplet loss equals the exhaustive oracle") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 4 + static_cast<int>(rng() % 29);
    std::vector<int> labels;
    for (int i = 0; i + 1 < m; i += 2) labels.insert(labels.end(), 2, static_cast<int>(rng() % 5));
    if (labels.size() < static_cast<std::size_t>(m)) labels.push_back(labels.back());
    Eigen::MatrixXd e(m, 6);
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = nd(rng);
    const auto r = triplet_loss(e, labels, 0.5);
    const auto o = oracle::triplet_loss(e, labels, 0.5);
    CHECK(r.loss == doctest::Approx(o.loss).epsilon(1e-12));
    CHECK(r.n_active == o.n_active);
  }
}

TEST_CASE("analytic gradient matches finite differences with dropout masks") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  const int dim = 10, out = 5, n = 8;
  Eigen::MatrixXd w(out, dim), x(n, dim);
  Eigen::VectorXd b(out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = nd(rng) * 0.4;
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = nd(rng) * 0.1;
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  const std::vector<int> labels{0, 0, 1, 1, 2, 2, 0, 1};
  DropoutMasks masks;
  masks.input = Eigen::MatrixXd::Constant(n, dim, 2.0);
  masks.output = Eigen::MatrixXd::Constant(n, out, 1.25);
  for (int k = 0; k < 20; ++k) masks.input(static_cast<Eigen::Index>(rng() % n), static_cast<Eigen::Index>(rng() % dim)) = 0.0;
  for (int k = 0; k < 5; ++k) masks.output(static_cast<Eigen::Index>(rng() % n), static_cast<Eigen::Index>(rng() % out)) = 0.0;
  const BatchGradient g = linear_triplet_gradient(w, b, x, labels, 1.0, masks);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    Eigen::MatrixXd wp = w, wm = w;
    wp.data()[i] += h;
    wm.data()[i] -= h;
    const double fd = (linear_triplet_gradient(wp, b, x, labels, 1.0, masks).loss.loss -
                       linear_triplet_gradient(wm, b, x, labels, 1.0, masks).loss.loss) /
                      (2 * h);
    CHECK(g.grad_weights.data()[i] == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
  }
}

TEST_CASE("pca matches the covariance eigenbasis") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(30, 6);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = nd(rng) * (6.0 - static_cast<double>(j));
  }
  const PCAModel m = fit_pca(x, 0.9);
  const auto o = oracle::covariance_pca(x, 0.9);
  REQUIRE(static_cast<Eigen::Index>(m.k()) == o.basis.cols());
  CHECK(oracle::max_principal_angle(m.components.transpose(), o.basis) < 1e-6);
  for (std::size_t i = 0; i < m.k(); ++i) CHECK(m.explained_ratio[i] == doctest::Approx(o.ratios[i]));
  const Eigen::MatrixXd gram = m.components * m.components.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).norm() < 1e-10);
}

TEST_CASE("feature flattening downsamples by block averaging") {
  ImageBuffer img(4, 2, 1);
  const std::uint8_t v[] = {0, 10, 20, 30, 40, 50, 60, 70};
  std::copy(std::begin(v), std::end(v), img.data().begin());
  const FeatureSpec spec{4, 2, 1, 2};
  CHECK(spec.dim() == 2);
  const Eigen::VectorXd f = image_to_feature(img, spec);
  REQUIRE(f.size() == 2);
  CHECK(f(1) > f(0));
  CHECK_THROWS_AS(image_to_feature(ImageBuffer(3, 2, 1), spec), DimensionError);
}

TEST_CASE("models survive a save/load round trip") {
  TrainingSet ts;
  ts.feature = FeatureSpec{2, 2, 1, 1};
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  ts.features.resize(24, 4);
  for (Eigen::Index i = 0; i < 24; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) ts.features(i, j) = (j == i % 3 ? 3.0 : 0.0) + 0.2 * nd(rng);
    ts.labels.push_back(static_cast<int>(i % 3));
    ts.tracks.push_back(i % 6);
  }
  TrainConfig tc;
  tc.max_epochs = 15;
  tc.embedding_dim = 8;
  tc.seed = 3;
  const LinearEmbedder m = train_embedder(ts, tc);
  CHECK(m.log.size() == 15);
  const LinearEmbedder back = load_embedder(save_embedder(m));
  const Eigen::VectorXd f = ts.features.row(0).transpose();
  CHECK(back.embed_feature(f) == m.embed_feature(f));
  CHECK(back.best_epoch == m.best_epoch);
  double norm = 0.0;
  for (double v : m.embed_feature(f).values) norm += v * v;
  CHECK(norm == doctest::Approx(1.0));

  const PCAModel p = fit_pca(ts.features);
  const PCAModel pb = load_pca(save_pca(p));
  CHECK(pb.components == p.components);
  CHECK(pb.mean == p.mean);
  CHECK(train_embedder(ts, tc).weights == m.weights);
}

namespace {
struct Toy {
  std::vector<DatasetRecord> records;
  EmbeddingTable table;
};

Toy toy(std::uint64_t seed, int ids, double spread) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Toy t;
  for (int id = 0; id < ids; ++id) {
    std::vector<double> centre(4);
    for (auto& c : centre) c = nd(rng);
    for (int tr = 0; tr < 4; ++tr) {
      for (int k = 0; k < 3; ++k) {
        const std::string ref = std::to_string(id) + "_" + std::to_string(tr) + "_" + std::to_string(k);
        t.records.push_back({ref, "id" + std::to_string(id), id * 10 + tr, tr * 10 + k});
        EmbeddingVector v;
        for (double c : centre) v.values.push_back(c + spread * nd(rng));
        t.table[ref] = v;
      }
    }
  }
  return t;
}
}  // namespace

TEST_CASE("gallery sampling draws negatives from distinct ids") {
  const Toy t = toy(1, 12, 0.3);
  const SplitSpec s = closed_split(t.records);
  const GallerySet g = sample_galleries(t.records, s, 500, 9, 7);
  CHECK(g.trials.size() == 500);
  CHECK_FALSE(g.repeated_negative_ids);
  std::map<std::string, std::string> label;
  for (const auto& r : t.records) label[r.image_ref] = r.id_label;
  for (const auto& tr : g.trials) {
    CHECK(s.test.count(tr.anchor) == 1);
    CHECK(s.train.count(tr.positive) == 1);
    CHECK(label[tr.anchor] == label[tr.positive]);
    std::set<std::string> neg_ids;
    for (const auto& n : tr.negatives) neg_ids.insert(label[n]);
    CHECK(neg_ids.size() == 9);
    CHECK(neg_ids.count(label[tr.anchor]) == 0);
  }
  const GallerySet few = sample_galleries(t.records, s, 50, 15, 7);
  CHECK(few.repeated_negative_ids);
}

TEST_CASE("cmc and knn agree with brute force") {
  for (double spread : {0.1, 0.8, 2.0}) {
    const Toy t = toy(3, 10, spread);
    const SplitSpec s = closed_split(t.records);
    const GallerySet g = sample_galleries(t.records, s, 300, 5, 1);
    const int ranks[] = {1, 2, 3};
    const auto c = cmc(g.trials, t.table, ranks);
    for (int r : ranks) CHECK(c.at(r) == oracle::cmc_at(g.trials, t.table, r));
    const auto ref = select(t.records, s.train), query = select(t.records, s.test);
    for (int k : {1, 3}) CHECK(knn_eval(ref, query, t.table, k) == oracle::knn_accuracy(ref, query, t.table, k));
  }
}

TEST_CASE("missing embeddings are reported") {
  Toy t = toy(5, 4, 0.1);
  const SplitSpec s = closed_split(t.records);
  const GallerySet g = sample_galleries(t.records, s, 10, 3, 1);
  t.table.erase(g.trials.front().anchor);
  const int ranks[] = {1};
  CHECK_THROWS(cmc(g.trials, t.table, ranks));
}

TEST_CASE("report rows merge closed and open settings") {
  std::vector<EvalResult> results{{"Triplet", "full", SplitMode::closed, {0.9, 0.99, 0.95, 0.96, false}},
                                  {"Triplet", "full", SplitMode::open, {0.5, 0.7, 0.6, 0.62, false}},
                                  {"PixPCA", "full", SplitMode::closed, {0.3, 0.5, 0.4, 0.41, false}}};
  const EvalReport r = build_report(results);
  REQUIRE(r.rows.size() == 2);
  const auto back = parse_report_csv(r.csv);
  REQUIRE(back.size() == 2);
  CHECK(r.table.find("Triplet") != std::string::npos);
}

#include "patchpipe/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "patchpipe/config.hpp"
#include "patchpipe/dataset_splits.hpp"
#include "patchpipe/embedding.hpp"
#include "patchpipe/evaluation.hpp"
#include "patchpipe/flower_geometry.hpp"
#include "patchpipe/io_formats.hpp"
#include "patchpipe/rt_pipeline.hpp"
#include "patchpipe/synthetic_assay.hpp"
#include "patchpipe/tracking.hpp"
#include "patchpipe/visit_detection.hpp"
#include "patchpipe/workflow.hpp"

namespace patchpipe {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

struct Context {
  Globals g;
  std::ostream& out;
  std::ostream& err;

  AssayConfig config() const {
    if (g.config_path.empty()) return {};
    return parse_config(read_text_file(g.config_path));
  }
  std::uint64_t seed() const { return g.seed.value_or(0); }
  void log(const std::string& msg) const {
    if (g.verbose) err << msg << "\n";
  }
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory '" + dir + "': " + ec.message());
}

void write_or_print(const Context& ctx, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    ctx.out << text;
  } else {
    write_text_file(path, text);
  }
}

std::vector<CropRegion> parse_variants(const std::string& list) {
  std::vector<CropRegion> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(crop_region_from_string(item));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("no crop variants given");
  return out;
}

CropRegion parse_variant(const std::string& name) {
  try {
    return crop_region_from_string(name);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

World load_world(const std::string& dir, const Context& ctx) {
  WorldConfig cfg = world_config_from_json(read_text_file(dir + "/world.json"));
  ctx.log("regenerating world from " + dir + "/world.json");
  return generate_world(cfg);
}

// ---------------------------------------------------------------------------
// synth

struct SynthOpts {
  std::string out;
  int render_frames = 1;
};

int cmd_synth(const Context& ctx, const SynthOpts& o) {
  WorldConfig cfg;
  if (!ctx.g.config_path.empty()) cfg = world_config_from_json(read_text_file(ctx.g.config_path));
  if (ctx.g.seed) cfg.seed = *ctx.g.seed;
  const World w = generate_world(cfg);
  ensure_dir(o.out);
  write_text_file(o.out + "/world.json", world_config_to_json(cfg) + "\n");
  write_ppm_file(o.out + "/reference.ppm", render_reference(w));
  write_text_file(o.out + "/poses.ndjson", write_pose_stream(w.poses));
  write_text_file(o.out + "/truth_tracks.csv", write_tracks(w.truth_tracks));
  write_text_file(o.out + "/truth_events.ndjson", write_event_stream(w.truth_events));
  const ExportSummary plan = export_crops(w, AssayConfig{}.crop, {}, [](const CropSample&) {});
  write_text_file(o.out + "/index.csv", write_dataset_index(plan.records));
  const auto n_render = std::min<std::int64_t>(o.render_frames, w.n_frames);
  if (n_render > 0) ensure_dir(o.out + "/frames");
  for (std::int64_t f = 0; f < n_render; ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "/frames/frame_%06lld.ppm", static_cast<long long>(f));
    write_ppm_file(o.out + name, render_frame(w, w.state_at(f)));
  }
  ctx.out << "world: " << w.bees.size() << " bees, " << w.flowers.size() << " flowers, " << w.n_frames << " frames, "
          << w.truth_tracks.size() << " tracks, " << w.truth_events.size() << " visits, " << plan.records.size()
          << " crop records\n";
  return 0;
}

// ---------------------------------------------------------------------------
// flowers, tracking, visits

struct FlowerOpts {
  std::string image;
  std::string out;
};

int cmd_detect_flowers(const Context& ctx, const FlowerOpts& o) {
  const AssayConfig cfg = ctx.config();
  std::vector<Flower> flowers;
  if (!cfg.flower.manual.empty()) {
    flowers = flowers_from_config(cfg.flower);
  } else {
    if (o.image.empty()) throw UsageError("detect-flowers needs --image unless flower.manual is configured");
    flowers = detect_flowers(read_ppm_file(o.image), cfg.flower);
  }
  write_or_print(ctx, o.out, write_flowers(flowers));
  ctx.log("flowers: " + std::to_string(flowers.size()));
  return 0;
}

struct TrackOpts {
  std::string poses;
  std::string out;
};

std::vector<FrameDetections> read_poses(const std::string& path) {
  if (path == "-") return parse_pose_stream(std::cin);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return parse_pose_stream(in);
}

int cmd_track(const Context& ctx, const TrackOpts& o) {
  const AssayConfig cfg = ctx.config();
  const auto tracks = run_tracker(read_poses(o.poses), cfg.track);
  write_or_print(ctx, o.out, write_tracks(tracks));
  ctx.log("tracks: " + std::to_string(tracks.size()));
  return 0;
}

struct VisitOpts {
  std::string tracks;
  std::string flowers;
  std::string out;
};

int cmd_detect_visits(const Context& ctx, const VisitOpts& o) {
  const AssayConfig cfg = ctx.config();
  const auto tracks = parse_tracks(read_text_file(o.tracks));
  const auto flowers = parse_flowers(read_text_file(o.flowers));
  write_or_print(ctx, o.out, write_event_stream(detect_visits(tracks, flowers, cfg.visit)));
  return 0;
}

struct EvalVisitOpts {
  std::string pred;
  std::string truth;
  std::string out;
};

int cmd_eval_visits(const Context& ctx, const EvalVisitOpts& o) {
  const AssayConfig cfg = ctx.config();
  const auto pred = parse_event_stream(read_text_file(o.pred));
  const auto truth = parse_event_stream(read_text_file(o.truth));
  const EventMetrics m = evaluate_events(pred, truth, cfg.visit.overlap_min_frames);
  nlohmann::ordered_json j{{"n_annotated", m.n_annotated},
                           {"n_predicted", m.n_predicted},
                           {"recall", m.recall},
                           {"duplication_rate", m.duplication_rate}};
  write_or_print(ctx, o.out, j.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// crops and splits

struct CropOpts {
  std::string world;
  std::string variants = "full,abdomen,thorax,unaligned";
  std::string out;
};

int cmd_crops(const Context& ctx, const CropOpts& o) {
  const AssayConfig cfg = ctx.config();
  const auto regions = parse_variants(o.variants);
  const World w = load_world(o.world, ctx);
  for (auto r : regions) ensure_dir(o.out + "/" + std::string(to_string(r)));
  const ExportSummary s = export_crops(w, cfg.crop, regions, [&](const CropSample& c) {
    write_ppm_file(o.out + "/" + std::string(to_string(c.region)) + "/" + c.record.image_ref, c.image);
  });
  write_text_file(o.out + "/index.csv", write_dataset_index(s.records));
  ctx.out << "crops: " << s.records.size() << " images, " << s.alignment_errors << " alignment errors, "
          << s.multi_bee_skipped << " multi-bee frames skipped\n";
  return 0;
}

struct SplitOpts {
  std::string index;
  std::string mode = "closed";
  std::optional<double> train_frac, id_frac, ref_frac;
  std::size_t min_track_images = 4;
  std::size_t min_id_tracks = 2;
  std::string out;
};

void write_subset(const std::string& path, std::span<const DatasetRecord> records, const std::set<std::string>& subset) {
  write_text_file(path, write_dataset_index(select(records, subset)));
}

int cmd_split(const Context& ctx, const SplitOpts& o) {
  const AssayConfig cfg = ctx.config();
  const auto all = parse_dataset_index(read_text_file(o.index));
  const auto records = filter_dataset(all, o.min_track_images, o.min_id_tracks);
  ensure_dir(o.out);
  if (o.mode == "closed") {
    const SplitSpec s = closed_split(records, o.train_frac.value_or(cfg.split.train_frac));
    write_subset(o.out + "/train.csv", records, s.train);
    write_subset(o.out + "/test.csv", records, s.test);
    ctx.out << "closed split: " << s.train.size() << " train, " << s.test.size() << " test images\n";
  } else if (o.mode == "open") {
    const SplitSpec s = open_split(records, o.id_frac.value_or(cfg.split.id_frac),
                                   o.ref_frac.value_or(cfg.split.ref_frac), ctx.seed());
    write_subset(o.out + "/train.csv", records, s.train);
    write_subset(o.out + "/test.csv", records, s.test);
    write_subset(o.out + "/reference.csv", records, s.reference);
    write_subset(o.out + "/query.csv", records, s.query);
    ctx.out << "open split: " << s.train.size() << " train, " << s.reference.size() << " reference, "
            << s.query.size() << " query images\n";
  } else {
    throw UsageError("--mode must be closed or open");
  }
  ctx.log("kept " + std::to_string(records.size()) + " of " + std::to_string(all.size()) + " images after filtering");
  return 0;
}

// ---------------------------------------------------------------------------
// training, embedding, evaluation

struct TrainOpts {
  std::string index;
  std::string images;
  std::string variant = "full";
  std::string features = "triplet";
  std::string out;
  std::optional<int> max_epochs;
};

int cmd_train(const Context& ctx, const TrainOpts& o) {
  const AssayConfig cfg = ctx.config();
  const CropRegion region = parse_variant(o.variant);
  const FeatureSpec spec = feature_spec_for(region, cfg.crop, cfg.feature_downsample);
  const auto records = parse_dataset_index(read_text_file(o.index));
  const ImageLoader load = directory_loader(o.images + "/" + o.variant);
  if (o.features == "pca") {
    PCAModel m = fit_pca(feature_matrix(records, load, spec));
    m.feature = spec;
    write_or_print(ctx, o.out, save_pca(m));
    ctx.out << "pca: " << m.k() << " components\n";
    return 0;
  }
  if (o.features != "triplet") throw UsageError("--features must be triplet or pca");
  TrainConfig tc = cfg.train;
  tc.seed = ctx.seed();
  if (o.max_epochs) tc.max_epochs = *o.max_epochs;
  const TrainingSet data = make_training_set(records, load, spec, region == CropRegion::unaligned);
  const LinearEmbedder model = train_embedder(data, tc);
  write_or_print(ctx, o.out, save_embedder(model));
  ctx.out << "triplet: " << model.log.size() << " epochs, best epoch " << model.best_epoch << "\n";
  return 0;
}

struct Model {
  std::optional<LinearEmbedder> linear;
  std::optional<PCAModel> pca;
};

Model load_model(const std::string& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("model '" + path + "': " + e.what());
  }
  Model m;
  const std::string type = j.value("type", "");
  if (type == "linear_triplet") {
    m.linear = load_embedder(text);
  } else if (type == "pixel_pca") {
    m.pca = load_pca(text);
  } else {
    throw Error("model '" + path + "' has unknown type '" + type + "'");
  }
  return m;
}

EmbeddingTable embed_with(const Model& m, std::span<const DatasetRecord> records, const ImageLoader& load) {
  const FeatureSpec& spec = m.linear ? m.linear->feature : m.pca->feature;
  const Eigen::MatrixXd x = feature_matrix(records, load, spec);
  return m.linear ? embed_rows(*m.linear, records, x) : embed_rows(*m.pca, records, x);
}

struct EmbedOpts {
  std::string model;
  std::string index;
  std::string images;
  std::string variant = "full";
  std::string out;
};

int cmd_embed(const Context& ctx, const EmbedOpts& o) {
  parse_variant(o.variant);
  const Model m = load_model(o.model);
  const auto records = parse_dataset_index(read_text_file(o.index));
  write_or_print(ctx, o.out, write_embeddings(embed_with(m, records, directory_loader(o.images + "/" + o.variant))));
  return 0;
}

struct EvalOpts {
  std::string setting = "closed";
  std::string features = "triplet";
  std::string variant = "full";
  std::optional<std::size_t> galleries;
  std::optional<std::size_t> negatives;
  std::string split;
  std::string images;
  std::string model;
  std::string embeddings;
  std::string report = "report.csv";
};

int cmd_eval(const Context& ctx, const EvalOpts& o) {
  const AssayConfig cfg = ctx.config();
  parse_variant(o.variant);
  SplitSpec split;
  std::vector<DatasetRecord> records;
  auto add = [&](const std::string& name, std::set<std::string>& subset) {
    for (auto& r : parse_dataset_index(read_text_file(o.split + "/" + name))) {
      subset.insert(r.image_ref);
      records.push_back(std::move(r));
    }
  };
  if (o.setting == "closed") {
    split.mode = SplitMode::closed;
    add("train.csv", split.train);
    add("test.csv", split.test);
  } else if (o.setting == "open") {
    split.mode = SplitMode::open;
    add("reference.csv", split.reference);
    add("query.csv", split.query);
  } else {
    throw UsageError("--setting must be closed or open");
  }

  EmbeddingTable table;
  std::string label;
  if (o.features == "external") {
    if (o.embeddings.empty()) throw UsageError("--features external needs --embeddings");
    table = read_embeddings(read_text_file(o.embeddings));
    for (const auto& r : records) embed(table, r.image_ref);
    label = "External";
  } else if (o.features == "triplet" || o.features == "pca") {
    if (o.model.empty() || o.images.empty()) throw UsageError("--features " + o.features + " needs --model and --images");
    const Model m = load_model(o.model);
    if ((o.features == "pca") != m.pca.has_value()) throw UsageError("--model does not hold " + o.features + " features");
    table = embed_with(m, records, directory_loader(o.images + "/" + o.variant));
    label = o.features == "pca" ? "PixPCA" : "Triplet";
  } else {
    throw UsageError("--features must be pca, triplet or external");
  }

  EvalParams params = cfg.eval;
  if (o.galleries) params.galleries = *o.galleries;
  if (o.negatives) params.negatives = *o.negatives;
  const SettingScores scores = evaluate_setting(records, split, table, params, ctx.seed());

  std::vector<EvalResult> results;
  if (!o.report.empty() && fs::exists(o.report)) {
    for (const auto& row : parse_report_csv(read_text_file(o.report))) {
      if (row.closed) results.push_back({row.features, row.variant, SplitMode::closed, *row.closed});
      if (row.open) results.push_back({row.features, row.variant, SplitMode::open, *row.open});
    }
  }
  std::erase_if(results, [&](const EvalResult& r) {
    return r.features == label && r.variant == o.variant && r.setting == split.mode;
  });
  results.push_back({label, o.variant, split.mode, scores});
  const EvalReport rep = build_report(results);
  if (!o.report.empty()) write_text_file(o.report, rep.csv);
  ctx.out << rep.table;
  if (scores.repeated_negative_ids) ctx.err << "warning: fewer than " << params.negatives
                                            << " distinct negative ids; negatives repeat ids\n";
  return 0;
}

// ---------------------------------------------------------------------------
// real-time

struct RunOpts {
  std::string poses;
  std::string flowers;
  std::string reference;
  std::string sink = "stdout";
  double fps = 0.0;
  bool bench = false;
  double budget_fps = 20.0;
  std::string stats;
  std::size_t queue = 64;
  bool drop = false;
};

int cmd_run(const Context& ctx, const RunOpts& o) {
  const AssayConfig cfg = ctx.config();
  std::vector<Flower> flowers;
  if (o.flowers == "auto") {
    if (!cfg.flower.manual.empty()) {
      flowers = flowers_from_config(cfg.flower);
    } else {
      if (o.reference.empty()) throw UsageError("--flowers auto needs --reference or flower.manual");
      flowers = detect_flowers(read_ppm_file(o.reference), cfg.flower);
    }
  } else if (o.flowers == "config") {
    if (cfg.flower.manual.empty()) throw UsageError("--flowers config needs flower.manual in --config");
    flowers = flowers_from_config(cfg.flower);
  } else {
    flowers = parse_flowers(read_text_file(o.flowers));
  }

  std::ifstream file;
  std::istream* in = &std::cin;
  if (o.poses != "-") {
    file.open(o.poses, std::ios::binary);
    if (!file) throw Error("cannot open '" + o.poses + "'");
    in = &file;
  }
  FrameSource source = stream_source(*in);
  if (o.fps > 0) source = paced_source(std::move(source), o.fps);

  PipelineOptions opts;
  opts.queue_capacity = o.queue;
  opts.drop_when_full = o.drop;
  opts.tracker = cfg.track;
  opts.visit = cfg.visit;
  auto sink = sink_ndjson(o.sink);
  const PipelineResult r = run_pipeline(source, flowers, *sink, opts);
  if (!o.stats.empty()) write_text_file(o.stats, write_stats_csv(r.stats));
  if (o.bench) ctx.err << bench(r.stats, o.budget_fps).text;
  if (r.error) throw Error("pipeline stopped: " + *r.error);
  return 0;
}

struct BenchOpts {
  std::string stats;
  double budget_fps = 20.0;
  std::string csv;
};

int cmd_bench_report(const Context& ctx, const BenchOpts& o) {
  const BenchSummary b = bench(parse_stats_csv(read_text_file(o.stats)), o.budget_fps);
  ctx.out << b.text;
  if (!o.csv.empty()) write_text_file(o.csv, b.csv);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"patchpipe: flower-patch assay toolkit (tracking, visits, crops, re-identification, streaming)"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file (world config for synth)");
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_flag("--verbose", g.verbose, "Progress messages on stderr");

  SynthOpts synth;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic world (config via --config)");
  s_synth->add_option("--out", synth.out, "Output directory")->required();
  s_synth->add_option("--render-frames", synth.render_frames, "Number of leading frames to render as PPM");

  FlowerOpts fl;
  auto* s_flowers = app.add_subcommand("detect-flowers", "Locate flower squares in a reference frame");
  s_flowers->add_option("--image", fl.image, "Reference frame (PPM)");
  s_flowers->add_option("--out", fl.out, "Flowers JSON (default stdout)");

  TrackOpts tr;
  auto* s_track = app.add_subcommand("track", "Link per-frame poses into short-term tracks");
  s_track->add_option("--poses", tr.poses, "Pose NDJSON ('-' for stdin)")->required();
  s_track->add_option("--out", tr.out, "Tracks CSV (default stdout)");

  VisitOpts vi;
  auto* s_visits = app.add_subcommand("detect-visits", "Detect drinking visits from tracks");
  s_visits->add_option("--tracks", vi.tracks, "Tracks CSV")->required();
  s_visits->add_option("--flowers", vi.flowers, "Flowers JSON")->required();
  s_visits->add_option("--out", vi.out, "Events NDJSON (default stdout)");

  EvalVisitOpts ev;
  auto* s_eval_visits = app.add_subcommand("eval-visits", "Recall and duplication of predicted visits");
  s_eval_visits->add_option("--pred", ev.pred, "Predicted events NDJSON")->required();
  s_eval_visits->add_option("--truth", ev.truth, "Annotated events NDJSON")->required();
  s_eval_visits->add_option("--out", ev.out, "Metrics JSON (default stdout)");

  CropOpts cr;
  auto* s_crops = app.add_subcommand("crops", "Export aligned and unaligned crops of a synthetic world");
  s_crops->add_option("--world", cr.world, "Directory written by synth")->required();
  s_crops->add_option("--variants", cr.variants, "Comma list of full, abdomen, thorax, unaligned");
  s_crops->add_option("--out", cr.out, "Output directory")->required();

  SplitOpts sp;
  auto* s_split = app.add_subcommand("split", "Filter the dataset index and split it");
  s_split->add_option("--index", sp.index, "Dataset index CSV")->required();
  s_split->add_option("--mode", sp.mode, "closed or open");
  s_split->add_option("--train-frac", sp.train_frac, "Closed: fraction of tracks per id used for training");
  s_split->add_option("--id-frac", sp.id_frac, "Open: fraction of ids used for training");
  s_split->add_option("--ref-frac", sp.ref_frac, "Open: fraction of each test id's tracks used as reference");
  s_split->add_option("--min-track-images", sp.min_track_images, "Drop tracks with fewer images");
  s_split->add_option("--min-id-tracks", sp.min_id_tracks, "Drop ids with fewer tracks");
  s_split->add_option("--out", sp.out, "Output directory")->required();

  TrainOpts tn;
  auto* s_train = app.add_subcommand("train", "Train the triplet embedder or fit the pixel PCA baseline");
  s_train->add_option("--index", tn.index, "Training index CSV")->required();
  s_train->add_option("--images", tn.images, "Crop root directory (variant subdirectories)")->required();
  s_train->add_option("--input-variant", tn.variant, "full, abdomen, thorax or unaligned");
  s_train->add_option("--features", tn.features, "triplet or pca");
  s_train->add_option("--max-epochs", tn.max_epochs, "Override train.max_epochs");
  s_train->add_option("--out", tn.out, "Model JSON (default stdout)");

  EmbedOpts em;
  auto* s_embed = app.add_subcommand("embed", "Embed indexed crops with a trained model");
  s_embed->add_option("--model", em.model, "Model JSON")->required();
  s_embed->add_option("--index", em.index, "Dataset index CSV")->required();
  s_embed->add_option("--images", em.images, "Crop root directory")->required();
  s_embed->add_option("--variant", em.variant, "Crop variant");
  s_embed->add_option("--out", em.out, "Embeddings CSV (default stdout)");

  EvalOpts eo;
  auto* s_eval = app.add_subcommand("eval", "Gallery CMC and kNN evaluation");
  s_eval->add_option("--setting", eo.setting, "closed or open");
  s_eval->add_option("--features", eo.features, "pca, triplet or external");
  s_eval->add_option("--variant", eo.variant, "Crop variant");
  s_eval->add_option("--galleries", eo.galleries, "Number of galleries (default eval.galleries)");
  s_eval->add_option("--negatives", eo.negatives, "Negatives per gallery (default eval.negatives)");
  s_eval->add_option("--split", eo.split, "Directory written by split")->required();
  s_eval->add_option("--images", eo.images, "Crop root directory");
  s_eval->add_option("--model", eo.model, "Model JSON");
  s_eval->add_option("--embeddings", eo.embeddings, "External embeddings CSV");
  s_eval->add_option("--report", eo.report, "Report CSV to update ('' to skip)");

  RunOpts rn;
  auto* s_run = app.add_subcommand("run", "Streaming tracking, visit detection and event export");
  s_run->add_option("--poses", rn.poses, "Pose NDJSON ('-' for stdin)")->required();
  s_run->add_option("--flowers", rn.flowers, "Flowers JSON, 'config' or 'auto'")->required();
  s_run->add_option("--reference", rn.reference, "Reference frame for --flowers auto");
  s_run->add_option("--sink", rn.sink, "stdout, file:PATH or tcp:HOST:PORT");
  s_run->add_option("--fps", rn.fps, "Replay rate; 0 replays as fast as possible");
  s_run->add_flag("--bench", rn.bench, "Print latency summary on stderr");
  s_run->add_option("--budget-fps", rn.budget_fps, "Frame-rate budget for --bench");
  s_run->add_option("--stats", rn.stats, "Write stage statistics CSV");
  s_run->add_option("--queue", rn.queue, "Queue capacity between stages")->check(CLI::PositiveNumber);
  s_run->add_flag("--drop", rn.drop, "Drop frames instead of blocking when the pipeline is full");

  BenchOpts bo;
  auto* s_bench = app.add_subcommand("bench-report", "Summarize a stage statistics CSV against a frame budget");
  s_bench->add_option("--stats", bo.stats, "Stage statistics CSV")->required();
  s_bench->add_option("--budget-fps", bo.budget_fps, "Frame-rate budget");
  s_bench->add_option("--csv", bo.csv, "Write the summary CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  const Context ctx{g, out, err};
  try {
    if (*s_synth) return cmd_synth(ctx, synth);
    if (*s_flowers) return cmd_detect_flowers(ctx, fl);
    if (*s_track) return cmd_track(ctx, tr);
    if (*s_visits) return cmd_detect_visits(ctx, vi);
    if (*s_eval_visits) return cmd_eval_visits(ctx, ev);
    if (*s_crops) return cmd_crops(ctx, cr);
    if (*s_split) return cmd_split(ctx, sp);
    if (*s_train) return cmd_train(ctx, tn);
    if (*s_embed) return cmd_embed(ctx, em);
    if (*s_eval) return cmd_eval(ctx, eo);
    if (*s_run) return cmd_run(ctx, rn);
    if (*s_bench) return cmd_bench_report(ctx, bo);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace patchpipe

#include "protoseg/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "protoseg/bench.hpp"
#include "protoseg/blocks.hpp"
#include "protoseg/checkpoint.hpp"
#include "protoseg/cloud.hpp"
#include "protoseg/errors.hpp"
#include "protoseg/loss.hpp"
#include "protoseg/metrics.hpp"
#include "protoseg/model.hpp"
#include "protoseg/protoscore.hpp"
#include "protoseg/rng.hpp"
#include "protoseg/synth.hpp"
#include "protoseg/train.hpp"

namespace protoseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << text;
  if (!out) throw FormatError(path + ": write failed");
}

std::vector<std::string> list_cloud_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw FormatError(dir + ": not a directory");
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pcl")
      paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw FormatError(dir + ": no .pcl files found");
  return paths;
}

std::vector<PointCloud> load_cloud_dir(const std::string& dir,
                     std::vector<std::string>* names = nullptr) {
  std::vector<PointCloud> clouds;
  for (const std::string& path : list_cloud_files(dir)) {
    clouds.push_back(read_cloud(path));
    if (names) names->push_back(fs::path(path).stem().string());
  }
  return clouds;
}

std::string scene_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04zu.pcl", index);
  return buf;
}

struct GlobalOpts {
  std::uint64_t seed = kDefaultSeed;
  bool seed_given = false;
  unsigned threads = 1;
  std::string config_path;
};

RunConfig base_config(const GlobalOpts& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) cfg = RunConfig::from_json(read_text_file(g.config_path));
  if (g.seed_given) cfg.seed = g.seed;
  return cfg;
}

/// Checkpoint loading with provenance control: a requested config that
/// differs from the embedded one is refused unless forced, in which case
/// the requested config wins (weight shapes must still line up).
ProtoSegModel load_model_checked(const std::string& path,
                 const std::optional<RunConfig>& requested, bool force) {
  const RunConfig embedded = checkpoint_config(path);
  if (requested && requested->to_json() != embedded.to_json()) {
    if (!force)
      throw FormatError(path + ": embedded config differs from the requested one; " +
                "pass --force to override");
    return ProtoSegModel::load(path, *requested);
  }
  return ProtoSegModel::load(path, embedded);
}

json synth_config_json(const SynthConfig& sc) {
  return json{{"seed", sc.seed},
        {"n_points", sc.n_points},
        {"min_instances", sc.min_instances},
        {"max_instances", sc.max_instances},
        {"use_boxes", sc.use_boxes},
        {"use_spheres", sc.use_spheres},
        {"use_planes", sc.use_planes},
        {"noise_sigma", sc.noise_sigma},
        {"extent_min", sc.extent_min},
        {"extent_max", sc.extent_max},
        {"allow_overlap", sc.allow_overlap}};
}

// ---------------------------------------------------------------- synth --

struct SynthArgs {
  std::string out;
  std::size_t count = 100;
  SynthConfig sc;
};

int cmd_synth(const GlobalOpts& g, const SynthArgs& a) {
  SynthConfig sc = a.sc;
  sc.seed = g.seed;
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < a.count; ++i) {
    const PointCloud cloud = generate_scene(sc, i);
    write_cloud(cloud, (fs::path(a.out) / scene_filename(i)).string());
  }
  json manifest{{"seed", sc.seed}, {"count", a.count}, {"config", synth_config_json(sc)}};
  write_text_file((fs::path(a.out) / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cerr << "wrote " << a.count << " scenes to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- train --

struct TrainArgs {
  std::string data;
  std::string out;
  std::string log_path;
  std::string resume;
  std::size_t epochs = 0;
  bool epochs_given = false;
  std::size_t batch = 0;
  bool batch_given = false;
  double lr = 0.0;
  bool lr_given = false;
};

int cmd_train(const GlobalOpts& g, const TrainArgs& a) {
  RunConfig cfg = a.resume.empty() ? base_config(g) : checkpoint_config(a.resume);
  if (a.epochs_given) cfg.epochs = a.epochs;
  if (a.batch_given) cfg.batch = a.batch;
  if (a.lr_given) cfg.lr = a.lr;
  if (!a.resume.empty() && g.seed_given) cfg.seed = g.seed;

  const std::vector<PointCloud> scenes = load_cloud_dir(a.data);
  ProtoSegModel model =
    a.resume.empty() ? ProtoSegModel(cfg) : ProtoSegModel::load(a.resume, cfg);

  std::ofstream log_file;
  std::ostream* log = &std::cout;
  if (!a.log_path.empty()) {
    log_file.open(a.log_path, std::ios::binary);
    if (!log_file) throw FormatError(a.log_path + ": cannot open for writing");
    log = &log_file;
  }

  TrainOptions opts;
  opts.epochs = cfg.epochs;
  opts.batch = cfg.batch;
  opts.lr = cfg.lr;
  opts.seed = cfg.seed;
  opts.log = log;
  const TrainResult result = train_model(model, scenes, opts);

  model.save(a.out);
  std::cerr << "trained " << result.steps << " steps on " << scenes.size()
        << " scenes, final loss " << result.final_loss << ", checkpoint " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- infer --

struct InferArgs {
  std::string checkpoint;
  std::string input;
  std::string out;
  bool blocks = false;
  bool force = false;
  std::string proto_out;
  std::vector<std::size_t> proto_ids{0, 1, 2, 3};
  std::string hist_out;
};

json coeff_histogram(const Tensor& coeffs, const MaskSet& masks, std::size_t bins = 40) {
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    edges[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(bins);
  std::vector<std::uint64_t> counts(bins, 0);
  const std::size_t m = coeffs.cols();
  for (const auto& r : masks.retained) {
    for (std::size_t j = 0; j < m; ++j) {
      const double v = coeffs.values()[r.row * m + j];
      auto idx = static_cast<std::size_t>((v + 1.0) / 2.0 * static_cast<double>(bins));
      if (idx >= bins) idx = bins - 1;
      ++counts[idx];
    }
  }
  return json{{"edges", edges}, {"counts", counts}};
}

int cmd_infer(const GlobalOpts& g, const InferArgs& a) {
  std::optional<RunConfig> requested;
  if (!g.config_path.empty()) requested = base_config(g);
  const ProtoSegModel model = load_model_checked(a.checkpoint, requested, a.force);
  const PointCloud cloud = read_cloud(a.input);

  if (a.blocks && (!a.proto_out.empty() || !a.hist_out.empty())) {
    std::cerr << "error: --export-prototypes / --export-coeff-histogram need whole-scene "
           "inference, not --blocks\n";
    return 1;
  }

  std::vector<std::int32_t> labels;
  if (a.blocks) {
    labels = infer_room_blocks(model, cloud);
  } else {
    const InferenceResult res = model.infer(cloud);
    labels = res.labels;
    if (!a.proto_out.empty())
      write_text_file(a.proto_out,
              export_prototype_scores(res.out.prototypes, cloud, a.proto_ids));
    if (!a.hist_out.empty())
      write_text_file(a.hist_out,
              coeff_histogram(res.out.coeffs, res.out.masks).dump(2) + "\n");
    std::cerr << "retained " << res.out.masks.retained.size() << " instances\n";
  }

  PointCloud labeled = cloud;
  labeled.instance = labels;
  write_cloud(labeled, a.out);
  return 0;
}

// ----------------------------------------------------------------- eval --

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::string csv;
  bool blocks = false;
  bool force = false;
  double iou_t = 0.5;
};

std::int32_t majority_class(std::span<const std::uint8_t> mask,
              std::span<const std::int32_t> semantic) {
  std::map<std::int32_t, std::size_t> votes;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) ++votes[i < semantic.size() ? semantic[i] : 0];
  std::int32_t best = 0;
  std::size_t best_n = 0;
  for (const auto& [cls, n] : votes) {
    if (n > best_n) {
      best = cls;
      best_n = n;
    }
  }
  return best;
}

struct SceneEval {
  SceneReport report;
  std::vector<Detection> detections;
  std::vector<GtInstance> gts;
};

SceneEval eval_scene(const ProtoSegModel& model, const PointCloud& cloud,
           const std::string& name, std::size_t scene_index, bool blocks,
           double iou_t) {
  SceneEval out;
  out.report.scene_id = name;

  std::vector<std::int32_t> labels;
  std::vector<MaskSet::Retained> retained;
  if (blocks) {
    labels = infer_room_blocks(model, cloud);
  } else {
    InferenceResult res = model.infer(cloud);
    labels = std::move(res.labels);
    retained = std::move(res.out.masks.retained);
    out.report.timings = res.out.times;
  }

  std::vector<std::int32_t> semantic = cloud.semantic;
  if (semantic.size() != cloud.size()) semantic.assign(cloud.size(), 0);

  const std::vector<ClassMask> pred = masks_from_labels(labels, semantic);
  const std::vector<ClassMask> gt = masks_from_labels(cloud.instance, semantic);
  out.report.pred_instances = pred.size();
  out.report.gt_instances = gt.size();

  const Coverage cov = coverage_metrics(pred, gt);
  const PrecRec pr = prec_rec(pred, gt, iou_t);
  out.report.metrics = {cov.mcov, cov.mwcov, pr.mprec, pr.mrec};

  for (const ClassMask& m : gt)
    out.gts.push_back({m.mask, m.cls, scene_index});
  if (!blocks) {
    // Detection ids are the retained ranks, so confidences line up by id.
    std::int32_t max_id = -1;
    for (std::int32_t l : labels) max_id = std::max(max_id, l);
    for (std::int32_t id = 0; id <= max_id; ++id) {
      Detection d;
      d.mask.assign(labels.size(), 0);
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == id) d.mask[i] = 1;
      if (std::find(d.mask.begin(), d.mask.end(), 1) == d.mask.end()) continue;
      d.confidence =
        static_cast<std::size_t>(id) < retained.size()
          ? retained[static_cast<std::size_t>(id)].confidence
          : 0.5;
      d.category = majority_class(d.mask, semantic);
      d.scene = scene_index;
      out.detections.push_back(std::move(d));
    }
  }
  return out;
}

json scene_report_json(const SceneReport& r, bool blocks) {
  json j{{"scene", r.scene_id},
       {"mcov", r.metrics.mcov},
       {"mwcov", r.metrics.mwcov},
       {"mprec", r.metrics.mprec},
       {"mrec", r.metrics.mrec},
       {"pred_instances", r.pred_instances},
       {"gt_instances", r.gt_instances}};
  if (!blocks) {
    j["timings_ms"] = {{"feature", r.timings.feature_ms}, {"sample", r.timings.sample_ms},
               {"coeff", r.timings.coeff_ms},     {"proto", r.timings.proto_ms},
               {"assemble", r.timings.assemble_ms}, {"nms", r.timings.nms_ms},
               {"network", r.timings.network_ms()}, {"total", r.timings.total_ms}};
  }
  return j;
}

int cmd_eval(const GlobalOpts& g, const EvalArgs& a) {
  std::optional<RunConfig> requested;
  if (!g.config_path.empty()) requested = base_config(g);
  const ProtoSegModel model = load_model_checked(a.checkpoint, requested, a.force);

  std::vector<std::string> names;
  const std::vector<PointCloud> clouds = load_cloud_dir(a.data, &names);
  for (std::size_t i = 0; i < clouds.size(); ++i)
    if (!clouds[i].has_instance())
      throw FormatError(names[i] + ": no instance labels to evaluate against");

  std::vector<SceneEval> evals(clouds.size());
  const unsigned workers =
    std::max(1u, std::min<unsigned>(g.threads, static_cast<unsigned>(clouds.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < clouds.size(); ++i)
      evals[i] = eval_scene(model, clouds[i], names[i], i, a.blocks, a.iou_t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < clouds.size();
           i = next.fetch_add(1))
          evals[i] = eval_scene(model, clouds[i], names[i], i, a.blocks, a.iou_t);
      });
    }
    for (std::thread& t : pool) t.join();
  }

  std::vector<Detection> detections;
  std::vector<GtInstance> gts;
  SceneMetrics mean;
  double mean_total_ms = 0.0;
  for (const SceneEval& e : evals) {
    mean.mcov += e.report.metrics.mcov;
    mean.mwcov += e.report.metrics.mwcov;
    mean.mprec += e.report.metrics.mprec;
    mean.mrec += e.report.metrics.mrec;
    mean_total_ms += e.report.timings.total_ms;
    detections.insert(detections.end(), e.detections.begin(), e.detections.end());
    gts.insert(gts.end(), e.gts.begin(), e.gts.end());
  }
  const auto n = static_cast<double>(evals.size());
  mean.mcov /= n;
  mean.mwcov /= n;
  mean.mprec /= n;
  mean.mrec /= n;
  mean_total_ms /= n;

  json out;
  out["config"] = json::parse(model.cfg.to_json());
  out["iou_threshold"] = a.iou_t;
  out["mode"] = a.blocks ? "blocks" : "whole_scene";
  out["scenes"] = json::array();
  for (const SceneEval& e : evals) out["scenes"].push_back(scene_report_json(e.report, a.blocks));
  json agg{{"mcov", mean.mcov},
       {"mwcov", mean.mwcov},
       {"mprec", mean.mprec},
       {"mrec", mean.mrec}};
  if (!a.blocks) {
    agg["map50"] = map50(detections, gts, a.iou_t);
    agg["mean_total_ms"] = mean_total_ms;
  }
  out["aggregate"] = agg;
  write_text_file(a.out, out.dump(2) + "\n");

  if (!a.csv.empty()) {
    std::ostringstream csv;
    csv << "scene,mcov,mwcov,mprec,mrec,pred_instances,gt_instances,total_ms\n";
    for (const SceneEval& e : evals) {
      const SceneReport& r = e.report;
      csv << r.scene_id << ',' << r.metrics.mcov << ',' << r.metrics.mwcov << ','
        << r.metrics.mprec << ',' << r.metrics.mrec << ',' << r.pred_instances << ','
        << r.gt_instances << ',' << r.timings.total_ms << '\n';
    }
    write_text_file(a.csv, csv.str());
  }

  std::cerr << "evaluated " << evals.size() << " scenes: mCov " << mean.mcov << ", mWCov "
        << mean.mwcov << ", mPrec " << mean.mprec << ", mRec " << mean.mrec;
  if (!a.blocks) std::cerr << ", mAP@" << a.iou_t << " " << agg["map50"].get<double>();
  std::cerr << "\n";
  return 0;
}

// ---------------------------------------------------------------- bench --

struct BenchArgs {
  std::string checkpoint;
  std::string out;
  std::size_t scenes = 20;
  std::size_t points = 1024;
  std::size_t reps = 5;
  std::size_t warmup = 2;
};

int cmd_bench(const GlobalOpts& g, const BenchArgs& a) {
  if (g.threads > 1) std::cerr << "bench runs single-threaded; ignoring --threads\n";
  ProtoSegModel model = a.checkpoint.empty()
                ? ProtoSegModel(base_config(g))
                : load_model_checked(a.checkpoint, std::nullopt, false);

  std::vector<PointCloud> scenes;
  scenes.reserve(a.scenes);
  for (std::size_t i = 0; i < a.scenes; ++i) {
    SynthConfig sc;
    sc.seed = g.seed;
    sc.n_points = a.points;
    sc.min_instances = sc.max_instances = 2 + i % 9;  // instance counts cycle 2..10
    scenes.push_back(generate_scene(sc, i));
  }

  const BenchReport report = bench_model(model, scenes, a.reps, a.warmup);
  const std::string text = report.to_json() + "\n";
  if (a.out.empty())
    std::cout << text;
  else
    write_text_file(a.out, text);

  auto row = [](const char* name, const StageStats& s) {
    std::fprintf(stderr, "  %-10s %9.3f ms  ± %7.3f  (median %9.3f)\n", name, s.mean_ms,
           s.std_ms, s.median_ms);
  };
  std::fprintf(stderr, "bench over %zu scenes x %zu reps (N=%zu):\n", report.scenes,
         report.reps, a.points);
  row("network", report.network);
  row("nms", report.nms);
  row("total", report.total);
  std::fprintf(stderr, "  cv(total)  %.2f%%\n", 100.0 * report.cv());
  return 0;
}

// --------------------------------------------------------------- ablate --

struct AblateArgs {
  std::string data;
  std::string out;
  std::size_t scenes = 16;
  std::size_t points = 512;
  std::size_t epochs = 3;
};

struct ArmResult {
  std::string name;
  std::vector<std::size_t> dilations;
  double lambda = 0.0;
  std::size_t steps = 0;
  double loss = 0.0;
  double j_pr_gt = 0.0;
  double j_gt_pr = 0.0;
};

ArmResult run_arm(const std::string& name, RunConfig cfg,
          const std::vector<PointCloud>& scenes) {
  ProtoSegModel model(cfg);
  TrainOptions opts;
  opts.epochs = cfg.epochs;
  opts.batch = cfg.batch;
  opts.lr = cfg.lr;
  opts.seed = cfg.seed;
  const TrainResult tr = train_model(model, scenes, opts);

  // Post-training loss over the whole set, measured with the arm's own
  // matching config but an unscaled coverage column for comparability.
  LossConfig lc{cfg.lambda, cfg.use_spatial_matching, cfg.use_gt_to_pr};
  double total = 0.0, pr = 0.0, gtpr = 0.0;
  for (const PointCloud& scene : scenes) {
    const ModelOutput out = model.forward(scene, whole_cloud_context(scene));
    const GroundTruth gt = GroundTruth::from_labels(scene.instance);
    const LossBreakdown lb = reciprocal_loss(out.masks.scores, gt, out.samples, lc);
    total += lb.total.item();
    pr += lb.j_pr_gt.item();
    gtpr += lb.j_gt_pr.item();
  }
  const auto n = static_cast<double>(scenes.size());
  ArmResult r;
  r.name = name;
  r.dilations = cfg.dilations;
  r.lambda = cfg.lambda;
  r.steps = tr.steps;
  r.loss = total / n;
  r.j_pr_gt = pr / n;
  r.j_gt_pr = gtpr / n;
  return r;
}

int cmd_ablate(const GlobalOpts& g, const AblateArgs& a) {
  RunConfig cfg = base_config(g);
  cfg.epochs = a.epochs;

  std::vector<PointCloud> scenes;
  if (!a.data.empty()) {
    scenes = load_cloud_dir(a.data);
  } else {
    SynthConfig sc;
    sc.seed = cfg.seed;
    sc.n_points = a.points;
    sc.min_instances = 2;
    sc.max_instances = 6;
    for (std::size_t i = 0; i < a.scenes; ++i) scenes.push_back(generate_scene(sc, i));
  }

  RunConfig single = cfg;
  single.dilations = {1};
  RunConfig no_cov = cfg;
  no_cov.lambda = 0.0;

  const std::vector<ArmResult> arms{
    run_arm("full", cfg, scenes),
    run_arm("single_dilation", single, scenes),
    run_arm("lambda_zero", no_cov, scenes),
  };

  json out;
  out["epochs"] = a.epochs;
  out["scenes"] = scenes.size();
  out["arms"] = json::array();
  std::fprintf(stderr, "%-16s %-12s %-7s %-10s %-10s %-10s\n", "arm", "dilations", "lambda",
         "loss", "j_pr_gt", "j_gt_pr");
  for (const ArmResult& r : arms) {
    json dil = r.dilations;
    out["arms"].push_back(json{{"name", r.name},
                   {"dilations", dil},
                   {"lambda", r.lambda},
                   {"steps", r.steps},
                   {"loss", r.loss},
                   {"j_pr_gt", r.j_pr_gt},
                   {"j_gt_pr", r.j_gt_pr}});
    std::ostringstream ds;
    ds << '[';
    for (std::size_t i = 0; i < r.dilations.size(); ++i)
      ds << (i ? "," : "") << r.dilations[i];
    ds << ']';
    std::fprintf(stderr, "%-16s %-12s %-7.2f %-10.5f %-10.5f %-10.5f\n", r.name.c_str(),
           ds.str().c_str(), r.lambda, r.loss, r.j_pr_gt, r.j_gt_pr);
  }
  const std::string text = out.dump(2) + "\n";
  if (a.out.empty())
    std::cout << text;
  else
    write_text_file(a.out, text);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"clustering-free point-cloud instance segmentation"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "global RNG seed (default printed at startup)");
  app.add_option("--threads", g.threads, "worker threads for scene-level parallelism");
  app.add_option("--config", g.config_path, "JSON file overriding run-config defaults");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate labeled synthetic scenes");
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_option("--count", synth_args.count, "number of scenes");
  synth->add_option("--points", synth_args.sc.n_points, "points per scene");
  synth->add_option("--min-instances", synth_args.sc.min_instances, "");
  synth->add_option("--max-instances", synth_args.sc.max_instances, "");
  synth->add_option("--noise", synth_args.sc.noise_sigma, "surface jitter sigma");
  synth->add_option("--extent-min", synth_args.sc.extent_min, "");
  synth->add_option("--extent-max", synth_args.sc.extent_max, "");
  synth->add_flag("--allow-overlap", synth_args.sc.allow_overlap, "");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a model on a scene directory");
  train->add_option("--data", train_args.data, "directory of .pcl scenes")->required();
  train->add_option("--out", train_args.out, "checkpoint to write")->required();
  train->add_option("--log", train_args.log_path, "per-step JSON log file (default stdout)");
  train->add_option("--resume", train_args.resume, "checkpoint to continue from");
  auto* opt_epochs = train->add_option("--epochs", train_args.epochs, "");
  auto* opt_batch = train->add_option("--batch", train_args.batch, "");
  auto* opt_lr = train->add_option("--lr", train_args.lr, "");

  InferArgs infer_args;
  auto* infer = app.add_subcommand("infer", "label one cloud with a trained model");
  infer->add_option("--checkpoint", infer_args.checkpoint, "")->required();
  infer->add_option("--input", infer_args.input, "cloud to segment")->required();
  infer->add_option("--out", infer_args.out, "labeled cloud to write")->required();
  infer->add_flag("--blocks", infer_args.blocks, "slice into blocks and merge");
  infer->add_flag("--force", infer_args.force, "accept a conflicting --config");
  infer->add_option("--export-prototypes", infer_args.proto_out,
            "JSONL of per-point prototype scores");
  infer->add_option("--prototype-ids", infer_args.proto_ids, "prototype columns to export")
    ->delimiter(',');
  infer->add_option("--export-coeff-histogram", infer_args.hist_out,
            "JSON histogram of retained coefficients");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "score a model against labeled scenes");
  eval->add_option("--checkpoint", eval_args.checkpoint, "")->required();
  eval->add_option("--data", eval_args.data, "directory of labeled .pcl scenes")->required();
  eval->add_option("--out", eval_args.out, "report JSON to write")->required();
  eval->add_option("--csv", eval_args.csv, "per-scene CSV to write");
  eval->add_flag("--blocks", eval_args.blocks, "evaluate via block slicing + merge");
  eval->add_flag("--force", eval_args.force, "accept a conflicting --config");
  eval->add_option("--iou", eval_args.iou_t, "match threshold")
    ->check(CLI::Range(1e-9, 1.0));

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "time inference stages on synthetic scenes");
  bench->add_option("--checkpoint", bench_args.checkpoint, "optional trained model");
  bench->add_option("--out", bench_args.out, "timing JSON (default stdout)");
  bench->add_option("--scenes", bench_args.scenes, "")->check(CLI::PositiveNumber);
  bench->add_option("--points", bench_args.points, "")->check(CLI::PositiveNumber);
  bench->add_option("--reps", bench_args.reps, "")->check(CLI::PositiveNumber);
  bench->add_option("--warmup", bench_args.warmup, "");

  AblateArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "train full / single-dilation / lambda=0 arms");
  ablate->add_option("--data", ablate_args.data, "scene directory (default: synthesize)");
  ablate->add_option("--out", ablate_args.out, "comparison JSON (default stdout)");
  ablate->add_option("--scenes", ablate_args.scenes, "synthetic scene count")
    ->check(CLI::PositiveNumber);
  ablate->add_option("--points", ablate_args.points, "")->check(CLI::PositiveNumber);
  ablate->add_option("--epochs", ablate_args.epochs, "")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  g.seed_given = app.count("--seed") > 0;
  train_args.epochs_given = opt_epochs->count() > 0;
  train_args.batch_given = opt_batch->count() > 0;
  train_args.lr_given = opt_lr->count() > 0;

  try {
    const RunConfig resolved = base_config(g);
    g.seed = resolved.seed;
    g.seed_given = g.seed_given || !g.config_path.empty();
    std::cerr << "seed: " << g.seed << "\n";

    if (synth->parsed()) return cmd_synth(g, synth_args);
    if (train->parsed()) return cmd_train(g, train_args);
    if (infer->parsed()) return cmd_infer(g, infer_args);
    if (eval->parsed()) return cmd_eval(g, eval_args);
    if (bench->parsed()) return cmd_bench(g, bench_args);
    if (ablate->parsed()) return cmd_ablate(g, ablate_args);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace protoseg

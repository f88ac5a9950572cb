// Copyright 2026 The regseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "regseg/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "regseg/ablation.hpp"
#include "regseg/checks.hpp"
#include "regseg/metrics.hpp"
#include "regseg/model.hpp"
#include "regseg/netpbm.hpp"
#include "regseg/synth.hpp"
#include "regseg/trainer.hpp"

namespace fs = std::filesystem;

namespace regseg {

namespace {

/// A failure the user can fix by changing the invocation's inputs.
class Refused : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw Refused(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !force) {
      throw Refused(dir.string() + " is not empty (pass --force to write into it)");
    }
  }
  fs::create_directories(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string stem(std::size_t index) {
  std::ostringstream os;
  os << std::setw(5) << std::setfill('0') << index;
  return os.str();
}

// --- shared flag groups ---------------------------------------------------------

struct ModelFlags {
  ModelConfig config;
  std::string arch = "endtoend", fusion = "separate", loss = "balanced", order = "max-then-softmax";
  int pooled = 6;
  std::optional<std::uint64_t> init_seed;

  void add(CLI::App* app) {
    app->add_option("--arch", arch, "endtoend or baseline")->check(CLI::IsMember({"endtoend", "baseline"}));
    app->add_option("--fusion", fusion, "pooled representation: box, region, tied or separate")
        ->check(CLI::IsMember({"box", "region", "tied", "separate"}));
    app->add_option("--loss", loss, "pixel loss weighting: balanced or unbalanced")
        ->check(CLI::IsMember({"balanced", "unbalanced"}));
    app->add_option("--softmax-order", order, "max-then-softmax or softmax-then-max")
        ->check(CLI::IsMember({"max-then-softmax", "softmax-then-max"}));
    app->add_option("--pooled", pooled, "pooled grid size (square)")->check(CLI::PositiveNumber);
    app->add_option("--conv1", config.conv1_channels, "channels of the first conv layer")->check(CLI::PositiveNumber);
    app->add_option("--conv2", config.conv2_channels, "channels of the second conv layer")->check(CLI::PositiveNumber);
    app->add_option("--head", config.head_width, "width of the fully-connected layer")->check(CLI::PositiveNumber);
    app->add_option("--init-seed", init_seed, "weight initialization seed (default: --seed)");
  }

  ModelConfig resolve(int num_classes, std::uint64_t seed) const {
    ModelConfig c = config;
    c.arch = parse_architecture(arch);
    c.fusion = parse_fusion(fusion);
    if (c.arch == Architecture::kBaseline) c.fusion = Fusion::kBoxOnly;
    c.loss = parse_loss_mode(loss);
    c.softmax_order = parse_softmax_order(order);
    c.pooled = {pooled, pooled};
    c.num_classes = num_classes;
    c.init_seed = init_seed.value_or(seed);
    c.validate();
    return c;
  }
};

struct TrainFlags {
  TrainConfig config;
  bool no_shuffle = false;
  bool final_validation_only = false;

  void add(CLI::App* app) {
    app->add_option("--lr1", config.lr_phase1, "phase-1 learning rate")->capture_default_str();
    app->add_option("--epochs1", config.epochs_phase1, "phase-1 epochs")->capture_default_str();
    app->add_option("--lr2", config.lr_phase2, "phase-2 learning rate")->capture_default_str();
    app->add_option("--epochs2", config.epochs_phase2, "phase-2 epochs")->capture_default_str();
    app->add_option("--momentum", config.momentum, "SGD momentum")->capture_default_str();
    app->add_option("--weight-decay", config.weight_decay, "L2 weight decay")->capture_default_str();
    app->add_option("--seed", config.seed, "seed for shuffling and initialization")->capture_default_str();
    app->add_option("--pos-overlap", config.overlap.pos_overlap, "baseline: overlap for a positive region")->capture_default_str();
    app->add_option("--neg-overlap", config.overlap.neg_overlap, "baseline: overlap below which a region is background")
        ->capture_default_str();
    app->add_option("--background-class", config.overlap.background_class,
                    "baseline: label for regions below --neg-overlap (-1: ignore them)")->capture_default_str();
    app->add_flag("--no-shuffle", no_shuffle, "visit training images in manifest order");
    app->add_flag("--final-validation-only", final_validation_only, "skip per-epoch test-split metrics");
  }

  TrainConfig resolve() const {
    TrainConfig c = config;
    c.shuffle = !no_shuffle;
    c.validate_every_epoch = !final_validation_only;
    c.validate();
    return c;
  }
};

struct RegionFlags {
  RegionConfig config;
  std::string plan = "multiscale";

  void add(CLI::App* app) {
    app->add_option("--regions", plan, "multiscale or overseg")->check(CLI::IsMember({"multiscale", "overseg"}));
    app->add_option("--scales", config.proposals.scales, "grid window sizes in pixels")->delimiter(',');
    app->add_option("--stride-fraction", config.proposals.stride_fraction, "grid step as a fraction of the window")
        ->capture_default_str();
    app->add_option("--overseg-threshold", config.overseg_threshold, "color threshold of the single-level plan")->capture_default_str();
    app->add_option("--overseg-levels", config.overseg_levels, "color thresholds added to multiscale sets")
        ->delimiter(',');
    app->add_option("--overseg-min-size", config.overseg_min_size, "smallest segment in pixels")->capture_default_str();
  }

  RegionConfig resolve() const {
    RegionConfig c = config;
    c.plan = parse_region_plan(plan);
    if (c.proposals.scales.empty()) throw Refused("--scales must list at least one size");
    return c;
  }
};

// --- commands -----------------------------------------------------------------------

struct GenDataOptions {
  fs::path out;
  SceneSpec spec;
  std::size_t count = 250;
  std::size_t test_count = 50;
  bool force = false;
};

int cmd_gen_data(const GenDataOptions& o, std::ostream& out) {
  if (o.test_count > o.count) throw Refused("--test-count exceeds --count");
  prepare_out_dir(o.out, o.force);
  for (const char* child : {"images", "labels", "manifest.txt"}) fs::remove_all(o.out / child);
  const Dataset ds = make_dataset(o.spec, o.count, o.test_count);
  write_dataset(o.out, ds);
  out << "wrote " << ds.scenes.size() << " scenes (" << ds.train.size() << " train, " << ds.test.size()
      << " test) to " << o.out.string() << '\n';
  return kExitOk;
}

struct TrainOptions {
  fs::path data, out;
  std::size_t limit = 0;
  bool force = false;
  ModelFlags model;
  TrainFlags train;
  RegionFlags regions;
};

std::string run_config(const std::string& command, const std::vector<std::pair<std::string, std::string>>& extra,
                       const std::string& body) {
  std::ostringstream os;
  os << "command " << command << '\n';
  for (const auto& [k, v] : extra) os << k << ' ' << v << '\n';
  os << body;
  return os.str();
}

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  Dataset ds = read_dataset(o.data);
  if (o.limit > 0 && o.limit < ds.train.size()) ds.train.resize(o.limit);
  const TrainConfig tc = o.train.resolve();
  const ModelConfig mc = o.model.resolve(ds.spec.num_classes, tc.seed);
  const RegionConfig rc = o.regions.resolve();
  prepare_out_dir(o.out, o.force);
  write_text(o.out / "run.cfg", run_config("train",
                                           {{"data", o.data.string()}, {"limit_train", std::to_string(o.limit)}},
                                           config_text(mc) + config_text(tc) + config_text(rc)));
  std::ofstream log(o.out / "train.log", std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + (o.out / "train.log").string());
  try {
    const TrainResult result = train(mc, tc, rc, ds, &log);
    result.model.save(o.out / "model.ckpt");
    if (!result.log.empty()) out << format_record(result.log.back()) << '\n';
  } catch (const TrainingDiverged& e) {
    e.last_good().save(o.out / "model.ckpt");
    err << "error: " << e.what() << "; last good state saved to " << (o.out / "model.ckpt").string() << '\n';
    return kExitFailure;
  }
  out << "checkpoint " << (o.out / "model.ckpt").string() << '\n';
  return kExitOk;
}

struct EvalOptions {
  std::optional<fs::path> checkpoint;
  std::optional<fs::path> labels;
  fs::path data;
  std::string split = "test";
  std::optional<double> band;
  bool records = false;
  std::optional<fs::path> predictions;
  RegionFlags regions;
};

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  if (o.checkpoint.has_value() == o.labels.has_value()) throw Refused("pass exactly one of --checkpoint or --labels");
  const Dataset ds = read_dataset(o.data);
  std::vector<std::size_t> indices = o.split == "train" ? ds.train : o.split == "test" ? ds.test : std::vector<std::size_t>{};
  if (o.split == "all") {
    for (std::size_t i = 0; i < ds.scenes.size(); ++i) indices.push_back(i);
  }
  if (indices.empty()) throw Refused("split '" + o.split + "' has no images");
  const RegionConfig rc = o.regions.resolve();
  std::optional<Model> model;
  if (o.checkpoint) {
    model.emplace(Model::load(*o.checkpoint));
    if (model->config().num_classes != ds.spec.num_classes) {
      throw Refused("checkpoint predicts " + std::to_string(model->config().num_classes) + " classes but the dataset has " +
                    std::to_string(ds.spec.num_classes));
    }
  }
  if (o.predictions) fs::create_directories(*o.predictions);
  const int classes = ds.spec.num_classes;
  ConfusionMatrix cm(classes), band_cm(classes);
  std::size_t fallback = 0;
  const std::vector<Rgb> palette = default_palette(classes);
  for (std::size_t i : indices) {
    const Scene& scene = ds.scenes[i];
    LabelMap pred;
    if (model) {
      Prediction p = model->predict(scene.image, test_regions(rc, scene));
      fallback += p.fallback_pixels;
      pred = std::move(p.labels);
    } else {
      pred = read_labels(*o.labels / (stem(i) + ".pgm"));
      if (pred.width() != scene.gt.width() || pred.height() != scene.gt.height()) {
        throw Refused("prediction " + stem(i) + " has the wrong size");
      }
      for (int l : pred.labels()) {
        if (l < 0 || l >= classes) throw Refused("prediction " + stem(i) + " holds label " + std::to_string(l));
      }
    }
    cm.add(pred, scene.gt);
    if (o.band) {
      const std::vector<bool> mask = boundary_band(scene.gt, *o.band);
      band_cm.add(pred, scene.gt, &mask);
    }
    if (o.predictions) {
      write_labels(*o.predictions / (stem(i) + ".pgm"), pred);
      write_image(*o.predictions / (stem(i) + ".ppm"), colorize_labels(pred, palette));
    }
  }
  MetricsReport report = summarize(cm);
  if (o.band) {
    report.band = o.band;
    if (band_cm.total() > 0) report.band_class_accuracy = class_average_accuracy(band_cm);
  }
  if (o.records) {
    out << format_records(report) << "fallback_pixels=" << fallback << '\n';
  } else {
    out << format_table(report);
    if (fallback > 0) out << "pixels labeled by nearest-covered fallback: " << fallback << '\n';
  }
  return kExitOk;
}

struct PredictOptions {
  fs::path checkpoint, image, out;
  std::optional<fs::path> color;
  RegionFlags regions;
};

int cmd_predict(const PredictOptions& o, std::ostream& out) {
  const Model model = Model::load(o.checkpoint);
  Scene scene{read_image(o.image), {}};
  scene.gt = LabelMap(static_cast<int>(scene.image.dim(1)), static_cast<int>(scene.image.dim(0)));
  const Prediction p = model.predict(scene.image, test_regions(o.regions.resolve(), scene));
  write_labels(o.out, p.labels);
  if (o.color) write_image(*o.color, colorize_labels(p.labels, default_palette(model.config().num_classes)));
  out << "wrote " << o.out.string();
  if (p.fallback_pixels > 0) out << " (" << p.fallback_pixels << " pixels from the nearest-covered fallback)";
  out << '\n';
  return kExitOk;
}

struct GradcheckOptionsCli {
  std::uint64_t seed = 1;
  std::size_t per_param = 12;
};

int cmd_gradcheck(const GradcheckOptionsCli& o, std::ostream& out) {
  bool ok = true;
  auto show = [&](const CheckResult& r) {
    ok = ok && r.passed();
    out << std::left << std::setw(44) << r.label << std::right << " max_rel_error=" << std::scientific
        << std::setprecision(3) << r.report.max_rel_error << std::defaultfloat << " checked=" << r.report.checked
        << " skipped=" << r.report.skipped.size() << " tolerance=" << r.tolerance << ' '
        << (r.passed() ? "PASS" : "FAIL") << '\n';
  };
  for (const CheckResult& r : layer_gradchecks(o.seed)) show(r);
  for (const ModelConfig& c : gradcheck_configs()) show(model_gradcheck(c, o.seed, o.per_param));
  out << (ok ? "all gradient checks passed" : "gradient check FAILED") << '\n';
  return ok ? kExitOk : kExitFailure;
}

struct AblateOptions {
  fs::path data;
  std::optional<fs::path> out;
  std::string which;
  bool force = false;
  ModelFlags model;
  TrainFlags train;
  RegionFlags regions;
};

int cmd_ablate(const AblateOptions& o, std::ostream& out) {
  const Dataset ds = read_dataset(o.data);
  const TrainConfig tc = o.train.resolve();
  const ModelConfig mc = o.model.resolve(ds.spec.num_classes, tc.seed);
  const RegionConfig rc = o.regions.resolve();
  const Ablation which = parse_ablation(o.which);
  if (o.out) {
    prepare_out_dir(*o.out, o.force);
    write_text(*o.out / "run.cfg", run_config("ablate", {{"data", o.data.string()}, {"which", o.which}},
                                              config_text(mc) + config_text(tc) + config_text(rc)));
  }
  const std::vector<ArmResult> results = run_arms(ablation_arms(which, mc, rc), tc, ds);
  const std::string table = format_ablation(results);
  out << table;
  if (o.out) {
    write_text(*o.out / "ablation.txt", table);
    for (const ArmResult& r : results) {
      std::string log;
      for (const EpochRecord& e : r.log) log += format_record(e) + "\n";
      write_text(*o.out / (r.arm.name + ".log"), log);
    }
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Region-based semantic segmentation with a region-to-pixel layer", "regseg"};
  app.require_subcommand(1);

  GenDataOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--count", gen.count, "number of scenes")->capture_default_str();
  gen_cmd->add_option("--test-count", gen.test_count, "scenes in the test split (the last ones)")->capture_default_str();
  gen_cmd->add_option("--seed", gen.spec.seed, "generator seed")->capture_default_str();
  gen_cmd->add_option("--width", gen.spec.width, "image width")->capture_default_str();
  gen_cmd->add_option("--height", gen.spec.height, "image height")->capture_default_str();
  gen_cmd->add_option("--classes", gen.spec.num_classes, "number of classes including background")->capture_default_str();
  gen_cmd->add_option("--exponent", gen.spec.frequency_exponent, "power-law exponent of class frequencies")->capture_default_str();
  gen_cmd->add_option("--min-objects", gen.spec.min_objects, "fewest objects per scene")->capture_default_str();
  gen_cmd->add_option("--max-objects", gen.spec.max_objects, "most objects per scene")->capture_default_str();
  gen_cmd->add_option("--min-size", gen.spec.min_object_size, "smallest object extent in pixels")->capture_default_str();
  gen_cmd->add_option("--max-size", gen.spec.max_object_size, "largest object extent in pixels")->capture_default_str();
  gen_cmd->add_option("--noise", gen.spec.color_noise, "per-pixel color noise sigma")->capture_default_str();
  gen_cmd->add_option("--shading", gen.spec.shading, "brightness ramp across objects")->capture_default_str();
  gen_cmd->add_flag("--force", gen.force, "write into a non-empty directory");

  TrainOptions tr;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write checkpoint and log");
  train_cmd->add_option("--data", tr.data, "dataset directory")->required();
  train_cmd->add_option("--out", tr.out, "output directory")->required();
  train_cmd->add_option("--limit-train", tr.limit, "use only the first N training images (0: all)")->capture_default_str();
  train_cmd->add_flag("--force", tr.force, "write into a non-empty directory");
  tr.model.add(train_cmd);
  tr.train.add(train_cmd);
  tr.regions.add(train_cmd);

  EvalOptions ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "compute metrics of a checkpoint or of stored label maps");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "model checkpoint");
  eval_cmd->add_option("--labels", ev.labels, "directory of NNNNN.pgm predictions instead of a checkpoint");
  eval_cmd->add_option("--data", ev.data, "dataset directory")->required();
  eval_cmd->add_option("--split", ev.split, "test, train or all")->capture_default_str()->check(CLI::IsMember({"test", "train", "all"}));
  eval_cmd->add_option("--boundary-band", ev.band, "also report class-average accuracy within N pixels of boundaries")
      ->check(CLI::NonNegativeNumber);
  eval_cmd->add_flag("--records", ev.records, "print key=value records instead of a table");
  eval_cmd->add_option("--predictions", ev.predictions, "write predicted label maps and colorized images here");
  ev.regions.add(eval_cmd);

  PredictOptions pr;
  CLI::App* predict_cmd = app.add_subcommand("predict", "label one image");
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "model checkpoint")->required();
  predict_cmd->add_option("--image", pr.image, "input PPM")->required();
  predict_cmd->add_option("--out", pr.out, "output PGM of class ids")->required();
  predict_cmd->add_option("--color", pr.color, "also write a colorized PPM");
  pr.regions.add(predict_cmd);

  GradcheckOptionsCli gc;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference checks of every layer and the whole model");
  gc_cmd->add_option("--seed", gc.seed, "seed for inputs and sampled coordinates")->capture_default_str();
  gc_cmd->add_option("--per-param", gc.per_param, "sampled coordinates per model parameter")->capture_default_str();

  AblateOptions ab;
  CLI::App* ab_cmd = app.add_subcommand("ablate", "train matched configurations differing along one axis");
  ab_cmd->add_option("--data", ab.data, "dataset directory")->required();
  ab_cmd->add_option("--which", ab.which, "axis to ablate")
      ->required()
      ->check(CLI::IsMember({"e2e-vs-baseline", "softmax-order", "region-shape", "pooling-mode", "loss-mode"}));
  ab_cmd->add_option("--out", ab.out, "directory for the table, run.cfg and per-arm logs");
  ab_cmd->add_flag("--force", ab.force, "write into a non-empty directory");
  ab.model.add(ab_cmd);
  ab.train.add(ab_cmd);
  ab.regions.add(ab_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen, out);
    if (train_cmd->parsed()) return cmd_train(tr, out, err);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
    if (predict_cmd->parsed()) return cmd_predict(pr, out);
    if (gc_cmd->parsed()) return cmd_gradcheck(gc, out);
    if (ab_cmd->parsed()) return cmd_ablate(ab, out);
  } catch (const Refused& e) {
    err << "refused: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace regseg

// Copyright 2026 The dpdm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// dpdm: train diffusion models under differential privacy on desk-scale
// image data, sample from them, and evaluate the synthetic data.
//
//   dpdm <subcommand> [--config PATH] [--key value ...]
//
// Subcommands: pretrain, finetune, sample, calibrate, eval-fid,
// eval-downstream, model-select. Any configuration key can be overridden on
// the command line (`--train.steps 100`); overrides win over the file.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dpdm/checkpoint.h"
#include "dpdm/config.h"
#include "dpdm/data.h"
#include "dpdm/diffusion.h"
#include "dpdm/dp_train.h"
#include "dpdm/eval.h"
#include "dpdm/nn.h"
#include "dpdm/privacy.h"
#include "dpdm/rng.h"

namespace fs = std::filesystem;
using namespace dpdm;

namespace {

constexpr const char* kUsage = R"(usage: dpdm <subcommand> [options]

subcommands:
  pretrain         non-private training on the pre-training domain
  finetune         differentially private fine-tuning from a checkpoint
  sample           draw synthetic images from a checkpoint (EMA weights)
  calibrate        solve for the noise multiplier of a privacy target
  eval-fid         Frechet feature distance of synthetic vs real data
  eval-downstream  downstream / ensemble / domain-shift evaluation
  model-select     hyperparameter-transfer study on synthetic data

common options:
  --config PATH    flat key = value configuration file
  --seed N         base seed (config key `seed`)
  --out DIR        run directory (config key `out`)
  --init PATH      initial checkpoint (finetune)
  --checkpoint PATH  generator checkpoint (sample, model-select)
  --key value      override any configuration key
)";

struct CliArgs {
  std::string subcommand;
  KeyValueConfig kv;
  std::string init_path;
  std::string checkpoint_path;
};

CliArgs parse_args(int argc, char** argv) {
  if (argc < 2) {
    throw std::invalid_argument(std::string("missing subcommand\n") + kUsage);
  }
  CliArgs args;
  args.subcommand = argv[1];

  // First pass: load --config so command-line overrides win.
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int i = 2; i < argc; ++i) {
    std::string flag = argv[i];
    if (flag.rfind("--", 0) != 0) {
      throw std::invalid_argument("expected --key value pairs, got '" + flag +
                                  "'");
    }
    flag = flag.substr(2);
    if (i + 1 >= argc) {
      throw std::invalid_argument("flag --" + flag + " is missing a value");
    }
    pairs.emplace_back(flag, argv[++i]);
  }
  for (const auto& [key, value] : pairs) {
    if (key == "config") {
      KeyValueConfig file = KeyValueConfig::from_file(value);
      // File entries must not clobber earlier command-line overrides, so
      // replay them afterwards; simplest is to merge file first.
      KeyValueConfig merged = file;
      args.kv = merged;
    }
  }
  for (const auto& [key, value] : pairs) {
    if (key == "config") continue;
    if (key == "init") {
      args.init_path = value;
    } else if (key == "checkpoint") {
      args.checkpoint_path = value;
    } else {
      args.kv.set(key, value);
    }
  }
  return args;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

fs::path prepare_run_dir(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) {
    throw std::invalid_argument("config: missing required key 'out'");
  }
  const fs::path out(cfg.out_dir);
  for (const char* sub : {"checkpoints", "samples", "logs", "reports"}) {
    fs::create_directories(out / sub);
  }
  write_file(out / "config.resolved", cfg.resolved_text());
  return out;
}

std::string json_number(double v) {
  if (std::isinf(v) || std::isnan(v)) return "null";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

class TrainLogWriter {
 public:
  explicit TrainLogWriter(const fs::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }
  void operator()(const TrainLogRecord& rec) {
    out_ << "{\"step\":" << rec.step << ",\"loss\":" << json_number(rec.loss)
         << ",\"epsilon_spent\":" << json_number(rec.epsilon_spent)
         << ",\"grad_norm_median_clipped\":"
         << json_number(rec.grad_norm_median_clipped) << "}\n";
  }

 private:
  std::ofstream out_;
};

void save_train_checkpoint(const fs::path& path, const DenoiserArch& arch,
                           const TrainResult& result) {
  Checkpoint ckpt;
  ckpt.add_prefixed("raw", result.params);
  ckpt.add_prefixed("ema", result.ema);
  ckpt.text["__arch__"] = arch.serialize();
  save_checkpoint(path.string(), ckpt);
}

struct LoadedGenerator {
  DenoiserArch arch;
  ParameterSet raw;
  ParameterSet ema;
};

LoadedGenerator load_generator(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  auto it = ckpt.text.find("__arch__");
  if (it == ckpt.text.end()) {
    throw std::runtime_error("checkpoint " + path + " has no __arch__ entry");
  }
  LoadedGenerator gen;
  gen.arch = DenoiserArch::parse(it->second);
  gen.raw = ckpt.extract_prefixed("raw");
  gen.ema = ckpt.extract_prefixed("ema");
  if (gen.raw.empty()) {
    throw std::runtime_error("checkpoint " + path + " has no raw/ parameters");
  }
  if (gen.ema.empty()) gen.ema = gen.raw;
  return gen;
}

double resolve_delta(const RunConfig& cfg, int dataset_size) {
  if (cfg.delta) return *cfg.delta;
  return 1.0 / static_cast<double>(dataset_size);
}

// ---- subcommands -----------------------------------------------------------

int cmd_pretrain(const CliArgs& args) {
  RunConfig cfg = RunConfig::resolve(args.kv);
  // Pre-training is non-private: no clipping, no noise.
  cfg.noise_multiplier.reset();
  cfg.target_epsilon.reset();
  cfg.clip_norm = std::numeric_limits<double>::infinity();
  if (args.kv.get_str("data.domain", "") == "") cfg.data_domain = Domain::kPretrain;

  const fs::path out = prepare_run_dir(cfg);
  const LabeledImageSet data = cfg.load_train_dataset();
  DpTrainConfig train_cfg = cfg.train_config();
  train_cfg.noise_multiplier = 0.0;

  TrainLogWriter log(out / "logs" / "train.ndjson");
  const TrainResult result =
      train<float>(data, cfg.denoiser_arch(), train_cfg,
                   cfg.augmentation_policy(), cfg.timestep_mixture(),
                   cfg.noise_schedule(), cfg.seed, nullptr, std::ref(log));
  save_train_checkpoint(out / "checkpoints" / "final.dpdm",
                        cfg.denoiser_arch(), result);
  std::cout << "pretrain: " << train_cfg.steps << " steps on " << data.size()
            << " examples; checkpoint written to "
            << (out / "checkpoints" / "final.dpdm").string() << "\n";
  return 0;
}

int cmd_finetune(const CliArgs& args) {
  if (args.init_path.empty()) {
    throw std::invalid_argument("finetune: --init CHECKPOINT is required");
  }
  RunConfig cfg = RunConfig::resolve(args.kv);
  const LoadedGenerator init = load_generator(args.init_path);
  if (!(init.arch == cfg.denoiser_arch())) {
    throw std::runtime_error(
        "finetune: checkpoint architecture does not match the configured "
        "model (" + init.arch.serialize() + " vs " +
        cfg.denoiser_arch().serialize() + ")");
  }

  const LabeledImageSet data = cfg.load_train_dataset();
  const double delta = resolve_delta(cfg, data.size());
  cfg.delta = delta;

  DpTrainConfig train_cfg = cfg.train_config();
  train_cfg.delta = delta;
  const double q =
      std::min(1.0, static_cast<double>(train_cfg.batch_size) / data.size());
  if (cfg.target_epsilon) {
    train_cfg.noise_multiplier = calibrate_sigma(
        q, train_cfg.steps, PrivacySpend{*cfg.target_epsilon, delta});
  } else if (cfg.noise_multiplier) {
    train_cfg.noise_multiplier = *cfg.noise_multiplier;
  } else {
    throw std::invalid_argument(
        "finetune: provide exactly one of privacy.target_epsilon and "
        "privacy.noise_multiplier");
  }
  cfg.noise_multiplier = train_cfg.noise_multiplier;

  const fs::path out = prepare_run_dir(cfg);  // after resolving sigma, delta
  TrainLogWriter log(out / "logs" / "train.ndjson");
  const TrainResult result = train<float>(
      data, cfg.denoiser_arch(), train_cfg, cfg.augmentation_policy(),
      cfg.timestep_mixture(), cfg.noise_schedule(), cfg.seed, &init.raw,
      std::ref(log));
  save_train_checkpoint(out / "checkpoints" / "final.dpdm",
                        cfg.denoiser_arch(), result);

  std::printf("finetune: sigma = %.6g, accounted (epsilon, delta) = (%.4f, %g)%s\n",
              train_cfg.noise_multiplier, result.spend.epsilon,
              result.spend.delta,
              result.status == TrainStatus::kBudgetExhausted
                  ? " [budget exhausted]"
                  : "");
  return 0;
}

int cmd_sample(const CliArgs& args) {
  if (args.checkpoint_path.empty()) {
    throw std::invalid_argument("sample: --checkpoint PATH is required");
  }
  RunConfig cfg = RunConfig::resolve(args.kv);
  const LoadedGenerator gen = load_generator(args.checkpoint_path);
  const fs::path out = prepare_run_dir(cfg);
  const NoiseSchedule schedule = cfg.noise_schedule();
  const DenoiserFn fn = make_denoiser_fn(gen.arch, gen.ema);

  const int n = cfg.sample_n;
  const int classes = std::max(1, gen.arch.num_classes);
  LabeledImageSet set;
  set.images = Tensor({n, gen.arch.height, gen.arch.width, gen.arch.channels});
  set.labels.resize(static_cast<std::size_t>(n));
  set.num_classes = gen.arch.num_classes;
  set.domain = Domain::kFinetune;

  const Rng label_stream = Rng::stream(cfg.seed, "sample-labels");
  const Rng noise_stream = Rng::stream(cfg.seed, "sample-noise");
  for (int i = 0; i < n; ++i) {
    int label = 0;
    if (gen.arch.num_classes > 0) {
      if (cfg.sample_balanced) {
        label = i % classes;
      } else {
        Rng r = label_stream.fork(static_cast<std::uint64_t>(i));
        label = static_cast<int>(r.uniform_int(0, classes - 1));
      }
    }
    Rng rng = noise_stream.fork(static_cast<std::uint64_t>(i));
    const Tensor img = ancestral_sample(
        fn, schedule, {gen.arch.channels, gen.arch.height, gen.arch.width},
        label, rng);
    set.set_example_chw(i, img);
    set.labels[static_cast<std::size_t>(i)] = label;
  }

  const fs::path images_path = out / "samples" / "images.idx";
  const fs::path labels_path = out / "samples" / "labels.idx";
  save_idx(set, images_path.string(), labels_path.string());
  std::cout << "sample: wrote " << n << " images to " << images_path.string()
            << "\n";
  return 0;
}

int cmd_calibrate(const CliArgs& args) {
  RunConfig cfg = RunConfig::resolve(args.kv);
  if (!cfg.target_epsilon) {
    throw std::invalid_argument(
        "calibrate: privacy.target_epsilon is required");
  }
  int n = cfg.n_train;
  if (cfg.data_kind == DataKind::kIdx) {
    n = cfg.load_train_dataset().size();
  }
  const double delta = resolve_delta(cfg, n);
  const double q =
      std::min(1.0, static_cast<double>(cfg.batch_size) / n);
  const double sigma =
      calibrate_sigma(q, cfg.steps, PrivacySpend{*cfg.target_epsilon, delta});

  const RdpCurve curve = compose(rdp_curve(sigma, q), cfg.steps);
  const DpConversion conv = rdp_to_dp(curve, delta);

  std::ostringstream report;
  report << "sigma = " << sigma << "\n"
         << "epsilon = " << conv.epsilon << "\n"
         << "delta = " << delta << "\n"
         << "q = " << q << "\n"
         << "steps = " << cfg.steps << "\n"
         << "best_order = " << conv.best_order << "\n";
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    report << "rdp_eps_alpha_" << curve.orders[i] << " = " << curve.eps[i]
           << "\n";
  }
  std::cout << report.str();
  if (!cfg.out_dir.empty()) {
    const fs::path out = prepare_run_dir(cfg);
    write_file(out / "reports" / "calibration.txt", report.str());
  }
  return 0;
}

FeatureExtractor obtain_extractor(const RunConfig& cfg) {
  ClassifierHyper hyper = cfg.classifier_hyper();
  hyper.init_seed = mix64(cfg.seed, hash_name("extractor"));
  hyper.batch_seed = hyper.init_seed;

  const std::string cache = cfg.extractor_checkpoint;
  if (!cache.empty() && fs::exists(cache)) {
    const Checkpoint ckpt = load_checkpoint(cache);
    FeatureExtractor fx;
    fx.clf.arch = ClassifierArch::parse(ckpt.text.at("__arch__"));
    fx.clf.params = ckpt.extract_prefixed("raw");
    fx.feature_dim = fx.clf.arch.hidden;
    return fx;
  }

  // The extractor is trained on the public pre-training domain and frozen.
  LabeledImageSet pretrain_data =
      cfg.data_kind == DataKind::kToy
          ? cfg.toy_dataset(Domain::kPretrain, Split::kTrain)
          : cfg.load_train_dataset();
  const FeatureExtractor fx =
      train_feature_extractor(pretrain_data, cfg.feature_dim, hyper);
  if (!cache.empty()) {
    Checkpoint ckpt;
    ckpt.add_prefixed("raw", fx.clf.params);
    ckpt.text["__arch__"] = fx.clf.arch.serialize();
    fs::create_directories(fs::path(cache).parent_path());
    save_checkpoint(cache, ckpt);
  }
  return fx;
}

LabeledImageSet load_synth(const RunConfig& cfg) {
  if (cfg.synth_images.empty() || cfg.synth_labels.empty()) {
    throw std::invalid_argument(
        "evaluation: synth.images and synth.labels are required");
  }
  LabeledImageSet synth = load_idx(cfg.synth_images, cfg.synth_labels);
  synth.num_classes = cfg.num_classes;
  synth.domain = Domain::kFinetune;
  return synth;
}

int cmd_eval_fid(const CliArgs& args) {
  RunConfig cfg = RunConfig::resolve(args.kv);
  const fs::path out = prepare_run_dir(cfg);
  const LabeledImageSet real = cfg.load_test_dataset();
  const LabeledImageSet synth = load_synth(cfg);
  const FeatureExtractor fx = obtain_extractor(cfg);

  FidOptions options;
  options.per_class = true;
  const FidResult result = fid_like_score(real, synth, fx, options);

  std::ostringstream tsv;
  tsv << "metric\tclass\tvalue\n";
  tsv << "fid\tall\t" << result.score << "\n";
  tsv << "fid_regularized\tall\t" << (result.regularized ? 1 : 0) << "\n";
  for (const auto& [cls, score] : result.per_class) {
    tsv << "fid\t" << cls << "\t" << score << "\n";
  }
  write_file(out / "reports" / "fid.tsv", tsv.str());
  std::cout << "eval-fid: score = " << result.score
            << (result.regularized ? " (covariance regularized)" : "") << "\n";
  return 0;
}

int cmd_eval_downstream(const CliArgs& args) {
  RunConfig cfg = RunConfig::resolve(args.kv);
  const fs::path out = prepare_run_dir(cfg);
  const LabeledImageSet real_test = cfg.load_test_dataset();
  const LabeledImageSet synth = load_synth(cfg);

  const ClassifierArch arch = cfg.classifier_arch();
  const ClassifierHyper hyper = cfg.classifier_hyper();

  const double single = train_downstream(synth, arch, hyper, real_test);
  const double ensemble =
      cfg.ensemble_members > 1
          ? ensemble_accuracy(synth, arch, hyper, cfg.ensemble_members,
                              real_test)
          : single;

  std::ostringstream tsv;
  tsv << "metric\tclass\tvalue\n";
  tsv << "downstream_accuracy\tall\t" << single << "\n";
  tsv << "ensemble_accuracy\tall\t" << ensemble << "\n";

  if (cfg.data_kind == DataKind::kToy) {
    const LabeledImageSet pre = cfg.toy_dataset(Domain::kPretrain, Split::kVal);
    const LabeledImageSet fin = cfg.toy_dataset(Domain::kFinetune, Split::kVal);
    const DomainDiscriminatorResult disc =
        domain_discriminator(pre, fin, synth, hyper);
    tsv << "domain_fraction_finetune\tall\t" << disc.fraction_finetune << "\n";
    tsv << "domain_holdout_accuracy\tall\t" << disc.holdout_accuracy << "\n";
    tsv << "domain_reliable\tall\t" << (disc.reliable ? 1 : 0) << "\n";
    for (const auto& [cls, frac] : disc.per_class) {
      tsv << "domain_fraction_finetune\t" << cls << "\t" << frac << "\n";
    }
    std::cout << "eval-downstream: accuracy = " << single
              << ", ensemble = " << ensemble
              << ", domain fraction = " << disc.fraction_finetune << "\n";
  } else {
    std::cout << "eval-downstream: accuracy = " << single
              << ", ensemble = " << ensemble << "\n";
  }
  write_file(out / "reports" / "downstream.tsv", tsv.str());
  return 0;
}

int cmd_model_select(const CliArgs& args) {
  RunConfig cfg = RunConfig::resolve(args.kv);
  const fs::path out = prepare_run_dir(cfg);
  const LabeledImageSet synth = load_synth(cfg);
  const LabeledImageSet real_train = cfg.load_train_dataset();
  const LabeledImageSet real_test = cfg.load_test_dataset();

  // Synthetic test split: hold out the tail of the synthetic set.
  const int synth_test_n = std::max(1, synth.size() / 5);
  const int synth_train_n = synth.size() - synth_test_n;
  if (synth_train_n < 1) {
    throw std::invalid_argument("model-select: synthetic set too small");
  }
  LabeledImageSet synth_train = synth.take(synth_train_n);
  LabeledImageSet synth_test;
  synth_test.images = Tensor({synth_test_n, synth.height(), synth.width(),
                              synth.channels()});
  synth_test.labels.resize(static_cast<std::size_t>(synth_test_n));
  synth_test.num_classes = synth.num_classes;
  for (int i = 0; i < synth_test_n; ++i) {
    synth_test.set_example_chw(i, synth.example_chw(synth_train_n + i));
    synth_test.labels[static_cast<std::size_t>(i)] =
        synth.labels[static_cast<std::size_t>(synth_train_n + i)];
  }

  std::vector<SelectionGridPoint> grid;
  for (const std::string& arch_id : cfg.select_archs) {
    ClassifierArch arch = cfg.classifier_arch();
    if (arch_id == "wide") {
      arch.conv1 *= 2;
      arch.conv2 *= 2;
    } else if (arch_id == "deep") {
      arch.hidden *= 2;
    } else if (arch_id != "small") {
      throw std::invalid_argument("model-select: unknown architecture id '" +
                                  arch_id + "' (use small, wide, deep)");
    }
    for (double lr : cfg.select_learning_rates) {
      for (double wd : cfg.select_weight_decays) {
        grid.push_back({arch_id, arch, lr, wd});
      }
    }
  }

  const ModelSelectionResult result = model_selection_study(
      synth_train, synth_test, real_train, real_test, grid,
      cfg.classifier_hyper());

  std::ostringstream tsv;
  tsv << "setting\tarch\tlearning_rate\tweight_decay\tacc_synthetic\tacc_real\n";
  for (const auto& rec : result.setting_a) {
    tsv << "a\t" << rec.arch_id << "\t" << rec.learning_rate << "\t"
        << rec.weight_decay << "\t" << rec.acc_synthetic << "\t"
        << rec.acc_real << "\n";
  }
  for (const auto& rec : result.setting_b) {
    tsv << "b\t" << rec.arch_id << "\t" << rec.learning_rate << "\t"
        << rec.weight_decay << "\t" << rec.acc_synthetic << "\t"
        << rec.acc_real << "\n";
  }
  write_file(out / "reports" / "selection.tsv", tsv.str());

  auto rho_str = [](const std::optional<double>& rho) {
    return rho ? std::to_string(*rho) : std::string("undefined");
  };
  std::cout << "model-select: rho_a = " << rho_str(result.rho_a)
            << ", rho_b = " << rho_str(result.rho_b)
            << ", best-on-real in top-2-by-synthetic: a="
            << (result.best_real_in_top2_by_synth_a ? "yes" : "no") << " b="
            << (result.best_real_in_top2_by_synth_b ? "yes" : "no") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const CliArgs args = parse_args(argc, argv);
    if (args.subcommand == "pretrain") return cmd_pretrain(args);
    if (args.subcommand == "finetune") return cmd_finetune(args);
    if (args.subcommand == "sample") return cmd_sample(args);
    if (args.subcommand == "calibrate") return cmd_calibrate(args);
    if (args.subcommand == "eval-fid") return cmd_eval_fid(args);
    if (args.subcommand == "eval-downstream") return cmd_eval_downstream(args);
    if (args.subcommand == "model-select") return cmd_model_select(args);
    if (args.subcommand == "--help" || args.subcommand == "help") {
      std::cout << kUsage;
      return 0;
    }
    throw std::invalid_argument("unknown subcommand '" + args.subcommand +
                                "'\n" + kUsage);
  } catch (const std::exception& e) {
    std::cerr << "dpdm: " << e.what() << "\n";
    return 1;
  }
}

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

#ifndef DPDM_CONFIG_H_
#define DPDM_CONFIG_H_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dpdm/data.h"
#include "dpdm/diffusion.h"
#include "dpdm/dp_train.h"
#include "dpdm/eval.h"
#include "dpdm/nn.h"

namespace dpdm {

/// Flat `key = value` configuration: a config file plus command-line
/// overrides, overrides winning. Keys that are set but never consumed are
/// reported as errors, naming the key.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig from_file(const std::string& path);

  /// Inserts or overrides one key.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& def) const;
  std::string get_str_required(const std::string& key) const;
  double get_double(const std::string& key, double def) const;
  int get_int(const std::string& key, int def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
  std::optional<double> get_opt_double(const std::string& key) const;
  std::optional<std::string> get_opt_str(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::string& def) const;

  /// Throws if any set key was never read (typo protection).
  void fail_on_unused() const;

 private:
  std::string take(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

enum class DataKind { kToy, kIdx };

/// All effective settings of one run, typed and validated. Serializing back
/// to text yields the `config.resolved` file, sufficient to reproduce the run
/// with the same binary.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir;

  // data
  DataKind data_kind = DataKind::kToy;
  Domain data_domain = Domain::kFinetune;
  int n_train = 4000;
  int n_val = 1000;
  int n_test = 1000;
  int height = 16;
  int width = 16;
  int channels = 1;
  int num_classes = 4;
  std::uint64_t toy_seed = 7;
  std::string idx_images, idx_labels;            // data.kind = idx
  std::string idx_test_images, idx_test_labels;  // optional test files

  // model
  int base_channels = 16;
  int emb_dim = 32;

  // schedule
  int timesteps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  // timestep mixture (weights w_i and the K+1 shared bounds l_1, u_1=l_2,
  // ..., u_K, mirroring the hyperparameter tables)
  std::vector<double> mixture_weights = {1.0};
  std::vector<double> mixture_bounds = {0, 1000};

  // training
  int steps = 200;
  int batch_size = 128;
  int microbatch_size = 32;
  int augmult = 1;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double ema_decay = 0.999;

  // augmentation
  bool aug_hflip = false;
  int aug_max_shift = 0;
  bool aug_resample_timestep = true;

  // privacy
  double clip_norm = 1e-3;
  std::optional<double> noise_multiplier;  // explicit sigma
  std::optional<double> target_epsilon;    // calibrate sigma to this
  std::optional<double> delta;             // defaults to 1/n when unset
  std::optional<double> epsilon_cap;

  // sampling
  int sample_n = 1000;
  bool sample_balanced = true;

  // synthetic data consumed by the eval subcommands (IDX files written by
  // `sample`)
  std::string synth_images, synth_labels;

  // evaluation
  int feature_dim = 64;
  std::string extractor_checkpoint;  // optional cache for the extractor
  int clf_steps = 600;
  int clf_batch_size = 32;
  double clf_learning_rate = 2e-3;
  double clf_weight_decay = 0.0;
  bool clf_hflip = false;
  int clf_max_shift = 0;
  int ensemble_members = 5;

  // model selection grid
  std::vector<std::string> select_archs = {"small", "wide"};
  std::vector<double> select_learning_rates = {5e-4, 2e-3, 8e-3};
  std::vector<double> select_weight_decays = {0.0, 1e-4, 1e-3};

  static RunConfig resolve(const KeyValueConfig& kv);

  /// All effective settings as sorted `key = value` lines.
  std::string resolved_text() const;

  // Derived objects (validated on construction).
  DenoiserArch denoiser_arch() const;
  NoiseSchedule noise_schedule() const;
  TimestepMixture timestep_mixture() const;
  AugmentationPolicy augmentation_policy() const;
  DpTrainConfig train_config() const;  // noise multiplier filled by caller
  ClassifierHyper classifier_hyper() const;
  ClassifierArch classifier_arch() const;

  /// Toy datasets for the configured geometry. Splits use disjoint index
  /// ranges of the pure (spec, index) generator.
  LabeledImageSet toy_dataset(Domain domain, Split split) const;
  /// The training dataset named by data.* (toy or idx).
  LabeledImageSet load_train_dataset() const;
  LabeledImageSet load_test_dataset() const;
};

}  // namespace dpdm

#endif  // DPDM_CONFIG_H_

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

#include "dpdm/config.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dpdm {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  if (value == "inf" || value == "+inf") {
    return std::numeric_limits<double>::infinity();
  }
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config: key '" + key +
                                "' has non-numeric value '" + value + "'");
  }
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config: key '" + key +
                                "' has non-integer value '" + value + "'");
  }
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string join_csv(const std::vector<double>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ',';
    os << fmt_double(xs[i]);
  }
  return os.str();
}

std::string join_csv(const std::vector<std::string>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ',';
    os << xs[i];
  }
  return os.str();
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw std::runtime_error("config: cannot open " + path);
  }
  KeyValueConfig kv;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: " + path + ":" +
                               std::to_string(lineno) +
                               ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config: " + path + ":" +
                               std::to_string(lineno) + ": empty key");
    }
    kv.values_[key] = value;
  }
  return kv;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::string KeyValueConfig::take(const std::string& key) const {
  used_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? std::string() : it->second;
}

std::string KeyValueConfig::get_str(const std::string& key,
                                    const std::string& def) const {
  const std::string v = take(key);
  return has(key) ? v : def;
}

std::string KeyValueConfig::get_str_required(const std::string& key) const {
  if (!has(key)) {
    throw std::invalid_argument("config: missing required key '" + key + "'");
  }
  return take(key);
}

double KeyValueConfig::get_double(const std::string& key, double def) const {
  const std::string v = take(key);
  return has(key) ? parse_double(key, v) : def;
}

int KeyValueConfig::get_int(const std::string& key, int def) const {
  const std::string v = take(key);
  return has(key) ? static_cast<int>(parse_long(key, v)) : def;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key,
                                      std::uint64_t def) const {
  const std::string v = take(key);
  if (!has(key)) return def;
  try {
    return std::stoull(v);
  } catch (...) {
    throw std::invalid_argument("config: key '" + key +
                                "' has non-integer value '" + v + "'");
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool def) const {
  const std::string v = take(key);
  if (!has(key)) return def;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: key '" + key +
                              "' has non-boolean value '" + v + "'");
}

std::optional<double> KeyValueConfig::get_opt_double(
    const std::string& key) const {
  const std::string v = take(key);
  if (!has(key)) return std::nullopt;
  return parse_double(key, v);
}

std::optional<std::string> KeyValueConfig::get_opt_str(
    const std::string& key) const {
  const std::string v = take(key);
  if (!has(key)) return std::nullopt;
  return v;
}

std::vector<double> KeyValueConfig::get_double_list(
    const std::string& key, const std::string& def) const {
  const std::string stored = take(key);
  const std::string v = has(key) ? stored : def;
  std::vector<double> out;
  for (const std::string& item : split_csv(v)) {
    out.push_back(parse_double(key, item));
  }
  return out;
}

void KeyValueConfig::fail_on_unused() const {
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
}

RunConfig RunConfig::resolve(const KeyValueConfig& kv) {
  RunConfig c;
  c.seed = kv.get_u64("seed", c.seed);
  c.out_dir = kv.get_str("out", c.out_dir);

  const std::string kind = kv.get_str("data.kind", "toy");
  if (kind == "toy") {
    c.data_kind = DataKind::kToy;
  } else if (kind == "idx") {
    c.data_kind = DataKind::kIdx;
  } else {
    throw std::invalid_argument("config: key 'data.kind' must be toy or idx");
  }
  const std::string domain = kv.get_str("data.domain", "finetune");
  if (domain == "pretrain") {
    c.data_domain = Domain::kPretrain;
  } else if (domain == "finetune") {
    c.data_domain = Domain::kFinetune;
  } else {
    throw std::invalid_argument(
        "config: key 'data.domain' must be pretrain or finetune");
  }
  c.n_train = kv.get_int("data.n_train", c.n_train);
  c.n_val = kv.get_int("data.n_val", c.n_val);
  c.n_test = kv.get_int("data.n_test", c.n_test);
  c.height = kv.get_int("data.height", c.height);
  c.width = kv.get_int("data.width", c.width);
  c.channels = kv.get_int("data.channels", c.channels);
  c.num_classes = kv.get_int("data.num_classes", c.num_classes);
  c.toy_seed = kv.get_u64("data.toy_seed", c.toy_seed);
  c.idx_images = kv.get_str("data.images", "");
  c.idx_labels = kv.get_str("data.labels", "");
  c.idx_test_images = kv.get_str("data.test_images", "");
  c.idx_test_labels = kv.get_str("data.test_labels", "");

  c.base_channels = kv.get_int("model.base_channels", c.base_channels);
  c.emb_dim = kv.get_int("model.emb_dim", c.emb_dim);

  c.timesteps = kv.get_int("schedule.timesteps", c.timesteps);
  c.beta_start = kv.get_double("schedule.beta_start", c.beta_start);
  c.beta_end = kv.get_double("schedule.beta_end", c.beta_end);

  c.mixture_weights = kv.get_double_list("mixture.weights", "1.0");
  c.mixture_bounds = kv.get_double_list(
      "mixture.bounds", "0," + std::to_string(c.timesteps));

  c.steps = kv.get_int("train.steps", c.steps);
  c.batch_size = kv.get_int("train.batch_size", c.batch_size);
  c.microbatch_size = kv.get_int("train.microbatch_size", c.microbatch_size);
  c.augmult = kv.get_int("train.augmult", c.augmult);
  const std::string opt = kv.get_str("train.optimizer", "dp-adam");
  if (opt == "dp-adam" || opt == "adam") {
    c.optimizer = OptimizerKind::kAdam;
  } else if (opt == "dp-sgd" || opt == "sgd") {
    c.optimizer = OptimizerKind::kSgd;
  } else {
    throw std::invalid_argument(
        "config: key 'train.optimizer' must be dp-adam or dp-sgd");
  }
  c.learning_rate = kv.get_double("train.learning_rate", c.learning_rate);
  c.beta1 = kv.get_double("train.beta1", c.beta1);
  c.beta2 = kv.get_double("train.beta2", c.beta2);
  c.adam_eps = kv.get_double("train.adam_eps", c.adam_eps);
  c.ema_decay = kv.get_double("train.ema_decay", c.ema_decay);

  c.aug_hflip = kv.get_bool("aug.hflip", c.aug_hflip);
  c.aug_max_shift = kv.get_int("aug.max_shift", c.aug_max_shift);
  c.aug_resample_timestep =
      kv.get_bool("aug.resample_timestep", c.aug_resample_timestep);

  c.clip_norm = kv.get_double("privacy.clip_norm", c.clip_norm);
  c.noise_multiplier = kv.get_opt_double("privacy.noise_multiplier");
  c.target_epsilon = kv.get_opt_double("privacy.target_epsilon");
  c.delta = kv.get_opt_double("privacy.delta");
  c.epsilon_cap = kv.get_opt_double("privacy.epsilon_cap");

  c.sample_n = kv.get_int("sample.n", c.sample_n);
  c.sample_balanced = kv.get_bool("sample.balanced", c.sample_balanced);

  c.synth_images = kv.get_str("synth.images", "");
  c.synth_labels = kv.get_str("synth.labels", "");

  c.feature_dim = kv.get_int("eval.feature_dim", c.feature_dim);
  c.extractor_checkpoint = kv.get_str("eval.extractor_checkpoint", "");
  c.clf_steps = kv.get_int("clf.steps", c.clf_steps);
  c.clf_batch_size = kv.get_int("clf.batch_size", c.clf_batch_size);
  c.clf_learning_rate = kv.get_double("clf.learning_rate", c.clf_learning_rate);
  c.clf_weight_decay = kv.get_double("clf.weight_decay", c.clf_weight_decay);
  c.clf_hflip = kv.get_bool("clf.hflip", c.clf_hflip);
  c.clf_max_shift = kv.get_int("clf.max_shift", c.clf_max_shift);
  c.ensemble_members = kv.get_int("eval.ensemble_members", c.ensemble_members);

  {
    std::vector<std::string> archs;
    const std::string v = kv.get_str("select.archs", join_csv(c.select_archs));
    for (const std::string& item : split_csv(v)) archs.push_back(item);
    c.select_archs = archs;
  }
  c.select_learning_rates = kv.get_double_list(
      "select.learning_rates", join_csv(c.select_learning_rates));
  c.select_weight_decays = kv.get_double_list(
      "select.weight_decays", join_csv(c.select_weight_decays));

  kv.fail_on_unused();

  // Re-validate module invariants at parse time.
  if (c.target_epsilon && c.noise_multiplier) {
    throw std::invalid_argument(
        "config: provide exactly one of privacy.target_epsilon and "
        "privacy.noise_multiplier, not both");
  }
  c.denoiser_arch();
  c.noise_schedule();
  c.timestep_mixture();
  c.augmentation_policy().validate(c.augmult);
  DpTrainConfig t = c.train_config();
  t.noise_multiplier = c.noise_multiplier.value_or(0.0);
  t.validate();
  return c;
}

std::string RunConfig::resolved_text() const {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(seed);
  kv["out"] = out_dir;
  kv["data.kind"] = data_kind == DataKind::kToy ? "toy" : "idx";
  kv["data.domain"] =
      data_domain == Domain::kPretrain ? "pretrain" : "finetune";
  kv["data.n_train"] = std::to_string(n_train);
  kv["data.n_val"] = std::to_string(n_val);
  kv["data.n_test"] = std::to_string(n_test);
  kv["data.height"] = std::to_string(height);
  kv["data.width"] = std::to_string(width);
  kv["data.channels"] = std::to_string(channels);
  kv["data.num_classes"] = std::to_string(num_classes);
  kv["data.toy_seed"] = std::to_string(toy_seed);
  kv["data.images"] = idx_images;
  kv["data.labels"] = idx_labels;
  kv["data.test_images"] = idx_test_images;
  kv["data.test_labels"] = idx_test_labels;
  kv["model.base_channels"] = std::to_string(base_channels);
  kv["model.emb_dim"] = std::to_string(emb_dim);
  kv["schedule.timesteps"] = std::to_string(timesteps);
  kv["schedule.beta_start"] = fmt_double(beta_start);
  kv["schedule.beta_end"] = fmt_double(beta_end);
  kv["mixture.weights"] = join_csv(mixture_weights);
  kv["mixture.bounds"] = join_csv(mixture_bounds);
  kv["train.steps"] = std::to_string(steps);
  kv["train.batch_size"] = std::to_string(batch_size);
  kv["train.microbatch_size"] = std::to_string(microbatch_size);
  kv["train.augmult"] = std::to_string(augmult);
  kv["train.optimizer"] =
      optimizer == OptimizerKind::kAdam ? "dp-adam" : "dp-sgd";
  kv["train.learning_rate"] = fmt_double(learning_rate);
  kv["train.beta1"] = fmt_double(beta1);
  kv["train.beta2"] = fmt_double(beta2);
  kv["train.adam_eps"] = fmt_double(adam_eps);
  kv["train.ema_decay"] = fmt_double(ema_decay);
  kv["aug.hflip"] = aug_hflip ? "true" : "false";
  kv["aug.max_shift"] = std::to_string(aug_max_shift);
  kv["aug.resample_timestep"] = aug_resample_timestep ? "true" : "false";
  kv["privacy.clip_norm"] = fmt_double(clip_norm);
  if (noise_multiplier) {
    kv["privacy.noise_multiplier"] = fmt_double(*noise_multiplier);
  }
  if (target_epsilon) kv["privacy.target_epsilon"] = fmt_double(*target_epsilon);
  if (delta) kv["privacy.delta"] = fmt_double(*delta);
  if (epsilon_cap) kv["privacy.epsilon_cap"] = fmt_double(*epsilon_cap);
  kv["sample.n"] = std::to_string(sample_n);
  kv["sample.balanced"] = sample_balanced ? "true" : "false";
  kv["synth.images"] = synth_images;
  kv["synth.labels"] = synth_labels;
  kv["eval.feature_dim"] = std::to_string(feature_dim);
  kv["eval.extractor_checkpoint"] = extractor_checkpoint;
  kv["eval.ensemble_members"] = std::to_string(ensemble_members);
  kv["clf.steps"] = std::to_string(clf_steps);
  kv["clf.batch_size"] = std::to_string(clf_batch_size);
  kv["clf.learning_rate"] = fmt_double(clf_learning_rate);
  kv["clf.weight_decay"] = fmt_double(clf_weight_decay);
  kv["clf.hflip"] = clf_hflip ? "true" : "false";
  kv["clf.max_shift"] = std::to_string(clf_max_shift);
  kv["select.archs"] = join_csv(select_archs);
  kv["select.learning_rates"] = join_csv(select_learning_rates);
  kv["select.weight_decays"] = join_csv(select_weight_decays);

  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
  return os.str();
}

DenoiserArch RunConfig::denoiser_arch() const {
  DenoiserArch a;
  a.channels = channels;
  a.height = height;
  a.width = width;
  a.base_channels = base_channels;
  a.emb_dim = emb_dim;
  a.num_classes = num_classes;
  a.validate();
  return a;
}

NoiseSchedule RunConfig::noise_schedule() const {
  return make_linear_schedule(timesteps, beta_start, beta_end);
}

TimestepMixture RunConfig::timestep_mixture() const {
  if (mixture_bounds.size() != mixture_weights.size() + 1) {
    throw std::invalid_argument(
        "config: mixture.bounds must have one more entry than "
        "mixture.weights");
  }
  TimestepMixture m;
  for (std::size_t i = 0; i < mixture_weights.size(); ++i) {
    m.components.push_back({mixture_weights[i],
                            static_cast<int>(mixture_bounds[i]),
                            static_cast<int>(mixture_bounds[i + 1])});
  }
  m.validate(timesteps);
  return m;
}

AugmentationPolicy RunConfig::augmentation_policy() const {
  AugmentationPolicy p;
  p.hflip = aug_hflip;
  p.max_shift = aug_max_shift;
  p.resample_timestep = aug_resample_timestep;
  return p;
}

DpTrainConfig RunConfig::train_config() const {
  DpTrainConfig t;
  t.clip_norm = clip_norm;
  t.noise_multiplier = noise_multiplier.value_or(0.0);
  t.batch_size = batch_size;
  t.microbatch_size = std::min(microbatch_size, batch_size);
  t.steps = steps;
  t.augmult = augmult;
  t.optimizer = optimizer;
  t.learning_rate = learning_rate;
  t.beta1 = beta1;
  t.beta2 = beta2;
  t.adam_eps = adam_eps;
  t.ema_decay = ema_decay;
  t.delta = delta.value_or(1e-5);
  t.epsilon_cap = epsilon_cap;
  return t;
}

ClassifierHyper RunConfig::classifier_hyper() const {
  ClassifierHyper h;
  h.steps = clf_steps;
  h.batch_size = clf_batch_size;
  h.learning_rate = clf_learning_rate;
  h.weight_decay = clf_weight_decay;
  h.hflip = clf_hflip;
  h.max_shift = clf_max_shift;
  h.init_seed = seed;
  h.batch_seed = seed;
  return h;
}

ClassifierArch RunConfig::classifier_arch() const {
  ClassifierArch a;
  a.channels = channels;
  a.height = height;
  a.width = width;
  a.hidden = feature_dim;
  a.num_classes = num_classes;
  a.validate();
  return a;
}

LabeledImageSet RunConfig::toy_dataset(Domain domain, Split split) const {
  ToyDomainSpec spec = domain == Domain::kPretrain
                           ? ToyDomainSpec::pretrain_default(toy_seed)
                           : ToyDomainSpec::finetune_default(toy_seed + 1);
  spec.height = height;
  spec.width = width;
  spec.channels = channels;
  spec.num_classes = num_classes;
  int n = n_train;
  std::int64_t offset = 0;
  if (split == Split::kVal) {
    n = n_val;
    offset = 10'000'000;
  } else if (split == Split::kTest) {
    n = n_test;
    offset = 20'000'000;
  }
  return generate_toy(spec, n, split, offset);
}

LabeledImageSet RunConfig::load_train_dataset() const {
  if (data_kind == DataKind::kIdx) {
    if (idx_images.empty() || idx_labels.empty()) {
      throw std::invalid_argument(
          "config: data.kind = idx requires data.images and data.labels");
    }
    return load_idx(idx_images, idx_labels);
  }
  return toy_dataset(data_domain, Split::kTrain);
}

LabeledImageSet RunConfig::load_test_dataset() const {
  if (data_kind == DataKind::kIdx) {
    if (idx_test_images.empty() || idx_test_labels.empty()) {
      throw std::invalid_argument(
          "config: data.kind = idx requires data.test_images and "
          "data.test_labels for evaluation");
    }
    return load_idx(idx_test_images, idx_test_labels);
  }
  return toy_dataset(data_domain, Split::kTest);
}

}  // namespace dpdm

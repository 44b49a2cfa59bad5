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

#ifndef DPDM_DP_TRAIN_H_
#define DPDM_DP_TRAIN_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpdm/data.h"
#include "dpdm/diffusion.h"
#include "dpdm/graph.h"
#include "dpdm/model.h"
#include "dpdm/nn.h"
#include "dpdm/parallel.h"
#include "dpdm/params.h"
#include "dpdm/privacy.h"
#include "dpdm/rng.h"

namespace dpdm {

enum class OptimizerKind { kSgd, kAdam };

/// Differentially private training configuration. `noise_multiplier == 0`
/// with an infinite clip norm is the non-private mode used for pre-training.
struct DpTrainConfig {
  double clip_norm = 1e-3;  // C; may be +infinity in the non-private mode
  double noise_multiplier = 0.0;  // sigma
  int batch_size = 128;     // B, the expected Poisson batch size
  int microbatch_size = 32;
  int steps = 100;
  int augmult = 1;  // K
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double ema_decay = 0.9999;
  double delta = 1e-5;
  std::optional<double> epsilon_cap;  // hard budget; stops training when hit

  bool is_private() const { return noise_multiplier > 0.0; }

  void validate() const {
    if (!(clip_norm > 0.0)) {
      throw std::invalid_argument("dp config: clip_norm must be > 0");
    }
    if (noise_multiplier < 0.0) {
      throw std::invalid_argument("dp config: noise_multiplier must be >= 0");
    }
    if (batch_size < 1 || microbatch_size < 1 ||
        microbatch_size > batch_size) {
      throw std::invalid_argument(
          "dp config: need 1 <= microbatch_size <= batch_size");
    }
    if (steps < 0) {
      throw std::invalid_argument("dp config: steps must be >= 0");
    }
    if (augmult < 1) {
      throw std::invalid_argument("dp config: augmult must be >= 1");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
      throw std::invalid_argument("dp config: delta must be in (0, 1)");
    }
  }
};

/// clip_C(v) = min(1, C / ||v||_2) * v over the flattened gradient vector.
/// Inputs already inside the ball pass through unchanged.
template <typename S>
ParameterSetT<S> clip_gradient(ParameterSetT<S> grad, double clip_norm) {
  if (!(clip_norm > 0.0)) {
    throw std::invalid_argument("clip: clip_norm must be > 0");
  }
  if (std::isinf(clip_norm)) return grad;
  const double norm = grad.l2_norm();
  if (norm <= clip_norm) return grad;
  grad.scale(clip_norm / norm);
  return grad;
}

template <typename S>
struct ExampleGradT {
  ParameterSetT<S> grad;
  double loss = 0.0;
};

/// One materialized training draw: an augmented view of the example, a
/// diffusion timestep, and a noise sample.
template <typename S>
struct LossDrawT {
  TensorT<S> view;
  int t = 1;
  TensorT<S> eps;
};

/// Unweighted mean of the single-draw diffusion-loss gradients over the given
/// draws; NOT yet clipped. Averaging happens here, before any clipping.
template <typename S>
ExampleGradT<S> gradient_from_draws(const DenoiserArch& arch,
                                    const ParameterSetT<S>& params, int label,
                                    const std::vector<LossDrawT<S>>& draws,
                                    const NoiseSchedule& schedule) {
  if (draws.empty()) {
    throw std::invalid_argument("gradient_from_draws: no draws");
  }
  ExampleGradT<S> result;
  result.grad = ParameterSetT<S>::zeros_like(params);
  const double inv_k = 1.0 / static_cast<double>(draws.size());
  for (const LossDrawT<S>& draw : draws) {
    GraphT<S> graph;
    ModelContextT<S> ctx(graph, params);
    const int loss = diffusion_loss_node(ctx, arch, draw.view, label, draw.t,
                                         draw.eps, schedule);
    graph.backward(loss);
    result.grad.add_scaled(ctx.collect_gradients(), inv_k);
    result.loss += static_cast<double>(graph.value(loss)[0]) * inv_k;
  }
  return result;
}

/// Materializes K (augmented image, timestep, eps) triples. Timesteps come
/// from the mixture (re-drawn per view when the policy says so, otherwise
/// shared); draws outside the schedule's 1-based grid are lifted to t = 1.
template <typename S>
std::vector<LossDrawT<S>> make_loss_draws(const TensorT<S>& image_chw,
                                          const AugmentationPolicy& policy,
                                          int augmult,
                                          const TimestepMixture& mixture,
                                          Rng aug_rng, Rng t_rng,
                                          Rng eps_rng) {
  if (augmult < 1) {
    throw std::invalid_argument("loss draws: augmult must be >= 1");
  }
  const Tensor image_f = image_chw.template cast<float>();
  std::vector<LossDrawT<S>> draws(static_cast<std::size_t>(augmult));
  int t = std::max(1, mixture.sample(t_rng));
  for (int k = 0; k < augmult; ++k) {
    if (policy.resample_timestep && k > 0) {
      t = std::max(1, mixture.sample(t_rng));
    }
    LossDrawT<S>& draw = draws[static_cast<std::size_t>(k)];
    draw.view = augment(image_f, policy, aug_rng).template cast<S>();
    draw.t = t;
    draw.eps = TensorT<S>(draw.view.shape());
    for (auto& v : draw.eps.data()) v = static_cast<S>(eps_rng.normal());
  }
  return draws;
}

/// Mean over K (augmented image, timestep, eps) draws of the single-draw
/// diffusion-loss gradient; NOT yet clipped.
template <typename S>
ExampleGradT<S> per_example_augmented_gradient(
    const DenoiserArch& arch, const ParameterSetT<S>& params,
    const TensorT<S>& image_chw, int label, const AugmentationPolicy& policy,
    int augmult, const TimestepMixture& mixture, const NoiseSchedule& schedule,
    Rng aug_rng, Rng t_rng, Rng eps_rng) {
  const std::vector<LossDrawT<S>> draws = make_loss_draws<S>(
      image_chw, policy, augmult, mixture, aug_rng, t_rng, eps_rng);
  return gradient_from_draws(arch, params, label, draws, schedule);
}

template <typename S>
struct AdamStateT {
  ParameterSetT<S> m;
  ParameterSetT<S> v;
  long step_count = 0;

  static AdamStateT zeros_like(const ParameterSetT<S>& params) {
    return AdamStateT{ParameterSetT<S>::zeros_like(params),
                      ParameterSetT<S>::zeros_like(params), 0};
  }
};

/// One Adam update applied to an already-privatised gradient (post-processing,
/// so privacy is unaffected). Bias-corrected moments; the stability constant
/// sits outside the square root.
template <typename S>
void dp_adam_update(ParameterSetT<S>& params, AdamStateT<S>& state,
                    const ParameterSetT<S>& g_hat, double learning_rate,
                    double beta1, double beta2, double stability) {
  params.check_structure_matches(g_hat, "adam update");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(beta2, state.step_count);
  auto p = params.begin();
  auto m = state.m.begin();
  auto v = state.v.begin();
  auto g = g_hat.begin();
  for (; p != params.end(); ++p, ++m, ++v, ++g) {
    auto pd = p->second.data();
    auto md = m->second.data();
    auto vd = v->second.data();
    auto gd = g->second.data();
    for (std::size_t i = 0; i < pd.size(); ++i) {
      const double gi = static_cast<double>(gd[i]);
      const double mi = beta1 * md[i] + (1.0 - beta1) * gi;
      const double vi = beta2 * vd[i] + (1.0 - beta2) * gi * gi;
      md[i] = static_cast<S>(mi);
      vd[i] = static_cast<S>(vi);
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      pd[i] = static_cast<S>(pd[i] -
                             learning_rate * m_hat /
                                 (std::sqrt(v_hat) + stability));
    }
  }
}

template <typename S>
void sgd_update(ParameterSetT<S>& params, const ParameterSetT<S>& g_hat,
                double learning_rate) {
  params.add_scaled(g_hat, -learning_rate);
}

struct StepStats {
  double mean_loss = 0.0;
  double grad_norm_median_clipped = 0.0;
  double grad_norm_p95_clipped = 0.0;
  int realized_batch = 0;
};

/// One privatised optimizer step over a sampled batch:
///   g_hat = (1/B) [ sum_i clip_C(g_i) + sigma C xi ],  xi ~ N(0, I).
///
/// Per-example gradients are computed microbatch by microbatch (a worker pool
/// may fill the slots of one microbatch concurrently); clipping and the sum
/// run in batch order afterwards, so the result does not depend on the
/// microbatch size or thread count.
template <typename S>
StepStats private_step(
    ParameterSetT<S>& params,
    const std::vector<int>& batch,
    const std::function<ExampleGradT<S>(int)>& grad_fn,
    const DpTrainConfig& cfg, Rng& noise_rng, AdamStateT<S>* adam_state) {
  cfg.validate();
  StepStats stats;
  stats.realized_batch = static_cast<int>(batch.size());

  ParameterSetT<S> sum = ParameterSetT<S>::zeros_like(params);
  std::vector<double> clipped_norms;
  clipped_norms.reserve(batch.size());
  double loss_acc = 0.0;

  const int n = static_cast<int>(batch.size());
  for (int begin = 0; begin < n; begin += cfg.microbatch_size) {
    const int end = std::min(n, begin + cfg.microbatch_size);
    std::vector<ExampleGradT<S>> slots(static_cast<std::size_t>(end - begin));
    parallel_for(end - begin, [&](int i) {
      slots[static_cast<std::size_t>(i)] = grad_fn(batch[begin + i]);
    });
    for (auto& slot : slots) {
      ParameterSetT<S> clipped =
          clip_gradient(std::move(slot.grad), cfg.clip_norm);
      clipped_norms.push_back(clipped.l2_norm());
      sum.add_scaled(clipped, 1.0);
      loss_acc += slot.loss;
    }
  }

  if (cfg.noise_multiplier > 0.0) {
    if (std::isinf(cfg.clip_norm)) {
      throw std::invalid_argument(
          "private step: noise injection needs a finite clip norm");
    }
    const double noise_std = cfg.noise_multiplier * cfg.clip_norm;
    for (auto& [name, t] : sum) {
      for (S& x : t.data()) {
        x = static_cast<S>(x + noise_std * noise_rng.normal());
      }
    }
  }
  sum.scale(1.0 / cfg.batch_size);

  for (const auto& [name, t] : sum) {
    for (S x : t.data()) {
      if (!std::isfinite(static_cast<double>(x))) {
        throw std::runtime_error(
            "private step: non-finite gradient in parameter '" + name + "'");
      }
    }
  }

  if (cfg.optimizer == OptimizerKind::kAdam) {
    if (!adam_state) {
      throw std::invalid_argument("private step: adam requires moment state");
    }
    dp_adam_update(params, *adam_state, sum, cfg.learning_rate, cfg.beta1,
                   cfg.beta2, cfg.adam_eps);
  } else {
    sgd_update(params, sum, cfg.learning_rate);
  }

  stats.mean_loss = batch.empty() ? 0.0 : loss_acc / static_cast<double>(n);
  if (!clipped_norms.empty()) {
    std::sort(clipped_norms.begin(), clipped_norms.end());
    const std::size_t mid = clipped_norms.size() / 2;
    stats.grad_norm_median_clipped =
        clipped_norms.size() % 2 == 1
            ? clipped_norms[mid]
            : 0.5 * (clipped_norms[mid - 1] + clipped_norms[mid]);
    const std::size_t p95 = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(clipped_norms.size())));
    stats.grad_norm_p95_clipped = clipped_norms[std::min(
        clipped_norms.size() - 1, p95 == 0 ? 0 : p95 - 1)];
  }
  return stats;
}

struct TrainLogRecord {
  int step = 0;
  double loss = 0.0;
  double epsilon_spent = 0.0;  // +inf for non-private runs
  double grad_norm_median_clipped = 0.0;
};

enum class TrainStatus { kCompleted, kBudgetExhausted };

template <typename S>
struct TrainResultT {
  ParameterSetT<S> params;
  ParameterSetT<S> ema;
  std::vector<TrainLogRecord> log;
  PrivacySpend spend;
  TrainStatus status = TrainStatus::kCompleted;
};

using TrainResult = TrainResultT<float>;

/// Full training loop: Poisson-subsampled batches of expected size B,
/// per-example augmented gradients, clipping, noise, optimizer updates, EMA
/// tracking, and per-step privacy accounting. Pre-training is the same loop
/// with sigma = 0 and an infinite clip norm; fine-tuning passes the
/// pre-trained parameters as `init`.
template <typename S>
TrainResultT<S> train(const LabeledImageSet& data, const DenoiserArch& arch,
                      const DpTrainConfig& cfg,
                      const AugmentationPolicy& policy,
                      const TimestepMixture& mixture,
                      const NoiseSchedule& schedule, std::uint64_t seed,
                      const ParameterSetT<S>* init = nullptr,
                      const std::function<void(const TrainLogRecord&)>&
                          log_sink = nullptr) {
  cfg.validate();
  policy.validate(cfg.augmult);
  mixture.validate(schedule.num_timesteps);
  const int n = data.size();
  if (n < 1) {
    throw std::invalid_argument("train: dataset is empty");
  }

  TrainResultT<S> result;
  result.params = init ? *init
                       : init_denoiser_params<S>(arch, Rng::stream(seed, "init"));
  EmaTrackerT<S> ema(cfg.ema_decay, result.params);
  AdamStateT<S> adam = AdamStateT<S>::zeros_like(result.params);

  const Rng batch_stream = Rng::stream(seed, "batch-sampling");
  const Rng aug_stream = Rng::stream(seed, "augmentation");
  const Rng eps_stream = Rng::stream(seed, "diffusion-eps");
  Rng noise_rng = Rng::stream(seed, "dp-noise");

  const double q = std::min(1.0, static_cast<double>(cfg.batch_size) / n);

  RdpCurve per_step;
  if (cfg.is_private()) {
    per_step = rdp_curve(cfg.noise_multiplier, q);
  }
  auto epsilon_after = [&](int step_count) {
    if (!cfg.is_private()) return std::numeric_limits<double>::infinity();
    if (step_count == 0) return 0.0;
    return rdp_to_dp(compose(per_step, step_count), cfg.delta).epsilon;
  };

  result.status = TrainStatus::kCompleted;
  for (int step = 1; step <= cfg.steps; ++step) {
    const double eps_next = epsilon_after(step);
    if (cfg.epsilon_cap && cfg.is_private() && eps_next > *cfg.epsilon_cap) {
      result.status = TrainStatus::kBudgetExhausted;
      break;
    }

    Rng batch_rng = batch_stream.fork(static_cast<std::uint64_t>(step));
    std::vector<int> batch;
    for (int i = 0; i < n; ++i) {
      if (batch_rng.uniform() < q) batch.push_back(i);
    }

    auto grad_fn = [&](int example) {
      const std::uint64_t s = static_cast<std::uint64_t>(step);
      const std::uint64_t e = static_cast<std::uint64_t>(example);
      const Rng draw = eps_stream.fork(s, e);
      return per_example_augmented_gradient<S>(
          arch, result.params, data.example_chw(example).template cast<S>(),
          data.labels[static_cast<std::size_t>(example)], policy, cfg.augmult,
          mixture, schedule, aug_stream.fork(s, e), draw.fork(1),
          draw.fork(2));
    };

    const StepStats stats = private_step<S>(
        result.params, batch, grad_fn, cfg, noise_rng,
        cfg.optimizer == OptimizerKind::kAdam ? &adam : nullptr);
    ema.update(result.params);

    TrainLogRecord rec{step, stats.mean_loss, eps_next,
                       stats.grad_norm_median_clipped};
    result.log.push_back(rec);
    if (log_sink) log_sink(rec);
    result.spend = PrivacySpend{eps_next, cfg.delta};
  }
  if (result.log.empty()) {
    result.spend = PrivacySpend{epsilon_after(0), cfg.delta};
  }
  result.ema = ema.shadow;
  return result;
}

}  // namespace dpdm

#endif  // DPDM_DP_TRAIN_H_

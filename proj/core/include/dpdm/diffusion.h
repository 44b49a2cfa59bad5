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

#ifndef DPDM_DIFFUSION_H_
#define DPDM_DIFFUSION_H_

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpdm/graph.h"
#include "dpdm/model.h"
#include "dpdm/nn.h"
#include "dpdm/params.h"
#include "dpdm/rng.h"
#include "dpdm/tensor.h"

namespace dpdm {

/// Forward-process tables. beta[t-1] holds beta_t and alpha_bar[t-1] holds
/// the running product of (1 - beta_s) for s <= t; timesteps are 1-based.
struct NoiseSchedule {
  int num_timesteps = 0;
  std::vector<double> beta;
  std::vector<double> alpha_bar;

  double beta_at(int t) const { return beta[static_cast<std::size_t>(t - 1)]; }
  double alpha_bar_at(int t) const {
    return alpha_bar[static_cast<std::size_t>(t - 1)];
  }
  void check_timestep(int t) const {
    if (t < 1 || t > num_timesteps) {
      throw std::invalid_argument("schedule: timestep " + std::to_string(t) +
                                  " outside [1, " +
                                  std::to_string(num_timesteps) + "]");
    }
  }
};

/// Linear beta schedule with inclusive endpoints. With T == 1 the single
/// entry is beta_start.
NoiseSchedule make_linear_schedule(int num_timesteps, double beta_start,
                                   double beta_end);

/// Mixture of discrete uniform components over integer timesteps. Components
/// are ordered and may share endpoints but not overlap otherwise.
struct TimestepMixture {
  struct Component {
    double weight = 1.0;
    int lo = 0;
    int hi = 0;
  };
  std::vector<Component> components;

  static TimestepMixture uniform(int lo, int hi);

  /// Validates weights sum to 1 (within 1e-9), bounds ordering, and that the
  /// mixture lies within [0, max_timestep].
  void validate(int max_timestep) const;

  /// Draws component i with probability w_i, then t uniform on [lo_i, hi_i].
  int sample(Rng& rng) const;

  /// Exact probability that a draw lands in [lo, hi] (inclusive).
  double prob_in_range(int lo, int hi) const;
};

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
template <typename S>
TensorT<S> forward_noise(const NoiseSchedule& schedule, const TensorT<S>& x0,
                         int t, const TensorT<S>& eps) {
  schedule.check_timestep(t);
  if (!x0.same_shape(eps)) {
    throw std::invalid_argument("forward_noise: shape mismatch " +
                                x0.shape_str() + " vs " + eps.shape_str());
  }
  const double ab = schedule.alpha_bar_at(t);
  const S c0 = static_cast<S>(std::sqrt(ab));
  const S c1 = static_cast<S>(std::sqrt(1.0 - ab));
  TensorT<S> out = x0;
  auto od = out.data();
  auto ed = eps.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = c0 * od[i] + c1 * ed[i];
  return out;
}

/// Builds the single-draw training loss ||eps - eps_theta(x_t, t, label)||^2
/// (sum over coordinates) on the context's graph and returns the loss node.
template <typename S>
int diffusion_loss_node(ModelContextT<S>& ctx, const DenoiserArch& arch,
                        const TensorT<S>& x0, int label, int t,
                        const TensorT<S>& eps, const NoiseSchedule& schedule) {
  auto& g = ctx.graph();
  const int xt = g.constant(forward_noise(schedule, x0, t, eps));
  const int t_node = g.constant(TensorT<S>::scalar(static_cast<S>(t)));
  const int predicted = apply_denoiser(ctx, arch, xt, t_node, label);
  const int eps_node = g.constant(eps);
  return g.squared_error(eps_node, predicted, Reduction::kSum);
}

/// Loss value without gradient tracking.
template <typename S>
S diffusion_loss_value(const DenoiserArch& arch, const ParameterSetT<S>& params,
                       const TensorT<S>& x0, int label, int t,
                       const TensorT<S>& eps, const NoiseSchedule& schedule) {
  GraphT<S> g;
  ModelContextT<S> ctx(g, params);
  const int loss = diffusion_loss_node(ctx, arch, x0, label, t, eps, schedule);
  return g.value(loss)[0];
}

/// Noise predictor as a plain function of (x_t, t, label); lets samplers run
/// against trained weights, oracles, or counters alike.
using DenoiserFn = std::function<Tensor(const Tensor& xt, int t, int label)>;

/// Single denoiser evaluation without gradient tracking.
Tensor denoiser_eval(const DenoiserArch& arch, const ParameterSet& params,
                     const Tensor& xt, int t, int label);

DenoiserFn make_denoiser_fn(const DenoiserArch& arch,
                            const ParameterSet& params);

/// DDPM ancestral sampling: start from x_T ~ N(0, I) and for t = T..1 apply
///   x_{t-1} = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_theta) / sqrt(alpha_t)
///             + sqrt(beta_t) * z,
/// with z ~ N(0, I) for t > 1 and z = 0 at t = 1. The result is clamped to
/// the data range [-1, 1]. Consumes exactly T denoiser evaluations.
Tensor ancestral_sample(const DenoiserFn& denoiser,
                        const NoiseSchedule& schedule,
                        const std::vector<int>& shape, int label, Rng& rng);

/// Exponential moving average of a parameter set:
/// shadow <- decay * shadow + (1 - decay) * params.
template <typename S>
struct EmaTrackerT {
  double decay = 0.9999;
  ParameterSetT<S> shadow;

  EmaTrackerT(double decay_rate, const ParameterSetT<S>& initial)
      : decay(decay_rate), shadow(initial) {
    if (!(decay >= 0.0 && decay <= 1.0)) {
      throw std::invalid_argument("ema: decay must be in [0, 1]");
    }
  }

  void update(const ParameterSetT<S>& params) {
    shadow.check_structure_matches(params, "ema update");
    auto s = shadow.begin();
    auto p = params.begin();
    for (; s != shadow.end(); ++s, ++p) {
      auto sd = s->second.data();
      auto pd = p->second.data();
      for (std::size_t i = 0; i < sd.size(); ++i) {
        sd[i] = static_cast<S>(decay * sd[i] + (1.0 - decay) * pd[i]);
      }
    }
  }
};

using EmaTracker = EmaTrackerT<float>;

}  // namespace dpdm

#endif  // DPDM_DIFFUSION_H_

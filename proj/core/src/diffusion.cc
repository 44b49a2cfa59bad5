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

#include "dpdm/diffusion.h"

#include <algorithm>

namespace dpdm {

NoiseSchedule make_linear_schedule(int num_timesteps, double beta_start,
                                   double beta_end) {
  if (num_timesteps < 1) {
    throw std::invalid_argument("schedule: need at least one timestep");
  }
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw std::invalid_argument(
        "schedule: require 0 < beta_start <= beta_end < 1, got [" +
        std::to_string(beta_start) + ", " + std::to_string(beta_end) + "]");
  }
  NoiseSchedule s;
  s.num_timesteps = num_timesteps;
  s.beta.resize(static_cast<std::size_t>(num_timesteps));
  s.alpha_bar.resize(static_cast<std::size_t>(num_timesteps));
  double running = 1.0;
  for (int t = 1; t <= num_timesteps; ++t) {
    const double frac =
        num_timesteps == 1
            ? 0.0
            : static_cast<double>(t - 1) / static_cast<double>(num_timesteps - 1);
    const double b = beta_start + (beta_end - beta_start) * frac;
    running *= 1.0 - b;
    s.beta[static_cast<std::size_t>(t - 1)] = b;
    s.alpha_bar[static_cast<std::size_t>(t - 1)] = running;
  }
  return s;
}

TimestepMixture TimestepMixture::uniform(int lo, int hi) {
  TimestepMixture m;
  m.components.push_back({1.0, lo, hi});
  return m;
}

void TimestepMixture::validate(int max_timestep) const {
  if (components.empty()) {
    throw std::invalid_argument("timestep mixture: no components");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < components.size(); ++i) {
    const Component& c = components[i];
    if (!(c.weight >= 0.0)) {
      throw std::invalid_argument("timestep mixture: negative weight");
    }
    if (c.lo > c.hi) {
      throw std::invalid_argument("timestep mixture: component " +
                                  std::to_string(i) + " has lo > hi");
    }
    if (i + 1 < components.size() && c.hi > components[i + 1].lo) {
      throw std::invalid_argument(
          "timestep mixture: components must be ordered, u_" +
          std::to_string(i) + " > l_" + std::to_string(i + 1));
    }
    total += c.weight;
  }
  if (components.front().lo < 0 || components.back().hi > max_timestep) {
    throw std::invalid_argument("timestep mixture: bounds outside [0, " +
                                std::to_string(max_timestep) + "]");
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("timestep mixture: weights sum to " +
                                std::to_string(total) + ", expected 1");
  }
}

int TimestepMixture::sample(Rng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t pick = components.size() - 1;
  for (std::size_t i = 0; i < components.size(); ++i) {
    acc += components[i].weight;
    if (u < acc) {
      pick = i;
      break;
    }
  }
  const Component& c = components[pick];
  return static_cast<int>(rng.uniform_int(c.lo, c.hi));
}

double TimestepMixture::prob_in_range(int lo, int hi) const {
  double p = 0.0;
  for (const Component& c : components) {
    const int a = std::max(lo, c.lo);
    const int b = std::min(hi, c.hi);
    if (a > b) continue;
    const double width = static_cast<double>(c.hi - c.lo + 1);
    p += c.weight * static_cast<double>(b - a + 1) / width;
  }
  return p;
}

Tensor denoiser_eval(const DenoiserArch& arch, const ParameterSet& params,
                     const Tensor& xt, int t, int label) {
  GraphT<float> g;
  ModelContextT<float> ctx(g, params);
  const int x = g.constant(xt);
  const int t_node = g.constant(Tensor::scalar(static_cast<float>(t)));
  const int out = apply_denoiser(ctx, arch, x, t_node, label);
  return g.value(out);
}

DenoiserFn make_denoiser_fn(const DenoiserArch& arch,
                            const ParameterSet& params) {
  return [arch, params](const Tensor& xt, int t, int label) {
    return denoiser_eval(arch, params, xt, t, label);
  };
}

Tensor ancestral_sample(const DenoiserFn& denoiser,
                        const NoiseSchedule& schedule,
                        const std::vector<int>& shape, int label, Rng& rng) {
  Tensor x(shape);
  for (auto& v : x.data()) v = static_cast<float>(rng.normal());

  for (int t = schedule.num_timesteps; t >= 1; --t) {
    const double beta = schedule.beta_at(t);
    const double alpha = 1.0 - beta;
    const double ab = schedule.alpha_bar_at(t);
    const float c_eps = static_cast<float>(beta / std::sqrt(1.0 - ab));
    const float c_x = static_cast<float>(1.0 / std::sqrt(alpha));
    const float sigma = static_cast<float>(std::sqrt(beta));

    const Tensor eps_hat = denoiser(x, t, label);
    if (!eps_hat.same_shape(x)) {
      throw std::runtime_error("ancestral_sample: denoiser returned shape " +
                               eps_hat.shape_str() + ", expected " +
                               x.shape_str());
    }
    auto xd = x.data();
    auto ed = eps_hat.data();
    if (t > 1) {
      for (std::size_t i = 0; i < xd.size(); ++i) {
        const float z = static_cast<float>(rng.normal());
        xd[i] = c_x * (xd[i] - c_eps * ed[i]) + sigma * z;
      }
    } else {
      for (std::size_t i = 0; i < xd.size(); ++i) {
        xd[i] = c_x * (xd[i] - c_eps * ed[i]);
      }
    }
  }
  for (auto& v : x.data()) v = std::clamp(v, -1.0f, 1.0f);
  return x;
}

}  // namespace dpdm

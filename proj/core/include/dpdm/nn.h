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

#ifndef DPDM_NN_H_
#define DPDM_NN_H_

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpdm/model.h"
#include "dpdm/params.h"
#include "dpdm/rng.h"
#include "dpdm/tensor.h"

namespace dpdm {

/// Noise-prediction network for images. A small conv stack with sinusoidal
/// timestep embedding, optional additive class conditioning injected into the
/// first hidden layer, and an output of the same shape as the input.
struct DenoiserArch {
  int channels = 1;
  int height = 16;
  int width = 16;
  int base_channels = 16;
  int emb_dim = 32;
  int num_classes = 4;  // 0 disables class conditioning

  void validate() const;
  std::string serialize() const;  // UTF-8 key-value block
  static DenoiserArch parse(const std::string& text);
  bool operator==(const DenoiserArch&) const = default;
};

/// Small conv classifier; the hidden layer before the logits serves as the
/// feature embedding (dimension `hidden`).
struct ClassifierArch {
  int channels = 1;
  int height = 16;
  int width = 16;
  int conv1 = 8;
  int conv2 = 16;
  int hidden = 64;
  int num_classes = 4;

  void validate() const;
  std::string serialize() const;
  static ClassifierArch parse(const std::string& text);
  bool operator==(const ClassifierArch&) const = default;
};

namespace detail {

// Zero-mean uniform with half-width 1/sqrt(fan_in); draws in double so float
// and double parameter sets built from the same seed agree exactly after cast.
template <typename S>
TensorT<S> uniform_init(std::vector<int> shape, int fan_in, Rng rng) {
  TensorT<S> t(std::move(shape));
  const double hw = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<S>(rng.uniform(-hw, hw));
  return t;
}

}  // namespace detail

template <typename S>
ParameterSetT<S> init_denoiser_params(const DenoiserArch& a, const Rng& init_rng) {
  a.validate();
  ParameterSetT<S> p;
  auto weight = [&](const std::string& name, std::vector<int> shape,
                    int fan_in) {
    p.insert(name, detail::uniform_init<S>(std::move(shape), fan_in,
                                           init_rng.fork(hash_name(name))));
  };
  auto bias = [&](const std::string& name, int n) {
    p.insert(name, TensorT<S>({n}));
  };
  if (a.num_classes > 0) {
    weight("embed/class", {a.num_classes, a.emb_dim}, a.emb_dim);
  }
  weight("cond/fc1/w", {a.emb_dim, a.emb_dim}, a.emb_dim);
  bias("cond/fc1/b", a.emb_dim);
  weight("cond/fc2/w", {a.base_channels, a.emb_dim}, a.emb_dim);
  bias("cond/fc2/b", a.base_channels);
  weight("conv_in/w", {a.base_channels, a.channels, 3, 3}, a.channels * 9);
  bias("conv_in/b", a.base_channels);
  weight("conv_mid/w", {a.base_channels, a.base_channels, 3, 3},
         a.base_channels * 9);
  bias("conv_mid/b", a.base_channels);
  weight("conv_out/w", {a.channels, a.base_channels, 3, 3},
         a.base_channels * 9);
  bias("conv_out/b", a.channels);
  return p;
}

/// Builds the denoiser graph for one example. `x` is a [C,H,W] node and `t` a
/// scalar node (constant during training; tracked only in gradient checks).
template <typename S>
int apply_denoiser(ModelContextT<S>& ctx, const DenoiserArch& a, int x, int t,
                   int label) {
  auto& g = ctx.graph();
  const auto& xs = g.value(x).shape();
  if (xs != std::vector<int>{a.channels, a.height, a.width}) {
    throw std::invalid_argument(
        "denoiser: input shape " + g.value(x).shape_str() +
        " does not match architecture [" + std::to_string(a.channels) + "," +
        std::to_string(a.height) + "," + std::to_string(a.width) + "]");
  }
  int temb = g.timestep_embedding(t, a.emb_dim);
  if (a.num_classes > 0) {
    if (label < 0 || label >= a.num_classes) {
      throw std::invalid_argument("denoiser: label " + std::to_string(label) +
                                  " out of range for " +
                                  std::to_string(a.num_classes) + " classes");
    }
    temb = g.add(temb, g.select_row(ctx.param("embed/class"), label));
  }
  const int h = g.silu(
      g.dense(temb, ctx.param("cond/fc1/w"), ctx.param("cond/fc1/b")));
  const int cond =
      g.dense(h, ctx.param("cond/fc2/w"), ctx.param("cond/fc2/b"));
  const int a1 = g.silu(g.add_channel(
      g.conv2d(x, ctx.param("conv_in/w"), ctx.param("conv_in/b")), cond));
  const int a2 =
      g.silu(g.conv2d(a1, ctx.param("conv_mid/w"), ctx.param("conv_mid/b")));
  return g.conv2d(a2, ctx.param("conv_out/w"), ctx.param("conv_out/b"));
}

template <typename S>
ParameterSetT<S> init_classifier_params(const ClassifierArch& a,
                                        const Rng& init_rng) {
  a.validate();
  ParameterSetT<S> p;
  auto weight = [&](const std::string& name, std::vector<int> shape,
                    int fan_in) {
    p.insert(name, detail::uniform_init<S>(std::move(shape), fan_in,
                                           init_rng.fork(hash_name(name))));
  };
  auto bias = [&](const std::string& name, int n) {
    p.insert(name, TensorT<S>({n}));
  };
  weight("conv1/w", {a.conv1, a.channels, 3, 3}, a.channels * 9);
  bias("conv1/b", a.conv1);
  weight("conv2/w", {a.conv2, a.conv1, 3, 3}, a.conv1 * 9);
  bias("conv2/b", a.conv2);
  weight("fc1/w", {a.hidden, a.conv2}, a.conv2);
  bias("fc1/b", a.hidden);
  weight("fc2/w", {a.num_classes, a.hidden}, a.hidden);
  bias("fc2/b", a.num_classes);
  return p;
}

/// Classifier logits for one [C,H,W] example. If `penultimate_out` is given it
/// receives the node id of the hidden feature layer.
template <typename S>
int apply_classifier(ModelContextT<S>& ctx, const ClassifierArch& a, int x,
                     int* penultimate_out = nullptr) {
  auto& g = ctx.graph();
  const int h1 =
      g.relu(g.conv2d(x, ctx.param("conv1/w"), ctx.param("conv1/b")));
  const int h2 =
      g.relu(g.conv2d(h1, ctx.param("conv2/w"), ctx.param("conv2/b")));
  const int pooled = g.mean_pool(h2);
  const int feat =
      g.relu(g.dense(pooled, ctx.param("fc1/w"), ctx.param("fc1/b")));
  if (penultimate_out) *penultimate_out = feat;
  return g.dense(feat, ctx.param("fc2/w"), ctx.param("fc2/b"));
}

}  // namespace dpdm

#endif  // DPDM_NN_H_

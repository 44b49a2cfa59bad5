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

// Randomized gradient checks for every layer type and for the full diffusion
// loss, shared between the unit suite and the acceptance suite. Non-scalar
// layer outputs are scalarized through a squared error against a random
// constant target, so gradients flow through every output coordinate.

#ifndef DPDM_TESTS_SUPPORT_LAYER_CHECKS_H_
#define DPDM_TESTS_SUPPORT_LAYER_CHECKS_H_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dpdm/diffusion.h"
#include "dpdm/graph.h"
#include "dpdm/model.h"
#include "dpdm/nn.h"
#include "dpdm/rng.h"
#include "support/gradcheck.h"

namespace dpdm::testing {

using GraphD = GraphT<double>;
using TensorD = TensorT<double>;

inline TensorD random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
  TensorD t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Keeps |x| >= 2.5e-3 so central differences at h = 1e-5 never cross the
// relu kink.
inline TensorD random_tensor_away_from_zero(std::vector<int> shape, Rng& rng) {
  TensorD t = random_tensor(std::move(shape), rng);
  for (auto& v : t.data()) {
    const double sign = v >= 0.0 ? 1.0 : -1.0;
    if (std::abs(v) < 2.5e-3) v = sign * 2.5e-3;
  }
  return t;
}

/// Max relative error between the tape gradient w.r.t. one tracked leaf and
/// the finite-difference gradient. `loss_of_leaf` must be deterministic.
inline double gradcheck_leaf(
    const TensorD& leaf0,
    const std::function<int(GraphD&, int leaf)>& loss_of_leaf) {
  GraphD g;
  const int leaf = g.leaf(leaf0, /*track_grad=*/true);
  g.backward(loss_of_leaf(g, leaf));
  const TensorD ad = g.grad(leaf);
  const TensorD fd = fd_gradient(
      [&](const TensorD& probe) {
        GraphD g2;
        const int node = g2.leaf(probe, false);
        return g2.value(loss_of_leaf(g2, node))[0];
      },
      leaf0);
  return max_rel_err(ad, fd);
}

/// Scalarizes a non-scalar node against a fixed random target.
inline int scalarize(GraphD& g, int node, const TensorD& target) {
  return g.squared_error(node, g.constant(target), Reduction::kSum);
}

/// One randomized instance per layer kind; returns the max relative error of
/// every leaf checked. Layer kinds:
///   dense, conv2d, relu, silu, timestep_embedding, additive_conditioning,
///   mean_pool, softmax_cross_entropy, squared_error_sum, squared_error_mean,
///   select_row, add, sub, mul_scalar, sum, diffusion_loss.
inline std::map<std::string, double> layer_gradient_check_once(Rng rng) {
  std::map<std::string, double> errs;
  auto record = [&errs](const std::string& name, double err) {
    auto [it, inserted] = errs.emplace(name, err);
    if (!inserted) it->second = std::max(it->second, err);
  };

  {  // dense: gradients w.r.t. x, w, and b
    const int in = 2 + static_cast<int>(rng.uniform_int(0, 4));
    const int out = 1 + static_cast<int>(rng.uniform_int(0, 4));
    const TensorD x = random_tensor({in}, rng);
    const TensorD w = random_tensor({out, in}, rng);
    const TensorD b = random_tensor({out}, rng);
    const TensorD target = random_tensor({out}, rng);
    record("dense", gradcheck_leaf(x, [&](GraphD& g, int leaf) {
             return scalarize(
                 g, g.dense(leaf, g.constant(w), g.constant(b)), target);
           }));
    record("dense", gradcheck_leaf(w, [&](GraphD& g, int leaf) {
             return scalarize(
                 g, g.dense(g.constant(x), leaf, g.constant(b)), target);
           }));
    record("dense", gradcheck_leaf(b, [&](GraphD& g, int leaf) {
             return scalarize(
                 g, g.dense(g.constant(x), g.constant(w), leaf), target);
           }));
  }

  {  // conv2d with random odd kernel, gradients w.r.t. x, w, b
    const int cin = 1 + static_cast<int>(rng.uniform_int(0, 2));
    const int cout = 1 + static_cast<int>(rng.uniform_int(0, 2));
    const int h = 2 + static_cast<int>(rng.uniform_int(0, 4));
    const int wd = 2 + static_cast<int>(rng.uniform_int(0, 4));
    const int k = 1 + 2 * static_cast<int>(rng.uniform_int(0, 2));  // 1,3,5
    const TensorD x = random_tensor({cin, h, wd}, rng);
    const TensorD w = random_tensor({cout, cin, k, k}, rng);
    const TensorD b = random_tensor({cout}, rng);
    const TensorD target = random_tensor({cout, h, wd}, rng);
    record("conv2d", gradcheck_leaf(x, [&](GraphD& g, int leaf) {
             return scalarize(
                 g, g.conv2d(leaf, g.constant(w), g.constant(b)), target);
           }));
    record("conv2d", gradcheck_leaf(w, [&](GraphD& g, int leaf) {
             return scalarize(
                 g, g.conv2d(g.constant(x), leaf, g.constant(b)), target);
           }));
    record("conv2d", gradcheck_leaf(b, [&](GraphD& g, int leaf) {
             return scalarize(
                 g, g.conv2d(g.constant(x), g.constant(w), leaf), target);
           }));
  }

  {  // activations
    const int n = 3 + static_cast<int>(rng.uniform_int(0, 8));
    const TensorD x = random_tensor_away_from_zero({n}, rng);
    const TensorD target = random_tensor({n}, rng);
    record("relu", gradcheck_leaf(x, [&](GraphD& g, int leaf) {
             return scalarize(g, g.relu(leaf), target);
           }));
    record("silu", gradcheck_leaf(x, [&](GraphD& g, int leaf) {
             return scalarize(g, g.silu(leaf), target);
           }));
  }

  {  // sinusoidal embedding of a scalar timestep
    const int dim = 2 * (1 + static_cast<int>(rng.uniform_int(0, 7)));
    const TensorD t = TensorD::scalar(rng.uniform(0.5, 400.0));
    const TensorD target = random_tensor({dim}, rng);
    record("timestep_embedding", gradcheck_leaf(t, [&](GraphD& g, int leaf) {
             return scalarize(g, g.timestep_embedding(leaf, dim), target);
           }));
  }

  {  // additive conditioning: x[C,H,W] + v[C]
    const int c = 1 + static_cast<int>(rng.uniform_int(0, 3));
    const int h = 2 + static_cast<int>(rng.uniform_int(0, 3));
    const int wd = 2 + static_cast<int>(rng.uniform_int(0, 3));
    const TensorD x = random_tensor({c, h, wd}, rng);
    const TensorD v = random_tensor({c}, rng);
    const TensorD target = random_tensor({c, h, wd}, rng);
    record("additive_conditioning",
           gradcheck_leaf(x, [&](GraphD& g, int leaf) {
             return scalarize(g, g.add_channel(leaf, g.constant(v)), target);
           }));
    record("additive_conditioning",
           gradcheck_leaf(v, [&](GraphD& g, int leaf) {
             return scalarize(g, g.add_channel(g.constant(x), leaf), target);
           }));
  }

  {  // mean pool
    const int c = 1 + static_cast<int>(rng.uniform_int(0, 3));
    const int h = 2 + static_cast<int>(rng.uniform_int(0, 3));
    const int wd = 2 + static_cast<int>(rng.uniform_int(0, 3));
    const TensorD x = random_tensor({c, h, wd}, rng);
    const TensorD target = random_tensor({c}, rng);
    record("mean_pool", gradcheck_leaf(x, [&](GraphD& g, int leaf) {
             return scalarize(g, g.mean_pool(leaf), target);
           }));
  }

  {  // softmax cross entropy (already scalar)
    const int k = 2 + static_cast<int>(rng.uniform_int(0, 5));
    const int label = static_cast<int>(rng.uniform_int(0, k - 1));
    const TensorD logits = random_tensor({k}, rng, -2.0, 2.0);
    record("softmax_cross_entropy",
           gradcheck_leaf(logits, [&](GraphD& g, int leaf) {
             return g.softmax_cross_entropy(leaf, label);
           }));
  }

  {  // squared error, both reductions, both sides
    const int n = 2 + static_cast<int>(rng.uniform_int(0, 6));
    const TensorD a = random_tensor({n}, rng);
    const TensorD b = random_tensor({n}, rng);
    record("squared_error_sum", gradcheck_leaf(a, [&](GraphD& g, int leaf) {
             return g.squared_error(leaf, g.constant(b), Reduction::kSum);
           }));
    record("squared_error_sum", gradcheck_leaf(b, [&](GraphD& g, int leaf) {
             return g.squared_error(g.constant(a), leaf, Reduction::kSum);
           }));
    record("squared_error_mean", gradcheck_leaf(a, [&](GraphD& g, int leaf) {
             return g.squared_error(leaf, g.constant(b), Reduction::kMean);
           }));
  }

  {  // structural ops: select_row, add, sub, mul_scalar, sum
    const int rows = 2 + static_cast<int>(rng.uniform_int(0, 3));
    const int dim = 2 + static_cast<int>(rng.uniform_int(0, 3));
    const int row = static_cast<int>(rng.uniform_int(0, rows - 1));
    const TensorD table = random_tensor({rows, dim}, rng);
    const TensorD target = random_tensor({dim}, rng);
    record("select_row", gradcheck_leaf(table, [&](GraphD& g, int leaf) {
             return scalarize(g, g.select_row(leaf, row), target);
           }));

    const TensorD a = random_tensor({dim}, rng);
    const TensorD b = random_tensor({dim}, rng);
    record("add", gradcheck_leaf(a, [&](GraphD& g, int leaf) {
             return scalarize(g, g.add(leaf, g.constant(b)), target);
           }));
    record("sub", gradcheck_leaf(b, [&](GraphD& g, int leaf) {
             return scalarize(g, g.sub(g.constant(a), leaf), target);
           }));
    const double c = rng.uniform(-2.0, 2.0);
    record("mul_scalar", gradcheck_leaf(a, [&](GraphD& g, int leaf) {
             return scalarize(g, g.mul_scalar(leaf, c), target);
           }));
    record("sum", gradcheck_leaf(a, [&](GraphD& g, int leaf) {
             return g.sum(leaf);
           }));
  }

  {  // the full diffusion loss, gradients w.r.t. every parameter
    DenoiserArch arch;
    arch.channels = 1;
    arch.height = 4 + static_cast<int>(rng.uniform_int(0, 2));
    arch.width = 4 + static_cast<int>(rng.uniform_int(0, 2));
    arch.base_channels = 2 + static_cast<int>(rng.uniform_int(0, 1));
    arch.emb_dim = 4;
    arch.num_classes = 2;
    const NoiseSchedule schedule = make_linear_schedule(20, 1e-3, 0.1);
    const int t = 1 + static_cast<int>(rng.uniform_int(0, 19));
    const int label = static_cast<int>(rng.uniform_int(0, 1));
    const ParameterSetT<double> params =
        init_denoiser_params<double>(arch, rng.fork(hash_name("p")));
    const TensorD x0 = random_tensor({1, arch.height, arch.width}, rng);
    TensorD eps({1, arch.height, arch.width});
    for (auto& v : eps.data()) v = rng.normal();

    GraphD g;
    ModelContextT<double> ctx(g, params);
    g.backward(diffusion_loss_node(ctx, arch, x0, label, t, eps, schedule));
    const ParameterSetT<double> ad = ctx.collect_gradients();
    const ParameterSetT<double> fd = fd_gradient_params(
        [&](const ParameterSetT<double>& probe) {
          return diffusion_loss_value(arch, probe, x0, label, t, eps,
                                      schedule);
        },
        params);
    record("diffusion_loss", max_rel_err(ad, fd));
  }

  return errs;
}

/// `instances` randomized rounds; returns the worst error per layer kind.
inline std::map<std::string, double> run_layer_gradient_checks(
    int instances, std::uint64_t seed) {
  std::map<std::string, double> worst;
  for (int i = 0; i < instances; ++i) {
    const auto errs = layer_gradient_check_once(
        Rng::stream(seed, "layer-gradcheck").fork(static_cast<std::uint64_t>(i)));
    for (const auto& [name, err] : errs) {
      auto [it, inserted] = worst.emplace(name, err);
      if (!inserted) it->second = std::max(it->second, err);
    }
  }
  return worst;
}

}  // namespace dpdm::testing

#endif  // DPDM_TESTS_SUPPORT_LAYER_CHECKS_H_

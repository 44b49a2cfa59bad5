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

#include <benchmark/benchmark.h>

#include "dpdm/diffusion.h"
#include "dpdm/graph.h"
#include "dpdm/model.h"
#include "dpdm/nn.h"
#include "dpdm/rng.h"

namespace {

using namespace dpdm;

DenoiserArch bench_arch(int size, int base) {
  DenoiserArch a;
  a.channels = 1;
  a.height = size;
  a.width = size;
  a.base_channels = base;
  a.emb_dim = 32;
  a.num_classes = 4;
  return a;
}

Tensor random_image(int size, Rng& rng) {
  Tensor t({1, size, size});
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

void BM_DenoiserForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int base = static_cast<int>(state.range(1));
  const DenoiserArch arch = bench_arch(size, base);
  const ParameterSet params =
      init_denoiser_params<float>(arch, Rng::stream(1, "init"));
  Rng rng(2);
  const Tensor x = random_image(size, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(denoiser_eval(arch, params, x, 10, 1));
  }
}
BENCHMARK(BM_DenoiserForward)->Args({16, 16})->Args({16, 24})->Args({28, 16});

void BM_DiffusionLossBackward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int base = static_cast<int>(state.range(1));
  const DenoiserArch arch = bench_arch(size, base);
  const ParameterSet params =
      init_denoiser_params<float>(arch, Rng::stream(1, "init"));
  const NoiseSchedule schedule = make_linear_schedule(200, 5e-4, 0.1);
  Rng rng(3);
  const Tensor x0 = random_image(size, rng);
  Tensor eps({1, size, size});
  for (auto& v : eps.data()) v = static_cast<float>(rng.normal());
  for (auto _ : state) {
    GraphT<float> g;
    ModelContextT<float> ctx(g, params);
    const int loss = diffusion_loss_node(ctx, arch, x0, 1, 42, eps, schedule);
    g.backward(loss);
    benchmark::DoNotOptimize(ctx.collect_gradients());
  }
}
BENCHMARK(BM_DiffusionLossBackward)
    ->Args({16, 16})
    ->Args({16, 24})
    ->Args({28, 16});

void BM_AncestralSampleStep(benchmark::State& state) {
  const DenoiserArch arch = bench_arch(16, 16);
  const ParameterSet params =
      init_denoiser_params<float>(arch, Rng::stream(1, "init"));
  const NoiseSchedule schedule = make_linear_schedule(10, 5e-4, 0.1);
  const DenoiserFn fn = make_denoiser_fn(arch, params);
  Rng rng(4);
  for (auto _ : state) {
    // 10 reverse steps per iteration.
    benchmark::DoNotOptimize(
        ancestral_sample(fn, schedule, {1, 16, 16}, 0, rng));
  }
}
BENCHMARK(BM_AncestralSampleStep);

}  // namespace

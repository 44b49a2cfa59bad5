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

#include "dpdm/data.h"
#include "dpdm/diffusion.h"
#include "dpdm/dp_train.h"
#include "dpdm/eval.h"
#include "dpdm/nn.h"
#include "dpdm/rng.h"
#include "dpdm/sym_eig.h"

namespace {

using namespace dpdm;

void BM_PerExampleAugmentedGradient(benchmark::State& state) {
  const int augmult = static_cast<int>(state.range(0));
  DenoiserArch arch;
  arch.channels = 1;
  arch.height = 16;
  arch.width = 16;
  arch.base_channels = 16;
  arch.emb_dim = 32;
  arch.num_classes = 4;
  const ParameterSet params =
      init_denoiser_params<float>(arch, Rng::stream(1, "init"));
  const NoiseSchedule schedule = make_linear_schedule(200, 5e-4, 0.1);
  const TimestepMixture mixture = TimestepMixture::uniform(1, 200);
  AugmentationPolicy policy;
  policy.hflip = true;
  policy.max_shift = 2;
  policy.resample_timestep = true;
  const LabeledImageSet data =
      generate_toy(ToyDomainSpec::finetune_default(7), 1);
  const Tensor image = data.example_chw(0);
  const Rng base(9);
  std::uint64_t step = 0;
  for (auto _ : state) {
    ++step;
    benchmark::DoNotOptimize(per_example_augmented_gradient<float>(
        arch, params, image, 0, policy, augmult, mixture, schedule,
        base.fork(step, 1), base.fork(step, 2), base.fork(step, 3)));
  }
}
BENCHMARK(BM_PerExampleAugmentedGradient)->Arg(1)->Arg(4)->Arg(8);

void BM_ToyGeneration(benchmark::State& state) {
  const ToyDomainSpec spec = ToyDomainSpec::pretrain_default(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_toy(spec, 256));
  }
}
BENCHMARK(BM_ToyGeneration);

void BM_FrechetDistance64(benchmark::State& state) {
  const int dim = 64;
  Rng rng(5);
  GaussianFit a, b;
  a.dim = b.dim = dim;
  a.mean.resize(static_cast<std::size_t>(dim));
  b.mean.resize(static_cast<std::size_t>(dim));
  for (auto& v : a.mean) v = rng.uniform(-1, 1);
  for (auto& v : b.mean) v = rng.uniform(-1, 1);
  auto spd = [&](std::vector<double>& cov) {
    std::vector<double> m(static_cast<std::size_t>(dim) * dim);
    for (auto& v : m) v = rng.uniform(-1.0, 1.0);
    cov.assign(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) {
        for (int k = 0; k < dim; ++k) {
          cov[i * dim + j] += m[i * dim + k] * m[j * dim + k] / dim;
        }
      }
      cov[i * dim + i] += 0.01;
    }
  };
  spd(a.cov);
  spd(b.cov);
  for (auto _ : state) {
    benchmark::DoNotOptimize(frechet_distance(a, b));
  }
}
BENCHMARK(BM_FrechetDistance64);

}  // namespace

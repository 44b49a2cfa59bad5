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

#include "dpdm/privacy.h"

namespace {

using namespace dpdm;

void BM_RdpCurve(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(rdp_curve(2.852, 4096.0 / 60000.0));
  }
}
BENCHMARK(BM_RdpCurve);

void BM_AccountEpsilon(benchmark::State& state) {
  const MechanismSpec spec{2.852, 4096.0 / 60000.0, 4000};
  for (auto _ : state) {
    benchmark::DoNotOptimize(account_epsilon(spec, 1e-5));
  }
}
BENCHMARK(BM_AccountEpsilon);

void BM_CalibrateSigma(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        calibrate_sigma(4096.0 / 60000.0, 4000, {10.0, 1e-5}));
  }
}
BENCHMARK(BM_CalibrateSigma);

}  // namespace

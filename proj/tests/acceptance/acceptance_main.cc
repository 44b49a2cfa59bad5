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
//
// Acceptance suite. Runs the listed criteria (all by default), prints one
// PASS/FAIL line per criterion, and exits nonzero if any fail.
//
//   dpdm_acceptance [--criterion N]...

#include <chrono>
#include <cstdio>
#include <cstring>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "acceptance/criteria.h"

using dpdm::acceptance::CriterionResult;

namespace {

struct Criterion {
  int number;
  const char* title;
  std::function<CriterionResult()> run;
};

}  // namespace

int main(int argc, char** argv) {
  using namespace dpdm::acceptance;
  const std::vector<Criterion> all = {
      {1, "privacy-accounting anchor", criterion_privacy_anchor},
      {2, "gradient-check suite", criterion_gradient_checks},
      {3, "dp mechanics suite", criterion_dp_mechanics},
      {4, "timestep-sampler suite", criterion_timestep_sampler},
      {5, "forward-process statistics", criterion_forward_statistics},
      {6, "frechet-distance correctness", criterion_frechet},
      {7, "end-to-end pre-training benefit", criterion_pretraining_benefit},
      {8, "timestep-bias benefit", criterion_timestep_bias_benefit},
      {9, "sample-size scaling and ensembling", criterion_scaling_and_ensembling},
      {10, "model selection rank transfer", criterion_model_selection},
  };

  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      wanted.push_back(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]...\n", argv[0]);
      return 2;
    }
  }

  int failures = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), c.number) == wanted.end()) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    CriterionResult result;
    try {
      result = c.run();
    } catch (const std::exception& e) {
      result.pass = false;
      result.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] criterion %2d (%s): %s  [%.1fs]\n",
                result.pass ? "PASS" : "FAIL", c.number, c.title,
                result.detail.c_str(), secs);
    std::fflush(stdout);
    if (!result.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

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

#ifndef DPDM_TESTS_ACCEPTANCE_CRITERIA_H_
#define DPDM_TESTS_ACCEPTANCE_CRITERIA_H_

#include <sstream>
#include <string>

namespace dpdm::acceptance {

struct CriterionResult {
  bool pass = false;
  std::string detail;  // one-line summary of the measured quantities
};

// 1: privacy-accounting anchor (sigma = 2.852 regime; calibrate round trip)
CriterionResult criterion_privacy_anchor();
// 2: gradient-check suite, every layer + full loss, 64-bit, <= 1e-6
CriterionResult criterion_gradient_checks();
// 3: DP mechanics (clip bound, noise std, virtual batching, pre-clip order)
CriterionResult criterion_dp_mechanics();
// 4: timestep-sampler bucket frequencies and bounds
CriterionResult criterion_timestep_sampler();
// 5: forward-process statistics
CriterionResult criterion_forward_statistics();
// 6: Frechet-distance correctness
CriterionResult criterion_frechet();
// 7: end-to-end pre-training benefit under a fixed budget
CriterionResult criterion_pretraining_benefit();
// 8: biased vs uniform timestep sampling under the same budget
CriterionResult criterion_timestep_bias_benefit();
// 9: sample-size scaling and ensembling directions
CriterionResult criterion_scaling_and_ensembling();
// 10: model-selection rank transfer
CriterionResult criterion_model_selection();

}  // namespace dpdm::acceptance

#endif  // DPDM_TESTS_ACCEPTANCE_CRITERIA_H_

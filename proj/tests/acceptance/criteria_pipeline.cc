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
// Criteria 7-10: the desk-scale training pipelines. Placeholder bodies until
// the pipeline constants are tuned.

#include "acceptance/criteria.h"

namespace dpdm::acceptance {

CriterionResult criterion_pretraining_benefit() {
  return {false, "not implemented yet"};
}

CriterionResult criterion_timestep_bias_benefit() {
  return {false, "not implemented yet"};
}

CriterionResult criterion_scaling_and_ensembling() {
  return {false, "not implemented yet"};
}

CriterionResult criterion_model_selection() {
  return {false, "not implemented yet"};
}

}  // namespace dpdm::acceptance

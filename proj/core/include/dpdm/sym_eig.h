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

#ifndef DPDM_SYM_EIG_H_
#define DPDM_SYM_EIG_H_

#include <vector>

namespace dpdm {

struct SymEig {
  std::vector<double> values;   // ascending
  std::vector<double> vectors;  // n x n row-major; column j pairs with values[j]
};

/// Eigendecomposition of a symmetric n x n matrix (row-major) by cyclic
/// Jacobi rotations. The input is symmetrized as (A + A^T) / 2 first.
SymEig sym_eig(int n, const std::vector<double>& a);

}  // namespace dpdm

#endif  // DPDM_SYM_EIG_H_

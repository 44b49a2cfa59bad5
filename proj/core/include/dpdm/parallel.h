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

#ifndef DPDM_PARALLEL_H_
#define DPDM_PARALLEL_H_

#include <functional>

namespace dpdm {

/// Worker count for data-parallel sections: the DPDM_THREADS environment
/// variable when set (minimum 1), otherwise the available hardware
/// parallelism.
int worker_count();

/// Runs fn(0..n-1) on up to worker_count() threads. Workers take disjoint
/// strided index sets, so writes into per-index slots are race free; callers
/// must do any cross-index reduction themselves, in a fixed order, after this
/// returns. Exceptions from workers are rethrown on the calling thread.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace dpdm

#endif  // DPDM_PARALLEL_H_

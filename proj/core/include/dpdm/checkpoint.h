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

#ifndef DPDM_CHECKPOINT_H_
#define DPDM_CHECKPOINT_H_

#include <map>
#include <string>

#include "dpdm/params.h"
#include "dpdm/tensor.h"

namespace dpdm {

/// Contents of a `DPDM` checkpoint file: named float tensors plus named UTF-8
/// text blocks (e.g. the `__arch__` architecture descriptor).
///
/// On disk (all integers little endian): magic bytes "DPDM", uint32 version
/// (= 1), uint32 entry count, then per entry: uint16 name length, UTF-8 name,
/// uint8 dtype code (0 = 32-bit IEEE-754 float, 1 = unsigned byte), uint8
/// rank, rank x uint32 dims, row-major payload. Entries are sorted by name,
/// so equal contents produce identical bytes.
struct Checkpoint {
  ParameterSet tensors;
  std::map<std::string, std::string> text;

  /// Convenience: group a parameter set under `prefix + "/"`.
  void add_prefixed(const std::string& prefix, const ParameterSet& params);
  ParameterSet extract_prefixed(const std::string& prefix) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dpdm

#endif  // DPDM_CHECKPOINT_H_

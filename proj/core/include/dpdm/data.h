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

#ifndef DPDM_DATA_H_
#define DPDM_DATA_H_

#include <cstdint>
#include <string>
#include <vector>

#include "dpdm/rng.h"
#include "dpdm/tensor.h"

namespace dpdm {

enum class Domain { kPretrain, kFinetune };
enum class Split { kTrain, kVal, kTest };

/// Image stack with class labels, normalized to pixel values in [-1, 1].
/// Images are stored [n, H, W, C]; example_chw() extracts one example in the
/// [C, H, W] layout the models consume.
struct LabeledImageSet {
  Tensor images;  // [n, H, W, C]
  std::vector<int> labels;
  int num_classes = 0;
  Domain domain = Domain::kPretrain;
  Split split = Split::kTrain;

  int size() const { return images.rank() == 4 ? images.dim(0) : 0; }
  int height() const { return images.dim(1); }
  int width() const { return images.dim(2); }
  int channels() const { return images.dim(3); }

  Tensor example_chw(int i) const;
  void set_example_chw(int i, const Tensor& chw);

  /// Checks the stated invariants: label count, pixel range, label range.
  void validate() const;

  LabeledImageSet take(int n) const;  // first n examples
};

/// Parameters of the procedural shape dataset. Generation is a pure function
/// of (spec, index): the same spec always yields the same image for a given
/// index, regardless of how many images are requested.
struct ToyDomainSpec {
  int height = 16;
  int width = 16;
  int channels = 1;
  int num_classes = 4;  // disc, square, cross, triangle
  Domain domain = Domain::kPretrain;
  double foreground = 0.85;   // shape value before polarity
  double background = -0.85;  // empty value before polarity
  bool invert_polarity = false;
  double thickness_lo = 1.2;  // stroke width range, pixels
  double thickness_hi = 2.2;
  double jitter = 1.5;  // max center offset, pixels
  std::uint64_t seed = 0;

  /// The shifted fine-tune domain: inverted polarity, thicker strokes.
  static ToyDomainSpec pretrain_default(std::uint64_t seed);
  static ToyDomainSpec finetune_default(std::uint64_t seed);
};

/// Generates n images with round-robin class assignment (index % num_classes).
/// `index_offset` selects a disjoint index range, used to carve out val/test
/// material that never overlaps the training range.
LabeledImageSet generate_toy(const ToyDomainSpec& spec, int n,
                             Split split = Split::kTrain,
                             std::int64_t index_offset = 0);

/// IDX files: magic 0x00000803 (3-D unsigned-byte images) or 0x00000804 (4-D,
/// multi-channel), 0x00000801 for labels; big-endian dimension sizes; pixels
/// normalized to [-1, 1] via x / 127.5 - 1.
LabeledImageSet load_idx(const std::string& images_path,
                         const std::string& labels_path);
void save_idx(const LabeledImageSet& set, const std::string& images_path,
              const std::string& labels_path);

/// Image-space augmentation switches used by augmentation multiplicity.
/// `resample_timestep` re-draws the diffusion timestep per augmented view.
struct AugmentationPolicy {
  bool hflip = false;
  int max_shift = 0;  // pixels, per axis
  bool resample_timestep = false;

  bool any_active() const {
    return hflip || max_shift > 0 || resample_timestep;
  }
  void validate(int augmult) const;
};

Tensor hflip_chw(const Tensor& img);
/// Integer shift with zero padding; (dy, dx) moves content down/right.
Tensor shift_chw(const Tensor& img, int dy, int dx);

/// Applies the image-space part of the policy: horizontal flip with
/// probability 0.5 (when enabled) and a uniform integer shift in
/// [-max_shift, max_shift] per axis (when enabled). Shape is unchanged.
Tensor augment(const Tensor& img_chw, const AugmentationPolicy& policy,
               Rng& rng);

}  // namespace dpdm

#endif  // DPDM_DATA_H_

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

#include "dpdm/data.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dpdm {

namespace {

constexpr std::uint32_t kIdxImages3d = 0x00000803;
constexpr std::uint32_t kIdxImages4d = 0x00000804;
constexpr std::uint32_t kIdxLabels = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("idx: truncated header in " + path);
  return (static_cast<std::uint32_t>(b[0]) << 24) |
         (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) |
         static_cast<std::uint32_t>(b[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

// Signed distance-like coverage of the four shape classes; returns 1 inside,
// 0 outside, with a ~0.7px soft edge.
double shape_coverage(int cls, double y, double x, double cy, double cx,
                      double radius, double thickness) {
  const double dy = y - cy;
  const double dx = x - cx;
  double d;  // negative inside
  switch (cls) {
    case 0:  // filled disc
      d = std::sqrt(dy * dy + dx * dx) - radius;
      break;
    case 1: {  // square outline with the given stroke thickness
      const double box = std::max(std::abs(dy), std::abs(dx)) - radius;
      d = std::abs(box) - 0.5 * thickness;
      break;
    }
    case 2: {  // plus sign, strokes of the given thickness
      const double bar_h =
          std::max(std::abs(dy) - 0.5 * thickness, std::abs(dx) - radius);
      const double bar_v =
          std::max(std::abs(dx) - 0.5 * thickness, std::abs(dy) - radius);
      d = std::min(bar_h, bar_v);
      break;
    }
    default: {  // filled upward triangle
      // Half-width shrinks linearly from the base (y = cy + radius) to the
      // apex (y = cy - radius).
      const double frac = (radius - dy) / (2.0 * radius);  // 1 at base, 0 apex
      const double half_w = radius * std::clamp(frac, 0.0, 1.0);
      const double inside_y = std::abs(dy) - radius;
      const double inside_x = std::abs(dx) - half_w;
      d = std::max(inside_y, inside_x);
      break;
    }
  }
  const double edge = 0.7;
  return std::clamp(0.5 - d / edge, 0.0, 1.0);
}

}  // namespace

Tensor LabeledImageSet::example_chw(int i) const {
  const int h = height(), w = width(), c = channels();
  Tensor out({c, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        out.at(ch, y, x) = images.at(i, y, x, ch);
  return out;
}

void LabeledImageSet::set_example_chw(int i, const Tensor& chw) {
  const int h = height(), w = width(), c = channels();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        images.at(i, y, x, ch) = chw.at(ch, y, x);
}

void LabeledImageSet::validate() const {
  if (images.rank() != 4) {
    throw std::invalid_argument("dataset: images must be [n,H,W,C], got " +
                                images.shape_str());
  }
  if (static_cast<int>(labels.size()) != size()) {
    throw std::invalid_argument("dataset: " + std::to_string(size()) +
                                " images but " +
                                std::to_string(labels.size()) + " labels");
  }
  for (float v : images.data()) {
    if (!(v >= -1.0f && v <= 1.0f)) {
      throw std::invalid_argument("dataset: pixel value outside [-1, 1]");
    }
  }
  for (int l : labels) {
    if (l < 0 || l >= num_classes) {
      throw std::invalid_argument("dataset: label " + std::to_string(l) +
                                  " outside [0, " +
                                  std::to_string(num_classes) + ")");
    }
  }
}

LabeledImageSet LabeledImageSet::take(int n) const {
  n = std::min(n, size());
  LabeledImageSet out;
  out.images = Tensor({n, height(), width(), channels()});
  const auto src = images.data();
  auto dst = out.images.data();
  std::copy(src.begin(), src.begin() + out.images.numel(), dst.begin());
  out.labels.assign(labels.begin(), labels.begin() + n);
  out.num_classes = num_classes;
  out.domain = domain;
  out.split = split;
  return out;
}

ToyDomainSpec ToyDomainSpec::pretrain_default(std::uint64_t seed) {
  ToyDomainSpec s;
  s.domain = Domain::kPretrain;
  s.invert_polarity = false;
  s.thickness_lo = 1.2;
  s.thickness_hi = 2.2;
  s.seed = seed;
  return s;
}

ToyDomainSpec ToyDomainSpec::finetune_default(std::uint64_t seed) {
  ToyDomainSpec s;
  s.domain = Domain::kFinetune;
  s.invert_polarity = true;  // bright background, dark shapes
  s.thickness_lo = 2.2;
  s.thickness_hi = 3.4;
  s.seed = seed;
  return s;
}

LabeledImageSet generate_toy(const ToyDomainSpec& spec, int n, Split split,
                             std::int64_t index_offset) {
  if (n < 1) {
    throw std::invalid_argument("generate_toy: n must be >= 1");
  }
  LabeledImageSet set;
  set.images = Tensor({n, spec.height, spec.width, spec.channels});
  set.labels.resize(static_cast<std::size_t>(n));
  set.num_classes = spec.num_classes;
  set.domain = spec.domain;
  set.split = split;

  // Per-class channel tints, only used for multi-channel specs.
  static const double kTints[4][3] = {{1.0, 0.55, 0.55},
                                      {0.55, 1.0, 0.55},
                                      {0.55, 0.55, 1.0},
                                      {1.0, 1.0, 0.5}};

  const Rng base(mix64(spec.seed, hash_name("toy")));
  for (int i = 0; i < n; ++i) {
    const int cls = i % spec.num_classes;
    Rng rng = base.fork(static_cast<std::uint64_t>(index_offset + i));
    const double cy =
        0.5 * (spec.height - 1) + rng.uniform(-spec.jitter, spec.jitter);
    const double cx =
        0.5 * (spec.width - 1) + rng.uniform(-spec.jitter, spec.jitter);
    const double radius =
        std::min(spec.height, spec.width) * rng.uniform(0.24, 0.34);
    const double thickness = rng.uniform(spec.thickness_lo, spec.thickness_hi);

    const double fg = spec.invert_polarity ? -spec.foreground : spec.foreground;
    const double bg = spec.invert_polarity ? -spec.background : spec.background;

    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const double cov = shape_coverage(cls % 4, y, x, cy, cx, radius,
                                          thickness);
        for (int ch = 0; ch < spec.channels; ++ch) {
          const double tint =
              spec.channels > 1 ? kTints[cls % 4][ch % 3] : 1.0;
          const double v = bg + (fg * tint - bg) * cov;
          set.images.at(i, y, x, ch) =
              static_cast<float>(std::clamp(v, -1.0, 1.0));
        }
      }
    }
    set.labels[static_cast<std::size_t>(i)] = cls;
  }
  return set;
}

LabeledImageSet load_idx(const std::string& images_path,
                         const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw std::runtime_error("idx: cannot open " + images_path);
  const std::uint32_t magic = read_u32_be(imgs, images_path);
  int channels = 1;
  if (magic == kIdxImages4d) {
    channels = 0;  // read below
  } else if (magic != kIdxImages3d) {
    throw std::runtime_error("idx: wrong magic in " + images_path +
                             " (expected 0x00000803)");
  }
  const int n = static_cast<int>(read_u32_be(imgs, images_path));
  const int h = static_cast<int>(read_u32_be(imgs, images_path));
  const int w = static_cast<int>(read_u32_be(imgs, images_path));
  if (channels == 0) channels = static_cast<int>(read_u32_be(imgs, images_path));

  const std::int64_t pixels =
      static_cast<std::int64_t>(n) * h * w * channels;
  std::vector<unsigned char> raw(static_cast<std::size_t>(pixels));
  imgs.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (imgs.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw std::runtime_error("idx: truncated image payload in " + images_path);
  }

  std::ifstream lbls(labels_path, std::ios::binary);
  if (!lbls) throw std::runtime_error("idx: cannot open " + labels_path);
  if (read_u32_be(lbls, labels_path) != kIdxLabels) {
    throw std::runtime_error("idx: wrong magic in " + labels_path +
                             " (expected 0x00000801)");
  }
  const int n_labels = static_cast<int>(read_u32_be(lbls, labels_path));
  if (n_labels != n) {
    throw std::runtime_error("idx: " + std::to_string(n) + " images but " +
                             std::to_string(n_labels) + " labels");
  }
  std::vector<unsigned char> raw_labels(static_cast<std::size_t>(n));
  lbls.read(reinterpret_cast<char*>(raw_labels.data()), n);
  if (lbls.gcount() != n) {
    throw std::runtime_error("idx: truncated label payload in " + labels_path);
  }

  LabeledImageSet set;
  set.images = Tensor({n, h, w, channels});
  auto dst = set.images.data();
  for (std::int64_t i = 0; i < pixels; ++i) {
    dst[static_cast<std::size_t>(i)] =
        static_cast<float>(raw[static_cast<std::size_t>(i)]) / 127.5f - 1.0f;
  }
  set.labels.resize(static_cast<std::size_t>(n));
  int max_label = 0;
  for (int i = 0; i < n; ++i) {
    set.labels[static_cast<std::size_t>(i)] = raw_labels[static_cast<std::size_t>(i)];
    max_label = std::max(max_label, static_cast<int>(raw_labels[static_cast<std::size_t>(i)]));
  }
  set.num_classes = max_label + 1;
  return set;
}

void save_idx(const LabeledImageSet& set, const std::string& images_path,
              const std::string& labels_path) {
  const int n = set.size();
  const int h = n > 0 ? set.height() : 0;
  const int w = n > 0 ? set.width() : 0;
  const int c = n > 0 ? set.channels() : 1;

  std::ofstream imgs(images_path, std::ios::binary | std::ios::trunc);
  if (!imgs) throw std::runtime_error("idx: cannot write " + images_path);
  write_u32_be(imgs, c == 1 ? kIdxImages3d : kIdxImages4d);
  write_u32_be(imgs, static_cast<std::uint32_t>(n));
  write_u32_be(imgs, static_cast<std::uint32_t>(h));
  write_u32_be(imgs, static_cast<std::uint32_t>(w));
  if (c != 1) write_u32_be(imgs, static_cast<std::uint32_t>(c));
  std::vector<unsigned char> raw(set.images.data().size());
  const auto src = set.images.data();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const float v = std::round((src[i] + 1.0f) * 127.5f);
    raw[i] = static_cast<unsigned char>(std::clamp(v, 0.0f, 255.0f));
  }
  imgs.write(reinterpret_cast<const char*>(raw.data()),
             static_cast<std::streamsize>(raw.size()));

  std::ofstream lbls(labels_path, std::ios::binary | std::ios::trunc);
  if (!lbls) throw std::runtime_error("idx: cannot write " + labels_path);
  write_u32_be(lbls, kIdxLabels);
  write_u32_be(lbls, static_cast<std::uint32_t>(n));
  for (int l : set.labels) {
    const unsigned char b = static_cast<unsigned char>(l);
    lbls.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!imgs || !lbls) {
    throw std::runtime_error("idx: write failed");
  }
}

void AugmentationPolicy::validate(int augmult) const {
  if (max_shift < 0) {
    throw std::invalid_argument("augmentation: max_shift must be >= 0");
  }
  if (augmult > 1 && !any_active()) {
    throw std::invalid_argument(
        "augmentation: multiplicity > 1 needs at least one active "
        "augmentation dimension");
  }
}

Tensor hflip_chw(const Tensor& img) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(ch, y, x) = img.at(ch, y, w - 1 - x);
  return out;
}

Tensor shift_chw(const Tensor& img, int dy, int dx) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      const int sy = y - dy;
      if (sy < 0 || sy >= h) continue;
      for (int x = 0; x < w; ++x) {
        const int sx = x - dx;
        if (sx < 0 || sx >= w) continue;
        out.at(ch, y, x) = img.at(ch, sy, sx);
      }
    }
  }
  return out;
}

Tensor augment(const Tensor& img_chw, const AugmentationPolicy& policy,
               Rng& rng) {
  Tensor out = img_chw;
  if (policy.hflip && rng.bernoulli(0.5)) {
    out = hflip_chw(out);
  }
  if (policy.max_shift > 0) {
    const int dy = static_cast<int>(rng.uniform_int(-policy.max_shift,
                                                    policy.max_shift));
    const int dx = static_cast<int>(rng.uniform_int(-policy.max_shift,
                                                    policy.max_shift));
    if (dy != 0 || dx != 0) out = shift_chw(out, dy, dx);
  }
  return out;
}

}  // namespace dpdm

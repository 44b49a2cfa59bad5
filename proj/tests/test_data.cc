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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "dpdm/data.h"
#include "dpdm/rng.h"

using namespace dpdm;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "dpdm_data_test";
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

void push_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

}  // namespace

TEST_CASE("toy generation is a pure function of (spec, index)") {
  const ToyDomainSpec spec = ToyDomainSpec::pretrain_default(123);
  const LabeledImageSet a = generate_toy(spec, 12);
  const LabeledImageSet b = generate_toy(spec, 12);
  for (std::int64_t i = 0; i < a.images.numel(); ++i) {
    CHECK(a.images[i] == b.images[i]);
  }
  // Image i does not depend on how many images were requested.
  const LabeledImageSet shorter = generate_toy(spec, 4);
  for (std::int64_t i = 0; i < shorter.images.numel(); ++i) {
    CHECK(shorter.images[i] == a.images[i]);
  }
  a.validate();
}

TEST_CASE("toy class assignment is round robin") {
  const ToyDomainSpec spec = ToyDomainSpec::pretrain_default(5);
  const LabeledImageSet set = generate_toy(spec, 4000);
  std::vector<int> counts(4, 0);
  for (int l : set.labels) counts[static_cast<std::size_t>(l)]++;
  for (int c : counts) CHECK(c == 1000);
}

TEST_CASE("domain polarity flip moves the mean pixel by more than 0.5") {
  const LabeledImageSet pre =
      generate_toy(ToyDomainSpec::pretrain_default(9), 400);
  const LabeledImageSet fin =
      generate_toy(ToyDomainSpec::finetune_default(10), 400);
  auto mean_pixel = [](const LabeledImageSet& s) {
    double acc = 0.0;
    for (float v : s.images.data()) acc += v;
    return acc / static_cast<double>(s.images.numel());
  };
  CHECK(std::abs(mean_pixel(pre) - mean_pixel(fin)) > 0.5);
}

TEST_CASE("toy splits use disjoint index ranges") {
  const ToyDomainSpec spec = ToyDomainSpec::finetune_default(3);
  const LabeledImageSet train = generate_toy(spec, 8, Split::kTrain, 0);
  const LabeledImageSet val = generate_toy(spec, 8, Split::kVal, 10'000'000);
  bool any_different = false;
  for (std::int64_t i = 0; i < train.images.numel(); ++i) {
    any_different = any_different || train.images[i] != val.images[i];
  }
  CHECK(any_different);
}

TEST_CASE("multi-channel toy variant exercises color paths") {
  ToyDomainSpec spec = ToyDomainSpec::pretrain_default(4);
  spec.height = 8;
  spec.width = 8;
  spec.channels = 3;
  const LabeledImageSet set = generate_toy(spec, 8);
  set.validate();
  CHECK(set.channels() == 3);
  // Class tints differ across channels for at least one foreground pixel.
  const Tensor disc = set.example_chw(0);
  bool tinted = false;
  for (int y = 0; y < 8 && !tinted; ++y) {
    for (int x = 0; x < 8 && !tinted; ++x) {
      tinted = std::abs(disc.at(0, y, x) - disc.at(1, y, x)) > 0.1f;
    }
  }
  CHECK(tinted);
}

TEST_CASE("idx round trip") {
  const fs::path dir = temp_dir();
  ToyDomainSpec spec = ToyDomainSpec::finetune_default(17);
  const LabeledImageSet set = generate_toy(spec, 10);
  const std::string img = (dir / "imgs.idx").string();
  const std::string lbl = (dir / "lbls.idx").string();
  save_idx(set, img, lbl);
  const LabeledImageSet loaded = load_idx(img, lbl);
  CHECK(loaded.size() == 10);
  CHECK(loaded.height() == 16);
  CHECK(loaded.channels() == 1);
  CHECK(loaded.labels == set.labels);
  // Quantization to bytes costs at most half a bin.
  for (std::int64_t i = 0; i < set.images.numel(); ++i) {
    CHECK(std::abs(loaded.images[i] - set.images[i]) <= 0.5f / 127.5f);
  }
  loaded.validate();
}

TEST_CASE("idx parses a hand-built single-image file") {
  const fs::path dir = temp_dir();
  std::vector<unsigned char> imgs;
  push_u32_be(imgs, 0x00000803);
  push_u32_be(imgs, 1);  // one image
  push_u32_be(imgs, 2);  // 2 x 2
  push_u32_be(imgs, 2);
  for (int i = 0; i < 4; ++i) imgs.push_back(255);
  std::vector<unsigned char> lbls;
  push_u32_be(lbls, 0x00000801);
  push_u32_be(lbls, 1);
  lbls.push_back(3);
  write_bytes(dir / "one.img", imgs);
  write_bytes(dir / "one.lbl", lbls);

  const LabeledImageSet set =
      load_idx((dir / "one.img").string(), (dir / "one.lbl").string());
  CHECK(set.size() == 1);
  for (float v : set.images.data()) CHECK(v == doctest::Approx(1.0f));
  CHECK(set.labels[0] == 3);

  SUBCASE("wrong magic is rejected") {
    std::vector<unsigned char> bad = imgs;
    bad[3] = 0x07;
    write_bytes(dir / "bad.img", bad);
    CHECK_THROWS_WITH_AS(
        load_idx((dir / "bad.img").string(), (dir / "one.lbl").string()),
        doctest::Contains("magic"), std::runtime_error);
  }
  SUBCASE("truncated payload is rejected") {
    std::vector<unsigned char> cut = imgs;
    cut.resize(imgs.size() - 2);
    write_bytes(dir / "cut.img", cut);
    CHECK_THROWS_WITH_AS(
        load_idx((dir / "cut.img").string(), (dir / "one.lbl").string()),
        doctest::Contains("truncated"), std::runtime_error);
  }
  SUBCASE("image/label count mismatch is rejected") {
    std::vector<unsigned char> two = lbls;
    two[7] = 2;
    two.push_back(1);
    write_bytes(dir / "two.lbl", two);
    CHECK_THROWS_WITH_AS(
        load_idx((dir / "one.img").string(), (dir / "two.lbl").string()),
        doctest::Contains("labels"), std::runtime_error);
  }
}

TEST_CASE("augmentations") {
  ToyDomainSpec spec = ToyDomainSpec::pretrain_default(21);
  const LabeledImageSet set = generate_toy(spec, 2);
  const Tensor img = set.example_chw(1);

  SUBCASE("all-off policy is the identity") {
    AugmentationPolicy off;
    Rng rng(1);
    const Tensor out = augment(img, off, rng);
    for (std::int64_t i = 0; i < img.numel(); ++i) CHECK(out[i] == img[i]);
  }
  SUBCASE("forced flip twice is the identity") {
    const Tensor once = hflip_chw(img);
    const Tensor twice = hflip_chw(once);
    bool changed = false;
    for (std::int64_t i = 0; i < img.numel(); ++i) {
      changed = changed || once[i] != img[i];
      CHECK(twice[i] == img[i]);
    }
    CHECK(changed);
  }
  SUBCASE("shift there and back restores interior pixels") {
    // An image whose support avoids a 2-pixel border loses nothing.
    Tensor interior({1, 16, 16});
    Rng rng(5);
    for (int y = 3; y < 13; ++y) {
      for (int x = 3; x < 13; ++x) {
        interior.at(0, y, x) = static_cast<float>(rng.uniform(-1.0, 1.0));
      }
    }
    const Tensor shifted = shift_chw(interior, 2, 0);
    const Tensor back = shift_chw(shifted, -2, 0);
    for (std::int64_t i = 0; i < interior.numel(); ++i) {
      CHECK(back[i] == interior[i]);
    }
  }
  SUBCASE("augment preserves range and shape") {
    AugmentationPolicy policy;
    policy.hflip = true;
    policy.max_shift = 3;
    Rng rng(9);
    for (int round = 0; round < 50; ++round) {
      const Tensor out = augment(img, policy, rng);
      CHECK(out.shape() == img.shape());
      for (float v : out.data()) {
        CHECK(v >= -1.0f);
        CHECK(v <= 1.0f);
      }
    }
  }
  SUBCASE("multiplicity above one requires an active dimension") {
    AugmentationPolicy off;
    CHECK_THROWS_AS(off.validate(2), std::invalid_argument);
    AugmentationPolicy timestep_only;
    timestep_only.resample_timestep = true;
    CHECK_NOTHROW(timestep_only.validate(2));
  }
}

TEST_CASE("dataset validation catches invariant violations") {
  ToyDomainSpec spec = ToyDomainSpec::pretrain_default(2);
  LabeledImageSet set = generate_toy(spec, 4);
  SUBCASE("label count mismatch") {
    set.labels.pop_back();
    CHECK_THROWS_AS(set.validate(), std::invalid_argument);
  }
  SUBCASE("pixel range") {
    set.images[0] = 1.5f;
    CHECK_THROWS_AS(set.validate(), std::invalid_argument);
  }
  SUBCASE("label range") {
    set.labels[0] = 4;
    CHECK_THROWS_AS(set.validate(), std::invalid_argument);
  }
}

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

#include "dpdm/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dpdm {

namespace {

constexpr char kMagic[4] = {'D', 'P', 'D', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;
constexpr std::uint8_t kDtypeU8 = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

  std::uint16_t u16() {
    const unsigned char* p = take(2);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }

  std::uint32_t u32() {
    const unsigned char* p = take(4);
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
  }

  float f32() { return std::bit_cast<float>(u32()); }

  std::string str(std::size_t n) {
    const unsigned char* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const unsigned char* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw std::runtime_error("checkpoint: truncated file");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data()) + pos_;
    pos_ += n;
    return p;
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

void write_entry_header(std::string& out, const std::string& name,
                        std::uint8_t dtype, const std::vector<int>& dims) {
  if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw std::invalid_argument("checkpoint: entry name too long: " + name);
  }
  put_u16(out, static_cast<std::uint16_t>(name.size()));
  out.append(name);
  out.push_back(static_cast<char>(dtype));
  if (dims.size() > 255) {
    throw std::invalid_argument("checkpoint: rank too large for entry " + name);
  }
  out.push_back(static_cast<char>(dims.size()));
  for (int d : dims) put_u32(out, static_cast<std::uint32_t>(d));
}

}  // namespace

void Checkpoint::add_prefixed(const std::string& prefix,
                              const ParameterSet& params) {
  for (const auto& [name, t] : params) {
    tensors.insert(prefix + "/" + name, t);
  }
}

ParameterSet Checkpoint::extract_prefixed(const std::string& prefix) const {
  ParameterSet out;
  const std::string full = prefix + "/";
  for (const auto& [name, t] : tensors) {
    if (name.rfind(full, 0) == 0) {
      out.insert(name.substr(full.size()), t);
    }
  }
  return out;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  // Merge tensor and text entries into one name-sorted sequence.
  std::map<std::string, int> order;  // name -> 0 tensor, 1 text
  for (const auto& [name, t] : ckpt.tensors) {
    if (!order.emplace(name, 0).second) {
      throw std::invalid_argument("checkpoint: duplicate entry name " + name);
    }
  }
  for (const auto& [name, s] : ckpt.text) {
    if (!order.emplace(name, 1).second) {
      throw std::invalid_argument("checkpoint: duplicate entry name " + name);
    }
  }

  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(order.size()));
  for (const auto& [name, which] : order) {
    if (which == 0) {
      const Tensor& t = ckpt.tensors.at(name);
      write_entry_header(out, name, kDtypeF32, t.shape());
      for (float v : t.data()) put_f32(out, v);
    } else {
      const std::string& s = ckpt.text.at(name);
      write_entry_header(out, name, kDtypeU8,
                         {static_cast<int>(s.size())});
      out.append(s);
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) {
    throw std::runtime_error("checkpoint: write failed: " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("checkpoint: cannot open: " + path);
  }
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));

  if (r.str(4) != std::string(kMagic, 4)) {
    throw std::runtime_error("checkpoint: bad magic bytes in " + path);
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version) + " in " + path);
  }
  const std::uint32_t count = r.u32();

  Checkpoint ckpt;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint16_t name_len = r.u16();
    const std::string name = r.str(name_len);
    const std::uint8_t dtype = r.u8();
    const std::uint8_t rank = r.u8();
    std::vector<int> dims(rank);
    std::int64_t numel = 1;
    for (auto& d : dims) {
      d = static_cast<int>(r.u32());
      numel *= d;
    }
    if (dtype == kDtypeF32) {
      std::vector<float> data(static_cast<std::size_t>(numel));
      for (auto& v : data) v = r.f32();
      ckpt.tensors.insert(name, Tensor(dims, std::move(data)));
    } else if (dtype == kDtypeU8) {
      ckpt.text.emplace(name, r.str(static_cast<std::size_t>(numel)));
    } else {
      throw std::runtime_error("checkpoint: unknown dtype code " +
                               std::to_string(dtype) + " for entry " + name);
    }
  }
  if (!r.at_end()) {
    throw std::runtime_error("checkpoint: trailing bytes in " + path);
  }
  return ckpt;
}

}  // namespace dpdm

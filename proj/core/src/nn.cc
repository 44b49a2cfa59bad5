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

#include "dpdm/nn.h"

#include <sstream>

namespace dpdm {

void DenoiserArch::validate() const {
  if (channels < 1 || height < 1 || width < 1) {
    throw std::invalid_argument("denoiser arch: invalid image shape");
  }
  if (base_channels < 1) {
    throw std::invalid_argument("denoiser arch: base_channels must be >= 1");
  }
  if (emb_dim < 2 || emb_dim % 2 != 0) {
    throw std::invalid_argument("denoiser arch: emb_dim must be even, >= 2");
  }
  if (num_classes < 0) {
    throw std::invalid_argument("denoiser arch: num_classes must be >= 0");
  }
}

std::string DenoiserArch::serialize() const {
  std::ostringstream os;
  os << "kind=denoiser\n"
     << "channels=" << channels << "\n"
     << "height=" << height << "\n"
     << "width=" << width << "\n"
     << "base_channels=" << base_channels << "\n"
     << "emb_dim=" << emb_dim << "\n"
     << "num_classes=" << num_classes << "\n";
  return os.str();
}

DenoiserArch DenoiserArch::parse(const std::string& text) {
  DenoiserArch a;
  std::istringstream is(text);
  std::string line;
  bool kind_ok = false;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "kind") {
      if (val != "denoiser") {
        throw std::invalid_argument("arch block: expected kind=denoiser, got " +
                                    val);
      }
      kind_ok = true;
    } else if (key == "channels") {
      a.channels = std::stoi(val);
    } else if (key == "height") {
      a.height = std::stoi(val);
    } else if (key == "width") {
      a.width = std::stoi(val);
    } else if (key == "base_channels") {
      a.base_channels = std::stoi(val);
    } else if (key == "emb_dim") {
      a.emb_dim = std::stoi(val);
    } else if (key == "num_classes") {
      a.num_classes = std::stoi(val);
    } else {
      throw std::invalid_argument("arch block: unknown key '" + key + "'");
    }
  }
  if (!kind_ok) {
    throw std::invalid_argument("arch block: missing kind=denoiser line");
  }
  a.validate();
  return a;
}

void ClassifierArch::validate() const {
  if (channels < 1 || height < 1 || width < 1) {
    throw std::invalid_argument("classifier arch: invalid image shape");
  }
  if (conv1 < 1 || conv2 < 1 || hidden < 1 || num_classes < 2) {
    throw std::invalid_argument("classifier arch: invalid layer sizes");
  }
}

std::string ClassifierArch::serialize() const {
  std::ostringstream os;
  os << "kind=classifier\n"
     << "channels=" << channels << "\n"
     << "height=" << height << "\n"
     << "width=" << width << "\n"
     << "conv1=" << conv1 << "\n"
     << "conv2=" << conv2 << "\n"
     << "hidden=" << hidden << "\n"
     << "num_classes=" << num_classes << "\n";
  return os.str();
}

ClassifierArch ClassifierArch::parse(const std::string& text) {
  ClassifierArch a;
  std::istringstream is(text);
  std::string line;
  bool kind_ok = false;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "kind") {
      if (val != "classifier") {
        throw std::invalid_argument(
            "arch block: expected kind=classifier, got " + val);
      }
      kind_ok = true;
    } else if (key == "channels") {
      a.channels = std::stoi(val);
    } else if (key == "height") {
      a.height = std::stoi(val);
    } else if (key == "width") {
      a.width = std::stoi(val);
    } else if (key == "conv1") {
      a.conv1 = std::stoi(val);
    } else if (key == "conv2") {
      a.conv2 = std::stoi(val);
    } else if (key == "hidden") {
      a.hidden = std::stoi(val);
    } else if (key == "num_classes") {
      a.num_classes = std::stoi(val);
    } else {
      throw std::invalid_argument("arch block: unknown key '" + key + "'");
    }
  }
  if (!kind_ok) {
    throw std::invalid_argument("arch block: missing kind=classifier line");
  }
  a.validate();
  return a;
}

}  // namespace dpdm

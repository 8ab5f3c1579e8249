// Copyright 2026 The memloc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace memloc {

/// 8-bit image, interleaved channels (1 = gray, 3 = RGB).
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int u, int v, int c = 0) const {
    return data[(static_cast<std::size_t>(v) * width + u) * channels + c];
  }
};

/// 16-bit single-channel image (depth).
struct Image16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;
};

/// Reads an 8-bit PNG and converts it to `channels` (1 or 3). Palette and
/// alpha are expanded/stripped. Throws Error(kIo) on failure.
Image8 read_png8(const std::string& path, int channels);

/// Reads a 16-bit single-channel PNG with raw sample values.
Image16 read_png16(const std::string& path);

void write_png(const std::string& path, const Image8& img, int compression_level = 6);
void write_png16(const std::string& path, const Image16& img, int compression_level = 6);

}  // namespace memloc

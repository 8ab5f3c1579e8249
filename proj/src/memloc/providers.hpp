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

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "memloc/localization.hpp"
#include "memloc/rerank.hpp"

namespace memloc {

/// Provider-facing image id of a keyframe.
std::string image_id(std::int64_t frame_id);

/// COCO-style uncompressed RLE: column-major runs starting with background.
nlohmann::json encode_rle(const Mask& mask);
/// Throws Error(kInvalidArgument) when the counts do not cover size[0]*size[1].
Mask decode_rle(const nlohmann::json& rle, double confidence);

/// Reads `<dir>/masks.jsonl`: {"image_id", "prompt", "mask": png path relative
/// to dir, "confidence"}. Unknown (image_id, prompt) pairs return no masks.
class MaskDirectorySegmenter : public SegmentationProvider {
 public:
  explicit MaskDirectorySegmenter(std::string dir);
  std::vector<Mask> segment(const Keyframe& frame, std::string_view prompt) override;

 private:
  std::string dir_;
  std::multimap<std::pair<std::string, std::string>, std::pair<std::string, double>> entries_;
};

/// Reads JSON lines {"image_id", "query", "raw"}. A missing key is reported
/// as a provider failure.
class LookupTableReranker : public RerankProvider {
 public:
  explicit LookupTableReranker(const std::string& path);
  std::string ask(const RerankRequest& req) override;

 private:
  std::map<std::pair<std::string, std::string>, std::string> table_;
};

/// POST {base}/rerank {"query", "image_id", "image_b64"?} -> {"raw"}.
class HttpReranker : public RerankProvider {
 public:
  HttpReranker(std::string base_url, bool send_image, double timeout_s = 30.0);
  std::string ask(const RerankRequest& req) override;

  /// Request body for a re-rank call (exposed for protocol tests).
  static nlohmann::json request_body(const RerankRequest& req, bool send_image);

 private:
  std::string base_url_;
  bool send_image_;
  double timeout_s_;
};

/// POST {base}/segment {"image_id", "prompt"} -> {"masks": [{"rle", "confidence"}]}.
class HttpSegmenter : public SegmentationProvider {
 public:
  explicit HttpSegmenter(std::string base_url, double timeout_s = 30.0);
  std::vector<Mask> segment(const Keyframe& frame, std::string_view prompt) override;

 private:
  std::string base_url_;
  double timeout_s_;
};

}  // namespace memloc

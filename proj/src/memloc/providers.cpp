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

#include "memloc/providers.hpp"

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "memloc/errors.hpp"
#include "memloc/png_io.hpp"

namespace memloc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string image_id(std::int64_t frame_id) { return std::to_string(frame_id); }

json encode_rle(const Mask& mask) {
  std::vector<std::uint64_t> counts;
  bool current = false;
  std::uint64_t run = 0;
  for (int u = 0; u < mask.width; ++u) {
    for (int v = 0; v < mask.height; ++v) {
      if (mask.at(u, v) != current) {
        counts.push_back(run);
        run = 0;
        current = !current;
      }
      ++run;
    }
  }
  counts.push_back(run);
  return json{{"size", {mask.height, mask.width}}, {"counts", counts}};
}

Mask decode_rle(const json& rle, double confidence) {
  try {
    const auto size = rle.at("size").get<std::vector<int>>();
    require(size.size() == 2 && size[0] > 0 && size[1] > 0, "rle: size must be [height, width]");
    Mask m(size[1], size[0], confidence);
    const std::uint64_t total = static_cast<std::uint64_t>(size[0]) * size[1];
    std::uint64_t pos = 0;
    bool on = false;
    for (const auto& c : rle.at("counts")) {
      const auto n = c.get<std::uint64_t>();
      require(n <= total - pos, "rle: counts overflow the mask");
      if (on) {
        for (std::uint64_t k = pos; k < pos + n; ++k) {
          m.set(static_cast<int>(k / size[0]), static_cast<int>(k % size[0]));
        }
      }
      pos += n;
      on = !on;
    }
    require(pos == total, "rle: counts cover " + std::to_string(pos) + " of " + std::to_string(total) + " pixels");
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("rle: ") + e.what());
  }
}

MaskDirectorySegmenter::MaskDirectorySegmenter(std::string dir) : dir_(std::move(dir)) {
  const std::string index = (fs::path(dir_) / "masks.jsonl").string();
  std::ifstream in(index);
  if (!in) fail(ErrorCode::kIo, "cannot open mask index '" + index + "'");
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      entries_.emplace(std::make_pair(j.at("image_id").get<std::string>(), j.at("prompt").get<std::string>()),
                       std::make_pair(j.at("mask").get<std::string>(), j.at("confidence").get<double>()));
    } catch (const json::exception& e) {
      fail(ErrorCode::kIo, index + ": bad entry: " + e.what());
    }
  }
}

std::vector<Mask> MaskDirectorySegmenter::segment(const Keyframe& frame, std::string_view prompt) {
  std::vector<Mask> out;
  auto [lo, hi] = entries_.equal_range({image_id(frame.id), std::string(prompt)});
  for (auto it = lo; it != hi; ++it) {
    Image8 img;
    try {
      img = read_png8((fs::path(dir_) / it->second.first).string(), 1);
    } catch (const Error& e) {
      throw ProviderError(e.what());
    }
    Mask m(img.width, img.height, it->second.second);
    for (std::size_t i = 0; i < img.data.size(); ++i) m.bits[i] = img.data[i] != 0 ? 1 : 0;
    out.push_back(std::move(m));
  }
  return out;
}

LookupTableReranker::LookupTableReranker(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open re-rank table '" + path + "'");
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      table_[{j.at("image_id").get<std::string>(), j.at("query").get<std::string>()}] = j.at("raw").get<std::string>();
    } catch (const json::exception& e) {
      fail(ErrorCode::kIo, path + ": bad entry: " + e.what());
    }
  }
}

std::string LookupTableReranker::ask(const RerankRequest& req) {
  auto it = table_.find({image_id(req.frame_id), req.query_text});
  if (it == table_.end()) throw ProviderError("no table entry for image " + image_id(req.frame_id));
  return it->second;
}

namespace {

json post_json(const std::string& base_url, const std::string& path, const json& body, double timeout_s) {
  httplib::Client cli(base_url);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  auto res = cli.Post(path, body.dump(), "application/json");
  if (!res) throw ProviderError(base_url + path + ": " + httplib::to_string(res.error()));
  if (res->status != 200) throw ProviderError(base_url + path + ": HTTP " + std::to_string(res->status));
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw ProviderError(base_url + path + ": invalid JSON response: " + e.what());
  }
}

}  // namespace

HttpReranker::HttpReranker(std::string base_url, bool send_image, double timeout_s)
    : base_url_(std::move(base_url)), send_image_(send_image), timeout_s_(timeout_s) {}

json HttpReranker::request_body(const RerankRequest& req, bool send_image) {
  json body{{"query", req.query_text}, {"image_id", image_id(req.frame_id)}};
  if (send_image && !req.image_ref.empty()) {
    std::ifstream in(req.image_ref, std::ios::binary);
    if (!in) throw ProviderError("cannot read image '" + req.image_ref + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    body["image_b64"] = httplib::detail::base64_encode(ss.str());
  }
  return body;
}

std::string HttpReranker::ask(const RerankRequest& req) {
  const json res = post_json(base_url_, "/rerank", request_body(req, send_image_), timeout_s_);
  if (!res.contains("raw") || !res["raw"].is_string()) throw ProviderError("re-rank response lacks a 'raw' string");
  return res["raw"].get<std::string>();
}

HttpSegmenter::HttpSegmenter(std::string base_url, double timeout_s)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s) {}

std::vector<Mask> HttpSegmenter::segment(const Keyframe& frame, std::string_view prompt) {
  const json body{{"image_id", image_id(frame.id)}, {"prompt", std::string(prompt)}};
  const json res = post_json(base_url_, "/segment", body, timeout_s_);
  std::vector<Mask> out;
  try {
    for (const auto& m : res.at("masks")) out.push_back(decode_rle(m.at("rle"), m.at("confidence").get<double>()));
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed segment response: ") + e.what());
  } catch (const Error& e) {
    throw ProviderError(std::string("malformed segment response: ") + e.what());
  }
  return out;
}

}  // namespace memloc

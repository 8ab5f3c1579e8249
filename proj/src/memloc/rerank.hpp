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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memloc/embedding_index.hpp"
#include "memloc/errors.hpp"

namespace memloc {

struct RerankRequest {
  std::int64_t frame_id = 0;
  std::string image_ref;
  std::string query_text;
};

struct RerankVerdict {
  bool detected = false;
  int score = 0;            // 0..10
  double confidence = 0.0;  // score / 10
  bool malformed = false;   // response did not follow the grammar
  bool failed = false;      // provider call failed
};

struct RerankedCandidate {
  Candidate candidate;
  RerankVerdict verdict;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ErrorCode::kInvalidArgument, what) {}
};

std::string format_prompt(std::string_view query_text);

/// Parses "yes 8"-style answers.
///
/// The first whole word equal to yes/no (any case) decides detection. The
/// score is the first integer after it, skipping whitespace and punctuation;
/// integers above 10 clamp to 10. Without an integer, yes scores 5 and no
/// scores 0. Throws ParseError when neither word is present.
RerankVerdict parse_response(std::string_view text);

/// Vision-language verifier. Implementations throw ProviderError on
/// transport failure and return the model's raw answer otherwise.
class RerankProvider {
 public:
  virtual ~RerankProvider() = default;
  virtual std::string ask(const RerankRequest& req) = 0;
};

/// One provider call per candidate. Detected candidates are kept, ordered by
/// confidence, then Stage-1 score, then frame id. If none is detected the
/// single highest-confidence candidate is returned. Throws
/// ProviderError("provider unavailable") when every call fails.
std::vector<RerankedCandidate> rerank(std::span<const Candidate> cands, RerankProvider& provider,
                                      std::string_view query_text, std::span<const std::string> image_refs = {},
                                      std::size_t jobs = 1);

}  // namespace memloc

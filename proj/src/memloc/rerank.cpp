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

#include "memloc/rerank.hpp"

#include <algorithm>
#include <cctype>

#include "memloc/log.hpp"
#include "memloc/parallel.hpp"

namespace memloc {

std::string format_prompt(std::string_view query_text) {
  require(!query_text.empty(), "re-rank prompt needs a non-empty query");
  std::string p = "Is a ";
  p += query_text;
  p += " visible in this image? Reply ONLY: yes/no <visibility 0-10>";
  return p;
}

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) return false;
  }
  return true;
}

}  // namespace

RerankVerdict parse_response(std::string_view text) {
  std::size_t i = 0;
  std::size_t token_end = std::string_view::npos;
  bool yes = false;
  while (i < text.size()) {
    if (!is_alpha(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_alpha(text[j])) ++j;
    // A word glued to digits ("no2") still counts; "yes1x" does not start a word.
    const bool preceded_by_alnum = i > 0 && is_digit(text[i - 1]);
    const std::string_view word = text.substr(i, j - i);
    if (!preceded_by_alnum && (iequals(word, "yes") || iequals(word, "no"))) {
      yes = iequals(word, "yes");
      token_end = j;
      break;
    }
    i = j;
  }
  if (token_end == std::string_view::npos) throw ParseError("no yes/no token in response");

  RerankVerdict v;
  v.detected = yes;
  v.score = yes ? 5 : 0;
  std::size_t k = token_end;
  while (k < text.size() && !is_alpha(text[k]) && !is_digit(text[k])) ++k;
  if (k < text.size() && is_digit(text[k])) {
    int value = 0;
    while (k < text.size() && is_digit(text[k])) {
      value = std::min(value * 10 + (text[k] - '0'), 1000);
      ++k;
    }
    v.score = std::min(value, 10);
  }
  v.confidence = v.score / 10.0;
  return v;
}

namespace {

bool outranks(const RerankedCandidate& a, const RerankedCandidate& b) {
  if (a.verdict.confidence != b.verdict.confidence) return a.verdict.confidence > b.verdict.confidence;
  if (a.candidate.score != b.candidate.score) return a.candidate.score > b.candidate.score;
  return a.candidate.frame_id < b.candidate.frame_id;
}

}  // namespace

std::vector<RerankedCandidate> rerank(std::span<const Candidate> cands, RerankProvider& provider,
                                      std::string_view query_text, std::span<const std::string> image_refs,
                                      std::size_t jobs) {
  require(!cands.empty(), "rerank: no candidates");
  require(image_refs.empty() || image_refs.size() == cands.size(), "rerank: image refs do not match candidates");
  const std::string query(query_text);
  std::vector<RerankedCandidate> scored(cands.size());
  parallel_for(cands.size(), jobs, [&](std::size_t i) {
    scored[i].candidate = cands[i];
    RerankRequest req{cands[i].frame_id, image_refs.empty() ? std::string{} : image_refs[i], query};
    std::string raw;
    try {
      raw = provider.ask(req);
    } catch (const ProviderError& e) {
      logger().warn("rerank: provider failed on frame {}: {}", cands[i].frame_id, e.what());
      scored[i].verdict.failed = true;
      return;
    }
    try {
      scored[i].verdict = parse_response(raw);
    } catch (const ParseError&) {
      logger().warn("rerank: malformed response for frame {}: '{}'", cands[i].frame_id, raw);
      scored[i].verdict.malformed = true;
    }
  });

  if (std::all_of(scored.begin(), scored.end(), [](const auto& s) { return s.verdict.failed; })) {
    throw ProviderError("provider unavailable");
  }

  std::vector<RerankedCandidate> kept;
  for (const auto& s : scored) {
    if (s.verdict.detected) kept.push_back(s);
  }
  if (kept.empty()) {
    kept.push_back(*std::min_element(scored.begin(), scored.end(), outranks));
    return kept;
  }
  std::stable_sort(kept.begin(), kept.end(), outranks);
  return kept;
}

}  // namespace memloc

// Copyright 2026 The Causal Probe Authors.
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

#ifndef CAUSAL_PROBE_ANSWER_DISTRIBUTION_H_
#define CAUSAL_PROBE_ANSWER_DISTRIBUTION_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "causal_probe/corpus.h"

namespace causal_probe {

// Minimum weight kept for any answer of a FULL distribution, so relative
// changes in confidence never divide by zero.
inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kNormalizationTolerance = 1e-9;

enum class DistributionForm { kFull, kTopK, kArgmax };

std::string_view FormName(DistributionForm form);  // "full", "topk", "argmax"
DistributionForm ParseForm(std::string_view name);

struct TopKEntry {
  std::string token;
  // Set when the token renders a base-10 integer.
  std::optional<int> value;
  double probability = 0.0;

  friend bool operator==(const TopKEntry&, const TopKEntry&) = default;
};

// Integer rendered by a completion token (surrounding whitespace allowed).
std::optional<int> ParseAnswerToken(std::string_view token);

// A model's answer over the space I in one of three forms:
//   FULL    normalized weights for every r in I
//   TOPK    the provider's k most likely next tokens, verbatim
//   ARGMAX  a single predicted integer, or an abstention
class AnswerDistribution {
 public:
  // Throws Error unless weights has one entry per answer, every weight is at
  // least kProbabilityFloor, and they sum to 1 within
  // kNormalizationTolerance.
  static AnswerDistribution Full(AnswerSpace space, std::vector<double> weights);
  // Floors raw scores at kProbabilityFloor and divides by their sum.
  static AnswerDistribution FromRawScores(AnswerSpace space, std::span<const double> raw);
  // Entries must be non-increasing with probabilities in (0, 1].
  static AnswerDistribution TopK(AnswerSpace space, std::vector<TopKEntry> entries);
  static AnswerDistribution Argmax(AnswerSpace space, std::optional<int> answer);

  DistributionForm form() const { return form_; }
  const AnswerSpace& space() const { return space_; }

  std::span<const double> weights() const { return weights_; }
  double Weight(int r) const { return weights_[r - AnswerSpace::kMin]; }

  const std::vector<TopKEntry>& entries() const { return entries_; }
  std::size_t k() const { return entries_.size(); }
  // Probability of the first entry rendering r.
  std::optional<double> Lookup(int r) const;
  double KthProbability() const { return entries_.back().probability; }

  std::optional<int> answer() const { return answer_; }

  // argmax over I with ties going to the smallest integer. For TOPK this is
  // the top entry if it renders an integer in I; nullopt otherwise, and for
  // abstentions.
  std::optional<int> ResolveArgmax() const;

  // The k most probable answers in I. FULL ranks by weight then by value;
  // TOPK keeps the integers in I among the first k list entries. Throws
  // Error when k exceeds the list length or the form is ARGMAX with k > 1.
  std::vector<int> TopAnswers(std::size_t k) const;

  const std::string& raw_response() const { return raw_response_; }
  void set_raw_response(std::string raw) { raw_response_ = std::move(raw); }

  friend bool operator==(const AnswerDistribution& a, const AnswerDistribution& b) {
    return a.form_ == b.form_ && a.space_.max == b.space_.max &&
           a.weights_ == b.weights_ && a.entries_ == b.entries_ &&
           a.answer_ == b.answer_ && a.raw_response_ == b.raw_response_;
  }

 private:
  DistributionForm form_ = DistributionForm::kFull;
  AnswerSpace space_;
  std::vector<double> weights_;
  std::vector<TopKEntry> entries_;
  std::optional<int> answer_;
  std::string raw_response_;
};

}  // namespace causal_probe

#endif  // CAUSAL_PROBE_ANSWER_DISTRIBUTION_H_

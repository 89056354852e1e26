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

#include "causal_probe/answer_distribution.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace causal_probe {

std::string_view FormName(DistributionForm form) {
  switch (form) {
    case DistributionForm::kFull:
      return "full";
    case DistributionForm::kTopK:
      return "topk";
    case DistributionForm::kArgmax:
      return "argmax";
  }
  return "?";
}

DistributionForm ParseForm(std::string_view name) {
  if (name == "full") return DistributionForm::kFull;
  if (name == "topk") return DistributionForm::kTopK;
  if (name == "argmax") return DistributionForm::kArgmax;
  throw Error("unknown distribution form '" + std::string(name) + "'");
}

std::optional<int> ParseAnswerToken(std::string_view token) {
  while (!token.empty() && std::isspace(static_cast<unsigned char>(token.front()))) {
    token.remove_prefix(1);
  }
  while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back()))) {
    token.remove_suffix(1);
  }
  if (token.empty() || token.size() > 9) return std::nullopt;
  int value = 0;
  for (char c : token) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    value = value * 10 + (c - '0');
  }
  return value;
}

AnswerDistribution AnswerDistribution::Full(AnswerSpace space, std::vector<double> weights) {
  if (static_cast<int>(weights.size()) != space.size()) {
    throw Error("FULL distribution needs " + std::to_string(space.size()) +
                " weights, got " + std::to_string(weights.size()));
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < kProbabilityFloor) {
      throw Error("FULL distribution weight below the probability floor");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kNormalizationTolerance) {
    throw Error("FULL distribution does not sum to 1");
  }
  AnswerDistribution d;
  d.form_ = DistributionForm::kFull;
  d.space_ = space;
  d.weights_ = std::move(weights);
  return d;
}

AnswerDistribution AnswerDistribution::FromRawScores(AnswerSpace space,
                                                     std::span<const double> raw) {
  if (static_cast<int>(raw.size()) != space.size()) {
    throw Error("raw score vector does not cover the answer space");
  }
  std::vector<double> weights(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (std::isnan(raw[i]) || raw[i] < 0.0) throw Error("raw scores must be non-negative");
    weights[i] = std::max(raw[i], kProbabilityFloor);
  }
  const double z = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!std::isfinite(z)) throw Error("raw scores do not have a finite sum");
  for (double& w : weights) w = std::max(w / z, kProbabilityFloor);
  return Full(space, std::move(weights));
}

AnswerDistribution AnswerDistribution::TopK(AnswerSpace space, std::vector<TopKEntry> entries) {
  if (entries.empty()) throw Error("TOPK distribution needs at least one entry");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double p = entries[i].probability;
    if (!(p > 0.0 && p <= 1.0)) throw Error("TOPK probability outside (0, 1]");
    if (i > 0 && p > entries[i - 1].probability) {
      throw Error("TOPK entries must be in non-increasing probability order");
    }
  }
  AnswerDistribution d;
  d.form_ = DistributionForm::kTopK;
  d.space_ = space;
  d.entries_ = std::move(entries);
  return d;
}

AnswerDistribution AnswerDistribution::Argmax(AnswerSpace space, std::optional<int> answer) {
  AnswerDistribution d;
  d.form_ = DistributionForm::kArgmax;
  d.space_ = space;
  d.answer_ = answer;
  return d;
}

std::optional<double> AnswerDistribution::Lookup(int r) const {
  for (const TopKEntry& e : entries_) {
    if (e.value == r) return e.probability;
  }
  return std::nullopt;
}

std::optional<int> AnswerDistribution::ResolveArgmax() const {
  switch (form_) {
    case DistributionForm::kFull: {
      // max_element keeps the first maximum, i.e. the smallest integer.
      auto it = std::max_element(weights_.begin(), weights_.end());
      return AnswerSpace::kMin + static_cast<int>(it - weights_.begin());
    }
    case DistributionForm::kTopK: {
      const TopKEntry& top = entries_.front();
      if (top.value && space_.Contains(*top.value)) return top.value;
      return std::nullopt;
    }
    case DistributionForm::kArgmax:
      if (answer_ && space_.Contains(*answer_)) return answer_;
      return std::nullopt;
  }
  return std::nullopt;
}

std::vector<int> AnswerDistribution::TopAnswers(std::size_t k) const {
  std::vector<int> out;
  switch (form_) {
    case DistributionForm::kFull: {
      if (k > weights_.size()) throw Error("k exceeds the answer space");
      std::vector<int> order(weights_.size());
      std::iota(order.begin(), order.end(), AnswerSpace::kMin);
      std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
        const double wa = Weight(a);
        const double wb = Weight(b);
        return wa != wb ? wa > wb : a < b;
      });
      out.assign(order.begin(), order.begin() + k);
      break;
    }
    case DistributionForm::kTopK:
      if (k > entries_.size()) {
        throw Error("k=" + std::to_string(k) + " exceeds the top-" +
                    std::to_string(entries_.size()) + " list");
      }
      for (std::size_t i = 0; i < k; ++i) {
        const auto& v = entries_[i].value;
        if (v && space_.Contains(*v)) out.push_back(*v);
      }
      break;
    case DistributionForm::kArgmax:
      if (k > 1) throw Error("argmax-only answers support k=1 only");
      if (auto a = ResolveArgmax()) out.push_back(*a);
      break;
  }
  return out;
}

}  // namespace causal_probe

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

#include "causal_probe/backends.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "causal_probe/hashing.h"

namespace causal_probe {
namespace {

class SyntheticBackend : public ModelBackend {
 public:
  SyntheticBackend(const SyntheticSpec& spec, AnswerSpace space)
      : spec_(spec), space_(space) {}

  Capability capability() const override { return Capability::kFullDist; }
  const AnswerSpace& space() const override { return space_; }

  std::string Describe() const override {
    std::ostringstream out;
    out.precision(17);
    switch (spec_.mechanism) {
      case Mechanism::kPerfect:
        out << "perfect(eps=" << spec_.epsilon << ")";
        break;
      case Mechanism::kOperandEcho:
        out << "operand_echo(i=" << spec_.operand_index << ",eps=" << spec_.epsilon << ")";
        break;
      case Mechanism::kSurfaceHash:
        out << "surface_hash(eps=" << spec_.epsilon << ")";
        break;
      case Mechanism::kUniform:
        out << "uniform";
        break;
    }
    out << ";C=" << space_.max;
    return out.str();
  }

  AnswerDistribution Score(const ProblemInstance& instance) const override {
    switch (spec_.mechanism) {
      case Mechanism::kPerfect:
        return Peaked(instance.ground_truth);
      case Mechanism::kOperandEcho: {
        if (spec_.operand_index > static_cast<int>(instance.operands.size())) {
          throw BackendError("operand_echo index exceeds the instance's operand count",
                             false);
        }
        const int n = instance.operands[spec_.operand_index - 1];
        return Peaked(std::clamp(n, AnswerSpace::kMin, space_.max));
      }
      case Mechanism::kSurfaceHash:
        return Peaked(SurfaceHashAnswer(instance.template_id, space_));
      case Mechanism::kUniform:
        return AnswerDistribution::Full(
            space_, std::vector<double>(space_.size(), 1.0 / space_.size()));
    }
    throw BackendError("unknown mechanism", false);
  }

 private:
  AnswerDistribution Peaked(int target) const {
    const double spread = spec_.epsilon / space_.size();
    std::vector<double> weights(space_.size(), spread);
    weights[target - AnswerSpace::kMin] = (1.0 - spec_.epsilon) + spread;
    return AnswerDistribution::Full(space_, std::move(weights));
  }

  SyntheticSpec spec_;
  AnswerSpace space_;
};

}  // namespace

std::string_view CapabilityName(Capability capability) {
  switch (capability) {
    case Capability::kFullDist:
      return "full";
    case Capability::kTopKDist:
      return "topk";
    case Capability::kArgmaxOnly:
      return "argmax";
  }
  return "?";
}

AnswerDistribution ScorePrompt(const ModelBackend& backend, const ProblemInstance& instance) {
  if (instance.prompt.empty()) throw BackendError("prompt must be nonempty", false);
  return backend.Score(instance);
}

int SurfaceHashAnswer(std::string_view template_id, const AnswerSpace& space) {
  return static_cast<int>(Fnv1a64(template_id) % static_cast<std::uint64_t>(space.size())) +
         AnswerSpace::kMin;
}

std::unique_ptr<ModelBackend> MakeSynthetic(const SyntheticSpec& spec, AnswerSpace space) {
  if (space.max < AnswerSpace::kMin) throw Error("answer space must be nonempty");
  if (spec.mechanism != Mechanism::kUniform) {
    if (!(spec.epsilon > 0.0 && spec.epsilon < 1.0)) {
      throw Error("synthetic epsilon must lie in (0, 1)");
    }
    if (spec.epsilon / space.size() < kProbabilityFloor) {
      throw Error("synthetic epsilon spreads less than the probability floor per answer");
    }
  }
  if (spec.mechanism == Mechanism::kOperandEcho && spec.operand_index < 1) {
    throw Error("operand_echo index must be at least 1");
  }
  return std::make_unique<SyntheticBackend>(spec, space);
}

ReplayBackend::ReplayBackend(AnswerSpace space, Capability capability, int k,
                             std::map<std::string, AnswerDistribution> by_prompt)
    : space_(space), capability_(capability), k_(k), by_prompt_(std::move(by_prompt)) {}

std::string ReplayBackend::Describe() const {
  return "replay(" + std::string(CapabilityName(capability_)) + ",k=" + std::to_string(k_) +
         ");C=" + std::to_string(space_.max);
}

const AnswerDistribution* ReplayBackend::Find(const std::string& prompt) const {
  auto it = by_prompt_.find(prompt);
  return it == by_prompt_.end() ? nullptr : &it->second;
}

AnswerDistribution ReplayBackend::Score(const ProblemInstance& instance) const {
  const AnswerDistribution* d = Find(instance.prompt);
  if (!d) throw BackendError("prompt was not recorded: " + instance.prompt, false);
  return *d;
}

}  // namespace causal_probe

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

#include "causal_probe/interventions.h"

#include <algorithm>
#include <array>

#include "json.hpp"

namespace causal_probe {
namespace {

using nlohmann::ordered_json;

// Direction in which a step's value moves as one operand grows, holding the
// others fixed. Values are positive, so add/mul preserve direction and
// sub/div reverse it on the right argument.
enum class Trend { kConst, kInc, kDec, kUnknown };

Trend Negate(Trend t) {
  if (t == Trend::kInc) return Trend::kDec;
  if (t == Trend::kDec) return Trend::kInc;
  return t;
}

Trend Combine(Trend a, Trend b) {
  if (a == Trend::kConst) return b;
  if (b == Trend::kConst) return a;
  if (a == b) return a;
  return Trend::kUnknown;
}

struct StepPlan {
  OperationStep step;
  int level = 0;  // highest operand index the step depends on
  std::array<Trend, kMaxEnumeratedOperands + 1> trend{};
};

class Enumerator {
 public:
  Enumerator(const Template& t, const AnswerSpace& space)
      : m_(t.operand_count), space_(space) {
    const int n = static_cast<int>(t.steps.size());
    plans_.resize(n);
    auto level_of = [&](int index) {
      return index <= m_ ? index : plans_[index - m_ - 1].level;
    };
    auto trend_of = [&](int index, int d) {
      if (index <= m_) return index == d ? Trend::kInc : Trend::kConst;
      return plans_[index - m_ - 1].trend[d];
    };
    for (int l = 0; l < n; ++l) {
      const OperationStep& s = t.steps[l];
      StepPlan& plan = plans_[l];
      plan.step = s;
      plan.level = std::max(level_of(s.left), level_of(s.right));
      for (int d = 1; d <= m_; ++d) {
        Trend a = trend_of(s.left, d);
        Trend b = trend_of(s.right, d);
        plan.trend[d] = (s.op == Op::kAdd || s.op == Op::kMul)
                            ? Combine(a, b)
                            : Combine(a, Negate(b));
      }
    }
    values_.assign(m_ + n, 0);
  }

  void Run(std::vector<int>* flat, std::vector<int>* results) {
    flat_ = flat;
    results_ = results;
    Recurse(1);
  }

 private:
  enum class Outcome { kOk, kSkip, kBreak };

  Outcome EvaluateLevel(int d) {
    for (std::size_t l = 0; l < plans_.size(); ++l) {
      const StepPlan& plan = plans_[l];
      if (plan.level != d) continue;
      const std::int64_t a = values_[plan.step.left - 1];
      const std::int64_t b = values_[plan.step.right - 1];
      std::int64_t v = 0;
      switch (plan.step.op) {
        case Op::kAdd:
          v = a + b;
          break;
        case Op::kSub:
          v = a - b;
          break;
        case Op::kMul:
          v = a * b;
          break;
        case Op::kDiv:
          if (a % b != 0) return Outcome::kSkip;
          v = a / b;
          break;
      }
      if (v > space_.max) {
        return plan.trend[d] == Trend::kInc ? Outcome::kBreak : Outcome::kSkip;
      }
      if (v < AnswerSpace::kMin) {
        return plan.trend[d] == Trend::kDec ? Outcome::kBreak : Outcome::kSkip;
      }
      values_[m_ + l] = v;
    }
    return Outcome::kOk;
  }

  void Recurse(int d) {
    for (int x = AnswerSpace::kMin; x <= space_.max; ++x) {
      values_[d - 1] = x;
      Outcome outcome = EvaluateLevel(d);
      if (outcome == Outcome::kBreak) break;
      if (outcome == Outcome::kSkip) continue;
      if (d < m_) {
        Recurse(d + 1);
      } else {
        for (int i = 0; i < m_; ++i) flat_->push_back(static_cast<int>(values_[i]));
        results_->push_back(static_cast<int>(values_.back()));
      }
    }
  }

  int m_;
  AnswerSpace space_;
  std::vector<StepPlan> plans_;
  std::vector<std::int64_t> values_;
  std::vector<int>* flat_ = nullptr;
  std::vector<int>* results_ = nullptr;
};

const Template* FindTemplate(std::span<const Template> corpus, const std::string& id) {
  for (const Template& t : corpus) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

std::size_t RequireMember(const OperandSet& set, std::span<const int> base) {
  auto index = set.Find(base);
  if (!index) throw Error("base operands are not a member of the valid operand set");
  return *index;
}

ordered_json InstanceToJson(const ProblemInstance& instance) {
  return ordered_json{{"template_id", instance.template_id},
                      {"operands", instance.operands},
                      {"g", instance.ground_truth},
                      {"prompt", instance.prompt}};
}

ProblemInstance InstanceFromJson(const nlohmann::json& j) {
  ProblemInstance instance;
  instance.template_id = j.at("template_id").get<std::string>();
  instance.operands = j.at("operands").get<std::vector<int>>();
  instance.ground_truth = j.at("g").get<int>();
  instance.prompt = j.at("prompt").get<std::string>();
  return instance;
}

}  // namespace

std::string_view EffectKindName(EffectKind kind) {
  switch (kind) {
    case EffectKind::kTceN:
      return "TCE_N";
    case EffectKind::kDceN:
      return "DCE_N";
    case EffectKind::kDceS:
      return "DCE_S";
    case EffectKind::kTceT:
      return "TCE_T";
  }
  return "?";
}

EffectKind ParseEffectKind(std::string_view name) {
  for (EffectKind kind : kAllEffectKinds) {
    if (EffectKindName(kind) == name) return kind;
  }
  throw ConfigError("unknown effect kind '" + std::string(name) +
                    "' (expected TCE_N, DCE_N, DCE_S or TCE_T)");
}

bool IsResultPreserving(EffectKind kind) {
  return kind == EffectKind::kDceN || kind == EffectKind::kDceS;
}

bool IsTemplateSwap(EffectKind kind) {
  return kind == EffectKind::kDceS || kind == EffectKind::kTceT;
}

std::string_view SkipReasonName(SkipReason reason) {
  switch (reason) {
    case SkipReason::kEmptyOperandSet:
      return "empty_operand_set";
    case SkipReason::kUnsupportedOperandCount:
      return "unsupported_operand_count";
    case SkipReason::kNoResultAlteringCandidate:
      return "no_result_altering_candidate";
    case SkipReason::kEmptyFiber:
      return "empty_fiber";
    case SkipReason::kNoEligibleTemplate:
      return "no_eligible_template";
  }
  return "?";
}

OperandSet OperandSet::Enumerate(const Template& t, const AnswerSpace& space) {
  if (t.operand_count > kMaxEnumeratedOperands) {
    throw SamplingError(SkipReason::kUnsupportedOperandCount,
                        "template '" + t.id + "' has " +
                            std::to_string(t.operand_count) +
                            " operands; enumeration supports at most " +
                            std::to_string(kMaxEnumeratedOperands));
  }
  OperandSet set;
  set.arity_ = t.operand_count;
  set.max_result_ = space.max;
  Enumerator(t, space).Run(&set.flat_, &set.results_);

  // Counting sort by result; stable, so each fiber stays lexicographic.
  set.fiber_begin_.assign(space.max + 2, 0);
  for (int r : set.results_) ++set.fiber_begin_[r + 1];
  for (int g = 1; g <= space.max + 1; ++g) set.fiber_begin_[g] += set.fiber_begin_[g - 1];
  set.by_result_.resize(set.results_.size());
  std::vector<std::size_t> cursor(set.fiber_begin_.begin(), set.fiber_begin_.end() - 1);
  for (std::size_t i = 0; i < set.results_.size(); ++i) {
    set.by_result_[cursor[set.results_[i]]++] = static_cast<std::uint32_t>(i);
  }
  return set;
}

std::optional<std::size_t> OperandSet::Find(std::span<const int> operands) const {
  if (static_cast<int>(operands.size()) != arity_) return std::nullopt;
  std::size_t lo = 0;
  std::size_t hi = size();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    auto t = tuple(mid);
    if (std::lexicographical_compare(t.begin(), t.end(), operands.begin(), operands.end())) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo < size() && std::equal(operands.begin(), operands.end(), tuple(lo).begin())) {
    return lo;
  }
  return std::nullopt;
}

std::size_t OperandSet::FiberSize(int g) const {
  if (g < AnswerSpace::kMin || g > max_result_) return 0;
  return fiber_begin_[g + 1] - fiber_begin_[g];
}

std::size_t OperandSet::FiberMember(int g, std::size_t i) const {
  return by_result_[fiber_begin_[g] + i];
}

std::vector<Operands> OperandSet::Tuples() const {
  std::vector<Operands> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    auto t = tuple(i);
    out.emplace_back(t.begin(), t.end());
  }
  return out;
}

std::vector<Operands> ValidOperandSet(const Template& t, const AnswerSpace& space) {
  OperandSet set = OperandSet::Enumerate(t, space);
  if (set.empty()) {
    throw SamplingError(SkipReason::kEmptyOperandSet,
                        "template '" + t.id + "' admits no operands in 1.." +
                            std::to_string(space.max));
  }
  return set.Tuples();
}

Operands SampleResultAltering(const OperandSet& set, std::span<const int> base,
                              Rng& rng) {
  const std::size_t base_index = RequireMember(set, base);
  const int g = set.result(base_index);
  const std::size_t fiber = set.FiberSize(g);
  const std::size_t candidates = set.size() - fiber;
  if (candidates == 0) {
    throw SamplingError(SkipReason::kNoResultAlteringCandidate,
                        "every valid operand tuple has result " + std::to_string(g));
  }
  // Positions in result order, skipping over the fiber of g.
  const std::size_t r = rng.Below(candidates);
  const std::size_t position = r < set.FiberStart(g) ? r : r + fiber;
  auto t = set.tuple(set.ResultOrder(position));
  return Operands(t.begin(), t.end());
}

Operands SampleResultPreserving(const OperandSet& set, std::span<const int> base,
                                Rng& rng) {
  const std::size_t base_index = RequireMember(set, base);
  const int g = set.result(base_index);
  const std::size_t fiber = set.FiberSize(g);
  if (fiber <= 1) {
    throw SamplingError(SkipReason::kEmptyFiber,
                        "no other operand tuple has result " + std::to_string(g));
  }
  // Fiber members are in increasing tuple-index order.
  std::size_t lo = 0;
  std::size_t hi = fiber;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (set.FiberMember(g, mid) < base_index) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  const std::size_t base_rank = lo;
  const std::size_t r = rng.Below(fiber - 1);
  auto t = set.tuple(set.FiberMember(g, r < base_rank ? r : r + 1));
  return Operands(t.begin(), t.end());
}

Operands SampleResultAltering(const Template& t, std::span<const int> base,
                              std::uint64_t seed, const AnswerSpace& space) {
  OperandSet set = OperandSet::Enumerate(t, space);
  Rng rng(seed);
  return SampleResultAltering(set, base, rng);
}

Operands SampleResultPreserving(const Template& t, std::span<const int> base,
                                std::uint64_t seed, const AnswerSpace& space) {
  OperandSet set = OperandSet::Enumerate(t, space);
  Rng rng(seed);
  return SampleResultPreserving(set, base, rng);
}

std::vector<std::size_t> EligibleSwaps(const Template& t,
                                       std::span<const Template> corpus,
                                       bool same_ops, std::span<const int> operands,
                                       const AnswerSpace& space) {
  std::vector<std::size_t> eligible;
  const auto g = Evaluate(t.steps, operands, space);
  if (!g) return eligible;
  for (std::size_t j = 0; j < corpus.size(); ++j) {
    const Template& other = corpus[j];
    if (other.id == t.id || other.operand_count != t.operand_count) continue;
    if ((other.signature == t.signature) != same_ops) continue;
    const auto g_other = Evaluate(other.steps, operands, space);
    if (!g_other) continue;
    if (same_ops ? *g_other == *g : *g_other != *g) eligible.push_back(j);
  }
  return eligible;
}

std::size_t SampleTemplateSwap(const Template& t, std::span<const Template> corpus,
                               bool same_ops, std::span<const int> operands,
                               Rng& rng, const AnswerSpace& space) {
  std::vector<std::size_t> eligible = EligibleSwaps(t, corpus, same_ops, operands, space);
  if (eligible.empty()) {
    throw SamplingError(SkipReason::kNoEligibleTemplate,
                        std::string("no ") + (same_ops ? "same" : "different") +
                            "-operation template eligible for '" + t.id + "'");
  }
  return eligible[rng.Below(eligible.size())];
}

std::string CheckPairInvariant(const InterventionPair& pair,
                               std::span<const Template> corpus,
                               const AnswerSpace& space) {
  const Template* base_t = FindTemplate(corpus, pair.base.template_id);
  const Template* int_t = FindTemplate(corpus, pair.intervened.template_id);
  if (!base_t || !int_t) return "unknown template id";
  for (auto [t, instance] : {std::pair{base_t, &pair.base}, std::pair{int_t, &pair.intervened}}) {
    auto g = Evaluate(t->steps, instance->operands, space);
    if (!g) return "operands not admissible for " + t->id;
    if (*g != instance->ground_truth) return "stored result disagrees with evaluation";
    if (RenderPrompt(*t, instance->operands) != instance->prompt) return "prompt mismatch";
  }
  const bool same_template = base_t->id == int_t->id;
  const bool same_operands = pair.base.operands == pair.intervened.operands;
  const bool same_result = pair.base.ground_truth == pair.intervened.ground_truth;
  switch (pair.kind) {
    case EffectKind::kTceN:
      if (!same_template) return "TCE_N must keep the template";
      if (same_operands) return "TCE_N must change the operands";
      if (same_result) return "TCE_N must change the result";
      break;
    case EffectKind::kDceN:
      if (!same_template) return "DCE_N must keep the template";
      if (same_operands) return "DCE_N must change the operands";
      if (!same_result) return "DCE_N must preserve the result";
      break;
    case EffectKind::kDceS:
      if (same_template) return "DCE_S must change the template";
      if (base_t->signature != int_t->signature) return "DCE_S must keep the operations";
      if (!same_operands) return "DCE_S must keep the operands";
      if (!same_result) return "DCE_S must preserve the result";
      break;
    case EffectKind::kTceT:
      if (same_template) return "TCE_T must change the template";
      if (base_t->signature == int_t->signature) return "TCE_T must change the operations";
      if (!same_operands) return "TCE_T must keep the operands";
      if (same_result) return "TCE_T must change the result";
      break;
  }
  return "";
}

std::size_t SkipTally::Total() const {
  std::size_t total = 0;
  for (const auto& [id, reasons] : by_template) {
    for (const auto& [reason, n] : reasons) total += n;
  }
  return total;
}

void SkipTally::Add(const std::string& template_id, SkipReason reason, std::size_t n) {
  by_template[template_id][reason] += n;
}

DatasetBuilder::DatasetBuilder(std::vector<Template> corpus, AnswerSpace space)
    : corpus_(std::move(corpus)),
      space_(space),
      sets_(corpus_.size()),
      enumerated_(corpus_.size(), false),
      set_failure_(corpus_.size()) {}

const OperandSet* DatasetBuilder::OperandSetFor(std::size_t template_index) {
  if (!enumerated_[template_index]) {
    enumerated_[template_index] = true;
    try {
      auto set = std::make_unique<OperandSet>(
          OperandSet::Enumerate(corpus_[template_index], space_));
      if (set->empty()) {
        set_failure_[template_index] = SkipReason::kEmptyOperandSet;
      } else {
        sets_[template_index] = std::move(set);
      }
    } catch (const SamplingError& e) {
      set_failure_[template_index] = e.reason();
    }
  }
  return sets_[template_index].get();
}

Dataset DatasetBuilder::Build(EffectKind kind, int pairs_per_template,
                              std::uint64_t seed) {
  if (pairs_per_template < 1) throw Error("pairs_per_template must be at least 1");
  if (corpus_.empty()) throw Error("cannot build a dataset from an empty corpus");

  Dataset dataset;
  dataset.kind = kind;
  dataset.seed = seed;
  const std::string kind_name(EffectKindName(kind));
  const std::string seed_tag = "s" + std::to_string(seed);

  for (std::size_t i = 0; i < corpus_.size(); ++i) {
    const Template& t = corpus_[i];
    dataset.attempted += pairs_per_template;
    const OperandSet* set = OperandSetFor(i);
    if (!set) {
      dataset.skips.Add(t.id, *set_failure_[i], pairs_per_template);
      continue;
    }
    Rng rng(DeriveStreamSeed(seed, kind_name, t.id));
    for (int p = 0; p < pairs_per_template; ++p) {
      auto base = set->tuple(rng.Below(set->size()));
      try {
        InterventionPair pair;
        pair.kind = kind;
        pair.seed = seed;
        pair.base = Instantiate(t, base, space_);
        switch (kind) {
          case EffectKind::kTceN:
            pair.intervened = Instantiate(t, SampleResultAltering(*set, base, rng), space_);
            break;
          case EffectKind::kDceN:
            pair.intervened = Instantiate(t, SampleResultPreserving(*set, base, rng), space_);
            break;
          case EffectKind::kDceS:
          case EffectKind::kTceT: {
            const std::size_t j = SampleTemplateSwap(
                t, corpus_, kind == EffectKind::kDceS, base, rng, space_);
            pair.intervened = Instantiate(corpus_[j], base, space_);
            break;
          }
        }
        pair.pair_id = kind_name + "/" + seed_tag + "/" + t.id + "/" + std::to_string(p);
        dataset.pairs.push_back(std::move(pair));
      } catch (const SamplingError& e) {
        dataset.skips.Add(t.id, e.reason());
      }
    }
  }
  return dataset;
}

std::vector<Dataset> BuildDataset(const std::vector<Template>& corpus,
                                  EffectKind kind, int pairs_per_template,
                                  const AnswerSpace& space,
                                  std::span<const std::uint64_t> seeds) {
  DatasetBuilder builder(corpus, space);
  std::vector<Dataset> out;
  for (std::uint64_t seed : seeds) out.push_back(builder.Build(kind, pairs_per_template, seed));
  return out;
}

std::string SerializePair(const InterventionPair& pair) {
  ordered_json j{{"pair_id", pair.pair_id},
                 {"kind", std::string(EffectKindName(pair.kind))},
                 {"seed", pair.seed},
                 {"base", InstanceToJson(pair.base)},
                 {"intervened", InstanceToJson(pair.intervened)}};
  return j.dump();
}

InterventionPair ParsePair(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    InterventionPair pair;
    pair.pair_id = j.at("pair_id").get<std::string>();
    pair.kind = ParseEffectKind(j.at("kind").get<std::string>());
    pair.seed = j.at("seed").get<std::uint64_t>();
    pair.base = InstanceFromJson(j.at("base"));
    pair.intervened = InstanceFromJson(j.at("intervened"));
    return pair;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed dataset line: ") + e.what());
  }
}

}  // namespace causal_probe

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

// Intervention pairs (q, q') for the four measured causal quantities.
//
//   TCE_N  same template, new operands, result changes
//   DCE_N  same template, new operands, result preserved
//   DCE_S  other template with the same operations, same operands
//   TCE_T  other template with different operations, same operands,
//          result changes
//
// All candidate sets are enumerated exactly, so every sampler draws
// uniformly from its conditional support without rejection.

#ifndef CAUSAL_PROBE_INTERVENTIONS_H_
#define CAUSAL_PROBE_INTERVENTIONS_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "causal_probe/corpus.h"
#include "causal_probe/hashing.h"

namespace causal_probe {

enum class EffectKind { kTceN, kDceN, kDceS, kTceT };

inline constexpr EffectKind kAllEffectKinds[] = {
    EffectKind::kTceN, EffectKind::kDceN, EffectKind::kDceS, EffectKind::kTceT};

std::string_view EffectKindName(EffectKind kind);  // "TCE_N", ...
EffectKind ParseEffectKind(std::string_view name);  // throws ConfigError
bool IsResultPreserving(EffectKind kind);            // DCE_N, DCE_S
bool IsTemplateSwap(EffectKind kind);                // DCE_S, TCE_T

enum class SkipReason {
  kEmptyOperandSet,
  kUnsupportedOperandCount,
  kNoResultAlteringCandidate,
  kEmptyFiber,
  kNoEligibleTemplate,
};

std::string_view SkipReasonName(SkipReason reason);

class SamplingError : public Error {
 public:
  SamplingError(SkipReason reason, const std::string& what)
      : Error(what), reason_(reason) {}
  SkipReason reason() const { return reason_; }

 private:
  SkipReason reason_;
};

// Largest operand count the exact enumeration accepts.
inline constexpr int kMaxEnumeratedOperands = 3;

// The exact set {n in I^m : Evaluate(steps, n) succeeds}, stored in
// lexicographic order together with an index grouping tuples by result.
class OperandSet {
 public:
  // Enumerates with per-step pruning. Throws SamplingError with
  // kUnsupportedOperandCount when m > kMaxEnumeratedOperands.
  static OperandSet Enumerate(const Template& t, const AnswerSpace& space);

  int arity() const { return arity_; }
  std::size_t size() const { return results_.size(); }
  bool empty() const { return results_.empty(); }

  std::span<const int> tuple(std::size_t i) const {
    return {flat_.data() + i * arity_, static_cast<std::size_t>(arity_)};
  }
  int result(std::size_t i) const { return results_[i]; }

  // Lexicographic position of `operands`, or nullopt if not a member.
  std::optional<std::size_t> Find(std::span<const int> operands) const;

  // Number of members whose result equals g.
  std::size_t FiberSize(int g) const;
  // i-th member (0-based, lexicographic) of the fiber of g.
  std::size_t FiberMember(int g, std::size_t i) const;
  // Members ordered by (result, lexicographic): the tuple index at
  // `position`, and the position where the fiber of g starts.
  std::size_t ResultOrder(std::size_t position) const { return by_result_[position]; }
  std::size_t FiberStart(int g) const { return fiber_begin_[g]; }

  std::vector<Operands> Tuples() const;

 private:
  int arity_ = 0;
  int max_result_ = 0;
  std::vector<int> flat_;
  std::vector<int> results_;
  // Tuple indices sorted by (result, lexicographic); fiber g occupies
  // [fiber_begin_[g], fiber_begin_[g + 1]).
  std::vector<std::uint32_t> by_result_;
  std::vector<std::size_t> fiber_begin_;
};

// Enumerated valid operand tuples. Throws SamplingError on an empty set.
std::vector<Operands> ValidOperandSet(const Template& t, const AnswerSpace& space);

// Uniform draw from {n valid : f(n) != f(base)}.
Operands SampleResultAltering(const OperandSet& set, std::span<const int> base,
                              Rng& rng);
// Uniform draw from {n valid : f(n) == f(base), n != base}.
Operands SampleResultPreserving(const OperandSet& set, std::span<const int> base,
                                Rng& rng);

// Convenience forms that enumerate the template's set and seed an Rng.
Operands SampleResultAltering(const Template& t, std::span<const int> base,
                              std::uint64_t seed, const AnswerSpace& space = {});
Operands SampleResultPreserving(const Template& t, std::span<const int> base,
                                std::uint64_t seed, const AnswerSpace& space = {});

// Templates other than `t` eligible for a swap with fixed operands. With
// same_ops the candidates share t's signature; otherwise they have a
// different signature, accept the operands, and give a different result.
std::vector<std::size_t> EligibleSwaps(const Template& t,
                                       std::span<const Template> corpus,
                                       bool same_ops, std::span<const int> operands,
                                       const AnswerSpace& space);

// Uniform draw among EligibleSwaps; returns an index into `corpus`.
// Throws SamplingError(kNoEligibleTemplate) when there is none.
std::size_t SampleTemplateSwap(const Template& t, std::span<const Template> corpus,
                               bool same_ops, std::span<const int> operands,
                               Rng& rng, const AnswerSpace& space = {});

struct InterventionPair {
  std::string pair_id;
  EffectKind kind = EffectKind::kTceN;
  std::uint64_t seed = 0;
  ProblemInstance base;
  ProblemInstance intervened;
};

// Returns an empty string when the pair satisfies its kind's invariant,
// otherwise a description of the violation. Both instances are re-evaluated
// against their templates.
std::string CheckPairInvariant(const InterventionPair& pair,
                               std::span<const Template> corpus,
                               const AnswerSpace& space);

// Skip counts for one (kind, seed) stream, per template.
struct SkipTally {
  std::map<std::string, std::map<SkipReason, std::size_t>> by_template;

  std::size_t Total() const;
  void Add(const std::string& template_id, SkipReason reason, std::size_t n = 1);
};

struct Dataset {
  EffectKind kind = EffectKind::kTceN;
  std::uint64_t seed = 0;
  std::size_t attempted = 0;
  std::vector<InterventionPair> pairs;
  SkipTally skips;
};

// Builds intervention datasets over a fixed corpus, caching the operand
// enumeration of each template across kinds and seeds.
class DatasetBuilder {
 public:
  DatasetBuilder(std::vector<Template> corpus, AnswerSpace space);

  const std::vector<Template>& corpus() const { return corpus_; }
  const AnswerSpace& space() const { return space_; }

  // One dataset for (kind, seed). Each template gets its own random stream
  // seeded from (seed, kind, template id). Throws Error when
  // pairs_per_template < 1 or the corpus is empty.
  Dataset Build(EffectKind kind, int pairs_per_template, std::uint64_t seed);

  // nullptr when the template cannot be enumerated.
  const OperandSet* OperandSetFor(std::size_t template_index);

 private:
  std::vector<Template> corpus_;
  AnswerSpace space_;
  std::vector<std::unique_ptr<OperandSet>> sets_;
  std::vector<bool> enumerated_;
  std::vector<std::optional<SkipReason>> set_failure_;
};

// One dataset per seed.
std::vector<Dataset> BuildDataset(const std::vector<Template>& corpus,
                                  EffectKind kind, int pairs_per_template,
                                  const AnswerSpace& space,
                                  std::span<const std::uint64_t> seeds);

// JSON line for one pair (no trailing newline), and its inverse.
std::string SerializePair(const InterventionPair& pair);
InterventionPair ParsePair(std::string_view line);

}  // namespace causal_probe

#endif  // CAUSAL_PROBE_INTERVENTIONS_H_

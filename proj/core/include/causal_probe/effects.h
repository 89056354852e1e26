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

// Per-pair effect measures and their aggregation into causal effect
// estimates.
//
// For a pair with base distribution P (ground truth g) and intervened
// distribution P' (ground truth g'):
//
//   delta_cp  = 1 if argmax P != argmax P', else 0
//   delta_rcc = ((P(g) - P'(g)) / P'(g) + (P'(g') - P(g')) / P(g')) / 2
//
// Estimates average per-pair values per template, then over templates
// within a seed, then over seeds.

#ifndef CAUSAL_PROBE_EFFECTS_H_
#define CAUSAL_PROBE_EFFECTS_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "causal_probe/answer_distribution.h"
#include "causal_probe/backends.h"
#include "causal_probe/interventions.h"
#include "causal_probe/run_store.h"

namespace causal_probe {

enum class Metric { kCp, kRcc };

std::string_view MetricName(Metric metric);  // "cp", "rcc"

enum class RccMode { kExact, kLowerBound, kDiscarded, kUnavailable };

std::string_view RccModeName(RccMode mode);

// 1 if the predicted answers differ. nullopt when either side cannot be
// resolved to an answer in I (a TOPK list headed by a non-integer token, or
// an abstention); the pair is then discarded for this metric.
std::optional<int> DeltaCp(const AnswerDistribution& p, const AnswerDistribution& p_prime);

// Exact relative change in confidence over FULL distributions. For
// result-preserving pairs pass g_prime == g. Throws Error for other forms.
double DeltaRcc(const AnswerDistribution& p, const AnswerDistribution& p_prime, int g,
                int g_prime);

enum class BranchMode {
  kExact,       // both probabilities were in the lists
  kLowerBound,  // the denominator was replaced by the k-th probability
  kZero,        // the numerator's probability was missing
};

struct RccTopKResult {
  double value = 0.0;
  RccMode mode = RccMode::kExact;
  double delta = 0.0;
  BranchMode delta_mode = BranchMode::kExact;
  double delta_prime = 0.0;
  BranchMode delta_prime_mode = BranchMode::kExact;
};

// Relative change in confidence from truncated top-k lists. When the
// denominator's probability is missing it is bounded above by the k-th
// listed probability, giving a lower bound on that branch; when the
// numerator's is missing the branch is 0. The result is kExact only when
// all four probabilities were listed, kLowerBound otherwise.
RccTopKResult RccTopK(const AnswerDistribution& p, const AnswerDistribution& p_prime, int g,
                      int g_prime);

// Result-preserving variant: nullopt (discard) unless P(g) and P'(g) are
// both listed, in which case the exact value.
std::optional<double> RccTopKDceFilter(const AnswerDistribution& p,
                                       const AnswerDistribution& p_prime, int g);

struct PairMeasurement {
  std::string pair_id;
  std::optional<int> delta_cp;
  std::optional<double> delta_rcc;
  RccMode rcc_mode = RccMode::kExact;
};

// Measures one pair. FULL uses the exact formulas; TOPK uses RccTopK for
// result-altering kinds and RccTopKDceFilter for result-preserving ones;
// ARGMAX yields delta_cp only (rcc_mode kUnavailable). Throws Error when
// the two sides have different forms.
PairMeasurement MeasurePair(const InterventionPair& pair, const AnswerDistribution& base,
                            const AnswerDistribution& intervened);

struct EffectEstimate {
  EffectKind kind = EffectKind::kTceN;
  Metric metric = Metric::kCp;
  // False when the backend cannot support the metric (RCC for argmax-only
  // runs); all numeric fields are then zero.
  bool available = true;
  double mean = 0.0;
  double std_error = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  // n_pairs + n_skipped + n_discarded equals the number of attempted pairs.
  std::size_t n_pairs = 0;
  std::size_t n_skipped = 0;  // not generated, or missing from the store
  std::size_t n_discarded = 0;
  std::size_t n_lower_bound = 0;  // included pairs measured as lower bounds
  std::map<std::string, double> per_template_means;  // averaged over seeds
  std::map<std::uint64_t, double> per_seed_means;
  std::vector<std::uint64_t> seeds;
};

// Aggregates measurements (keyed by pair id) over datasets of one kind,
// one per seed. Throws AnalysisError when no pair is usable.
EffectEstimate Estimate(const std::map<std::string, PairMeasurement>& measurements,
                        std::span<const Dataset> datasets, EffectKind kind, Metric metric);

// As Estimate, but reports an unusable effect as available == false
// instead of throwing.
EffectEstimate SummarizeEffect(const std::map<std::string, PairMeasurement>& measurements,
                               std::span<const Dataset> datasets, EffectKind kind,
                               Metric metric);

using DistributionLookup =
    std::function<const AnswerDistribution*(const std::string& pair_id, Side side)>;

struct AccuracyReport {
  int k = 1;
  double overall = 0.0;
  std::size_t instances = 0;
  std::map<std::string, double> per_template;
  std::map<std::string, std::size_t> per_template_instances;
};

// Fraction of instances whose ground truth is among the k most probable
// answers. Both sides of every pair count, deduplicated by instance id.
// Throws Error when k exceeds a TOPK list and AnalysisError when nothing
// was recorded.
AccuracyReport AccuracyAtK(const DistributionLookup& lookup, std::span<const Dataset> datasets,
                           int k);

// Pearson correlation. Throws AnalysisError for mismatched or short inputs
// and for zero variance.
double Pearson(std::span<const double> xs, std::span<const double> ys);

// Probability a distribution assigns to answer g: the normalized weight for
// FULL, the raw listed probability (0 if unlisted) for TOPK.
double ProbabilityOf(const AnswerDistribution& d, int g);

struct HeatmapGrid {
  std::string signature;
  int range_max = 0;
  std::size_t templates = 0;
  // Values above this are saturated when drawn; stored values are never
  // clipped.
  double display_clip = 0.2;
  // Row-major over n1 then n2; nullopt where the operands are invalid.
  std::vector<std::optional<double>> cells;

  std::optional<double> at(int n1, int n2) const {
    return cells[static_cast<std::size_t>(n1 - 1) * range_max + (n2 - 1)];
  }
};

using InstanceScorer = std::function<std::optional<AnswerDistribution>(const ProblemInstance&)>;

// Mean probability of the ground truth over every template with the given
// two-operand signature, for each (n1, n2) in [1..range_max]^2. A template
// for which `scorer` returns nullopt does not contribute to that cell.
HeatmapGrid BuildHeatmapGrid(const InstanceScorer& scorer, std::span<const Template> templates,
                             std::string_view signature, int range_max,
                             const AnswerSpace& space);
HeatmapGrid BuildHeatmapGrid(const ModelBackend& backend, std::span<const Template> templates,
                             std::string_view signature, int range_max);

}  // namespace causal_probe

#endif  // CAUSAL_PROBE_EFFECTS_H_

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

#include "causal_probe/effects.h"

#include <algorithm>
#include <cmath>
#include <set>

namespace causal_probe {
namespace {

// Incremental mean; exact when every input is equal.
class RunningMean {
 public:
  void Add(double x) {
    ++n_;
    mean_ += (x - mean_) / static_cast<double>(n_);
  }
  double mean() const { return mean_; }
  std::size_t count() const { return n_; }

 private:
  double mean_ = 0.0;
  std::size_t n_ = 0;
};

double SampleStdDev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  RunningMean m;
  for (double x : xs) m.Add(x);
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean()) * (x - m.mean());
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

// Linear interpolation between closest ranks.
double Quantile(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + (xs[hi] - xs[lo]) * frac;
}

void RequireFull(const AnswerDistribution& d) {
  if (d.form() != DistributionForm::kFull) {
    throw Error("exact relative change in confidence needs FULL distributions");
  }
}

void RequireTopK(const AnswerDistribution& d) {
  if (d.form() != DistributionForm::kTopK) throw Error("expected a TOPK distribution");
}

// One branch of the truncated-list estimate: relative change of `numer`'s
// probability of r against `denom`'s.
std::pair<double, BranchMode> TopKBranch(const AnswerDistribution& numer,
                                         const AnswerDistribution& denom, int r) {
  const std::optional<double> top = numer.Lookup(r);
  if (!top) return {0.0, BranchMode::kZero};
  if (const std::optional<double> bottom = denom.Lookup(r)) {
    return {(*top - *bottom) / *bottom, BranchMode::kExact};
  }
  const double bound = denom.KthProbability();
  return {(*top - bound) / bound, BranchMode::kLowerBound};
}

}  // namespace

std::string_view MetricName(Metric metric) { return metric == Metric::kCp ? "cp" : "rcc"; }

std::string_view RccModeName(RccMode mode) {
  switch (mode) {
    case RccMode::kExact:
      return "exact";
    case RccMode::kLowerBound:
      return "lower_bound";
    case RccMode::kDiscarded:
      return "discarded";
    case RccMode::kUnavailable:
      return "unavailable";
  }
  return "?";
}

std::optional<int> DeltaCp(const AnswerDistribution& p, const AnswerDistribution& p_prime) {
  const std::optional<int> r = p.ResolveArgmax();
  const std::optional<int> r_prime = p_prime.ResolveArgmax();
  if (!r || !r_prime) return std::nullopt;
  return *r != *r_prime ? 1 : 0;
}

double DeltaRcc(const AnswerDistribution& p, const AnswerDistribution& p_prime, int g,
                int g_prime) {
  RequireFull(p);
  RequireFull(p_prime);
  const double rel = (p.Weight(g) - p_prime.Weight(g)) / p_prime.Weight(g);
  const double rel_prime = (p_prime.Weight(g_prime) - p.Weight(g_prime)) / p.Weight(g_prime);
  return 0.5 * (rel + rel_prime);
}

RccTopKResult RccTopK(const AnswerDistribution& p, const AnswerDistribution& p_prime, int g,
                      int g_prime) {
  RequireTopK(p);
  RequireTopK(p_prime);
  RccTopKResult out;
  std::tie(out.delta, out.delta_mode) = TopKBranch(p, p_prime, g);
  std::tie(out.delta_prime, out.delta_prime_mode) = TopKBranch(p_prime, p, g_prime);
  out.value = 0.5 * (out.delta + out.delta_prime);
  const bool exact =
      out.delta_mode == BranchMode::kExact && out.delta_prime_mode == BranchMode::kExact;
  out.mode = exact ? RccMode::kExact : RccMode::kLowerBound;
  return out;
}

std::optional<double> RccTopKDceFilter(const AnswerDistribution& p,
                                       const AnswerDistribution& p_prime, int g) {
  RequireTopK(p);
  RequireTopK(p_prime);
  const std::optional<double> before = p.Lookup(g);
  const std::optional<double> after = p_prime.Lookup(g);
  if (!before || !after) return std::nullopt;
  return 0.5 * ((*before - *after) / *after + (*after - *before) / *before);
}

PairMeasurement MeasurePair(const InterventionPair& pair, const AnswerDistribution& base,
                            const AnswerDistribution& intervened) {
  if (base.form() != intervened.form()) {
    throw Error("pair " + pair.pair_id + " mixes distribution forms");
  }
  PairMeasurement m;
  m.pair_id = pair.pair_id;
  m.delta_cp = DeltaCp(base, intervened);
  const int g = pair.base.ground_truth;
  const int g_prime = pair.intervened.ground_truth;
  switch (base.form()) {
    case DistributionForm::kFull:
      m.delta_rcc = DeltaRcc(base, intervened, g, g_prime);
      m.rcc_mode = RccMode::kExact;
      break;
    case DistributionForm::kTopK:
      if (IsResultPreserving(pair.kind)) {
        m.delta_rcc = RccTopKDceFilter(base, intervened, g);
        m.rcc_mode = m.delta_rcc ? RccMode::kExact : RccMode::kDiscarded;
      } else {
        const RccTopKResult r = RccTopK(base, intervened, g, g_prime);
        m.delta_rcc = r.value;
        m.rcc_mode = r.mode;
      }
      break;
    case DistributionForm::kArgmax:
      m.rcc_mode = RccMode::kUnavailable;
      break;
  }
  return m;
}

EffectEstimate SummarizeEffect(const std::map<std::string, PairMeasurement>& measurements,
                               std::span<const Dataset> datasets, EffectKind kind,
                               Metric metric) {
  EffectEstimate est;
  est.kind = kind;
  est.metric = metric;

  std::vector<double> values;
  std::vector<double> seed_means;
  std::vector<double> template_means_flat;
  std::map<std::string, RunningMean> template_over_seeds;
  std::size_t unavailable = 0;

  for (const Dataset& dataset : datasets) {
    if (dataset.kind != kind) throw AnalysisError("dataset kind does not match the estimate");
    est.seeds.push_back(dataset.seed);
    est.n_skipped += dataset.skips.Total();

    // Template order follows first appearance in the dataset.
    std::vector<std::string> order;
    std::map<std::string, RunningMean> per_template;
    for (const InterventionPair& pair : dataset.pairs) {
      auto it = measurements.find(pair.pair_id);
      if (it == measurements.end()) {
        ++est.n_skipped;
        continue;
      }
      const PairMeasurement& m = it->second;
      std::optional<double> value;
      if (metric == Metric::kCp) {
        if (m.delta_cp) value = *m.delta_cp;
      } else if (m.rcc_mode == RccMode::kUnavailable) {
        ++unavailable;
        continue;
      } else if (m.rcc_mode != RccMode::kDiscarded) {
        value = m.delta_rcc;
        if (m.rcc_mode == RccMode::kLowerBound) ++est.n_lower_bound;
      }
      if (!value) {
        ++est.n_discarded;
        continue;
      }
      ++est.n_pairs;
      values.push_back(*value);
      const std::string& id = pair.base.template_id;
      if (!per_template.count(id)) order.push_back(id);
      per_template[id].Add(*value);
    }
    if (order.empty()) continue;
    RunningMean seed_mean;
    for (const std::string& id : order) {
      const double mean = per_template[id].mean();
      seed_mean.Add(mean);
      template_means_flat.push_back(mean);
      template_over_seeds[id].Add(mean);
    }
    est.per_seed_means[dataset.seed] = seed_mean.mean();
    seed_means.push_back(seed_mean.mean());
  }

  // Argmax-only answers carry no probabilities.
  est.n_skipped += unavailable;
  if (est.n_pairs == 0) {
    est.available = false;
    return est;
  }

  RunningMean grand;
  for (double m : seed_means) grand.Add(m);
  est.mean = grand.mean();
  if (seed_means.size() > 1) {
    est.std_error = SampleStdDev(seed_means) / std::sqrt(static_cast<double>(seed_means.size()));
  } else {
    est.std_error = SampleStdDev(template_means_flat) /
                    std::sqrt(static_cast<double>(template_means_flat.size()));
  }
  est.median = Quantile(values, 0.5);
  est.p95 = Quantile(values, 0.95);
  for (const auto& [id, mean] : template_over_seeds) est.per_template_means[id] = mean.mean();
  return est;
}

EffectEstimate Estimate(const std::map<std::string, PairMeasurement>& measurements,
                        std::span<const Dataset> datasets, EffectKind kind, Metric metric) {
  EffectEstimate est = SummarizeEffect(measurements, datasets, kind, metric);
  if (!est.available) {
    throw AnalysisError("no usable pairs for " + std::string(EffectKindName(kind)) + "/" +
                        std::string(MetricName(metric)));
  }
  return est;
}

AccuracyReport AccuracyAtK(const DistributionLookup& lookup, std::span<const Dataset> datasets,
                           int k) {
  if (k < 1) throw Error("k must be at least 1");
  AccuracyReport report;
  report.k = k;
  std::set<std::string> seen;
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // hits, total
  std::size_t hits = 0;
  for (const Dataset& dataset : datasets) {
    for (const InterventionPair& pair : dataset.pairs) {
      for (auto [side, instance] : {std::pair{Side::kBase, &pair.base},
                                    std::pair{Side::kIntervened, &pair.intervened}}) {
        const AnswerDistribution* d = lookup(pair.pair_id, side);
        if (!d) continue;
        if (!seen.insert(instance->InstanceId()).second) continue;
        const std::vector<int> top = d->TopAnswers(static_cast<std::size_t>(k));
        const bool hit = std::find(top.begin(), top.end(), instance->ground_truth) != top.end();
        auto& [template_hits, template_total] = tally[instance->template_id];
        template_hits += hit;
        ++template_total;
        hits += hit;
        ++report.instances;
      }
    }
  }
  if (report.instances == 0) throw AnalysisError("no recorded instances for accuracy");
  report.overall = static_cast<double>(hits) / static_cast<double>(report.instances);
  for (const auto& [id, counts] : tally) {
    report.per_template[id] = static_cast<double>(counts.first) / static_cast<double>(counts.second);
    report.per_template_instances[id] = counts.second;
  }
  return report;
}

double Pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw AnalysisError("pearson inputs differ in length");
  if (xs.size() < 2) throw AnalysisError("pearson needs at least two points");
  RunningMean mx;
  RunningMean my;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx.Add(xs[i]);
    my.Add(ys[i]);
  }
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx.mean();
    const double dy = ys[i] - my.mean();
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw AnalysisError("pearson undefined for zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double ProbabilityOf(const AnswerDistribution& d, int g) {
  switch (d.form()) {
    case DistributionForm::kFull:
      return d.space().Contains(g) ? d.Weight(g) : 0.0;
    case DistributionForm::kTopK:
      return d.Lookup(g).value_or(0.0);
    case DistributionForm::kArgmax:
      break;
  }
  throw Error("argmax-only answers carry no probabilities");
}

HeatmapGrid BuildHeatmapGrid(const InstanceScorer& scorer, std::span<const Template> templates,
                             std::string_view signature, int range_max,
                             const AnswerSpace& space) {
  std::vector<const Template*> matching;
  for (const Template& t : templates) {
    if (t.signature == signature) {
      if (t.operand_count != 2) throw Error("heatmap grids need a two-operand signature");
      matching.push_back(&t);
    }
  }
  if (matching.empty()) {
    throw AnalysisError("no template has signature " + std::string(signature));
  }
  if (range_max < 1 || range_max > space.max) {
    throw Error("heatmap range must lie in 1.." + std::to_string(space.max));
  }

  HeatmapGrid grid;
  grid.signature = signature;
  grid.range_max = range_max;
  grid.templates = matching.size();
  grid.cells.assign(static_cast<std::size_t>(range_max) * range_max, std::nullopt);
  bool any = false;
  for (int n1 = 1; n1 <= range_max; ++n1) {
    for (int n2 = 1; n2 <= range_max; ++n2) {
      const int operands[2] = {n1, n2};
      const auto g = Evaluate(matching.front()->steps, operands, space);
      if (!g) continue;
      RunningMean mean;
      for (const Template* t : matching) {
        const std::optional<AnswerDistribution> d = scorer(Instantiate(*t, operands, space));
        if (d) mean.Add(ProbabilityOf(*d, *g));
      }
      if (mean.count() == 0) continue;
      grid.cells[static_cast<std::size_t>(n1 - 1) * range_max + (n2 - 1)] = mean.mean();
      any = true;
    }
  }
  if (!any) throw AnalysisError("heatmap grid has no valid cells");
  return grid;
}

HeatmapGrid BuildHeatmapGrid(const ModelBackend& backend, std::span<const Template> templates,
                             std::string_view signature, int range_max) {
  return BuildHeatmapGrid(
      [&](const ProblemInstance& instance) -> std::optional<AnswerDistribution> {
        return ScorePrompt(backend, instance);
      },
      templates, signature, range_max, backend.space());
}

}  // namespace causal_probe

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

// The generate -> evaluate -> analyze -> report pipeline. Stages hand off
// through files under the output directory:
//
//   <out>/datasets/manifest.json           config + corpus hash, skip tally
//   <out>/datasets/<KIND>_seed<S>.jsonl    intervention pairs
//   <out>/runs/store.jsonl                 recorded model answers
//   <out>/runs/store.meta.json             dataset hash + backend hash
//   <out>/analysis/*.csv                   effect reports and tables
//   <out>/analysis/analysis.meta.json
//   <out>/report/summary.md, *.tsv
//
// Each stage checks the hashes recorded by the stage before it and refuses
// inputs of mixed provenance.

#ifndef CAUSAL_PROBE_HARNESS_H_
#define CAUSAL_PROBE_HARNESS_H_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "causal_probe/config.h"
#include "causal_probe/effects.h"
#include "causal_probe/interventions.h"
#include "causal_probe/run_store.h"

namespace causal_probe {

// Discard or lower-bound rates above this are flagged in reports.
inline constexpr double kUnreliableRateThreshold = 0.10;

struct RunLayout {
  explicit RunLayout(std::string out_dir) : out(std::move(out_dir)) {}

  std::string datasets_dir() const { return out + "/datasets"; }
  std::string manifest() const { return datasets_dir() + "/manifest.json"; }
  std::string dataset_file(EffectKind kind, std::uint64_t seed) const;
  std::string runs_dir() const { return out + "/runs"; }
  std::string store() const { return runs_dir() + "/store.jsonl"; }
  std::string store_meta() const { return runs_dir() + "/store.meta.json"; }
  std::string analysis_dir() const { return out + "/analysis"; }
  std::string report_dir() const { return out + "/report"; }

  std::string out;
};

struct ManifestFile {
  EffectKind kind = EffectKind::kTceN;
  std::uint64_t seed = 0;
  std::string path;  // relative to the datasets directory
  std::size_t attempted = 0;
  std::size_t pairs = 0;
  std::size_t skipped = 0;
  std::string content_hash;
};

struct Manifest {
  std::string config_hash;
  std::string corpus_hash;
  int c_max = 300;
  int pairs_per_template = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<EffectKind> kinds;
  bool ablate_question = false;
  std::size_t templates = 0;
  std::vector<ManifestFile> files;
  // (kind, seed) -> per-template skip tallies
  std::map<std::pair<EffectKind, std::uint64_t>, SkipTally> skips;
  std::size_t attempted = 0;
  std::size_t emitted = 0;
  std::size_t skipped = 0;
};

Manifest LoadManifest(const std::string& path);

// Reads every dataset file listed in the manifest, verifying content
// hashes. Returned in manifest order with skip tallies attached.
std::vector<Dataset> LoadDatasets(const RunLayout& layout, const Manifest& manifest);

// Corpus as the pipeline sees it: parsed, and question-ablated when the
// config asks for it.
std::vector<Template> LoadPipelineCorpus(const RunConfig& config);

struct GenerateSummary {
  std::string config_hash;
  std::size_t files = 0;
  std::size_t attempted = 0;
  std::size_t emitted = 0;
  std::size_t skipped = 0;
};

GenerateSummary CmdGenerate(const RunConfig& config, std::ostream* log = nullptr);

// Records model answers for every generated pair, resuming any partial
// store. Throws ConfigError when the manifest does not match the config
// or the store was recorded by a different backend.
RecordSummary CmdEvaluate(const RunConfig& config, std::ostream* log = nullptr);

struct AnalyzeSummary {
  std::vector<EffectEstimate> estimates;
  std::size_t pairs_total = 0;
  std::size_t pairs_measured = 0;
  bool partial = false;
  std::vector<std::string> files;
};

// Never constructs a remote backend. Throws AnalysisError on an empty
// store.
AnalyzeSummary CmdAnalyze(const RunConfig& config, std::ostream* log = nullptr);

// Renders the analysis directory into a markdown summary and gnuplot-ready
// TSV files. Throws AnalysisError listing any missing inputs.
std::vector<std::string> CmdReport(const std::string& analysis_dir, const std::string& report_dir);

// Files CmdReport requires in the analysis directory.
std::vector<std::string> RequiredAnalysisFiles();

// Shortest round-trip decimal rendering.
std::string FormatNumber(double value);

}  // namespace causal_probe

#endif  // CAUSAL_PROBE_HARNESS_H_

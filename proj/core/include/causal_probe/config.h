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

#ifndef CAUSAL_PROBE_CONFIG_H_
#define CAUSAL_PROBE_CONFIG_H_

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "causal_probe/backends.h"
#include "causal_probe/interventions.h"

namespace causal_probe {

// Everything one pipeline run needs. Defaults reproduce the reference
// regime: 500 pairs per template, seeds {0, 1, 2}, answers in 1..300.
struct RunConfig {
  std::string corpus_path;
  std::vector<EffectKind> kinds{std::begin(kAllEffectKinds), std::end(kAllEffectKinds)};
  int pairs_per_template = 500;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  int c_max = 300;
  // "perfect[:EPS]", "operand_echo[:I[:EPS]]", "surface_hash[:EPS]",
  // "uniform" or "http".
  std::string backend = "uniform";
  HttpBackendOptions http;
  std::string out_dir = "causal_probe_out";
  bool ablate_question = false;
  int workers = 1;
  std::size_t max_new_pairs = 0;
  // Empty disables the heatmap grid.
  std::string heatmap_signature;
  int heatmap_range = 50;

  AnswerSpace space() const { return AnswerSpace{c_max}; }

  // Throws ConfigError on inconsistent settings.
  void Validate() const;

  // Sets one key from its textual value. Keys are the config file's keys.
  // Throws ConfigError for unknown keys and malformed values.
  void Set(std::string_view key, std::string_view value);

  // Hash of every setting that shapes the datasets, given the corpus hash.
  std::string GenerationHash(std::uint64_t corpus_hash) const;
};

// Parses a flat TOML-style file of `key = value` lines. Strings may be
// quoted, lists are written [a, b, c], and '#' starts a comment.
RunConfig LoadConfigFile(const std::string& path);
void ApplyConfigText(std::string_view text, RunConfig* config);

// Parses a comma-separated kinds list, e.g. "TCE_N,DCE_N".
std::vector<EffectKind> ParseKinds(std::string_view text);
std::vector<std::uint64_t> ParseSeeds(std::string_view text);

SyntheticSpec ParseSyntheticBackend(std::string_view spec);
bool IsHttpBackend(std::string_view spec);
std::unique_ptr<ModelBackend> MakeBackend(const RunConfig& config);

}  // namespace causal_probe

#endif  // CAUSAL_PROBE_CONFIG_H_

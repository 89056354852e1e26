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


// Command-line driver for the generate -> evaluate -> analyze -> report
// pipeline.
//
//   causal_probe generate --corpus data/fixture_corpus.jsonl --out run
//   causal_probe evaluate --corpus data/fixture_corpus.jsonl --out run --backend perfect
//   causal_probe analyze  --corpus data/fixture_corpus.jsonl --out run --backend perfect
//   causal_probe report   --out run
//
// Settings come from --config first; flags override them. The remote
// backend's bearer token is read from the environment variable named by
// api_key_env (default CAUSAL_PROBE_API_KEY).

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "causal_probe/config.h"
#include "causal_probe/harness.h"

namespace {

using causal_probe::RunConfig;

struct Flags {
  std::string config;
  std::optional<std::string> corpus;
  std::optional<std::string> kinds;
  std::optional<int> pairs;
  std::optional<std::string> seeds;
  std::optional<int> c_max;
  std::optional<std::string> backend;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<std::size_t> max_new_pairs;
  std::optional<std::string> heatmap_signature;
  bool ablate_question = false;
};

RunConfig ResolveConfig(const Flags& f) {
  RunConfig config;
  if (!f.config.empty()) config = causal_probe::LoadConfigFile(f.config);
  if (f.corpus) config.corpus_path = *f.corpus;
  if (f.kinds) config.kinds = causal_probe::ParseKinds(*f.kinds);
  if (f.pairs) config.pairs_per_template = *f.pairs;
  if (f.seeds) config.seeds = causal_probe::ParseSeeds(*f.seeds);
  if (f.c_max) config.c_max = *f.c_max;
  if (f.backend) config.backend = *f.backend;
  if (f.out) config.out_dir = *f.out;
  if (f.workers) config.workers = *f.workers;
  if (f.max_new_pairs) config.max_new_pairs = *f.max_new_pairs;
  if (f.heatmap_signature) config.heatmap_signature = *f.heatmap_signature;
  if (f.ablate_question) config.ablate_question = true;
  return config;
}

void AddRunFlags(CLI::App* cmd, Flags* f) {
  cmd->add_option("--config", f->config, "key = value config file");
  cmd->add_option("--corpus", f->corpus, "JSON-lines template corpus");
  cmd->add_option("--kinds", f->kinds, "comma list of TCE_N,DCE_N,DCE_S,TCE_T");
  cmd->add_option("--pairs", f->pairs, "pairs per template");
  cmd->add_option("--seeds", f->seeds, "comma list of seeds");
  cmd->add_option("--c-max", f->c_max, "top of the answer space");
  cmd->add_option("--backend", f->backend,
                  "perfect[:EPS] | operand_echo[:I[:EPS]] | surface_hash[:EPS] | uniform | http");
  cmd->add_option("--out", f->out, "output directory");
  cmd->add_option("--workers", f->workers, "concurrent scoring workers");
  cmd->add_option("--max-new-pairs", f->max_new_pairs, "stop evaluate after this many pairs");
  cmd->add_option("--heatmap-signature", f->heatmap_signature,
                  "two-operand signature for the heatmap grid, e.g. add(1,2)");
  cmd->add_flag("--ablate-question", f->ablate_question,
                "replace each template's question stem with 'the answer is'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal effect probes for arithmetic word problems"};
  app.require_subcommand(1);
  Flags flags;
  CLI::App* generate = app.add_subcommand("generate", "build intervention datasets");
  CLI::App* evaluate = app.add_subcommand("evaluate", "record model answers (resumable)");
  CLI::App* analyze = app.add_subcommand("analyze", "estimate effects from recorded answers");
  CLI::App* report = app.add_subcommand("report", "render tables and plot data");
  for (CLI::App* cmd : {generate, evaluate, analyze, report}) AddRunFlags(cmd, &flags);

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig config = ResolveConfig(flags);
    if (generate->parsed()) {
      causal_probe::CmdGenerate(config, &std::cerr);
    } else if (evaluate->parsed()) {
      const causal_probe::RecordSummary s = causal_probe::CmdEvaluate(config, &std::cerr);
      if (!s.complete) return 3;
    } else if (analyze->parsed()) {
      causal_probe::CmdAnalyze(config, &std::cerr);
    } else if (report->parsed()) {
      const causal_probe::RunLayout layout(config.out_dir);
      for (const std::string& f : causal_probe::CmdReport(layout.analysis_dir(), layout.report_dir())) {
        std::cout << layout.report_dir() << "/" << f << "\n";
      }
    }
  } catch (const causal_probe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

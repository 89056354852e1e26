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


#include "causal_probe/harness.h"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "causal_probe/hashing.h"
#include "json.hpp"

namespace causal_probe {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr SkipReason kAllSkipReasons[] = {
    SkipReason::kEmptyOperandSet, SkipReason::kUnsupportedOperandCount,
    SkipReason::kNoResultAlteringCandidate, SkipReason::kEmptyFiber,
    SkipReason::kNoEligibleTemplate};

SkipReason ParseSkipReason(std::string_view name) {
  for (SkipReason r : kAllSkipReasons) {
    if (SkipReasonName(r) == name) return r;
  }
  throw Error("unknown skip reason '" + std::string(name) + "'");
}

void Log(std::ostream* log, const std::string& line) {
  if (log != nullptr) *log << line << '\n' << std::flush;
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out.flush()) throw Error("write failed for " + path);
  }
  fs::rename(tmp, path);
}

std::string Csv(double v) { return std::isfinite(v) ? FormatNumber(v) : "NA"; }

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Header-keyed rows of a simple CSV file.
std::vector<std::map<std::string, std::string>> ReadCsv(const std::string& path) {
  std::istringstream in(ReadText(path));
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells = SplitCsv(line);
    if (header.empty()) {
      header = std::move(cells);
      continue;
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

// Checks that the manifest was generated from this config and corpus.
Manifest LoadMatchingManifest(const RunConfig& config, const RunLayout& layout) {
  if (!fs::exists(layout.manifest())) {
    throw ConfigError("no dataset manifest at " + layout.manifest() + "; run generate first");
  }
  Manifest manifest = LoadManifest(layout.manifest());
  const std::string expected = config.GenerationHash(HashFile(config.corpus_path));
  if (manifest.config_hash != expected) {
    throw ConfigError("datasets in " + layout.datasets_dir() + " were generated with config " +
                      manifest.config_hash + " but the current config hashes to " + expected +
                      "; re-run generate");
  }
  return manifest;
}

std::string BackendHash(const ModelBackend& backend) {
  return HexDigest(Fnv1a64(backend.Describe()));
}

std::vector<InterventionPair> FlattenPairs(const std::vector<Dataset>& datasets) {
  std::vector<InterventionPair> pairs;
  std::size_t total = 0;
  for (const Dataset& d : datasets) total += d.pairs.size();
  pairs.reserve(total);
  for (const Dataset& d : datasets) pairs.insert(pairs.end(), d.pairs.begin(), d.pairs.end());
  return pairs;
}

void WriteEffectRow(std::ostream& out, const EffectEstimate& e) {
  out << EffectKindName(e.kind) << ',' << MetricName(e.metric) << ',';
  if (e.available) {
    out << Csv(e.mean) << ',' << Csv(e.std_error) << ',' << Csv(e.median) << ',' << Csv(e.p95);
  } else {
    out << "NA,NA,NA,NA";
  }
  out << ',' << e.n_pairs << ',' << e.n_skipped << ',' << e.n_discarded << ','
      << e.n_lower_bound << '\n';
}

constexpr const char* kEffectsHeader =
    "kind,metric,mean,stderr,median,p95,n_pairs,n_skipped,n_discarded,n_lower_bound\n";

const EffectEstimate* FindEstimate(const std::vector<EffectEstimate>& estimates,
                                   EffectKind kind, Metric metric) {
  for (const EffectEstimate& e : estimates) {
    if (e.kind == kind && e.metric == metric) return &e;
  }
  return nullptr;
}

}  // namespace

std::string RunLayout::dataset_file(EffectKind kind, std::uint64_t seed) const {
  return datasets_dir() + "/" + std::string(EffectKindName(kind)) + "_seed" +
         std::to_string(seed) + ".jsonl";
}

std::string FormatNumber(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return "NA";
  return std::string(buf, end);
}

Manifest LoadManifest(const std::string& path) {
  Manifest m;
  try {
    const json j = json::parse(ReadText(path));
    m.config_hash = j.at("config_hash").get<std::string>();
    m.corpus_hash = j.at("corpus_hash").get<std::string>();
    m.c_max = j.at("c_max").get<int>();
    m.pairs_per_template = j.at("pairs_per_template").get<int>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& k : j.at("kinds")) m.kinds.push_back(ParseEffectKind(k.get<std::string>()));
    m.ablate_question = j.at("ablate_question").get<bool>();
    m.templates = j.at("templates").get<std::size_t>();
    for (const auto& f : j.at("files")) {
      ManifestFile mf;
      mf.kind = ParseEffectKind(f.at("kind").get<std::string>());
      mf.seed = f.at("seed").get<std::uint64_t>();
      mf.path = f.at("path").get<std::string>();
      mf.attempted = f.at("attempted").get<std::size_t>();
      mf.pairs = f.at("pairs").get<std::size_t>();
      mf.skipped = f.at("skipped").get<std::size_t>();
      mf.content_hash = f.at("content_hash").get<std::string>();
      m.files.push_back(std::move(mf));
    }
    for (const auto& s : j.at("skips")) {
      const EffectKind kind = ParseEffectKind(s.at("kind").get<std::string>());
      const auto seed = s.at("seed").get<std::uint64_t>();
      m.skips[{kind, seed}].Add(s.at("template_id").get<std::string>(),
                                ParseSkipReason(s.at("reason").get<std::string>()),
                                s.at("count").get<std::size_t>());
    }
    m.attempted = j.at("attempted").get<std::size_t>();
    m.emitted = j.at("emitted").get<std::size_t>();
    m.skipped = j.at("skipped").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest " + path + ": " + e.what());
  }
  return m;
}

std::vector<Dataset> LoadDatasets(const RunLayout& layout, const Manifest& manifest) {
  std::vector<Dataset> out;
  for (const ManifestFile& f : manifest.files) {
    const std::string path = layout.datasets_dir() + "/" + f.path;
    const std::string text = ReadText(path);
    if (HexDigest(Fnv1a64(text)) != f.content_hash) {
      throw ConfigError("dataset file " + path + " does not match its manifest hash");
    }
    Dataset d;
    d.kind = f.kind;
    d.seed = f.seed;
    d.attempted = f.attempted;
    d.pairs.reserve(f.pairs);
    std::size_t start = 0;
    while (start < text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      if (end > start) d.pairs.push_back(ParsePair(std::string_view(text).substr(start, end - start)));
      start = end + 1;
    }
    if (d.pairs.size() != f.pairs) {
      throw ConfigError("dataset file " + path + " holds " + std::to_string(d.pairs.size()) +
                        " pairs, manifest says " + std::to_string(f.pairs));
    }
    if (auto it = manifest.skips.find({f.kind, f.seed}); it != manifest.skips.end()) {
      d.skips = it->second;
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Template> LoadPipelineCorpus(const RunConfig& config) {
  std::vector<Template> corpus = ParseCorpus(config.corpus_path);
  if (config.ablate_question) {
    for (Template& t : corpus) {
      try {
        t = AblateQuestion(t);
      } catch (const CorpusError& e) {
        throw CorpusError("template " + t.id + ": " + e.what());
      }
    }
  }
  return corpus;
}

GenerateSummary CmdGenerate(const RunConfig& config, std::ostream* log) {
  config.Validate();
  const RunLayout layout(config.out_dir);
  const std::uint64_t corpus_hash = HashFile(config.corpus_path);
  std::vector<Template> corpus = LoadPipelineCorpus(config);
  const std::size_t n_templates = corpus.size();
  DatasetBuilder builder(std::move(corpus), config.space());
  fs::create_directories(layout.datasets_dir());

  GenerateSummary summary;
  summary.config_hash = config.GenerationHash(corpus_hash);
  ordered_json files = ordered_json::array();
  ordered_json skips = ordered_json::array();

  for (EffectKind kind : config.kinds) {
    for (std::uint64_t seed : config.seeds) {
      const Dataset d = builder.Build(kind, config.pairs_per_template, seed);
      const std::string path = layout.dataset_file(kind, seed);
      std::uint64_t hash = 0xcbf29ce484222325ULL;
      {
        std::ofstream out(path + ".tmp", std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + path);
        for (const InterventionPair& p : d.pairs) {
          std::string line = SerializePair(p);
          line += '\n';
          hash = Fnv1a64(line, hash);
          out << line;
        }
        if (!out.flush()) throw Error("write failed for " + path);
      }
      fs::rename(path + ".tmp", path);
      const std::size_t skipped = d.skips.Total();
      files.push_back(ordered_json{{"kind", EffectKindName(kind)},
                                   {"seed", seed},
                                   {"path", fs::path(path).filename().string()},
                                   {"attempted", d.attempted},
                                   {"pairs", d.pairs.size()},
                                   {"skipped", skipped},
                                   {"content_hash", HexDigest(hash)}});
      for (const auto& [tid, reasons] : d.skips.by_template) {
        for (const auto& [reason, n] : reasons) {
          skips.push_back(ordered_json{{"kind", EffectKindName(kind)},
                                       {"seed", seed},
                                       {"template_id", tid},
                                       {"reason", SkipReasonName(reason)},
                                       {"count", n}});
        }
      }
      ++summary.files;
      summary.attempted += d.attempted;
      summary.emitted += d.pairs.size();
      summary.skipped += skipped;
      Log(log, "[generate] " + std::string(EffectKindName(kind)) + " seed " +
                   std::to_string(seed) + ": " + std::to_string(d.pairs.size()) + " pairs, " +
                   std::to_string(skipped) + " skipped");
    }
  }

  std::vector<std::string> kind_names;
  for (EffectKind k : config.kinds) kind_names.emplace_back(EffectKindName(k));
  ordered_json manifest{{"format", 1},
                        {"config_hash", summary.config_hash},
                        {"corpus_hash", HexDigest(corpus_hash)},
                        {"corpus_path", config.corpus_path},
                        {"c_max", config.c_max},
                        {"pairs_per_template", config.pairs_per_template},
                        {"seeds", config.seeds},
                        {"kinds", kind_names},
                        {"ablate_question", config.ablate_question},
                        {"templates", n_templates},
                        {"files", files},
                        {"skips", skips},
                        {"attempted", summary.attempted},
                        {"emitted", summary.emitted},
                        {"skipped", summary.skipped}};
  WriteText(layout.manifest(), manifest.dump(2) + "\n");
  Log(log, "[generate] " + std::to_string(summary.emitted) + " pairs in " +
               std::to_string(summary.files) + " files, " + std::to_string(summary.skipped) +
               " skipped; config " + summary.config_hash);
  return summary;
}

RecordSummary CmdEvaluate(const RunConfig& config, std::ostream* log) {
  config.Validate();
  const RunLayout layout(config.out_dir);
  const Manifest manifest = LoadMatchingManifest(config, layout);
  const std::vector<Dataset> datasets = LoadDatasets(layout, manifest);
  const std::unique_ptr<ModelBackend> backend = MakeBackend(config);
  const std::string backend_hash = BackendHash(*backend);

  fs::create_directories(layout.runs_dir());
  if (fs::exists(layout.store_meta())) {
    const json meta = json::parse(ReadText(layout.store_meta()));
    if (meta.value("dataset_config_hash", "") != manifest.config_hash) {
      throw ConfigError("run store " + layout.store() + " was recorded for datasets " +
                        meta.value("dataset_config_hash", "?") + ", not " +
                        manifest.config_hash + "; use a fresh output directory");
    }
    if (meta.value("backend_hash", "") != backend_hash) {
      throw ConfigError("run store " + layout.store() + " was recorded by backend '" +
                        meta.value("backend", "?") + "', not '" + backend->Describe() + "'");
    }
  } else if (fs::exists(layout.store()) && fs::file_size(layout.store()) > 0) {
    throw ConfigError("run store " + layout.store() + " has no provenance record");
  } else {
    const ordered_json meta{{"dataset_config_hash", manifest.config_hash},
                            {"backend", backend->Describe()},
                            {"backend_hash", backend_hash},
                            {"capability", CapabilityName(backend->capability())},
                            {"k", backend->k()}};
    WriteText(layout.store_meta(), meta.dump(2) + "\n");
  }

  const std::vector<InterventionPair> pairs = FlattenPairs(datasets);
  RecordOptions options;
  options.workers = config.workers;
  options.max_new_pairs = config.max_new_pairs;
  options.log = log;
  const RecordSummary summary = RecordRun(*backend, pairs, layout.store(), options);
  Log(log, "[evaluate] " + std::to_string(summary.already_recorded + summary.newly_recorded) +
               "/" + std::to_string(summary.total_pairs) + " pairs recorded (" +
               std::to_string(summary.newly_recorded) + " new)" +
               (summary.complete ? "" : "; run again to resume"));
  return summary;
}

AnalyzeSummary CmdAnalyze(const RunConfig& config, std::ostream* log) {
  config.Validate();
  const RunLayout layout(config.out_dir);
  const Manifest manifest = LoadMatchingManifest(config, layout);
  if (!fs::exists(layout.store_meta())) {
    throw AnalysisError("no run store provenance at " + layout.store_meta() +
                        "; run evaluate first");
  }
  const json meta = json::parse(ReadText(layout.store_meta()));
  if (meta.value("dataset_config_hash", "") != manifest.config_hash) {
    throw AnalysisError("run store was recorded for different datasets");
  }
  const std::vector<Dataset> datasets = LoadDatasets(layout, manifest);
  const AnswerSpace space = config.space();
  const RunStore store = RunStore::Load(layout.store(), space);
  if (store.empty()) throw AnalysisError("run store " + layout.store() + " is empty");

  AnalyzeSummary summary;
  std::map<std::string, PairMeasurement> measurements;
  for (const Dataset& d : datasets) {
    for (const InterventionPair& p : d.pairs) {
      ++summary.pairs_total;
      const AnswerDistribution* base = store.Find(p.pair_id, Side::kBase);
      const AnswerDistribution* intervened = store.Find(p.pair_id, Side::kIntervened);
      if (base == nullptr || intervened == nullptr) continue;
      measurements.emplace(p.pair_id, MeasurePair(p, *base, *intervened));
    }
  }
  summary.pairs_measured = measurements.size();
  summary.partial = summary.pairs_measured < summary.pairs_total;
  if (summary.partial) {
    Log(log, "[analyze] warning: store covers " + std::to_string(summary.pairs_measured) + " of " +
                 std::to_string(summary.pairs_total) +
                 " pairs; unrecorded pairs are counted as skipped");
  }

  fs::create_directories(layout.analysis_dir());
  auto emit = [&](const std::string& name, const std::string& text) {
    WriteText(layout.analysis_dir() + "/" + name, text);
    summary.files.push_back(name);
  };

  std::map<EffectKind, std::vector<Dataset>> by_kind;
  for (const Dataset& d : datasets) by_kind[d.kind].push_back(d);

  std::ostringstream effects;
  effects << kEffectsHeader;
  for (EffectKind kind : manifest.kinds) {
    for (Metric metric : {Metric::kCp, Metric::kRcc}) {
      const EffectEstimate e = SummarizeEffect(measurements, by_kind[kind], kind, metric);
      WriteEffectRow(effects, e);
      std::ostringstream one;
      one << kEffectsHeader;
      WriteEffectRow(one, e);
      emit("effects_" + std::string(EffectKindName(kind)) + "_" + std::string(MetricName(metric)) +
               ".csv",
           one.str());
      summary.estimates.push_back(e);
    }
  }
  emit("effects.csv", effects.str());

  std::ostringstream tce_dce;
  tce_dce << "factor,metric,tce_kind,tce_mean,tce_stderr,dce_kind,dce_mean,dce_stderr\n";
  const std::pair<const char*, std::pair<EffectKind, EffectKind>> factors[] = {
      {"N", {EffectKind::kTceN, EffectKind::kDceN}},
      {"T/S", {EffectKind::kTceT, EffectKind::kDceS}}};
  for (const auto& [factor, kinds] : factors) {
    for (Metric metric : {Metric::kCp, Metric::kRcc}) {
      tce_dce << factor << ',' << MetricName(metric);
      for (EffectKind k : {kinds.first, kinds.second}) {
        const EffectEstimate* e = FindEstimate(summary.estimates, k, metric);
        tce_dce << ',' << EffectKindName(k);
        if (e != nullptr && e->available) {
          tce_dce << ',' << Csv(e->mean) << ',' << Csv(e->std_error);
        } else {
          tce_dce << ",NA,NA";
        }
      }
      tce_dce << '\n';
    }
  }
  emit("tce_dce.csv", tce_dce.str());

  const DistributionLookup lookup = [&store](const std::string& id, Side side) {
    return store.Find(id, side);
  };
  std::optional<AccuracyReport> acc1, acc10;
  try {
    acc1 = AccuracyAtK(lookup, datasets, 1);
  } catch (const Error& e) {
    Log(log, std::string("[analyze] accuracy@1 unavailable: ") + e.what());
  }
  try {
    acc10 = AccuracyAtK(lookup, datasets, 10);
  } catch (const Error& e) {
    Log(log, std::string("[analyze] accuracy@10 unavailable: ") + e.what());
  }
  std::ostringstream accuracy;
  accuracy << "template_id,instances,accuracy_at_1,accuracy_at_10\n";
  std::set<std::string> template_ids;
  for (const auto* r : {&acc1, &acc10}) {
    if (*r) {
      for (const auto& [tid, v] : (*r)->per_template) template_ids.insert(tid);
    }
  }
  auto acc_cell = [](const std::optional<AccuracyReport>& r, const std::string& tid) {
    if (!r) return std::string("NA");
    auto it = r->per_template.find(tid);
    return it == r->per_template.end() ? std::string("NA") : Csv(it->second);
  };
  for (const std::string& tid : template_ids) {
    std::size_t n = 0;
    for (const auto* r : {&acc1, &acc10}) {
      if (*r) {
        if (auto it = (*r)->per_template_instances.find(tid);
            it != (*r)->per_template_instances.end()) {
          n = it->second;
        }
      }
    }
    accuracy << tid << ',' << n << ',' << acc_cell(acc1, tid) << ',' << acc_cell(acc10, tid)
             << '\n';
  }
  accuracy << "ALL," << (acc1 ? acc1->instances : acc10 ? acc10->instances : 0) << ','
           << (acc1 ? Csv(acc1->overall) : "NA") << ',' << (acc10 ? Csv(acc10->overall) : "NA")
           << '\n';
  emit("accuracy.csv", accuracy.str());

  std::ostringstream corr;
  corr << "kind,metric,pearson_r,n_templates\n";
  for (EffectKind kind : kAllEffectKinds) {
    corr << EffectKindName(kind) << ",rcc,";
    const EffectEstimate* e = FindEstimate(summary.estimates, kind, Metric::kRcc);
    std::vector<double> xs, ys;
    if (acc10 && e != nullptr && e->available) {
      for (const auto& [tid, v] : e->per_template_means) {
        if (auto it = acc10->per_template.find(tid); it != acc10->per_template.end()) {
          xs.push_back(it->second);
          ys.push_back(v);
        }
      }
    }
    std::string r = "NA";
    try {
      if (!xs.empty()) r = Csv(Pearson(xs, ys));
    } catch (const AnalysisError&) {
    }
    corr << r << ',' << xs.size() << '\n';
  }
  emit("correlations.csv", corr.str());

  std::string backend_desc = meta.value("backend", "");
  if (!config.heatmap_signature.empty()) {
    const std::vector<Template> corpus = LoadPipelineCorpus(config);
    HeatmapGrid grid;
    if (IsHttpBackend(config.backend)) {
      // Remote models are only read back from the store.
      const std::vector<InterventionPair> pairs = FlattenPairs(datasets);
      const std::unique_ptr<ReplayBackend> replay = MakeReplayBackend(store, pairs, space);
      const InstanceScorer scorer =
          [&replay](const ProblemInstance& inst) -> std::optional<AnswerDistribution> {
        if (const AnswerDistribution* d = replay->Find(inst.prompt)) return *d;
        return std::nullopt;
      };
      grid = BuildHeatmapGrid(scorer, corpus, config.heatmap_signature, config.heatmap_range,
                              space);
    } else {
      const std::unique_ptr<ModelBackend> backend = MakeBackend(config);
      grid = BuildHeatmapGrid(*backend, corpus, config.heatmap_signature, config.heatmap_range);
    }
    std::ostringstream hm;
    hm << "n1\\n2";
    for (int n2 = 1; n2 <= grid.range_max; ++n2) hm << ',' << n2;
    hm << '\n';
    for (int n1 = 1; n1 <= grid.range_max; ++n1) {
      hm << n1;
      for (int n2 = 1; n2 <= grid.range_max; ++n2) {
        hm << ',';
        if (const std::optional<double> v = grid.at(n1, n2)) hm << FormatNumber(*v);
      }
      hm << '\n';
    }
    emit("heatmap.csv", hm.str());
  }

  const ordered_json analysis_meta{{"dataset_config_hash", manifest.config_hash},
                                   {"corpus_hash", manifest.corpus_hash},
                                   {"backend", backend_desc},
                                   {"backend_hash", meta.value("backend_hash", "")},
                                   {"pairs_total", summary.pairs_total},
                                   {"pairs_measured", summary.pairs_measured},
                                   {"partial", summary.partial}};
  emit("analysis.meta.json", analysis_meta.dump(2) + "\n");
  Log(log, "[analyze] " + std::to_string(summary.pairs_measured) + " pairs measured; wrote " +
               std::to_string(summary.files.size()) + " files to " + layout.analysis_dir());
  return summary;
}

std::vector<std::string> RequiredAnalysisFiles() {
  return {"effects.csv", "tce_dce.csv", "accuracy.csv", "correlations.csv",
          "analysis.meta.json"};
}

std::vector<std::string> CmdReport(const std::string& analysis_dir,
                                   const std::string& report_dir) {
  std::vector<std::string> missing;
  for (const std::string& name : RequiredAnalysisFiles()) {
    if (!fs::exists(analysis_dir + "/" + name)) missing.push_back(name);
  }
  if (!missing.empty()) {
    std::string list;
    for (const std::string& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw AnalysisError("missing analysis inputs in " + analysis_dir + ": " + list);
  }
  const json meta = json::parse(ReadText(analysis_dir + "/analysis.meta.json"));
  const auto effects = ReadCsv(analysis_dir + "/effects.csv");
  const auto tce_dce = ReadCsv(analysis_dir + "/tce_dce.csv");
  const auto accuracy = ReadCsv(analysis_dir + "/accuracy.csv");
  const auto correlations = ReadCsv(analysis_dir + "/correlations.csv");

  std::map<std::pair<std::string, std::string>, std::map<std::string, std::string>> by_key;
  for (const auto& row : effects) by_key[{row.at("kind"), row.at("metric")}] = row;

  auto count = [](const std::map<std::string, std::string>& row, const char* key) {
    return std::stod(row.at(key));
  };

  std::ostringstream md;
  md << "# Causal effect summary\n\n";
  md << "- datasets: `" << meta.value("dataset_config_hash", "") << "`\n";
  md << "- backend: `" << meta.value("backend", "") << "`\n";
  md << "- pairs measured: " << meta.value("pairs_measured", 0) << " of "
     << meta.value("pairs_total", 0) << (meta.value("partial", false) ? " (partial run)" : "")
     << "\n\n";
  md << "## Effects\n\nMean with standard error across seeds. "
     << "Cells marked * have a discard or lower-bound rate above "
     << FormatNumber(100 * kUnreliableRateThreshold) << "%.\n\n";
  md << "| effect | cp | rcc |\n|---|---|---|\n";
  std::vector<std::string> warnings;
  for (EffectKind kind : kAllEffectKinds) {
    const std::string k(EffectKindName(kind));
    md << "| " << k;
    for (const char* metric : {"cp", "rcc"}) {
      auto it = by_key.find({k, metric});
      if (it == by_key.end()) {
        md << " | NA";
        continue;
      }
      const auto& row = it->second;
      const double n = count(row, "n_pairs");
      const double disc = count(row, "n_discarded");
      const double lb = count(row, "n_lower_bound");
      const double disc_rate = n + disc > 0 ? disc / (n + disc) : 0.0;
      const double lb_rate = n > 0 ? lb / n : 0.0;
      const bool flagged = disc_rate > kUnreliableRateThreshold || lb_rate > kUnreliableRateThreshold;
      md << " | " << row.at("mean");
      if (row.at("mean") != "NA") md << " ± " << row.at("stderr");
      if (flagged) {
        md << " *";
        warnings.push_back(k + " " + metric + ": discarded " + FormatNumber(100 * disc_rate) +
                           "%, lower bound " + FormatNumber(100 * lb_rate) + "%");
      }
    }
    md << " |\n";
  }
  if (!warnings.empty()) {
    md << "\nUnreliable estimates:\n\n";
    for (const std::string& w : warnings) md << "- " << w << '\n';
  }

  md << "\n## Pairs\n\n| effect | metric | pairs | skipped | discarded | lower bound |\n"
     << "|---|---|---|---|---|---|\n";
  for (const auto& row : effects) {
    md << "| " << row.at("kind") << " | " << row.at("metric") << " | " << row.at("n_pairs")
       << " | " << row.at("n_skipped") << " | " << row.at("n_discarded") << " | "
       << row.at("n_lower_bound") << " |\n";
  }

  md << "\n## Total vs direct effects\n\n| factor | metric | TCE | DCE |\n|---|---|---|---|\n";
  for (const auto& row : tce_dce) {
    md << "| " << row.at("factor") << " | " << row.at("metric") << " | " << row.at("tce_mean")
       << " | " << row.at("dce_mean") << " |\n";
  }

  md << "\n## Accuracy\n\n";
  for (const auto& row : accuracy) {
    if (row.at("template_id") == "ALL") {
      md << "acc@1 " << row.at("accuracy_at_1") << ", acc@10 " << row.at("accuracy_at_10")
         << " over " << row.at("instances") << " instances.\n";
    }
  }
  md << "\n## Accuracy@10 vs rcc per template\n\n| effect | pearson r | templates |\n"
     << "|---|---|---|\n";
  for (const auto& row : correlations) {
    md << "| " << row.at("kind") << " | " << row.at("pearson_r") << " | "
       << row.at("n_templates") << " |\n";
  }

  fs::create_directories(report_dir);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    WriteText(report_dir + "/" + name, text);
    written.push_back(name);
  };
  emit("summary.md", md.str());

  std::ostringstream bars;
  bars << "# factor\tmetric\ttce\ttce_stderr\tdce\tdce_stderr\n";
  for (const auto& row : tce_dce) {
    auto nan = [](const std::string& s) { return s == "NA" ? std::string("NaN") : s; };
    bars << row.at("factor") << '\t' << row.at("metric") << '\t' << nan(row.at("tce_mean"))
         << '\t' << nan(row.at("tce_stderr")) << '\t' << nan(row.at("dce_mean")) << '\t'
         << nan(row.at("dce_stderr")) << '\n';
  }
  emit("bars.tsv", bars.str());

  const std::string heatmap_csv = analysis_dir + "/heatmap.csv";
  if (fs::exists(heatmap_csv)) {
    std::istringstream in(ReadText(heatmap_csv));
    std::string line;
    std::getline(in, line);
    const std::vector<std::string> cols = SplitCsv(line);
    std::ostringstream tsv;
    tsv << "# n1\tn2\tp_ground_truth\n";
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const std::vector<std::string> cells = SplitCsv(line);
      for (std::size_t c = 1; c < cols.size(); ++c) {
        const std::string v = c < cells.size() && !cells[c].empty() ? cells[c] : "NaN";
        tsv << cells[0] << '\t' << cols[c] << '\t' << v << '\n';
      }
      tsv << '\n';
    }
    emit("heatmap.tsv", tsv.str());
  }
  return written;
}

}  // namespace causal_probe

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

#include "causal_probe/run_store.h"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "causal_probe/hashing.h"
#include "json.hpp"

namespace causal_probe {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// FULL payloads store the most common weight once when most answers share
// it, which keeps synthetic runs compact without losing any bits.
ordered_json EncodeFull(const AnswerDistribution& d) {
  std::map<double, std::size_t> counts;
  for (double w : d.weights()) ++counts[w];
  auto mode = std::max_element(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    return a.second < b.second;
  });
  const std::size_t n = d.weights().size();
  if (mode->second * 4 >= n * 3) {
    ordered_json overrides = ordered_json::object();
    for (std::size_t i = 0; i < n; ++i) {
      if (d.weights()[i] != mode->first) {
        overrides[std::to_string(i + AnswerSpace::kMin)] = d.weights()[i];
      }
    }
    return ordered_json{{"fill", mode->first}, {"weights", overrides}};
  }
  return ordered_json{{"weights", std::vector<double>(d.weights().begin(), d.weights().end())}};
}

AnswerDistribution DecodeFull(const json& payload, const AnswerSpace& space) {
  const json& weights = payload.at("weights");
  std::vector<double> out;
  if (weights.is_array()) {
    out = weights.get<std::vector<double>>();
  } else {
    out.assign(space.size(), payload.at("fill").get<double>());
    for (const auto& [key, value] : weights.items()) {
      const int r = std::stoi(key);
      if (!space.Contains(r)) throw StoreError("FULL payload names an answer outside I");
      out[r - AnswerSpace::kMin] = value.get<double>();
    }
  }
  return AnswerDistribution::Full(space, std::move(out));
}

ordered_json EncodePayload(const AnswerDistribution& d) {
  ordered_json payload;
  switch (d.form()) {
    case DistributionForm::kFull:
      payload = EncodeFull(d);
      break;
    case DistributionForm::kTopK: {
      ordered_json entries = ordered_json::array();
      for (const TopKEntry& e : d.entries()) {
        entries.push_back(ordered_json{{"token", e.token}, {"p", e.probability}});
      }
      payload["entries"] = entries;
      break;
    }
    case DistributionForm::kArgmax:
      payload["answer"] = d.answer() ? ordered_json(*d.answer()) : ordered_json(nullptr);
      break;
  }
  if (!d.raw_response().empty()) payload["raw"] = d.raw_response();
  return payload;
}

AnswerDistribution DecodePayload(DistributionForm form, const json& payload,
                                 const AnswerSpace& space) {
  AnswerDistribution d;
  switch (form) {
    case DistributionForm::kFull:
      d = DecodeFull(payload, space);
      break;
    case DistributionForm::kTopK: {
      std::vector<TopKEntry> entries;
      for (const json& e : payload.at("entries")) {
        TopKEntry entry;
        entry.token = e.at("token").get<std::string>();
        entry.value = ParseAnswerToken(entry.token);
        entry.probability = e.at("p").get<double>();
        entries.push_back(std::move(entry));
      }
      d = AnswerDistribution::TopK(space, std::move(entries));
      break;
    }
    case DistributionForm::kArgmax: {
      const json& a = payload.at("answer");
      d = AnswerDistribution::Argmax(space, a.is_null() ? std::nullopt
                                                        : std::optional<int>(a.get<int>()));
      break;
    }
  }
  if (payload.contains("raw")) d.set_raw_response(payload["raw"].get<std::string>());
  return d;
}

std::string Checksum(std::string_view pair_id, std::string_view side, std::string_view form,
                     std::string_view payload) {
  std::uint64_t h = Fnv1a64(pair_id);
  h = Fnv1a64("\n", h);
  h = Fnv1a64(side, h);
  h = Fnv1a64("\n", h);
  h = Fnv1a64(form, h);
  h = Fnv1a64("\n", h);
  h = Fnv1a64(payload, h);
  return HexDigest(h);
}

Side ParseSide(std::string_view name) {
  if (name == "base") return Side::kBase;
  if (name == "intervened") return Side::kIntervened;
  throw StoreError("unknown side '" + std::string(name) + "'");
}

}  // namespace

std::string_view SideName(Side side) {
  return side == Side::kBase ? "base" : "intervened";
}

std::string EncodeStoreLine(const StoreRecord& record) {
  const ordered_json payload = EncodePayload(record.distribution);
  const std::string side(SideName(record.side));
  const std::string form(FormName(record.distribution.form()));
  ordered_json line{{"pair_id", record.pair_id},
                    {"side", side},
                    {"form", form},
                    {"payload", payload},
                    {"checksum", Checksum(record.pair_id, side, form, payload.dump())}};
  return line.dump();
}

StoreRecord DecodeStoreLine(std::string_view line, const AnswerSpace& space) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const json::parse_error& e) {
    throw StoreError(std::string("malformed store line: ") + e.what());
  }
  try {
    StoreRecord record;
    record.pair_id = j.at("pair_id").get<std::string>();
    const std::string side = j.at("side").get<std::string>();
    const std::string form = j.at("form").get<std::string>();
    const ordered_json& payload = j.at("payload");
    if (Checksum(record.pair_id, side, form, payload.dump()) !=
        j.at("checksum").get<std::string>()) {
      throw StoreError("store line checksum mismatch for " + record.pair_id);
    }
    record.side = ParseSide(side);
    record.distribution = DecodePayload(ParseForm(form), json::parse(payload.dump()), space);
    return record;
  } catch (const json::exception& e) {
    throw StoreError(std::string("malformed store record: ") + e.what());
  } catch (const StoreError&) {
    throw;
  } catch (const Error& e) {
    throw StoreError(std::string("invalid store record: ") + e.what());
  }
}

RunStore RunStore::Load(const std::string& path, const AnswerSpace& space, bool repair) {
  RunStore store;
  std::ifstream in(path, std::ios::binary);
  if (!in) return store;
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string contents = buffer.str();
  in.close();

  std::size_t start = 0;
  std::size_t good_bytes = 0;
  std::size_t line_number = 0;
  while (start < contents.size()) {
    std::size_t end = contents.find('\n', start);
    const bool terminated = end != std::string::npos;
    if (!terminated) end = contents.size();
    const std::string_view line(contents.data() + start, end - start);
    ++line_number;
    const bool last = !terminated || end + 1 >= contents.size();
    try {
      if (!terminated) throw StoreError("unterminated final line");
      StoreRecord record = DecodeStoreLine(line, space);
      auto key = std::make_pair(record.pair_id, record.side);
      if (store.index_.count(key)) {
        throw StoreError("duplicate store entry for " + record.pair_id + "/" +
                         std::string(SideName(record.side)));
      }
      store.index_.emplace(std::move(key), store.records_.size());
      store.records_.push_back(std::move(record));
      good_bytes = end + 1;
    } catch (const StoreError& e) {
      if (!last) {
        throw StoreError(path + ":" + std::to_string(line_number) + ": " + e.what());
      }
      store.dropped_tail_ = true;
    }
    start = end + 1;
  }
  if (store.dropped_tail_ && repair) std::filesystem::resize_file(path, good_bytes);
  return store;
}

const AnswerDistribution* RunStore::Find(const std::string& pair_id, Side side) const {
  auto it = index_.find({pair_id, side});
  return it == index_.end() ? nullptr : &records_[it->second].distribution;
}

RecordSummary RecordRun(const ModelBackend& backend, std::span<const InterventionPair> pairs,
                        const std::string& store_path, const RecordOptions& options) {
  RecordSummary summary;
  summary.total_pairs = pairs.size();
  RunStore existing = RunStore::Load(store_path, backend.space(), /*repair=*/true);
  summary.dropped_tail = existing.dropped_tail();

  struct Job {
    const InterventionPair* pair;
    bool need_base;
    bool need_intervened;
  };
  std::vector<Job> jobs;
  for (const InterventionPair& pair : pairs) {
    const bool need_base = !existing.Find(pair.pair_id, Side::kBase);
    const bool need_intervened = !existing.Find(pair.pair_id, Side::kIntervened);
    if (!need_base && !need_intervened) {
      ++summary.already_recorded;
      continue;
    }
    jobs.push_back({&pair, need_base, need_intervened});
  }
  if (options.max_new_pairs > 0 && jobs.size() > options.max_new_pairs) {
    jobs.resize(options.max_new_pairs);
  }

  std::ofstream out(store_path, std::ios::binary | std::ios::app);
  if (!out) throw StoreError("cannot open run store for writing: " + store_path);

  const int workers = std::max(1, options.workers);
  const std::size_t batch = static_cast<std::size_t>(workers) * 8;
  std::vector<std::string> lines;
  auto last_log = std::chrono::steady_clock::now();
  for (std::size_t begin = 0; begin < jobs.size(); begin += batch) {
    const std::size_t end = std::min(jobs.size(), begin + batch);
    lines.assign(end - begin, std::string());
    std::vector<std::exception_ptr> errors(end - begin);
    auto work = [&](std::size_t offset) {
      for (std::size_t i = begin + offset; i < end; i += workers) {
        try {
          const Job& job = jobs[i];
          std::string text;
          if (job.need_base) {
            text += EncodeStoreLine(
                {job.pair->pair_id, Side::kBase, ScorePrompt(backend, job.pair->base)});
            text += '\n';
          }
          if (job.need_intervened) {
            text += EncodeStoreLine({job.pair->pair_id, Side::kIntervened,
                                     ScorePrompt(backend, job.pair->intervened)});
            text += '\n';
          }
          lines[i - begin] = std::move(text);
        } catch (...) {
          errors[i - begin] = std::current_exception();
        }
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> threads;
      for (int w = 0; w < workers; ++w) threads.emplace_back(work, w);
      for (auto& t : threads) t.join();
    }
    // Commit the completed prefix in pair order, then surface any failure.
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (errors[i]) {
        out.flush();
        std::rethrow_exception(errors[i]);
      }
      out << lines[i];
      const Job& job = jobs[begin + i];
      summary.sides_queried += job.need_base + job.need_intervened;
      ++summary.newly_recorded;
    }
    out.flush();
    const auto now = std::chrono::steady_clock::now();
    const bool last = end == jobs.size();
    if (options.log && (last || now - last_log >= std::chrono::seconds(2))) {
      last_log = now;
      *options.log << "[evaluate] " << summary.already_recorded + summary.newly_recorded << "/"
                   << summary.total_pairs << " pairs recorded";
      const std::string telemetry = backend.Telemetry();
      if (!telemetry.empty()) *options.log << " (" << telemetry << ")";
      *options.log << "\n";
    }
  }
  summary.complete = summary.already_recorded + summary.newly_recorded == summary.total_pairs;
  return summary;
}

std::unique_ptr<ReplayBackend> MakeReplayBackend(const RunStore& store,
                                                 std::span<const InterventionPair> pairs,
                                                 const AnswerSpace& space) {
  std::map<std::string, AnswerDistribution> by_prompt;
  std::optional<DistributionForm> form;
  int k = 0;
  for (const InterventionPair& pair : pairs) {
    for (auto [side, instance] : {std::pair{Side::kBase, &pair.base},
                                  std::pair{Side::kIntervened, &pair.intervened}}) {
      const AnswerDistribution* d = store.Find(pair.pair_id, side);
      if (!d) continue;
      if (!form) {
        form = d->form();
        k = static_cast<int>(d->k());
      }
      by_prompt.emplace(instance->prompt, *d);
    }
  }
  Capability capability = Capability::kFullDist;
  if (form == DistributionForm::kTopK) capability = Capability::kTopKDist;
  if (form == DistributionForm::kArgmax) capability = Capability::kArgmaxOnly;
  return std::make_unique<ReplayBackend>(space, capability, k, std::move(by_prompt));
}

}  // namespace causal_probe

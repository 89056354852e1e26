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

// Append-only JSON-lines store of model answers, one line per pair side:
//
//   {"pair_id": str, "side": "base|intervened", "form": "full|topk|argmax",
//    "payload": {...}, "checksum": str}
//
// The checksum covers pair_id, side, form and the payload, so a torn final
// line left by an interrupted run is detected and dropped on resume.

#ifndef CAUSAL_PROBE_RUN_STORE_H_
#define CAUSAL_PROBE_RUN_STORE_H_

#include <cstddef>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "causal_probe/answer_distribution.h"
#include "causal_probe/backends.h"
#include "causal_probe/interventions.h"

namespace causal_probe {

enum class Side { kBase, kIntervened };

std::string_view SideName(Side side);

struct StoreRecord {
  std::string pair_id;
  Side side = Side::kBase;
  AnswerDistribution distribution;
};

std::string EncodeStoreLine(const StoreRecord& record);
// Throws StoreError on malformed JSON or a checksum mismatch.
StoreRecord DecodeStoreLine(std::string_view line, const AnswerSpace& space);

class RunStore {
 public:
  // Reads `path`; a missing file is an empty store. A corrupt final line is
  // treated as a torn write: it is dropped, and with `repair` the file is
  // truncated to the last good line. Corruption elsewhere throws StoreError.
  static RunStore Load(const std::string& path, const AnswerSpace& space, bool repair = false);

  const AnswerDistribution* Find(const std::string& pair_id, Side side) const;
  bool HasPair(const std::string& pair_id) const {
    return Find(pair_id, Side::kBase) && Find(pair_id, Side::kIntervened);
  }

  const std::vector<StoreRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  // True when Load dropped a torn final line.
  bool dropped_tail() const { return dropped_tail_; }

 private:
  std::vector<StoreRecord> records_;
  std::map<std::pair<std::string, Side>, std::size_t> index_;
  bool dropped_tail_ = false;
};

struct RecordOptions {
  int workers = 1;
  // Stop after querying this many pairs; 0 means no limit.
  std::size_t max_new_pairs = 0;
  // Progress and backend telemetry; nullptr for silence.
  std::ostream* log = nullptr;
};

struct RecordSummary {
  std::size_t total_pairs = 0;
  std::size_t already_recorded = 0;
  std::size_t newly_recorded = 0;
  std::size_t sides_queried = 0;
  bool dropped_tail = false;
  bool complete = false;
};

// Scores both sides of every pair not yet in the store and appends them in
// pair order, so an interrupted run resumes into the same file an
// uninterrupted run would have written. Queries fan out over
// options.workers threads; a single writer appends results.
RecordSummary RecordRun(const ModelBackend& backend, std::span<const InterventionPair> pairs,
                        const std::string& store_path, const RecordOptions& options = {});

// Replays a store: prompts from the pairs, answers from the store.
std::unique_ptr<ReplayBackend> MakeReplayBackend(const RunStore& store,
                                                 std::span<const InterventionPair> pairs,
                                                 const AnswerSpace& space);

}  // namespace causal_probe

#endif  // CAUSAL_PROBE_RUN_STORE_H_

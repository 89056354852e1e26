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

// Math word problem templates and the interpreter for their operation DAGs.
//
// A template's operations are an ordered list of binary steps. Operand i is
// addressed by index i (1-based); the output of step l is addressed by index
// m + l, so a step may consume operands or the results of earlier steps.

#ifndef CAUSAL_PROBE_CORPUS_H_
#define CAUSAL_PROBE_CORPUS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "causal_probe/error.h"

namespace causal_probe {

// The integer answer space I = {1, ..., max}.
struct AnswerSpace {
  int max = 300;

  static constexpr int kMin = 1;

  bool Contains(std::int64_t value) const {
    return value >= kMin && value <= max;
  }
  int size() const { return max; }
};

enum class Op { kAdd, kSub, kMul, kDiv };

std::string_view OpName(Op op);
// Throws CorpusError on unknown names. Matching is case-insensitive.
Op ParseOp(std::string_view name);

struct OperationStep {
  Op op = Op::kAdd;
  int left = 1;
  int right = 2;

  friend bool operator==(const OperationStep&, const OperationStep&) = default;
};

using Operands = std::vector<int>;

struct Template {
  std::string id;
  std::string text;
  int operand_count = 0;
  std::vector<OperationStep> steps;
  // Canonical rendering of `steps`; see Signature().
  std::string signature;
};

struct ProblemInstance {
  std::string template_id;
  Operands operands;
  int ground_truth = 0;
  std::string prompt;

  // Stable key "template_id|n1,n2,..." identifying the instance.
  std::string InstanceId() const;
};

enum class EvalStatus {
  kOk,
  kTooLarge,   // a value exceeded the top of the answer space
  kTooSmall,   // a value fell below 1
  kInexact,    // a division left a remainder
  kBadArity,   // operand count does not match the steps' expectations
};

struct EvalResult {
  EvalStatus status = EvalStatus::kOk;
  std::int64_t value = 0;
  // 0-based index of the step that failed, or -1.
  int failed_step = -1;

  bool ok() const { return status == EvalStatus::kOk; }
};

// Runs the steps over the operands. Operands, intermediate results and the
// final result must all lie in `space`; division must be exact.
EvalResult EvaluateDetailed(std::span<const OperationStep> steps,
                            std::span<const int> operands,
                            const AnswerSpace& space);

// The final result, or nullopt when the tuple is not admissible.
std::optional<int> Evaluate(std::span<const OperationStep> steps,
                            std::span<const int> operands,
                            const AnswerSpace& space = {});

// Canonical string, e.g. "add(1,2)" or "add(1,2);mul(4,3)". Argument order
// is preserved, so add(1,2) and add(2,1) are different signatures.
std::string Signature(std::span<const OperationStep> steps);

// Checks every structural invariant of a template. Throws CorpusError.
void ValidateTemplate(const Template& t);

// Builds and validates a template; fills in its signature.
Template MakeTemplate(std::string id, std::string text, int operand_count,
                      std::vector<OperationStep> steps);

// Reads a JSON-lines corpus:
//   {"id": str, "text": str, "m": int,
//    "steps": [{"op": "add|sub|mul|div", "left": int, "right": int}]}
// Blank lines are ignored. Errors carry the 1-based line number.
std::vector<Template> ParseCorpus(const std::string& path);
std::vector<Template> ParseCorpusText(std::string_view contents);

// One JSON line in the corpus format (no trailing newline).
std::string SerializeTemplate(const Template& t);

// Substitutes base-10 operands into the placeholders and sets the ground
// truth. Throws CorpusError if the operands are not admissible.
ProblemInstance Instantiate(const Template& t, std::span<const int> operands,
                            const AnswerSpace& space = {});

// Prompt text only, without evaluating.
std::string RenderPrompt(const Template& t, std::span<const int> operands);

// The numeric continuation used once the question has been removed.
inline constexpr std::string_view kAblatedStem = "the answer is";

// Removes the question stem (the trailing "the number of ... is" clause, or
// the whole final sentence when there is no such clause) and appends
// kAblatedStem. Throws CorpusError when the text has fewer than two
// sentences, is already reduced to the bare stem, or when the removal would
// drop an operand placeholder.
Template AblateQuestion(const Template& t);

}  // namespace causal_probe

#endif  // CAUSAL_PROBE_CORPUS_H_

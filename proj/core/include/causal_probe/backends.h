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

// Model backends: anything that turns a prompt into an answer distribution.
//
// Synthetic mechanisms are exact test oracles, each wired to one causal
// pathway:
//   PERFECT(eps)      1 - eps on the ground truth, eps spread over I
//   OPERAND_ECHO(i)   mass on operand n_i (clipped into I)
//   SURFACE_HASH      mass on hash(template id) mod C + 1, blind to operands
//   UNIFORM           flat over I

#ifndef CAUSAL_PROBE_BACKENDS_H_
#define CAUSAL_PROBE_BACKENDS_H_

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "causal_probe/answer_distribution.h"
#include "causal_probe/corpus.h"

namespace causal_probe {

class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool retryable)
      : Error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

enum class Capability { kFullDist, kTopKDist, kArgmaxOnly };

std::string_view CapabilityName(Capability capability);

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual Capability capability() const = 0;
  // List length for kTopKDist backends, 0 otherwise.
  virtual int k() const { return 0; }
  virtual const AnswerSpace& space() const = 0;
  // Canonical description; part of the run store's provenance hash.
  virtual std::string Describe() const = 0;

  // Must be safe to call concurrently. Synthetic backends read the
  // structured instance; remote backends only see instance.prompt.
  virtual AnswerDistribution Score(const ProblemInstance& instance) const = 0;

  // One-line counters for progress output; empty when there is nothing to
  // report.
  virtual std::string Telemetry() const { return ""; }
};

// Validates the prompt, then delegates to backend.Score.
AnswerDistribution ScorePrompt(const ModelBackend& backend, const ProblemInstance& instance);

enum class Mechanism { kPerfect, kOperandEcho, kSurfaceHash, kUniform };

struct SyntheticSpec {
  Mechanism mechanism = Mechanism::kUniform;
  // Mass spread uniformly over I by the peaked mechanisms.
  double epsilon = 0.01;
  // 1-based operand echoed by kOperandEcho.
  int operand_index = 1;
};

// Throws Error for epsilon outside (0, 1), for epsilon so small that the
// spread mass falls under kProbabilityFloor, or for operand_index < 1.
std::unique_ptr<ModelBackend> MakeSynthetic(const SyntheticSpec& spec, AnswerSpace space);

// The answer favoured by SURFACE_HASH for a template.
int SurfaceHashAnswer(std::string_view template_id, const AnswerSpace& space);

// Serves previously recorded distributions keyed by prompt text.
class ReplayBackend : public ModelBackend {
 public:
  ReplayBackend(AnswerSpace space, Capability capability, int k,
                std::map<std::string, AnswerDistribution> by_prompt);

  Capability capability() const override { return capability_; }
  int k() const override { return k_; }
  const AnswerSpace& space() const override { return space_; }
  std::string Describe() const override;
  // Throws BackendError (not retryable) for unrecorded prompts.
  AnswerDistribution Score(const ProblemInstance& instance) const override;

  const AnswerDistribution* Find(const std::string& prompt) const;
  std::size_t size() const { return by_prompt_.size(); }

 private:
  AnswerSpace space_;
  Capability capability_;
  int k_;
  std::map<std::string, AnswerDistribution> by_prompt_;
};

struct HttpBackendOptions {
  // Full URL of a completions endpoint, e.g.
  // "https://api.example.com/v1/completions".
  std::string endpoint;
  std::string model;
  // Environment variable holding the bearer token. The token itself is
  // never read from configuration files.
  std::string api_key_env = "CAUSAL_PROBE_API_KEY";
  int k = 5;
  // Largest k the provider accepts.
  int max_k = 100;
  // Greedy completion parsed into one integer instead of top-k logprobs.
  bool argmax_only = false;
  int argmax_max_tokens = 8;
  int max_retries = 4;
  double initial_backoff_seconds = 0.5;
  double max_backoff_seconds = 8.0;
  int max_in_flight = 4;
  // 0 disables the budget.
  double requests_per_minute = 0.0;
  double timeout_seconds = 30.0;
};

// Remote backend for completion APIs that return per-token top-k
// logprobs. Each request asks for one token at temperature 0 without echo.
// Throws BackendError when k > max_k.
std::unique_ptr<ModelBackend> MakeHttpCompletionBackend(const HttpBackendOptions& options,
                                                        AnswerSpace space);

}  // namespace causal_probe

#endif  // CAUSAL_PROBE_BACKENDS_H_

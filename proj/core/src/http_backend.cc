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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

#include "causal_probe/backends.h"
#include "httplib.h"
#include "json.hpp"

namespace causal_probe {
namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl SplitUrl(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw BackendError("endpoint must be an absolute http(s) URL: " + url, false);
  }
  const std::size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

// Bounds concurrent requests and spaces request starts to honor a
// requests-per-minute budget.
class Throttle {
 public:
  Throttle(int max_in_flight, double requests_per_minute)
      : slots_(std::max(1, max_in_flight)),
        interval_(requests_per_minute > 0
                      ? std::chrono::duration_cast<Clock::duration>(
                            std::chrono::duration<double>(60.0 / requests_per_minute))
                      : Clock::duration::zero()),
        next_start_(Clock::now()) {}

  // Returns the time spent waiting.
  Clock::duration Acquire() {
    const auto begin = Clock::now();
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return slots_ > 0; });
    --slots_;
    auto start = std::max(next_start_, Clock::now());
    next_start_ = start + interval_;
    lock.unlock();
    std::this_thread::sleep_until(start);
    return Clock::now() - begin;
  }

  void Release() {
    {
      std::lock_guard lock(mu_);
      ++slots_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int slots_;
  Clock::duration interval_;
  Clock::time_point next_start_;
};

class HttpCompletionBackend : public ModelBackend {
 public:
  HttpCompletionBackend(const HttpBackendOptions& options, AnswerSpace space)
      : options_(options),
        space_(space),
        url_(SplitUrl(options.endpoint)),
        throttle_(options.max_in_flight, options.requests_per_minute) {
    if (const char* token = std::getenv(options_.api_key_env.c_str())) token_ = token;
  }

  Capability capability() const override {
    return options_.argmax_only ? Capability::kArgmaxOnly : Capability::kTopKDist;
  }
  int k() const override { return options_.argmax_only ? 0 : options_.k; }
  const AnswerSpace& space() const override { return space_; }

  std::string Describe() const override {
    std::ostringstream out;
    out << "http(" << options_.endpoint << ",model=" << options_.model;
    if (options_.argmax_only) {
      out << ",argmax";
    } else {
      out << ",k=" << options_.k;
    }
    out << ");C=" << space_.max;
    return out.str();
  }

  std::string Telemetry() const override {
    std::ostringstream out;
    out << "requests=" << requests_.load() << " retries=" << retries_.load()
        << " throttled_ms=" << throttled_ms_.load();
    return out.str();
  }

  AnswerDistribution Score(const ProblemInstance& instance) const override {
    json body = {{"prompt", instance.prompt}, {"temperature", 0}, {"echo", false}};
    if (!options_.model.empty()) body["model"] = options_.model;
    if (options_.argmax_only) {
      body["max_tokens"] = options_.argmax_max_tokens;
    } else {
      body["max_tokens"] = 1;
      body["logprobs"] = options_.k;
    }
    const std::string payload = body.dump();

    double backoff = options_.initial_backoff_seconds;
    std::string last_error;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
      if (attempt > 0) {
        ++retries_;
        std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
        backoff = std::min(backoff * 2.0, options_.max_backoff_seconds);
      }
      auto waited = throttle_.Acquire();
      throttled_ms_ +=
          std::chrono::duration_cast<std::chrono::milliseconds>(waited).count();
      ++requests_;
      httplib::Result result = Post(payload);
      throttle_.Release();

      if (!result) {
        last_error = "transport failure: " + httplib::to_string(result.error());
        continue;
      }
      if (result->status != 200) {
        last_error = "HTTP " + std::to_string(result->status);
        continue;
      }
      return Parse(result->body);
    }
    throw BackendError(last_error + " after " + std::to_string(options_.max_retries + 1) +
                           " attempts",
                       true);
  }

 private:
  httplib::Result Post(const std::string& payload) const {
    httplib::Client client(url_.origin);
    const auto timeout = std::chrono::duration<double>(options_.timeout_seconds);
    const auto secs = static_cast<time_t>(timeout.count());
    const auto usecs = static_cast<time_t>((timeout.count() - secs) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    return client.Post(url_.path, headers, payload, "application/json");
  }

  AnswerDistribution Parse(const std::string& text) const {
    json response;
    try {
      response = json::parse(text);
    } catch (const json::parse_error&) {
      throw BackendError("completion response is not JSON", false);
    }
    const json* choice = nullptr;
    if (response.contains("choices") && response["choices"].is_array() &&
        !response["choices"].empty()) {
      choice = &response["choices"][0];
    }
    if (!choice) throw BackendError("completion response has no choices", false);

    AnswerDistribution d = options_.argmax_only ? ParseGreedy(*choice) : ParseTopK(*choice);
    d.set_raw_response(text);
    return d;
  }

  AnswerDistribution ParseGreedy(const json& choice) const {
    std::optional<int> answer;
    if (choice.contains("text") && choice["text"].is_string()) {
      const std::string s = choice["text"].get<std::string>();
      std::size_t i = s.find_first_not_of(" \t\n");
      std::size_t j = i;
      while (j != std::string::npos && j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      if (i != std::string::npos && j > i) answer = ParseAnswerToken(s.substr(i, j - i));
    }
    return AnswerDistribution::Argmax(space_, answer);
  }

  AnswerDistribution ParseTopK(const json& choice) const {
    const json* top = nullptr;
    if (choice.contains("logprobs") && choice["logprobs"].is_object()) {
      const json& lp = choice["logprobs"];
      if (lp.contains("top_logprobs") && lp["top_logprobs"].is_array() &&
          !lp["top_logprobs"].empty() && lp["top_logprobs"][0].is_object()) {
        top = &lp["top_logprobs"][0];
      }
    }
    if (!top || top->empty()) throw BackendError("completion response is missing logprobs", false);

    std::vector<TopKEntry> entries;
    for (const auto& [token, logprob] : top->items()) {
      if (!logprob.is_number()) throw BackendError("non-numeric logprob", false);
      TopKEntry e;
      e.token = token;
      e.value = ParseAnswerToken(token);
      e.probability = std::min(1.0, std::exp(logprob.get<double>()));
      if (e.probability <= 0.0) continue;
      entries.push_back(std::move(e));
    }
    if (entries.empty()) throw BackendError("completion response is missing logprobs", false);
    std::stable_sort(entries.begin(), entries.end(), [](const TopKEntry& a, const TopKEntry& b) {
      return a.probability > b.probability;
    });
    if (static_cast<int>(entries.size()) > options_.k) entries.resize(options_.k);
    return AnswerDistribution::TopK(space_, std::move(entries));
  }

  HttpBackendOptions options_;
  AnswerSpace space_;
  ParsedUrl url_;
  std::string token_;
  mutable Throttle throttle_;
  mutable std::atomic<long long> requests_{0};
  mutable std::atomic<long long> retries_{0};
  mutable std::atomic<long long> throttled_ms_{0};
};

}  // namespace

std::unique_ptr<ModelBackend> MakeHttpCompletionBackend(const HttpBackendOptions& options,
                                                        AnswerSpace space) {
  if (options.endpoint.empty()) throw BackendError("http backend needs an endpoint", false);
  if (!options.argmax_only) {
    if (options.k < 1) throw BackendError("k must be at least 1", false);
    if (options.k > options.max_k) {
      throw BackendError("k=" + std::to_string(options.k) + " exceeds the provider limit of " +
                             std::to_string(options.max_k),
                         false);
    }
  }
  if (options.max_retries < 0) throw BackendError("max_retries must be non-negative", false);
  return std::make_unique<HttpCompletionBackend>(options, space);
}

}  // namespace causal_probe

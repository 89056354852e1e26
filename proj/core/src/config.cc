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

#include "causal_probe/config.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "causal_probe/hashing.h"

namespace causal_probe {
namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string Unquote(std::string_view s) {
  s = Trim(s);
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\''))) {
    return std::string(s.substr(1, s.size() - 2));
  }
  return std::string(s);
}

// Items of "[a, b]" or "a,b".
std::vector<std::string> SplitList(std::string_view s) {
  s = Trim(s);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw ConfigError("unterminated list: " + std::string(s));
    s = s.substr(1, s.size() - 2);
  }
  std::vector<std::string> items;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t comma = s.find(',', start);
    if (comma == std::string_view::npos) comma = s.size();
    std::string item = Unquote(s.substr(start, comma - start));
    if (!item.empty()) items.push_back(std::move(item));
    start = comma + 1;
  }
  return items;
}

template <typename T>
T ParseNumber(std::string_view key, std::string_view text) {
  const std::string s = Unquote(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("invalid number for '" + std::string(key) + "': " + s);
  }
  return value;
}

bool ParseBool(std::string_view key, std::string_view text) {
  const std::string s = Unquote(text);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("invalid boolean for '" + std::string(key) + "': " + s);
}

std::vector<std::string> SplitColon(std::string_view s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t colon = s.find(':', start);
    parts.emplace_back(s.substr(start, colon == std::string_view::npos ? colon : colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  return parts;
}

}  // namespace

std::vector<EffectKind> ParseKinds(std::string_view text) {
  std::vector<EffectKind> kinds;
  for (const std::string& item : SplitList(text)) {
    const EffectKind kind = ParseEffectKind(item);
    if (std::find(kinds.begin(), kinds.end(), kind) != kinds.end()) {
      throw ConfigError("effect kind listed twice: " + item);
    }
    kinds.push_back(kind);
  }
  return kinds;
}

std::vector<std::uint64_t> ParseSeeds(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& item : SplitList(text)) {
    seeds.push_back(ParseNumber<std::uint64_t>("seeds", item));
  }
  return seeds;
}

SyntheticSpec ParseSyntheticBackend(std::string_view spec) {
  const std::vector<std::string> parts = SplitColon(Trim(spec));
  SyntheticSpec out;
  const std::string& name = parts[0];
  auto eps_at = [&](std::size_t i) {
    if (parts.size() > i) out.epsilon = ParseNumber<double>("backend", parts[i]);
  };
  if (name == "perfect") {
    out.mechanism = Mechanism::kPerfect;
    eps_at(1);
    if (parts.size() > 2) throw ConfigError("perfect takes one parameter");
  } else if (name == "operand_echo") {
    out.mechanism = Mechanism::kOperandEcho;
    if (parts.size() > 1) out.operand_index = ParseNumber<int>("backend", parts[1]);
    eps_at(2);
    if (parts.size() > 3) throw ConfigError("operand_echo takes at most two parameters");
  } else if (name == "surface_hash") {
    out.mechanism = Mechanism::kSurfaceHash;
    eps_at(1);
    if (parts.size() > 2) throw ConfigError("surface_hash takes one parameter");
  } else if (name == "uniform") {
    out.mechanism = Mechanism::kUniform;
    if (parts.size() > 1) throw ConfigError("uniform takes no parameters");
  } else {
    throw ConfigError("unknown backend '" + std::string(spec) + "'");
  }
  return out;
}

bool IsHttpBackend(std::string_view spec) { return Trim(spec) == "http"; }

std::unique_ptr<ModelBackend> MakeBackend(const RunConfig& config) {
  if (IsHttpBackend(config.backend)) {
    return MakeHttpCompletionBackend(config.http, config.space());
  }
  try {
    return MakeSynthetic(ParseSyntheticBackend(config.backend), config.space());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("backend: ") + e.what());
  }
}

void RunConfig::Validate() const {
  if (corpus_path.empty()) throw ConfigError("no corpus configured (set 'corpus')");
  if (kinds.empty()) throw ConfigError("at least one effect kind is required");
  if (pairs_per_template < 1) throw ConfigError("pairs_per_template must be at least 1");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (c_max < 2) throw ConfigError("c_max must be at least 2");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (heatmap_range < 1 || heatmap_range > c_max) {
    throw ConfigError("heatmap_range must lie in 1..c_max");
  }
  if (!IsHttpBackend(backend)) ParseSyntheticBackend(backend);
}

void RunConfig::Set(std::string_view raw_key, std::string_view value) {
  const std::string key(Trim(raw_key));
  if (key == "corpus") {
    corpus_path = Unquote(value);
  } else if (key == "kinds") {
    kinds = ParseKinds(value);
  } else if (key == "pairs_per_template" || key == "pairs") {
    pairs_per_template = ParseNumber<int>(key, value);
  } else if (key == "seeds") {
    seeds = ParseSeeds(value);
  } else if (key == "c_max") {
    c_max = ParseNumber<int>(key, value);
  } else if (key == "backend") {
    backend = Unquote(value);
  } else if (key == "out") {
    out_dir = Unquote(value);
  } else if (key == "ablate_question") {
    ablate_question = ParseBool(key, value);
  } else if (key == "workers") {
    workers = ParseNumber<int>(key, value);
  } else if (key == "max_new_pairs") {
    max_new_pairs = ParseNumber<std::size_t>(key, value);
  } else if (key == "heatmap_signature") {
    heatmap_signature = Unquote(value);
  } else if (key == "heatmap_range") {
    heatmap_range = ParseNumber<int>(key, value);
  } else if (key == "endpoint") {
    http.endpoint = Unquote(value);
  } else if (key == "model") {
    http.model = Unquote(value);
  } else if (key == "api_key_env") {
    http.api_key_env = Unquote(value);
  } else if (key == "topk") {
    http.k = ParseNumber<int>(key, value);
  } else if (key == "max_k") {
    http.max_k = ParseNumber<int>(key, value);
  } else if (key == "argmax_only") {
    http.argmax_only = ParseBool(key, value);
  } else if (key == "max_retries") {
    http.max_retries = ParseNumber<int>(key, value);
  } else if (key == "max_in_flight") {
    http.max_in_flight = ParseNumber<int>(key, value);
  } else if (key == "requests_per_minute") {
    http.requests_per_minute = ParseNumber<double>(key, value);
  } else if (key == "timeout_seconds") {
    http.timeout_seconds = ParseNumber<double>(key, value);
  } else if (key == "initial_backoff_seconds") {
    http.initial_backoff_seconds = ParseNumber<double>(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

std::string RunConfig::GenerationHash(std::uint64_t corpus_hash) const {
  std::ostringstream canonical;
  canonical << "format=1;corpus=" << HexDigest(corpus_hash) << ";kinds=";
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    canonical << (i ? "," : "") << EffectKindName(kinds[i]);
  }
  canonical << ";pairs=" << pairs_per_template << ";seeds=";
  for (std::size_t i = 0; i < seeds.size(); ++i) canonical << (i ? "," : "") << seeds[i];
  canonical << ";C=" << c_max << ";ablate=" << (ablate_question ? 1 : 0);
  return HexDigest(Fnv1a64(canonical.str()));
}

void ApplyConfigText(std::string_view text, RunConfig* config) {
  std::size_t line_number = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_number;

    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = Trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_number) + ": expected key = value");
    }
    try {
      config->Set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_number) + ": " + e.what());
    }
  }
}

RunConfig LoadConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  RunConfig config;
  ApplyConfigText(buffer.str(), &config);
  return config;
}

}  // namespace causal_probe

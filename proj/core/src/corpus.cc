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

#include "causal_probe/corpus.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace causal_probe {
namespace {

using nlohmann::json;

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view TrimView(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Placeholder occurrences in `text`, as operand indices. Malformed
// placeholders such as "{n}" or "{nx}" are reported as 0.
std::vector<int> ScanPlaceholders(std::string_view text) {
  std::vector<int> found;
  for (std::size_t pos = text.find("{n"); pos != std::string_view::npos;
       pos = text.find("{n", pos + 2)) {
    std::size_t end = text.find('}', pos);
    if (end == std::string_view::npos) {
      found.push_back(0);
      continue;
    }
    std::string_view digits = text.substr(pos + 2, end - pos - 2);
    int index = 0;
    bool ok = !digits.empty() && digits.size() < 6;
    for (char c : digits) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        ok = false;
        break;
      }
      index = index * 10 + (c - '0');
    }
    found.push_back(ok ? index : 0);
  }
  return found;
}

std::optional<std::int64_t> Apply(Op op, std::int64_t a, std::int64_t b,
                                  EvalStatus* status) {
  switch (op) {
    case Op::kAdd:
      return a + b;
    case Op::kSub:
      return a - b;
    case Op::kMul:
      return a * b;
    case Op::kDiv:
      if (b == 0 || a % b != 0) {
        *status = EvalStatus::kInexact;
        return std::nullopt;
      }
      return a / b;
  }
  return std::nullopt;
}

Template ParseRecord(const json& record, std::size_t line_number) {
  auto fail = [&](const std::string& what) -> CorpusError {
    return CorpusError("corpus line " + std::to_string(line_number) + ": " + what);
  };
  if (!record.is_object()) throw fail("record is not a JSON object");
  for (const char* field : {"id", "text", "m", "steps"}) {
    if (!record.contains(field)) throw fail(std::string("missing field '") + field + "'");
  }
  if (!record["id"].is_string()) throw fail("'id' must be a string");
  if (!record["text"].is_string()) throw fail("'text' must be a string");
  if (!record["m"].is_number_integer()) throw fail("'m' must be an integer");
  if (!record["steps"].is_array()) throw fail("'steps' must be an array");

  std::vector<OperationStep> steps;
  for (const json& step : record["steps"]) {
    if (!step.is_object() || !step.contains("op") || !step.contains("left") ||
        !step.contains("right") || !step["op"].is_string() ||
        !step["left"].is_number_integer() || !step["right"].is_number_integer()) {
      throw fail("malformed step; expected {\"op\", \"left\", \"right\"}");
    }
    try {
      steps.push_back({ParseOp(step["op"].get<std::string>()),
                       step["left"].get<int>(), step["right"].get<int>()});
    } catch (const CorpusError& e) {
      throw fail(e.what());
    }
  }

  std::string id = record["id"].get<std::string>();
  try {
    return MakeTemplate(id, record["text"].get<std::string>(),
                        record["m"].get<int>(), std::move(steps));
  } catch (const CorpusError& e) {
    throw fail(e.what());
  }
}

}  // namespace

std::string_view OpName(Op op) {
  switch (op) {
    case Op::kAdd:
      return "add";
    case Op::kSub:
      return "sub";
    case Op::kMul:
      return "mul";
    case Op::kDiv:
      return "div";
  }
  return "?";
}

Op ParseOp(std::string_view name) {
  const std::string lower = Lower(name);
  if (lower == "add") return Op::kAdd;
  if (lower == "sub") return Op::kSub;
  if (lower == "mul") return Op::kMul;
  if (lower == "div") return Op::kDiv;
  throw CorpusError("unknown operation '" + std::string(name) + "'");
}

std::string ProblemInstance::InstanceId() const {
  std::string id = template_id;
  id += '|';
  for (std::size_t i = 0; i < operands.size(); ++i) {
    if (i) id += ',';
    id += std::to_string(operands[i]);
  }
  return id;
}

EvalResult EvaluateDetailed(std::span<const OperationStep> steps,
                            std::span<const int> operands,
                            const AnswerSpace& space) {
  const int m = static_cast<int>(operands.size());
  // Values addressable by 1-based index: operands then step outputs.
  std::int64_t slots[64];
  const bool small = m + static_cast<int>(steps.size()) <= 64;
  std::vector<std::int64_t> heap;
  std::int64_t* values = slots;
  if (!small) {
    heap.resize(m + steps.size());
    values = heap.data();
  }
  for (int i = 0; i < m; ++i) {
    const std::int64_t v = operands[i];
    if (v > space.max) return {EvalStatus::kTooLarge, v, -1};
    if (v < AnswerSpace::kMin) return {EvalStatus::kTooSmall, v, -1};
    values[i] = v;
  }
  if (steps.empty()) return {EvalStatus::kBadArity, 0, -1};

  std::int64_t result = 0;
  for (std::size_t l = 0; l < steps.size(); ++l) {
    const OperationStep& step = steps[l];
    const int available = m + static_cast<int>(l);
    if (step.left < 1 || step.left > available || step.right < 1 ||
        step.right > available) {
      return {EvalStatus::kBadArity, 0, static_cast<int>(l)};
    }
    EvalStatus status = EvalStatus::kOk;
    auto value = Apply(step.op, values[step.left - 1], values[step.right - 1], &status);
    if (!value) return {status, 0, static_cast<int>(l)};
    if (*value > space.max) return {EvalStatus::kTooLarge, *value, static_cast<int>(l)};
    if (*value < AnswerSpace::kMin) {
      return {EvalStatus::kTooSmall, *value, static_cast<int>(l)};
    }
    values[m + l] = *value;
    result = *value;
  }
  return {EvalStatus::kOk, result, -1};
}

std::optional<int> Evaluate(std::span<const OperationStep> steps,
                            std::span<const int> operands,
                            const AnswerSpace& space) {
  EvalResult r = EvaluateDetailed(steps, operands, space);
  if (!r.ok()) return std::nullopt;
  return static_cast<int>(r.value);
}

std::string Signature(std::span<const OperationStep> steps) {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += ';';
    out += OpName(steps[i].op);
    out += '(' + std::to_string(steps[i].left) + ',' +
           std::to_string(steps[i].right) + ')';
  }
  return out;
}

void ValidateTemplate(const Template& t) {
  const std::string where = "template '" + t.id + "': ";
  if (t.id.empty()) throw CorpusError("template id must be nonempty");
  if (t.operand_count < 1) throw CorpusError(where + "m must be positive");
  if (t.steps.empty()) throw CorpusError(where + "at least one step is required");

  const int m = t.operand_count;
  for (std::size_t l = 0; l < t.steps.size(); ++l) {
    const int limit = m + static_cast<int>(l);
    for (int index : {t.steps[l].left, t.steps[l].right}) {
      if (index < 1 || index > limit) {
        throw CorpusError(where + "dangling index " + std::to_string(index) +
                          " in step " + std::to_string(l + 1) +
                          " (valid range 1.." + std::to_string(limit) + ")");
      }
    }
  }

  // Every step must feed the final one.
  const int n = static_cast<int>(t.steps.size());
  std::vector<bool> live(n, false);
  live[n - 1] = true;
  for (int l = n - 1; l >= 0; --l) {
    if (!live[l]) {
      throw CorpusError(where + "step " + std::to_string(l + 1) +
                        " does not contribute to the result");
    }
    for (int index : {t.steps[l].left, t.steps[l].right}) {
      if (index > m) live[index - m - 1] = true;
    }
  }

  std::vector<int> counts(m + 1, 0);
  for (int index : ScanPlaceholders(t.text)) {
    if (index < 1 || index > m) {
      throw CorpusError(where + "placeholder does not name an operand in 1.." +
                        std::to_string(m));
    }
    ++counts[index];
  }
  for (int i = 1; i <= m; ++i) {
    if (counts[i] != 1) {
      throw CorpusError(where + "placeholder {n" + std::to_string(i) +
                        "} must occur exactly once (found " +
                        std::to_string(counts[i]) + ")");
    }
  }

  std::string_view trimmed = TrimView(t.text);
  if (trimmed.empty()) throw CorpusError(where + "text is empty");
  if (trimmed.back() == '?') {
    throw CorpusError(where + "text must end with a statement stem, not a question");
  }
}

Template MakeTemplate(std::string id, std::string text, int operand_count,
                      std::vector<OperationStep> steps) {
  Template t;
  t.id = std::move(id);
  t.text = std::move(text);
  t.operand_count = operand_count;
  t.steps = std::move(steps);
  ValidateTemplate(t);
  t.signature = Signature(t.steps);
  return t;
}

std::vector<Template> ParseCorpusText(std::string_view contents) {
  std::vector<Template> templates;
  std::vector<std::string> seen;
  std::size_t line_number = 0;
  std::size_t start = 0;
  while (start <= contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(start, end - start);
    ++line_number;
    start = end + 1;
    if (TrimView(line).empty()) {
      if (end == contents.size()) break;
      continue;
    }
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError("corpus line " + std::to_string(line_number) +
                        ": malformed JSON (" + e.what() + ")");
    }
    Template t = ParseRecord(record, line_number);
    if (std::find(seen.begin(), seen.end(), t.id) != seen.end()) {
      throw CorpusError("corpus line " + std::to_string(line_number) +
                        ": duplicate template id '" + t.id + "'");
    }
    seen.push_back(t.id);
    templates.push_back(std::move(t));
    if (end == contents.size()) break;
  }
  return templates;
}

std::vector<Template> ParseCorpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open corpus file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ParseCorpusText(buffer.str());
}

std::string SerializeTemplate(const Template& t) {
  json steps = json::array();
  for (const OperationStep& s : t.steps) {
    steps.push_back({{"op", std::string(OpName(s.op))}, {"left", s.left}, {"right", s.right}});
  }
  json record = {{"id", t.id}, {"text", t.text}, {"m", t.operand_count}, {"steps", steps}};
  return record.dump();
}

std::string RenderPrompt(const Template& t, std::span<const int> operands) {
  std::string out;
  out.reserve(t.text.size() + 8);
  std::string_view text = t.text;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t open = text.find("{n", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    std::size_t close = text.find('}', open);
    out.append(text.substr(pos, open - pos));
    int index = std::stoi(std::string(text.substr(open + 2, close - open - 2)));
    out += std::to_string(operands[index - 1]);
    pos = close + 1;
  }
  return out;
}

ProblemInstance Instantiate(const Template& t, std::span<const int> operands,
                            const AnswerSpace& space) {
  if (static_cast<int>(operands.size()) != t.operand_count) {
    throw CorpusError("template '" + t.id + "' expects " +
                      std::to_string(t.operand_count) + " operands, got " +
                      std::to_string(operands.size()));
  }
  auto g = Evaluate(t.steps, operands, space);
  if (!g) {
    throw CorpusError("operands are not admissible for template '" + t.id + "'");
  }
  ProblemInstance instance;
  instance.template_id = t.id;
  instance.operands.assign(operands.begin(), operands.end());
  instance.ground_truth = *g;
  instance.prompt = RenderPrompt(t, operands);
  return instance;
}

Template AblateQuestion(const Template& t) {
  const std::string& text = t.text;
  // Start offset of the final sentence.
  std::size_t last_start = 0;
  int sentences = 1;
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    if ((text[i] == '.' || text[i] == '!' || text[i] == '?') &&
        std::isspace(static_cast<unsigned char>(text[i + 1]))) {
      std::size_t next = i + 1;
      while (next < text.size() && std::isspace(static_cast<unsigned char>(text[next]))) ++next;
      if (next < text.size()) {
        last_start = next;
        ++sentences;
      }
    }
  }
  const std::string where = "template '" + t.id + "': ";
  if (sentences < 2) {
    throw CorpusError(where + "cannot ablate a single-sentence template");
  }
  std::string_view last = std::string_view(text).substr(last_start);
  if (Lower(TrimView(last)) == kAblatedStem) {
    throw CorpusError(where + "question already removed");
  }

  const std::string lower_last = Lower(last);
  const std::size_t marker = lower_last.find("the number of");
  std::string replacement;
  std::string_view removed;
  if (marker != std::string::npos && marker > 0) {
    replacement = std::string(last.substr(0, marker)) + std::string(kAblatedStem);
    removed = last.substr(marker);
  } else {
    replacement = "The answer is";
    removed = last;
  }
  if (removed.find("{n") != std::string_view::npos) {
    throw CorpusError(where + "removing the question would drop an operand");
  }

  Template ablated = t;
  ablated.text = text.substr(0, last_start) + replacement;
  return ablated;
}

}  // namespace causal_probe

#include "bppo/tasks.hpp"

#include <algorithm>

#include "bppo/error.hpp"
#include "bppo/rng.hpp"

namespace bppo {

namespace vocab {

int digit(int d) {
  if (d < 0 || d > 9) throw ConfigError("digit out of range: " + std::to_string(d));
  return kDigit0 + d;
}

bool is_digit(int id) { return id >= kDigit0 && id < kDigit0 + 10; }

int digit_value(int id) {
  if (!is_digit(id)) throw ConfigError("token is not a digit: " + std::to_string(id));
  return id - kDigit0;
}

std::string token_name(int id) {
  switch (id) {
    case kPad: return "PAD";
    case kBos: return "BOS";
    case kEos: return "EOS";
    case kPlus: return "+";
    case kEquals: return "=";
    case kSep: return "|";
    case kParityEven: return "E";
    case kParityOdd: return "O";
    default:
      if (is_digit(id)) return std::to_string(digit_value(id));
      if (id >= 0 && id < kSize) return "u" + std::to_string(id);
      return "?" + std::to_string(id);
  }
}

std::string detokenize(std::span<const int> ids) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token_name(ids[i]);
  }
  return out;
}

}  // namespace vocab

void TaskSpec::validate() const {
  switch (kind) {
    case TaskKind::ModAdd:
      if (modulus < 2 || modulus > 100) {
        throw ConfigError("ModAdd modulus must be in [2, 100]");
      }
      return;
    case TaskKind::Reverse:
      if (length < 1 || length > 12) {
        throw ConfigError("Reverse length must be in [1, 12]");
      }
      return;
    case TaskKind::PlanParity:
      if (length < 1 || length > 16) {
        throw ConfigError("PlanParity length must be in [1, 16]");
      }
      return;
  }
  throw ConfigError("unknown task kind");
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "modadd") return TaskKind::ModAdd;
  if (s == "reverse") return TaskKind::Reverse;
  if (s == "planparity") return TaskKind::PlanParity;
  throw ConfigError("unknown task kind '" + s + "' (expected modadd|reverse|planparity)");
}

std::string task_kind_to_string(TaskKind k) {
  switch (k) {
    case TaskKind::ModAdd: return "modadd";
    case TaskKind::Reverse: return "reverse";
    case TaskKind::PlanParity: return "planparity";
  }
  return "?";
}

namespace {

// canonical decimal rendering, no leading zeros
void append_number(std::vector<int>& out, int64_t v) {
  if (v == 0) {
    out.push_back(vocab::digit(0));
    return;
  }
  std::vector<int> rev;
  while (v > 0) {
    rev.push_back(vocab::digit(static_cast<int>(v % 10)));
    v /= 10;
  }
  out.insert(out.end(), rev.rbegin(), rev.rend());
}

// parses a canonical decimal digit run; returns false on malformed input
bool parse_number(std::span<const int> toks, size_t& pos, int64_t& out) {
  const size_t start = pos;
  int64_t v = 0;
  while (pos < toks.size() && vocab::is_digit(toks[pos])) {
    v = v * 10 + vocab::digit_value(toks[pos]);
    ++pos;
  }
  if (pos == start) return false;
  if (toks[start] == vocab::digit(0) && pos - start > 1) return false;  // leading zero
  out = v;
  return true;
}

}  // namespace

TaskInstance gen_instance(const TaskSpec& spec, uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed({0x7A5Cu, seed}));
  TaskInstance inst;
  inst.prompt_tokens.push_back(vocab::kBos);
  switch (spec.kind) {
    case TaskKind::ModAdd: {
      const int64_t a = static_cast<int64_t>(rng.below(static_cast<uint64_t>(spec.modulus)));
      const int64_t b = static_cast<int64_t>(rng.below(static_cast<uint64_t>(spec.modulus)));
      append_number(inst.prompt_tokens, a);
      inst.prompt_tokens.push_back(vocab::kPlus);
      append_number(inst.prompt_tokens, b);
      inst.prompt_tokens.push_back(vocab::kEquals);
      break;
    }
    case TaskKind::Reverse: {
      for (int64_t i = 0; i < spec.length; ++i) {
        inst.prompt_tokens.push_back(vocab::digit(static_cast<int>(rng.below(10))));
      }
      inst.prompt_tokens.push_back(vocab::kSep);
      break;
    }
    case TaskKind::PlanParity: {
      for (int64_t i = 0; i < spec.length; ++i) {
        inst.prompt_tokens.push_back(vocab::digit(static_cast<int>(rng.below(2))));
      }
      inst.prompt_tokens.push_back(vocab::kSep);
      break;
    }
  }
  inst.oracle_response = canonical_response(spec, inst.prompt_tokens);
  return inst;
}

std::vector<int> canonical_response(const TaskSpec& spec, std::span<const int> prompt) {
  if (prompt.empty() || prompt[0] != vocab::kBos) {
    throw IoError("malformed prompt: missing BOS");
  }
  std::vector<int> out;
  switch (spec.kind) {
    case TaskKind::ModAdd: {
      size_t pos = 1;
      int64_t a = 0, b = 0;
      if (!parse_number(prompt, pos, a) || pos >= prompt.size() ||
          prompt[pos] != vocab::kPlus) {
        throw IoError("malformed ModAdd prompt");
      }
      ++pos;
      if (!parse_number(prompt, pos, b) || pos + 1 != prompt.size() ||
          prompt[pos] != vocab::kEquals) {
        throw IoError("malformed ModAdd prompt");
      }
      append_number(out, (a + b) % spec.modulus);
      break;
    }
    case TaskKind::Reverse: {
      if (prompt.size() < 2 || prompt.back() != vocab::kSep) {
        throw IoError("malformed Reverse prompt");
      }
      for (size_t i = prompt.size() - 2; i >= 1; --i) {
        if (!vocab::is_digit(prompt[i])) throw IoError("malformed Reverse prompt");
        out.push_back(prompt[i]);
      }
      break;
    }
    case TaskKind::PlanParity: {
      if (prompt.size() < 2 || prompt.back() != vocab::kSep) {
        throw IoError("malformed PlanParity prompt");
      }
      int64_t ones = 0;
      for (size_t i = 1; i + 1 < prompt.size(); ++i) {
        if (prompt[i] != vocab::digit(0) && prompt[i] != vocab::digit(1)) {
          throw IoError("malformed PlanParity prompt");
        }
        ones += prompt[i] == vocab::digit(1) ? 1 : 0;
      }
      out.push_back(ones % 2 == 0 ? vocab::kParityEven : vocab::kParityOdd);
      append_number(out, ones);
      break;
    }
  }
  out.push_back(vocab::kEos);
  return out;
}

double verify(const TaskSpec& spec, std::span<const int> prompt,
              std::span<const int> response) {
  std::vector<int> want;
  try {
    want = canonical_response(spec, prompt);
  } catch (const IoError&) {
    return 0.0;  // malformed prompt: nothing can earn reward
  }
  if (want.size() != response.size()) return 0.0;
  return std::equal(want.begin(), want.end(), response.begin()) ? 1.0 : 0.0;
}

}  // namespace bppo

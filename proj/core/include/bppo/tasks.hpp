#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bppo {

// Fixed 32-token vocabulary shared by every task.
namespace vocab {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kDigit0 = 3;  // digits occupy ids 3..12
inline constexpr int kPlus = 13;
inline constexpr int kEquals = 14;
inline constexpr int kSep = 15;
inline constexpr int kParityEven = 16;  // 'E'
inline constexpr int kParityOdd = 17;   // 'O'
inline constexpr int kSize = 32;        // ids 18..31 are unused filler

int digit(int d);             // 0..9 -> token id
bool is_digit(int id);
int digit_value(int id);      // token id -> 0..9
std::string token_name(int id);
std::string detokenize(std::span<const int> ids);

}  // namespace vocab

enum class TaskKind { ModAdd, Reverse, PlanParity };

struct TaskSpec {
  TaskKind kind = TaskKind::ModAdd;
  int64_t modulus = 10;  // ModAdd: operands drawn from [0, modulus)
  int64_t length = 6;    // Reverse / PlanParity: sequence length
  void validate() const;
};

struct TaskInstance {
  // starts with BOS, ends with the task delimiter ('=' for ModAdd, '|' else)
  std::vector<int> prompt_tokens;
  std::vector<int> oracle_response;  // canonical answer incl. trailing EOS
};

TaskKind task_kind_from_string(const std::string& s);
std::string task_kind_to_string(TaskKind k);

// Deterministic in (spec, seed).
TaskInstance gen_instance(const TaskSpec& spec, uint64_t seed);

// Exact binary verifier: recomputes the canonical answer from the prompt and
// returns 1.0 on an exact token match (including the trailing EOS), else 0.0.
double verify(const TaskSpec& spec, std::span<const int> prompt,
              std::span<const int> response);

// Canonical answer derived from the prompt alone; throws IoError on a
// malformed prompt. Exposed for tests and the supervised warmup.
std::vector<int> canonical_response(const TaskSpec& spec, std::span<const int> prompt);

}  // namespace bppo

#pragma once

#include <filesystem>

#include "bppo/policy.hpp"

namespace bppo {

// Checkpoint format: one magic line, one single-line JSON header (config,
// format version, tensor directory with names/shapes/byte offsets), then raw
// little-endian float64 payloads. Round-trips bit-exactly.
void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace bppo

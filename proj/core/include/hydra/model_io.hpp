#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "hydra/factorized_model.hpp"

namespace hydra {

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Binary model image, little-endian:
///   "HYDRAFM\0", u32 version, u64 hash_dim, u64 hidden_dim, u64 ngram_max,
///   u64 seed, E, B1, c1 (doubles, row-major), u64 head count, then per head
///   in key order: u32 key length, key bytes, W1, b1, W2, b2; finally a u64
///   FNV-1a checksum of everything before it.
[[nodiscard]] std::string serialize_model(const FactorizedModel& model);

/// Throws CorruptFileError for a bad magic, truncation, trailing bytes or a
/// checksum mismatch, and VersionMismatchError for another format version.
[[nodiscard]] FactorizedModel deserialize_model(std::string_view bytes);

void save_model(const FactorizedModel& model, const std::filesystem::path& path);
[[nodiscard]] FactorizedModel load_model(const std::filesystem::path& path);
/// As load_model, and throws DimensionError if the stored encoder config
/// differs from `expected`.
[[nodiscard]] FactorizedModel load_model(const std::filesystem::path& path,
                                         const TextEncoderConfig& expected);

/// Raw tensor bytes of the base or of one head, for bitwise comparisons.
[[nodiscard]] std::string serialize_base(const BaseParams& base);
[[nodiscard]] std::string serialize_head(const HeadParams& head);

}  // namespace hydra

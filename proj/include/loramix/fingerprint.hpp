#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "loramix/tensor.hpp"

namespace loramix {

inline constexpr const char * k_hash_algorithm = "sha256";

struct Fingerprint {
  std::string digest; // hex, 64 chars
  std::uint64_t name_count = 0;
  std::uint64_t total_bytes = 0; // canonical serialized length
};

std::string sha256_hex(const std::uint8_t * data, std::size_t size);

// Digest of the canonical serialized bytes, so insertion order and
// on-disk layout quirks never change the value.
Fingerprint fingerprint_store(const TensorStore & store);
Fingerprint fingerprint_file(const std::filesystem::path & path);

} // namespace loramix

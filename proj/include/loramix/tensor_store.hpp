#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "loramix/tensor.hpp"

namespace loramix {

// Canonical container bytes: 8-byte LE header length, JSON header with
// tensors in lexicographic name order plus optional "__metadata__", then
// packed row-major data. Equal stores serialize to equal bytes.
std::vector<std::uint8_t> serialize_store(const TensorStore & store);

TensorStore parse_store(const std::uint8_t * bytes, std::size_t size);

TensorStore read_store(const std::filesystem::path & path);
void write_store(const TensorStore & store, const std::filesystem::path & path);

} // namespace loramix

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "loramix/dtype.hpp"

namespace loramix {

// Raw element bytes plus enough typing to interpret them. Arithmetic happens
// on f32 vectors; tensors only carry storage.
struct Tensor {
  dtype dt = dtype::f32;
  std::vector<std::uint64_t> shape;
  std::vector<std::uint8_t> data; // row-major, little-endian

  std::uint64_t numel() const;
  std::size_t byte_size() const { return data.size(); }

  std::vector<float> to_f32() const;

  static Tensor from_f32(std::vector<std::uint64_t> shape,
                         const std::vector<float> & values);
};

struct CastResult {
  Tensor tensor;
  std::uint64_t saturated = 0; // finite f32 values that clipped to f16 inf
};

CastResult cast_tensor(const Tensor & t, dtype target);

struct TensorStore {
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> metadata;
};

// Throws errc::invalid_tensor on bad names, shape/byte-length disagreement,
// or (with name context) anything from tensor-level checks.
void validate_store(const TensorStore & store);

bool stores_equal(const TensorStore & a, const TensorStore & b);

} // namespace loramix

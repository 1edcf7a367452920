#include "loramix/tensor.hpp"

#include <bit>
#include <cstring>

#include "loramix/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "container bytes are little-endian; big-endian hosts need swaps");

namespace loramix {

std::uint64_t Tensor::numel() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) n *= d;
  return n; // empty shape -> scalar, one element
}

std::vector<float> Tensor::to_f32() const {
  const std::uint64_t n = numel();
  std::vector<float> out(n);
  switch (dt) {
    case dtype::f32:
      std::memcpy(out.data(), data.data(), n * 4);
      break;
    case dtype::f16:
      for (std::uint64_t i = 0; i < n; ++i) {
        std::uint16_t bits;
        std::memcpy(&bits, data.data() + i * 2, 2);
        out[i] = f16_bits_to_f32(bits);
      }
      break;
    case dtype::bf16:
      for (std::uint64_t i = 0; i < n; ++i) {
        std::uint16_t bits;
        std::memcpy(&bits, data.data() + i * 2, 2);
        out[i] = bf16_bits_to_f32(bits);
      }
      break;
  }
  return out;
}

Tensor Tensor::from_f32(std::vector<std::uint64_t> shape,
                        const std::vector<float> & values) {
  Tensor t;
  t.dt = dtype::f32;
  t.shape = std::move(shape);
  if (t.numel() != values.size())
    fail(errc::invalid_tensor, "value count does not match shape");
  t.data.resize(values.size() * 4);
  std::memcpy(t.data.data(), values.data(), t.data.size());
  return t;
}

CastResult cast_tensor(const Tensor & t, dtype target) {
  CastResult result;
  result.tensor.dt = target;
  result.tensor.shape = t.shape;
  if (t.dt == target) {
    result.tensor.data = t.data;
    return result;
  }

  const std::vector<float> values = t.to_f32();
  const std::uint64_t n = values.size();
  result.tensor.data.resize(n * dtype_size(target));

  switch (target) {
    case dtype::f32:
      std::memcpy(result.tensor.data.data(), values.data(), n * 4);
      break;
    case dtype::f16:
      for (std::uint64_t i = 0; i < n; ++i) {
        if (f16_overflows(values[i])) result.saturated += 1;
        const std::uint16_t bits = f32_to_f16_bits(values[i]);
        std::memcpy(result.tensor.data.data() + i * 2, &bits, 2);
      }
      break;
    case dtype::bf16:
      for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint16_t bits = f32_to_bf16_bits(values[i]);
        std::memcpy(result.tensor.data.data() + i * 2, &bits, 2);
      }
      break;
  }
  return result;
}

void validate_store(const TensorStore & store) {
  for (const auto & [name, t] : store.tensors) {
    if (name.empty())
      fail(errc::invalid_tensor, "tensor name must be non-empty");
    if (name.find('\0') != std::string::npos)
      fail(errc::invalid_tensor, "tensor name contains NUL: '" + name + "'");
    if (t.data.size() != t.numel() * dtype_size(t.dt))
      fail(errc::invalid_tensor,
           "tensor '" + name + "' byte length does not match shape");
  }
}

bool stores_equal(const TensorStore & a, const TensorStore & b) {
  if (a.metadata != b.metadata) return false;
  if (a.tensors.size() != b.tensors.size()) return false;
  auto it = b.tensors.begin();
  for (const auto & [name, t] : a.tensors) {
    if (it->first != name) return false;
    const Tensor & u = it->second;
    if (t.dt != u.dt || t.shape != u.shape || t.data != u.data) return false;
    ++it;
  }
  return true;
}

} // namespace loramix

#pragma once

#include <cstdint>
#include <string>

namespace loramix {

enum class dtype : std::uint8_t { f32, f16, bf16 };

std::size_t dtype_size(dtype dt);

// Container tag <-> enum. parse_dtype throws errc::unknown_dtype.
const char * dtype_tag(dtype dt);
dtype parse_dtype(const std::string & tag);

// Round-to-nearest-even scalar conversions. The half-precision paths are
// bit-level so the results do not depend on compiler intrinsics or FPU mode.
std::uint16_t f32_to_f16_bits(float value);
float f16_bits_to_f32(std::uint16_t bits);
std::uint16_t f32_to_bf16_bits(float value);
float bf16_bits_to_f32(std::uint16_t bits);

// True when |value| is finite yet too large for f16 (rounds to +-inf).
bool f16_overflows(float value);

} // namespace loramix

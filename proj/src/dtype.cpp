#include "loramix/dtype.hpp"

#include <bit>
#include <cmath>

#include "loramix/errors.hpp"

namespace loramix {

std::size_t dtype_size(dtype dt) {
  return dt == dtype::f32 ? 4 : 2;
}

const char * dtype_tag(dtype dt) {
  switch (dt) {
    case dtype::f32:  return "F32";
    case dtype::f16:  return "F16";
    case dtype::bf16: return "BF16";
  }
  return "?";
}

dtype parse_dtype(const std::string & tag) {
  if (tag == "F32") return dtype::f32;
  if (tag == "F16") return dtype::f16;
  if (tag == "BF16") return dtype::bf16;
  fail(errc::unknown_dtype, "unsupported dtype tag '" + tag + "'");
}

std::uint16_t f32_to_f16_bits(float value) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  const std::uint16_t sign = static_cast<std::uint16_t>((bits >> 16) & 0x8000u);
  const std::uint32_t abs = bits & 0x7FFFFFFFu;

  if (abs >= 0x7F800000u) {
    if (abs > 0x7F800000u) {
      // NaN: keep the top mantissa bits so upcast-then-downcast is identity;
      // if the payload lives entirely in the dropped bits, force quiet.
      const std::uint32_t payload = (abs & 0x7FFFFFu) >> 13;
      return static_cast<std::uint16_t>(sign | 0x7C00u |
                                        (payload != 0 ? payload : 0x200u));
    }
    return static_cast<std::uint16_t>(sign | 0x7C00u);
  }
  // 65520.0 is the first float that rounds past f16 max (65504); saturate.
  if (abs >= 0x477FF000u) return static_cast<std::uint16_t>(sign | 0x7C00u);

  if (abs < 0x38800000u) {
    // Below the normal range: shift into a subnormal with RNE on the
    // discarded bits. Anything under 2^-25 rounds to zero.
    if (abs < 0x33000000u) return sign;
    const std::uint32_t exp = abs >> 23;
    const std::uint32_t mant = (abs & 0x7FFFFFu) | 0x800000u;
    const std::uint32_t shift = 126u - exp; // discarded low bits, 14..24
    const std::uint32_t kept = mant >> shift;
    const std::uint32_t rem = mant & ((1u << shift) - 1u);
    const std::uint32_t half = 1u << (shift - 1u);
    std::uint32_t out = kept;
    if (rem > half || (rem == half && (kept & 1u))) out += 1u;
    // A carry past mantissa bit 10 lands in the exponent field, which is
    // exactly the renormalization a subnormal-to-normal promotion needs.
    return static_cast<std::uint16_t>(sign | out);
  }

  // Normal range: drop 13 mantissa bits with RNE; carry may bump the
  // exponent, which the plain add handles because the fields are adjacent.
  std::uint32_t out = ((abs >> 23) - 112u) << 10 | ((abs >> 13) & 0x3FFu);
  const std::uint32_t rem = abs & 0x1FFFu;
  if (rem > 0x1000u || (rem == 0x1000u && (out & 1u))) out += 1u;
  return static_cast<std::uint16_t>(sign | out);
}

float f16_bits_to_f32(std::uint16_t bits) {
  const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
  const std::uint32_t exp = (bits >> 10) & 0x1Fu;
  const std::uint32_t mant = bits & 0x3FFu;

  if (exp == 0x1Fu) {
    const std::uint32_t out = sign | 0x7F800000u | (mant << 13);
    return std::bit_cast<float>(out);
  }
  if (exp == 0) {
    if (mant == 0) return std::bit_cast<float>(sign);
    // Renormalize a subnormal: exact in f32, no rounding needed.
    std::uint32_t m = mant;
    std::uint32_t e = 113;
    while ((m & 0x400u) == 0) {
      m <<= 1;
      e -= 1;
    }
    m &= 0x3FFu;
    return std::bit_cast<float>(sign | (e << 23) | (m << 13));
  }
  return std::bit_cast<float>(sign | ((exp + 112u) << 23) | (mant << 13));
}

std::uint16_t f32_to_bf16_bits(float value) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  if ((bits & 0x7FFFFFFFu) > 0x7F800000u) {
    // NaN: truncate, but never let the mantissa collapse to zero (that
    // would read as infinity). Matches the f16 payload rule above.
    const std::uint16_t trunc = static_cast<std::uint16_t>(bits >> 16);
    return (trunc & 0x7Fu) != 0 ? trunc : static_cast<std::uint16_t>(trunc | 0x40u);
  }
  const std::uint32_t rounded = bits + 0x7FFFu + ((bits >> 16) & 1u);
  return static_cast<std::uint16_t>(rounded >> 16);
}

float bf16_bits_to_f32(std::uint16_t bits) {
  return std::bit_cast<float>(static_cast<std::uint32_t>(bits) << 16);
}

bool f16_overflows(float value) {
  if (!std::isfinite(value)) return false;
  const std::uint32_t abs = std::bit_cast<std::uint32_t>(value) & 0x7FFFFFFFu;
  return abs >= 0x477FF000u;
}

} // namespace loramix

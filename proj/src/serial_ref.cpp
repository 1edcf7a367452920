#include "loramix/serial_ref.hpp"

#include "loramix/errors.hpp"

namespace loramix::serial {

std::vector<float> delta_gemm(const std::vector<float> & b_mat,
                              const std::vector<float> & a_mat,
                              std::size_t d_out, std::size_t r,
                              std::size_t d_in, float scale) {
  if (b_mat.size() != d_out * r || a_mat.size() != r * d_in)
    fail(errc::shape_mismatch, "delta_gemm operand sizes disagree with dims");
  std::vector<float> out(d_out * d_in);
  for (std::size_t i = 0; i < d_out; ++i) {
    for (std::size_t j = 0; j < d_in; ++j) {
      float acc = 0.0f;
      for (std::size_t k = 0; k < r; ++k)
        acc += b_mat[i * r + k] * a_mat[k * d_in + j];
      out[i * d_in + j] = scale * acc;
    }
  }
  return out;
}

void axpy(std::vector<float> & y, const std::vector<float> & x, float w) {
  if (y.size() != x.size())
    fail(errc::shape_mismatch, "axpy length mismatch");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += w * x[i];
}

double dot(const std::vector<float> & a, const std::vector<float> & b) {
  if (a.size() != b.size())
    fail(errc::shape_mismatch, "dot length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

std::vector<float> merge_tensor(const std::vector<float> & base,
                                std::size_t d_out, std::size_t d_in,
                                const std::vector<AdapterTerm> & terms) {
  if (base.size() != d_out * d_in)
    fail(errc::shape_mismatch, "merge_tensor base size disagrees with dims");
  std::vector<float> out(base.size());
  for (std::size_t i = 0; i < d_out; ++i) {
    for (std::size_t j = 0; j < d_in; ++j) {
      double acc = static_cast<double>(base[i * d_in + j]);
      for (const AdapterTerm & t : terms) {
        double inner = 0.0;
        for (std::size_t k = 0; k < t.rank; ++k)
          inner += static_cast<double>(t.lora_b[i * t.rank + k]) *
                   static_cast<double>(t.lora_a[k * d_in + j]);
        acc += static_cast<double>(t.weight) *
               (static_cast<double>(t.alpha) / static_cast<double>(t.rank)) *
               inner;
      }
      out[i * d_in + j] = static_cast<float>(acc);
    }
  }
  return out;
}

} // namespace loramix::serial

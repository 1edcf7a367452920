#pragma once

#include <cstdint>
#include <vector>

namespace loramix::serial {

// Plain scalar loops, written independently of loramix::kernels. Tests and
// the benchmark compare the two; the merge oracle below is also what the
// fixtures are built from, so apply_merge is never checked against itself.

std::vector<float> delta_gemm(const std::vector<float> & b_mat,
                              const std::vector<float> & a_mat,
                              std::size_t d_out, std::size_t r,
                              std::size_t d_in, float scale);

void axpy(std::vector<float> & y, const std::vector<float> & x, float w);

double dot(const std::vector<float> & a, const std::vector<float> & b);

struct AdapterTerm {
  // lora_B is d_out x r, lora_A is r x d_in, both row-major f32.
  std::vector<float> lora_a;
  std::vector<float> lora_b;
  std::size_t rank = 0;
  float alpha = 0.0f;
  float weight = 0.0f;
};

// base + sum_i w_i * (alpha_i / r_i) * B_i * A_i, one element at a time.
std::vector<float> merge_tensor(const std::vector<float> & base,
                                std::size_t d_out, std::size_t d_in,
                                const std::vector<AdapterTerm> & terms);

} // namespace loramix::serial

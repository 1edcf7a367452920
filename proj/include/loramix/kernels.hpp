#pragma once

#include <cstdint>
#include <vector>

namespace loramix::kernels {

// OpenMP implementations. Every reduction uses fixed block boundaries with a
// serial combine over block partials, so results do not depend on thread
// count or schedule. loramix::serial mirrors this API with plain scalar
// loops and is the reference the tests compare against.

// out = scale * B * A, with B d_out x r and A r x d_in, both row-major.
std::vector<float> delta_gemm(const std::vector<float> & b_mat,
                              const std::vector<float> & a_mat,
                              std::size_t d_out, std::size_t r,
                              std::size_t d_in, float scale);

// y += w * x
void axpy(std::vector<float> & y, const std::vector<float> & x, float w);

double dot(const std::vector<float> & a, const std::vector<float> & b);

struct ErrStats {
  double max_abs = 0.0;
  double max_rel = 0.0;
  double mean_abs = 0.0;
};

// Relative error uses max(|expected|, 1e-8) as denominator.
ErrStats err_stats(const std::vector<float> & expected,
                   const std::vector<float> & actual);

} // namespace loramix::kernels

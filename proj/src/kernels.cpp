#include "loramix/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "loramix/errors.hpp"

namespace loramix::kernels {

namespace {

constexpr std::size_t k_block = 4096;

// Serial sum over fixed-size blocks, then a serial combine. The block
// partials are what the threads produce; the combine order is always the
// same, so the result is schedule-independent.
template <class Fn>
double blocked_sum(std::size_t n, Fn && term) {
  const std::size_t blocks = (n + k_block - 1) / k_block;
  std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < static_cast<std::int64_t>(blocks); ++b) {
    const std::size_t begin = static_cast<std::size_t>(b) * k_block;
    const std::size_t end = std::min(begin + k_block, n);
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += term(i);
    partial[static_cast<std::size_t>(b)] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

} // namespace

std::vector<float> delta_gemm(const std::vector<float> & b_mat,
                              const std::vector<float> & a_mat,
                              std::size_t d_out, std::size_t r,
                              std::size_t d_in, float scale) {
  if (b_mat.size() != d_out * r || a_mat.size() != r * d_in)
    fail(errc::shape_mismatch, "delta_gemm operand sizes disagree with dims");
  std::vector<float> out(d_out * d_in);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(d_out); ++i) {
    for (std::size_t j = 0; j < d_in; ++j) {
      float acc = 0.0f;
      for (std::size_t k = 0; k < r; ++k)
        acc += b_mat[static_cast<std::size_t>(i) * r + k] * a_mat[k * d_in + j];
      out[static_cast<std::size_t>(i) * d_in + j] = scale * acc;
    }
  }
  return out;
}

void axpy(std::vector<float> & y, const std::vector<float> & x, float w) {
  if (y.size() != x.size())
    fail(errc::shape_mismatch, "axpy length mismatch");
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(y.size()); ++i)
    y[static_cast<std::size_t>(i)] += w * x[static_cast<std::size_t>(i)];
}

double dot(const std::vector<float> & a, const std::vector<float> & b) {
  if (a.size() != b.size())
    fail(errc::shape_mismatch, "dot length mismatch");
  return blocked_sum(a.size(), [&](std::size_t i) {
    return static_cast<double>(a[i]) * static_cast<double>(b[i]);
  });
}

ErrStats err_stats(const std::vector<float> & expected,
                   const std::vector<float> & actual) {
  if (expected.size() != actual.size())
    fail(errc::shape_mismatch, "err_stats length mismatch");
  const std::size_t n = expected.size();
  ErrStats stats;
  if (n == 0) return stats;

  double max_abs = 0.0;
  double max_rel = 0.0;
  // max is order-insensitive, so a plain OpenMP reduction stays exact.
#pragma omp parallel for schedule(static) reduction(max : max_abs, max_rel)
  for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(n); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    const double abs_err =
        std::abs(static_cast<double>(actual[i]) - static_cast<double>(expected[i]));
    const double denom = std::max(std::abs(static_cast<double>(expected[i])), 1e-8);
    max_abs = std::max(max_abs, abs_err);
    max_rel = std::max(max_rel, abs_err / denom);
  }
  stats.max_abs = max_abs;
  stats.max_rel = max_rel;
  stats.mean_abs = blocked_sum(n, [&](std::size_t i) {
    return std::abs(static_cast<double>(actual[i]) -
                    static_cast<double>(expected[i]));
  }) / static_cast<double>(n);
  return stats;
}

} // namespace loramix::kernels

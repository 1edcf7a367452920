// Times the OpenMP kernels against the serial reference on merge-shaped
// workloads and cross-checks that both produce the same numbers.

#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include <omp.h>

#include "loramix/kernels.hpp"
#include "loramix/serial_ref.hpp"

namespace {

std::vector<float> random_vec(std::mt19937 & rng, std::size_t n) {
  std::uniform_real_distribution<float> dist(-0.5f, 0.5f);
  std::vector<float> out(n);
  for (float & v : out) v = dist(rng);
  return out;
}

double time_of(int reps, void (*op)(int)) {
  op(0); // warm up
  const double t0 = omp_get_wtime();
  for (int i = 0; i < reps; ++i) op(i);
  return (omp_get_wtime() - t0) / reps * 1e3;
}

std::mt19937 g_rng(12345);
std::vector<float> g_b, g_a, g_x, g_y, g_out_omp, g_out_serial;
constexpr std::size_t k_dim = 1024;
constexpr std::size_t k_rank = 8;

void gemm_omp(int) {
  g_out_omp = loramix::kernels::delta_gemm(g_b, g_a, k_dim, k_rank, k_dim, 2.0f);
}
void gemm_serial(int) {
  g_out_serial = loramix::serial::delta_gemm(g_b, g_a, k_dim, k_rank, k_dim, 2.0f);
}
void axpy_omp(int) { loramix::kernels::axpy(g_y, g_x, 0.3f); }
void axpy_serial(int) { loramix::serial::axpy(g_y, g_x, 0.3f); }

double g_dot_omp, g_dot_serial;
void dot_omp(int) { g_dot_omp = loramix::kernels::dot(g_x, g_x); }
void dot_serial(int) { g_dot_serial = loramix::serial::dot(g_x, g_x); }

} // namespace

int main() {
  g_b = random_vec(g_rng, k_dim * k_rank);
  g_a = random_vec(g_rng, k_rank * k_dim);
  g_x = random_vec(g_rng, k_dim * k_dim);
  g_y = random_vec(g_rng, k_dim * k_dim);

  std::printf("threads: %d, matrix %zux%zu, rank %zu\n", omp_get_max_threads(),
              k_dim, k_dim, k_rank);
  std::printf("%-12s %12s %12s %8s\n", "kernel", "omp ms", "serial ms", "speedup");

  const double gemm_par = time_of(5, gemm_omp);
  const double gemm_ser = time_of(5, gemm_serial);
  std::printf("%-12s %12.3f %12.3f %7.2fx\n", "delta_gemm", gemm_par, gemm_ser,
              gemm_ser / gemm_par);

  double max_diff = 0.0;
  for (std::size_t i = 0; i < g_out_omp.size(); ++i)
    max_diff = std::max(max_diff,
                        std::abs(static_cast<double>(g_out_omp[i]) -
                                 static_cast<double>(g_out_serial[i])));
  std::printf("  gemm max |omp - serial| = %.3g\n", max_diff);

  const double axpy_par = time_of(20, axpy_omp);
  const double axpy_ser = time_of(20, axpy_serial);
  std::printf("%-12s %12.3f %12.3f %7.2fx\n", "axpy", axpy_par, axpy_ser,
              axpy_ser / axpy_par);

  const double dot_par = time_of(20, dot_omp);
  const double dot_ser = time_of(20, dot_serial);
  std::printf("%-12s %12.3f %12.3f %7.2fx\n", "dot", dot_par, dot_ser,
              dot_ser / dot_par);
  std::printf("  dot |omp - serial| = %.3g (relative %.3g)\n",
              std::abs(g_dot_omp - g_dot_serial),
              std::abs(g_dot_omp - g_dot_serial) / std::abs(g_dot_serial));

  const bool ok = max_diff == 0.0 &&
                  std::abs(g_dot_omp - g_dot_serial) <
                      1e-9 * std::abs(g_dot_serial) + 1e-12;
  std::printf("cross-check: %s\n", ok ? "ok" : "MISMATCH");
  return ok ? 0 : 1;
}

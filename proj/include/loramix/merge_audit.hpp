#pragma once

#include <map>
#include <string>
#include <vector>

#include "loramix/kernels.hpp"
#include "loramix/lora.hpp"
#include "loramix/tensor.hpp"

namespace loramix {

// Defaults for f32 candidates; bf16 exports get the looser relative bound
// (half-ULP of an 8-bit mantissa, with margin).
inline constexpr double k_tol_abs_default = 1e-5;
inline constexpr double k_tol_rel_default = 1e-4;
inline constexpr double k_tol_rel_bf16 = 1.0 / 128.0;

enum class verdict { pass, fail };

struct VerifyReport {
  std::map<std::string, kernels::ErrStats> per_tensor;
  double tolerance_abs = k_tol_abs_default;
  double tolerance_rel = k_tol_rel_default;
  verdict result = verdict::pass;
  std::vector<std::string> failing_tensors;
};

// Compares candidate against base + sum_i w_i * delta_i recomputed in f32.
// A tensor passes when max_abs <= tol_abs or max_rel <= tol_rel.
VerifyReport verify_merge(const TensorStore & base, const MergeSpec & spec,
                          const TensorStore & candidate,
                          double tol_abs = k_tol_abs_default,
                          double tol_rel = k_tol_rel_default);

struct AttributionReport {
  std::map<std::string, double> inferred_weights;
  double residual_rms = 0.0;
  std::map<std::string, std::vector<double>> per_tensor_weights;
  bool degenerate = false; // deltas nearly dependent; pseudo-inverse used
  std::string best_hypothesis;
  std::map<std::string, double> hypothesis_residuals;
};

// Least squares min_w |vec(candidate - base) - sum_i w_i vec(delta_i)| via
// the k x k normal equations over all targeted tensors jointly, plus a
// per-tensor solve for localizing a partially corrupted export.
AttributionReport infer_mix_weights(const TensorStore & base,
                                    const std::vector<LoraAdapter> & adapters,
                                    const TensorStore & candidate,
                                    const std::string & target_suffix = ".weight");

struct Hypothesis {
  std::string label;
  std::map<std::string, double> weights; // adapter name -> weight
};

// Residual RMS of the candidate against each hypothesis's expected weights;
// best = argmin, ties broken by fewest nonzero weights then label.
AttributionReport classify_checkpoint(const TensorStore & base,
                                      const std::vector<LoraAdapter> & adapters,
                                      const TensorStore & candidate,
                                      const std::vector<Hypothesis> & hypotheses,
                                      const std::string & target_suffix = ".weight");

// base-only, each adapter alone at weight 1, plus the declared spec.
std::vector<Hypothesis> default_hypotheses(const std::vector<LoraAdapter> & adapters,
                                           const MergeSpec * declared = nullptr);

std::string verify_report_json(const VerifyReport & report);
std::string attribution_report_json(const AttributionReport & report);

} // namespace loramix

#include "loramix/merge_audit.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "loramix/errors.hpp"

namespace loramix {

namespace {

using json = nlohmann::json;

// Dense symmetric k x k helpers; k is the adapter count (2..4 in practice),
// so simple O(k^3) routines are plenty.

std::vector<double> gauss_solve(std::vector<double> m, std::vector<double> rhs,
                                std::size_t k) {
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < k; ++row)
      if (std::abs(m[row * k + col]) > std::abs(m[pivot * k + col])) pivot = row;
    if (pivot != col) {
      for (std::size_t j = 0; j < k; ++j)
        std::swap(m[col * k + j], m[pivot * k + j]);
      std::swap(rhs[col], rhs[pivot]);
    }
    const double p = m[col * k + col];
    for (std::size_t row = col + 1; row < k; ++row) {
      const double f = m[row * k + col] / p;
      for (std::size_t j = col; j < k; ++j) m[row * k + j] -= f * m[col * k + j];
      rhs[row] -= f * rhs[col];
    }
  }
  std::vector<double> x(k, 0.0);
  for (std::size_t i = k; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t j = i + 1; j < k; ++j) s -= m[i * k + j] * x[j];
    x[i] = s / m[i * k + i];
  }
  return x;
}

// Cyclic Jacobi on a symmetric matrix; returns eigenvalues and accumulates
// the rotations so the pseudo-inverse can be assembled.
void jacobi_eigen(std::vector<double> a, std::size_t k,
                  std::vector<double> & eigvals, std::vector<double> & vecs) {
  vecs.assign(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) vecs[i * k + i] = 1.0;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t q = p + 1; q < k; ++q) off += std::abs(a[p * k + q]);
    if (off < 1e-15) break;
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        const double apq = a[p * k + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * k + q] - a[p * k + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < k; ++i) {
          const double aip = a[i * k + p];
          const double aiq = a[i * k + q];
          a[i * k + p] = c * aip - s * aiq;
          a[i * k + q] = s * aip + c * aiq;
        }
        for (std::size_t j = 0; j < k; ++j) {
          const double apj = a[p * k + j];
          const double aqj = a[q * k + j];
          a[p * k + j] = c * apj - s * aqj;
          a[q * k + j] = s * apj + c * aqj;
        }
        for (std::size_t i = 0; i < k; ++i) {
          const double vip = vecs[i * k + p];
          const double viq = vecs[i * k + q];
          vecs[i * k + p] = c * vip - s * viq;
          vecs[i * k + q] = s * vip + c * viq;
        }
      }
    }
  }
  eigvals.resize(k);
  for (std::size_t i = 0; i < k; ++i) eigvals[i] = a[i * k + i];
}

// Solves the normal equations on the scale-normalized Gram. Sets degenerate
// when the condition estimate blows past 1e8 and falls back to the
// eigendecomposition pseudo-inverse in that case.
std::vector<double> solve_normal_eq(const std::vector<double> & gram,
                                    const std::vector<double> & rhs,
                                    std::size_t k, bool & degenerate) {
  std::vector<double> scale(k, 1.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double d = gram[i * k + i];
    scale[i] = d > 0.0 ? std::sqrt(d) : 0.0;
  }
  std::vector<double> norm_gram(k * k, 0.0);
  std::vector<double> norm_rhs(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double denom = scale[i] * scale[j];
      norm_gram[i * k + j] = denom > 0.0 ? gram[i * k + j] / denom : (i == j);
    }
    norm_rhs[i] = scale[i] > 0.0 ? rhs[i] / scale[i] : 0.0;
  }

  std::vector<double> eigvals, vecs;
  jacobi_eigen(norm_gram, k, eigvals, vecs);
  const double lmax = *std::max_element(eigvals.begin(), eigvals.end());
  const double lmin = *std::min_element(eigvals.begin(), eigvals.end());
  const bool singular = lmin <= 0.0 || lmax / lmin > 1e8 ||
                        *std::min_element(scale.begin(), scale.end()) == 0.0;

  std::vector<double> y;
  if (!singular) {
    y = gauss_solve(norm_gram, norm_rhs, k);
  } else {
    degenerate = true;
    // Pseudo-inverse: drop eigendirections below lmax * 1e-12.
    y.assign(k, 0.0);
    const double cutoff = std::max(lmax, 0.0) * 1e-12;
    for (std::size_t e = 0; e < k; ++e) {
      if (eigvals[e] <= cutoff) continue;
      double proj = 0.0;
      for (std::size_t i = 0; i < k; ++i) proj += vecs[i * k + e] * norm_rhs[i];
      proj /= eigvals[e];
      for (std::size_t i = 0; i < k; ++i) y[i] += vecs[i * k + e] * proj;
    }
  }
  for (std::size_t i = 0; i < k; ++i) y[i] = scale[i] > 0.0 ? y[i] / scale[i] : 0.0;
  return y;
}

struct TargetDeltas {
  // tensor name -> per-adapter delta (empty vector when untargeted)
  std::map<std::string, std::vector<std::vector<float>>> deltas;
  std::vector<std::string> adapter_names;
};

TargetDeltas collect_deltas(const TensorStore & base,
                            const std::vector<LoraAdapter> & adapters,
                            const std::string & suffix) {
  TargetDeltas out;
  for (const LoraAdapter & a : adapters) {
    validate_adapter(a);
    if (std::find(out.adapter_names.begin(), out.adapter_names.end(), a.name) !=
        out.adapter_names.end())
      fail(errc::bad_config, "duplicate adapter name '" + a.name + "'");
    out.adapter_names.push_back(a.name);
  }
  const std::size_t k = adapters.size();
  for (std::size_t i = 0; i < k; ++i) {
    for (const auto & [module, m] : adapters[i].modules) {
      const std::string tensor_name = module + suffix;
      const auto bt = base.tensors.find(tensor_name);
      if (bt == base.tensors.end())
        fail(errc::missing_base_tensor,
             "adapter '" + adapters[i].name + "' targets missing base tensor '" +
                 tensor_name + "'");
      const Tensor & t = bt->second;
      if (t.shape.size() != 2 || t.shape[0] != m.d_out || t.shape[1] != m.d_in)
        fail(errc::shape_mismatch,
             "base tensor '" + tensor_name + "' shape does not match adapter '" +
                 adapters[i].name + "'");
      auto & slot = out.deltas[tensor_name];
      slot.resize(k);
      slot[i] = compute_delta(adapters[i], module).values;
    }
  }
  for (auto & [name, slot] : out.deltas) slot.resize(k);
  return out;
}

void require_same_layout(const TensorStore & base, const TensorStore & candidate) {
  for (const auto & [name, t] : base.tensors) {
    const auto it = candidate.tensors.find(name);
    if (it == candidate.tensors.end())
      fail(errc::name_set_mismatch, "candidate lacks tensor '" + name + "'");
    if (it->second.shape != t.shape)
      fail(errc::shape_mismatch, "tensor '" + name + "' changed shape");
  }
  for (const auto & [name, t] : candidate.tensors)
    if (!base.tensors.count(name))
      fail(errc::name_set_mismatch, "candidate adds tensor '" + name + "'");
}

std::vector<float> diff_f32(const Tensor & candidate, const Tensor & base) {
  std::vector<float> c = candidate.to_f32();
  const std::vector<float> b = base.to_f32();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
  return c;
}

double residual_sq_sum(const std::vector<float> & diff,
                       const std::vector<std::vector<float>> & deltas,
                       const std::vector<double> & weights) {
  double sum = 0.0;
  for (std::size_t e = 0; e < diff.size(); ++e) {
    double r = diff[e];
    for (std::size_t i = 0; i < deltas.size(); ++i)
      if (!deltas[i].empty()) r -= weights[i] * deltas[i][e];
    sum += r * r;
  }
  return sum;
}

} // namespace

VerifyReport verify_merge(const TensorStore & base, const MergeSpec & spec,
                          const TensorStore & candidate, double tol_abs,
                          double tol_rel) {
  if (spec.entries.empty()) fail(errc::empty_spec, "merge spec has no entries");
  require_same_layout(base, candidate);

  std::vector<LoraAdapter> adapters;
  std::vector<double> weights;
  for (const MergeEntry & e : spec.entries) {
    adapters.push_back(e.adapter);
    weights.push_back(e.weight);
  }
  // Sort by name to match apply_merge's accumulation order.
  std::vector<std::size_t> idx(adapters.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return adapters[a].name < adapters[b].name;
  });

  VerifyReport report;
  report.tolerance_abs = tol_abs;
  report.tolerance_rel = tol_rel;

  // Expected values per tensor, f32 accumulation like the merge itself.
  std::map<std::string, std::vector<float>> expected;
  for (const auto & [name, t] : base.tensors) expected[name] = t.to_f32();
  for (std::size_t i : idx) {
    for (const auto & [module, m] : adapters[i].modules) {
      const std::string tensor_name = module + spec.target_suffix;
      const auto bt = base.tensors.find(tensor_name);
      if (bt == base.tensors.end())
        fail(errc::missing_base_tensor,
             "adapter '" + adapters[i].name + "' targets missing base tensor '" +
                 tensor_name + "'");
      const Tensor & t = bt->second;
      if (t.shape.size() != 2 || t.shape[0] != m.d_out || t.shape[1] != m.d_in)
        fail(errc::shape_mismatch,
             "base tensor '" + tensor_name + "' shape does not match adapter '" +
                 adapters[i].name + "'");
      const Delta d = compute_delta(adapters[i], module);
      kernels::axpy(expected[tensor_name], d.values,
                    static_cast<float>(weights[i]));
    }
  }

  for (const auto & [name, exp_values] : expected) {
    const std::vector<float> got = candidate.tensors.at(name).to_f32();
    const kernels::ErrStats stats = kernels::err_stats(exp_values, got);
    report.per_tensor[name] = stats;
    if (!(stats.max_abs <= tol_abs || stats.max_rel <= tol_rel))
      report.failing_tensors.push_back(name);
  }
  report.result =
      report.failing_tensors.empty() ? verdict::pass : verdict::fail;
  return report;
}

AttributionReport infer_mix_weights(const TensorStore & base,
                                    const std::vector<LoraAdapter> & adapters,
                                    const TensorStore & candidate,
                                    const std::string & target_suffix) {
  if (adapters.empty()) fail(errc::bad_config, "need at least one adapter");
  require_same_layout(base, candidate);
  const TargetDeltas td = collect_deltas(base, adapters, target_suffix);
  const std::size_t k = adapters.size();

  AttributionReport report;

  std::map<std::string, std::vector<float>> diffs;
  for (const auto & [name, slot] : td.deltas)
    diffs[name] = diff_f32(candidate.tensors.at(name), base.tensors.at(name));

  // Joint normal equations accumulated across every targeted tensor.
  std::vector<double> gram(k * k, 0.0);
  std::vector<double> rhs(k, 0.0);
  std::uint64_t total_elems = 0;
  for (const auto & [name, slot] : td.deltas) {
    const std::vector<float> & diff = diffs[name];
    total_elems += diff.size();
    for (std::size_t i = 0; i < k; ++i) {
      if (slot[i].empty()) continue;
      rhs[i] += kernels::dot(slot[i], diff);
      for (std::size_t j = i; j < k; ++j) {
        if (slot[j].empty()) continue;
        const double g = kernels::dot(slot[i], slot[j]);
        gram[i * k + j] += g;
        if (j != i) gram[j * k + i] += g;
      }
    }
  }

  const std::vector<double> w = solve_normal_eq(gram, rhs, k, report.degenerate);
  for (std::size_t i = 0; i < k; ++i)
    report.inferred_weights[td.adapter_names[i]] = w[i];

  double rss = 0.0;
  for (const auto & [name, slot] : td.deltas)
    rss += residual_sq_sum(diffs[name], slot, w);
  report.residual_rms =
      total_elems > 0 ? std::sqrt(rss / static_cast<double>(total_elems)) : 0.0;

  // Per-tensor solves localize a single wrong-run tensor.
  for (const auto & [name, slot] : td.deltas) {
    std::vector<double> tg(k * k, 0.0), tr(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      if (slot[i].empty()) continue;
      tr[i] = kernels::dot(slot[i], diffs[name]);
      for (std::size_t j = i; j < k; ++j) {
        if (slot[j].empty()) continue;
        tg[i * k + j] = kernels::dot(slot[i], slot[j]);
        tg[j * k + i] = tg[i * k + j];
      }
    }
    bool tensor_degenerate = false;
    report.per_tensor_weights[name] = solve_normal_eq(tg, tr, k, tensor_degenerate);
  }
  return report;
}

AttributionReport classify_checkpoint(const TensorStore & base,
                                      const std::vector<LoraAdapter> & adapters,
                                      const TensorStore & candidate,
                                      const std::vector<Hypothesis> & hypotheses,
                                      const std::string & target_suffix) {
  if (hypotheses.empty()) fail(errc::bad_config, "hypothesis list is empty");
  AttributionReport report =
      infer_mix_weights(base, adapters, candidate, target_suffix);
  const TargetDeltas td = collect_deltas(base, adapters, target_suffix);
  const std::size_t k = adapters.size();

  std::uint64_t total_elems = 0;
  std::map<std::string, std::vector<float>> diffs;
  for (const auto & [name, slot] : td.deltas) {
    diffs[name] = diff_f32(candidate.tensors.at(name), base.tensors.at(name));
    total_elems += diffs[name].size();
  }

  const Hypothesis * best = nullptr;
  double best_rms = 0.0;
  std::size_t best_nonzero = 0;
  for (const Hypothesis & h : hypotheses) {
    std::vector<double> w(k, 0.0);
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const auto it = h.weights.find(td.adapter_names[i]);
      w[i] = it == h.weights.end() ? 0.0 : it->second;
      if (w[i] != 0.0) ++nonzero;
    }
    double rss = 0.0;
    for (const auto & [name, slot] : td.deltas)
      rss += residual_sq_sum(diffs[name], slot, w);
    const double rms =
        total_elems > 0 ? std::sqrt(rss / static_cast<double>(total_elems)) : 0.0;
    report.hypothesis_residuals[h.label] = rms;
    const bool wins =
        best == nullptr || rms < best_rms ||
        (rms == best_rms && (nonzero < best_nonzero ||
                             (nonzero == best_nonzero && h.label < best->label)));
    if (wins) {
      best = &h;
      best_rms = rms;
      best_nonzero = nonzero;
    }
  }
  report.best_hypothesis = best->label;
  return report;
}

std::vector<Hypothesis> default_hypotheses(const std::vector<LoraAdapter> & adapters,
                                           const MergeSpec * declared) {
  std::vector<Hypothesis> out;
  out.push_back({"base", {}});
  for (const LoraAdapter & a : adapters)
    out.push_back({a.name + "-only", {{a.name, 1.0}}});
  if (declared != nullptr) {
    Hypothesis h;
    h.label = declared->label.empty() ? "declared" : declared->label;
    for (const MergeEntry & e : declared->entries)
      h.weights[e.adapter.name] = e.weight;
    out.push_back(std::move(h));
  }
  return out;
}

std::string verify_report_json(const VerifyReport & report) {
  json per_tensor = json::object();
  for (const auto & [name, s] : report.per_tensor)
    per_tensor[name] = {{"max_abs_err", s.max_abs},
                        {"max_rel_err", s.max_rel},
                        {"mean_abs_err", s.mean_abs}};
  json doc;
  doc["failing_tensors"] = report.failing_tensors;
  doc["per_tensor"] = std::move(per_tensor);
  doc["tolerance_abs"] = report.tolerance_abs;
  doc["tolerance_rel"] = report.tolerance_rel;
  doc["verdict"] = report.result == verdict::pass ? "Pass" : "Fail";
  return doc.dump(2);
}

std::string attribution_report_json(const AttributionReport & report) {
  json doc;
  doc["best_hypothesis"] = report.best_hypothesis;
  doc["degenerate"] = report.degenerate;
  doc["hypothesis_residuals"] = report.hypothesis_residuals;
  doc["inferred_weights"] = report.inferred_weights;
  doc["per_tensor_weights"] = report.per_tensor_weights;
  doc["residual_rms"] = report.residual_rms;
  return doc.dump(2);
}

} // namespace loramix

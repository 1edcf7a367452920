#pragma once

// Shared builders for randomized stores, adapters and oracle-made merges.
// The merged candidates come from serial::merge_tensor, never from
// apply_merge, so merge tests have an independent expected value.

#include <random>
#include <string>
#include <vector>

#include "loramix/lora.hpp"
#include "loramix/serial_ref.hpp"
#include "loramix/tensor.hpp"

namespace fixtures {

inline std::vector<float> random_values(std::mt19937 & rng, std::size_t n,
                                        float lo = -0.5f, float hi = 0.5f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> out(n);
  for (float & v : out) v = dist(rng);
  return out;
}

inline loramix::Tensor random_raw_tensor(std::mt19937 & rng) {
  loramix::Tensor t;
  switch (rng() % 3) {
    case 0: t.dt = loramix::dtype::f32; break;
    case 1: t.dt = loramix::dtype::f16; break;
    default: t.dt = loramix::dtype::bf16; break;
  }
  const std::size_t dims = rng() % 3; // 0 dims = scalar
  for (std::size_t i = 0; i < dims; ++i) t.shape.push_back(rng() % 6);
  t.data.resize(t.numel() * loramix::dtype_size(t.dt));
  for (std::uint8_t & b : t.data) b = static_cast<std::uint8_t>(rng());
  return t;
}

inline loramix::TensorStore random_store(std::mt19937 & rng) {
  loramix::TensorStore store;
  const std::size_t count = 1 + rng() % 6;
  for (std::size_t i = 0; i < count; ++i)
    store.tensors["tensor." + std::to_string(rng() % 1000) + "." +
                  std::to_string(i)] = random_raw_tensor(rng);
  if (rng() % 2) store.metadata["note"] = "fixture " + std::to_string(rng() % 100);
  return store;
}

// Square-ish f32 base with the usual projection naming, plus untargeted
// extras ("embed.weight", "norm.bias").
inline loramix::TensorStore
make_base(std::mt19937 & rng,
          const std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> &
              modules) {
  loramix::TensorStore base;
  for (const auto & [module, dims] : modules) {
    const auto [d_out, d_in] = dims;
    base.tensors[module + ".weight"] = loramix::Tensor::from_f32(
        {d_out, d_in}, random_values(rng, d_out * d_in));
  }
  base.tensors["embed.weight"] =
      loramix::Tensor::from_f32({4, 3}, random_values(rng, 12));
  base.tensors["norm.bias"] =
      loramix::Tensor::from_f32({5}, random_values(rng, 5));
  return base;
}

inline loramix::LoraAdapter
make_adapter(std::mt19937 & rng, const std::string & name, std::uint32_t rank,
             float alpha,
             const std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> &
                 modules) {
  loramix::LoraAdapter adapter;
  adapter.name = name;
  adapter.rank = rank;
  adapter.alpha = alpha;
  for (const auto & [module, dims] : modules) {
    const auto [d_out, d_in] = dims;
    loramix::LoraModule m;
    m.d_out = d_out;
    m.d_in = d_in;
    m.lora_a = random_values(rng, rank * d_in);
    m.lora_b = random_values(rng, d_out * rank);
    adapter.modules[module] = std::move(m);
  }
  return adapter;
}

// Expected merge built entirely from the scalar reference.
inline loramix::TensorStore
oracle_merge(const loramix::TensorStore & base,
             const std::vector<std::pair<loramix::LoraAdapter, double>> & entries,
             const std::string & suffix = ".weight") {
  loramix::TensorStore out;
  out.metadata = base.metadata;
  for (const auto & [name, t] : base.tensors) {
    std::vector<loramix::serial::AdapterTerm> terms;
    for (const auto & [adapter, weight] : entries) {
      for (const auto & [module, m] : adapter.modules) {
        if (module + suffix != name) continue;
        loramix::serial::AdapterTerm term;
        term.lora_a = m.lora_a;
        term.lora_b = m.lora_b;
        term.rank = adapter.rank;
        term.alpha = adapter.alpha;
        term.weight = static_cast<float>(weight);
        terms.push_back(std::move(term));
      }
    }
    if (terms.empty()) {
      out.tensors[name] = t;
      continue;
    }
    const std::vector<float> merged = loramix::serial::merge_tensor(
        t.to_f32(), t.shape[0], t.shape[1], terms);
    out.tensors[name] = loramix::Tensor::from_f32(t.shape, merged);
  }
  return out;
}

} // namespace fixtures

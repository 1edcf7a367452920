#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "loramix/tensor.hpp"

namespace loramix {

struct LoraModule {
  std::vector<float> lora_a; // r x d_in, row-major
  std::vector<float> lora_b; // d_out x r, row-major
  std::size_t d_in = 0;
  std::size_t d_out = 0;
};

struct LoraAdapter {
  std::string name;
  std::uint32_t rank = 0;
  float alpha = 0.0f;
  std::map<std::string, LoraModule> modules;
};

void validate_adapter(const LoraAdapter & adapter);

struct MergeEntry {
  LoraAdapter adapter;
  double weight = 0.0;
};

struct MergeSpec {
  std::vector<MergeEntry> entries;
  dtype output_dtype = dtype::f32;
  std::string label;
  // Adapter module key "m" targets base tensor "m" + target_suffix.
  std::string target_suffix = ".weight";
};

struct Delta {
  std::vector<float> values; // d_out x d_in
  std::size_t d_out = 0;
  std::size_t d_in = 0;
};

// (alpha / r) * B * A for one module, accumulated in f32.
Delta compute_delta(const LoraAdapter & adapter, const std::string & module);

struct MergeResult {
  TensorStore store;
  std::vector<std::string> warnings;
  std::uint64_t saturated_casts = 0;
};

// W' = W + sum_i w_i * delta_i per targeted tensor, f32 accumulation in
// sorted-adapter-name order, single cast to output_dtype at the end.
// Untargeted tensors pass through bytewise; provenance lands in metadata.
MergeResult apply_merge(const TensorStore & base, const MergeSpec & spec);

// Canonical store form of an adapter ("{module}.lora_A"/"{module}.lora_B"
// plus config metadata); basis for adapter fingerprints.
TensorStore adapter_to_store(const LoraAdapter & adapter);

// Reads the tensor file and its JSON sidecar ("pt.safetensors" -> "pt.json").
// Missing sidecar falls back to r = lora_A row count, alpha 16, name = stem.
LoraAdapter load_adapter(const std::filesystem::path & path);

// {"entries": [{"adapter": path, "weight": w}, ...], "output_dtype": "F32",
//  "label": "...", "target_suffix": ".weight"}; adapter paths resolve
// relative to the spec file's directory.
MergeSpec load_merge_spec(const std::filesystem::path & path);

} // namespace loramix

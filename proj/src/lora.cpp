#include "loramix/lora.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "loramix/errors.hpp"
#include "loramix/fingerprint.hpp"
#include "loramix/kernels.hpp"
#include "loramix/tensor_store.hpp"
#include "loramix/version.hpp"

namespace loramix {

namespace {

using json = nlohmann::json;

json load_json_file(const std::filesystem::path & path, errc parse_code) {
  std::ifstream in(path);
  if (!in) fail(errc::io_failure, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception & e) {
    fail(parse_code, "'" + path.string() + "': " + e.what());
  }
}

} // namespace

void validate_adapter(const LoraAdapter & adapter) {
  if (adapter.rank < 1)
    fail(errc::bad_config, "adapter '" + adapter.name + "' has rank 0");
  if (!(adapter.alpha > 0.0f))
    fail(errc::bad_config, "adapter '" + adapter.name + "' has alpha <= 0");
  for (const auto & [module, m] : adapter.modules) {
    if (m.d_in == 0 || m.d_out == 0)
      fail(errc::invalid_tensor,
           "module '" + module + "' of adapter '" + adapter.name +
               "' has a zero dimension");
    if (m.lora_a.size() != static_cast<std::size_t>(adapter.rank) * m.d_in)
      fail(errc::shape_mismatch,
           "lora_A of module '" + module + "' is not rank x d_in");
    if (m.lora_b.size() != m.d_out * static_cast<std::size_t>(adapter.rank))
      fail(errc::shape_mismatch,
           "lora_B of module '" + module + "' is not d_out x rank");
  }
}

Delta compute_delta(const LoraAdapter & adapter, const std::string & module) {
  const auto it = adapter.modules.find(module);
  if (it == adapter.modules.end())
    fail(errc::unknown_module,
         "adapter '" + adapter.name + "' has no module '" + module + "'");
  const LoraModule & m = it->second;
  const std::size_t r = adapter.rank;
  if (m.lora_a.size() != r * m.d_in || m.lora_b.size() != m.d_out * r)
    fail(errc::shape_mismatch,
         "A/B inner dimensions of module '" + module + "' disagree with rank");
  Delta d;
  d.d_out = m.d_out;
  d.d_in = m.d_in;
  d.values = kernels::delta_gemm(m.lora_b, m.lora_a, m.d_out, r, m.d_in,
                                 adapter.alpha / static_cast<float>(r));
  return d;
}

MergeResult apply_merge(const TensorStore & base, const MergeSpec & spec) {
  if (spec.entries.empty())
    fail(errc::empty_spec, "merge spec has no adapter entries");

  MergeResult result;

  // Fixed accumulation order regardless of how the spec listed adapters.
  std::vector<const MergeEntry *> order;
  for (const MergeEntry & e : spec.entries) {
    validate_adapter(e.adapter);
    if (!std::isfinite(e.weight))
      fail(errc::bad_config,
           "weight for adapter '" + e.adapter.name + "' is not finite");
    if (e.weight < 0.0 || e.weight > 1.0)
      result.warnings.push_back("adapter '" + e.adapter.name + "' weight " +
                                std::to_string(e.weight) +
                                " is outside [0, 1]");
    order.push_back(&e);
  }
  std::sort(order.begin(), order.end(),
            [](const MergeEntry * a, const MergeEntry * b) {
              return a->adapter.name < b->adapter.name;
            });

  // target tensor name -> entries touching it
  std::map<std::string, std::vector<std::pair<const MergeEntry *, std::string>>>
      targets;
  for (const MergeEntry * e : order) {
    for (const auto & [module, m] : e->adapter.modules) {
      const std::string tensor_name = module + spec.target_suffix;
      const auto bt = base.tensors.find(tensor_name);
      if (bt == base.tensors.end())
        fail(errc::missing_base_tensor,
             "adapter '" + e->adapter.name + "' targets missing base tensor '" +
                 tensor_name + "'");
      const Tensor & t = bt->second;
      if (t.shape.size() != 2 || t.shape[0] != m.d_out || t.shape[1] != m.d_in)
        fail(errc::shape_mismatch,
             "base tensor '" + tensor_name + "' shape does not match delta " +
                 std::to_string(m.d_out) + "x" + std::to_string(m.d_in));
      targets[tensor_name].emplace_back(e, module);
    }
  }

  result.store.metadata = base.metadata;
  for (const auto & [name, t] : base.tensors) {
    const auto hit = targets.find(name);
    if (hit == targets.end()) {
      result.store.tensors.emplace(name, t); // untargeted: bytes unchanged
      continue;
    }
    std::vector<float> acc = t.to_f32();
    for (const auto & [entry, module] : hit->second) {
      const Delta d = compute_delta(entry->adapter, module);
      kernels::axpy(acc, d.values, static_cast<float>(entry->weight));
    }
    CastResult cast =
        cast_tensor(Tensor::from_f32(t.shape, acc), spec.output_dtype);
    result.saturated_casts += cast.saturated;
    result.store.tensors.emplace(name, std::move(cast.tensor));
  }

  json adapters = json::array();
  for (const MergeEntry * e : order) {
    json a;
    a["alpha"] = e->adapter.alpha;
    a["fingerprint"] = fingerprint_store(adapter_to_store(e->adapter)).digest;
    a["name"] = e->adapter.name;
    a["rank"] = e->adapter.rank;
    a["weight"] = e->weight;
    adapters.push_back(std::move(a));
  }
  json prov;
  prov["adapters"] = std::move(adapters);
  prov["label"] = spec.label;
  prov["output_dtype"] = dtype_tag(spec.output_dtype);
  prov["tool"] = k_tool_name;
  prov["tool_version"] = k_tool_version;
  result.store.metadata["merge.provenance"] = prov.dump();

  return result;
}

TensorStore adapter_to_store(const LoraAdapter & adapter) {
  validate_adapter(adapter);
  TensorStore store;
  for (const auto & [module, m] : adapter.modules) {
    store.tensors.emplace(
        module + ".lora_A",
        Tensor::from_f32({adapter.rank, m.d_in}, m.lora_a));
    store.tensors.emplace(
        module + ".lora_B",
        Tensor::from_f32({m.d_out, adapter.rank}, m.lora_b));
  }
  store.metadata["lora.alpha"] = json(adapter.alpha).dump();
  store.metadata["lora.name"] = adapter.name;
  store.metadata["lora.r"] = std::to_string(adapter.rank);
  return store;
}

LoraAdapter load_adapter(const std::filesystem::path & path) {
  const TensorStore store = read_store(path);

  LoraAdapter adapter;
  adapter.name = path.stem().string();
  adapter.alpha = 16.0f;
  adapter.rank = 0;

  std::filesystem::path sidecar = path;
  sidecar.replace_extension(".json");
  if (std::filesystem::exists(sidecar)) {
    const json cfg = load_json_file(sidecar, errc::bad_config);
    if (!cfg.is_object())
      fail(errc::bad_config, "'" + sidecar.string() + "' is not a JSON object");
    if (cfg.contains("r")) {
      if (!cfg["r"].is_number_integer() || cfg["r"].get<std::int64_t>() < 1)
        fail(errc::bad_config, "adapter config 'r' must be a positive integer");
      adapter.rank = cfg["r"].get<std::uint32_t>();
    }
    if (cfg.contains("lora_alpha")) {
      if (!cfg["lora_alpha"].is_number())
        fail(errc::bad_config, "adapter config 'lora_alpha' must be a number");
      adapter.alpha = cfg["lora_alpha"].get<float>();
    }
    if (cfg.contains("name")) {
      if (!cfg["name"].is_string())
        fail(errc::bad_config, "adapter config 'name' must be a string");
      adapter.name = cfg["name"].get<std::string>();
    }
  }

  for (const auto & [tensor_name, t] : store.tensors) {
    const bool is_a = tensor_name.ends_with(".lora_A");
    const bool is_b = tensor_name.ends_with(".lora_B");
    if (!is_a && !is_b)
      fail(errc::invalid_tensor,
           "tensor '" + tensor_name + "' is neither .lora_A nor .lora_B");
    if (t.shape.size() != 2)
      fail(errc::shape_mismatch, "tensor '" + tensor_name + "' is not 2-D");
    const std::string module =
        tensor_name.substr(0, tensor_name.size() - 7);
    LoraModule & m = adapter.modules[module];
    if (is_a) {
      m.lora_a = t.to_f32();
      m.d_in = t.shape[1];
      if (adapter.rank == 0)
        adapter.rank = static_cast<std::uint32_t>(t.shape[0]);
      if (t.shape[0] != adapter.rank)
        fail(errc::shape_mismatch,
             "lora_A of '" + module + "' has " + std::to_string(t.shape[0]) +
                 " rows, expected rank " + std::to_string(adapter.rank));
    } else {
      m.lora_b = t.to_f32();
      m.d_out = t.shape[0];
    }
  }

  for (const auto & [module, m] : adapter.modules) {
    if (m.lora_a.empty())
      fail(errc::invalid_tensor, "module '" + module + "' lacks .lora_A");
    if (m.lora_b.empty())
      fail(errc::invalid_tensor, "module '" + module + "' lacks .lora_B");
    if (m.lora_b.size() != m.d_out * adapter.rank)
      fail(errc::shape_mismatch,
           "lora_B of '" + module + "' does not have rank columns");
  }

  validate_adapter(adapter);
  return adapter;
}

MergeSpec load_merge_spec(const std::filesystem::path & path) {
  const json doc = load_json_file(path, errc::bad_config);
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array())
    fail(errc::bad_config,
         "merge spec must be an object with an 'entries' array");

  MergeSpec spec;
  if (doc.contains("output_dtype"))
    spec.output_dtype = parse_dtype(doc["output_dtype"].get<std::string>());
  if (doc.contains("label")) spec.label = doc["label"].get<std::string>();
  if (doc.contains("target_suffix"))
    spec.target_suffix = doc["target_suffix"].get<std::string>();

  const std::filesystem::path dir = path.parent_path();
  for (const auto & e : doc["entries"]) {
    if (!e.is_object() || !e.contains("adapter") || !e.contains("weight") ||
        !e["adapter"].is_string() || !e["weight"].is_number())
      fail(errc::bad_config,
           "each entry needs an 'adapter' path and a numeric 'weight'");
    MergeEntry entry;
    std::filesystem::path ap = e["adapter"].get<std::string>();
    if (ap.is_relative()) ap = dir / ap;
    entry.adapter = load_adapter(ap);
    entry.weight = e["weight"].get<double>();
    spec.entries.push_back(std::move(entry));
  }
  if (spec.entries.empty())
    fail(errc::empty_spec, "merge spec has no adapter entries");
  return spec;
}

} // namespace loramix

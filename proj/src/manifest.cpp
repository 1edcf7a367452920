#include "loramix/manifest.hpp"

#include <cstdlib>
#include <ctime>
#include <fstream>

#include <json.hpp>

#include "loramix/errors.hpp"

namespace loramix {

namespace {

using json = nlohmann::json;

json fingerprint_json(const Fingerprint & fp) {
  json j;
  j["digest"] = fp.digest;
  j["name_count"] = fp.name_count;
  j["total_bytes"] = fp.total_bytes;
  return j;
}

Fingerprint fingerprint_from_json(const json & j) {
  if (!j.is_object() || !j.contains("digest") || !j["digest"].is_string())
    fail(errc::bad_config, "manifest fingerprint entry lacks a digest");
  Fingerprint fp;
  fp.digest = j["digest"].get<std::string>();
  if (j.contains("name_count")) fp.name_count = j["name_count"].get<std::uint64_t>();
  if (j.contains("total_bytes")) fp.total_bytes = j["total_bytes"].get<std::uint64_t>();
  return fp;
}

json identity_json(const RunManifest & m) {
  json adapters = json::object();
  for (const auto & [name, fp] : m.adapter_fps)
    adapters[name] = fingerprint_json(fp);
  json weights = json::object();
  for (const auto & [name, w] : m.merge_weights) weights[name] = w;

  json doc;
  doc["adapter_fps"] = std::move(adapters);
  doc["base_fp"] = fingerprint_json(m.base_fp);
  doc["decoding"] = {{"temperature", m.decoding.temperature},
                     {"top_p", m.decoding.top_p}};
  doc["hash_algorithm"] = m.hash_algorithm;
  doc["merge_weights"] = std::move(weights);
  doc["template_id"] = m.template_id;
  return doc;
}

} // namespace

void validate_manifest(const RunManifest & m) {
  if (m.adapter_fps.size() != m.merge_weights.size())
    fail(errc::bad_config, "manifest weight and fingerprint keys differ");
  for (const auto & [name, fp] : m.adapter_fps)
    if (!m.merge_weights.count(name))
      fail(errc::bad_config, "manifest has no weight for adapter '" + name + "'");
}

std::string manifest_json(const RunManifest & m) {
  validate_manifest(m);
  json doc = identity_json(m);
  doc["created_at"] = m.created_at;
  doc["tool_version"] = m.tool_version;
  return doc.dump(2);
}

RunManifest parse_manifest_json(const std::string & text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception & e) {
    fail(errc::bad_config, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(errc::bad_config, "manifest is not a JSON object");

  RunManifest m;
  if (doc.contains("base_fp")) m.base_fp = fingerprint_from_json(doc["base_fp"]);
  if (doc.contains("adapter_fps"))
    for (const auto & [name, j] : doc["adapter_fps"].items())
      m.adapter_fps[name] = fingerprint_from_json(j);
  if (doc.contains("merge_weights"))
    for (const auto & [name, j] : doc["merge_weights"].items())
      m.merge_weights[name] = j.get<double>();
  if (doc.contains("template_id"))
    m.template_id = doc["template_id"].get<std::string>();
  if (doc.contains("decoding")) {
    const auto & d = doc["decoding"];
    if (d.contains("temperature"))
      m.decoding.temperature = d["temperature"].get<double>();
    if (d.contains("top_p")) m.decoding.top_p = d["top_p"].get<double>();
  }
  if (doc.contains("created_at"))
    m.created_at = doc["created_at"].get<std::string>();
  if (doc.contains("tool_version"))
    m.tool_version = doc["tool_version"].get<std::string>();
  if (doc.contains("hash_algorithm"))
    m.hash_algorithm = doc["hash_algorithm"].get<std::string>();
  validate_manifest(m);
  return m;
}

RunManifest load_manifest(const std::filesystem::path & path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_failure, "cannot open '" + path.string() + "'");
  std::string text{std::istreambuf_iterator<char>(in),
                   std::istreambuf_iterator<char>()};
  return parse_manifest_json(text);
}

void save_manifest(const RunManifest & m, const std::filesystem::path & path) {
  const std::string text = manifest_json(m);
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(errc::io_failure, "cannot open '" + path.string() + "' for writing");
  out << text << '\n';
  if (!out) fail(errc::io_failure, "write failed on '" + path.string() + "'");
}

std::string manifest_identity_digest(const RunManifest & m) {
  const std::string text = identity_json(m).dump();
  return sha256_hex(reinterpret_cast<const std::uint8_t *>(text.data()),
                    text.size());
}

std::string utc_timestamp_now() {
  std::time_t now = std::time(nullptr);
  if (const char * epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char * end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end != epoch && *end == '\0') now = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

} // namespace loramix

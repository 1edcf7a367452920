#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "loramix/fingerprint.hpp"

namespace loramix {

inline constexpr const char * k_manifest_filename = "merge_manifest.json";

struct DecodingPreset {
  double temperature = 0.6;
  double top_p = 0.8;
};

// Written beside every export so later runs can tell whether the directory
// already holds artifacts from a different configuration.
struct RunManifest {
  Fingerprint base_fp;
  std::map<std::string, Fingerprint> adapter_fps;
  std::map<std::string, double> merge_weights; // keys match adapter_fps
  std::string template_id;
  DecodingPreset decoding;
  std::string created_at; // ISO-8601 UTC
  std::string tool_version;
  std::string hash_algorithm = k_hash_algorithm;
};

void validate_manifest(const RunManifest & m);

std::string manifest_json(const RunManifest & m);
RunManifest parse_manifest_json(const std::string & text);

RunManifest load_manifest(const std::filesystem::path & path);
void save_manifest(const RunManifest & m, const std::filesystem::path & path);

// Digest over the identity fields (fingerprints, weights, template,
// decoding), ignoring created_at and tool_version, so a re-run of the same
// configuration matches its own earlier manifest.
std::string manifest_identity_digest(const RunManifest & m);

// Current UTC time as ISO-8601; SOURCE_DATE_EPOCH overrides the clock so
// repeated runs can be byte-identical.
std::string utc_timestamp_now();

} // namespace loramix

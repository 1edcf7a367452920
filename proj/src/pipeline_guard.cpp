#include "loramix/pipeline_guard.hpp"

#include <json.hpp>

#include "loramix/chat_template.hpp"
#include "loramix/errors.hpp"

namespace loramix {

const char * finding_name(finding_kind kind) {
  switch (kind) {
    case finding_kind::clean:             return "Clean";
    case finding_kind::overwrite_risk:    return "OverwriteRisk";
    case finding_kind::stale_manifest:    return "StaleManifest";
    case finding_kind::template_mismatch: return "TemplateMismatch";
    case finding_kind::think_leakage:     return "ThinkLeakage";
  }
  return "?";
}

bool all_clean(const std::vector<Finding> & findings) {
  for (const Finding & f : findings)
    if (f.kind != finding_kind::clean) return false;
  return true;
}

std::string findings_json(const std::vector<Finding> & findings) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Finding & f : findings) {
    nlohmann::json j;
    j["count"] = f.count;
    j["detail"] = f.detail;
    j["kind"] = finding_name(f.kind);
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

std::vector<Finding> check_export_dir(const std::filesystem::path & dir,
                                      const RunManifest & manifest) {
  std::vector<Finding> findings;
  std::error_code ec;
  if (!std::filesystem::exists(dir, ec)) {
    findings.push_back({finding_kind::clean, "directory does not exist yet", 0});
    return findings;
  }
  if (!std::filesystem::is_directory(dir, ec))
    fail(errc::io_failure, "'" + dir.string() + "' is not a directory");

  std::uint64_t checkpoints = 0;
  for (const auto & entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".safetensors")
      ++checkpoints;
  }
  if (ec) fail(errc::io_failure, "cannot scan '" + dir.string() + "'");

  if (checkpoints == 0) {
    findings.push_back({finding_kind::clean, "no checkpoint files present", 0});
    return findings;
  }

  const std::filesystem::path manifest_path = dir / k_manifest_filename;
  if (!std::filesystem::exists(manifest_path)) {
    findings.push_back({finding_kind::stale_manifest,
                        std::to_string(checkpoints) +
                            " checkpoint file(s) with no " + k_manifest_filename,
                        checkpoints});
    return findings;
  }

  const RunManifest stored = load_manifest(manifest_path);
  const std::string stored_id = manifest_identity_digest(stored);
  const std::string current_id = manifest_identity_digest(manifest);
  if (stored_id != current_id) {
    findings.push_back({finding_kind::overwrite_risk,
                        "directory holds an export from manifest " + stored_id +
                            ", current run is " + current_id,
                        checkpoints});
    return findings;
  }
  findings.push_back(
      {finding_kind::clean, "existing export matches this manifest", 0});
  return findings;
}

std::vector<Finding> lint_templates(const std::string & train_template,
                                    const std::string & eval_template,
                                    const std::vector<std::string> & generations) {
  std::vector<Finding> findings;
  if (train_template != eval_template)
    findings.push_back({finding_kind::template_mismatch,
                        "train template '" + train_template +
                            "' differs from eval template '" + eval_template + "'",
                        1});
  if (is_nothink_template(eval_template)) {
    std::uint64_t leaked = 0;
    for (const std::string & g : generations)
      if (contains_think_open(g)) ++leaked;
    if (leaked > 0)
      findings.push_back({finding_kind::think_leakage,
                          std::to_string(leaked) + " of " +
                              std::to_string(generations.size()) +
                              " sampled generations open a think tag under "
                              "the no-think template",
                          leaked});
  }
  if (findings.empty())
    findings.push_back({finding_kind::clean, "templates consistent", 0});
  return findings;
}

} // namespace loramix

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "loramix/manifest.hpp"

namespace loramix {

enum class finding_kind {
  clean,
  overwrite_risk,
  stale_manifest,
  template_mismatch,
  think_leakage,
};

const char * finding_name(finding_kind kind);

struct Finding {
  finding_kind kind = finding_kind::clean;
  std::string detail;
  std::uint64_t count = 0;
};

bool all_clean(const std::vector<Finding> & findings);
std::string findings_json(const std::vector<Finding> & findings);

// Read-only scan: OverwriteRisk when the directory holds checkpoints whose
// stored manifest identity differs from `manifest`, StaleManifest when
// checkpoints sit there with no manifest at all, Clean otherwise.
std::vector<Finding> check_export_dir(const std::filesystem::path & dir,
                                      const RunManifest & manifest);

// TemplateMismatch when train and eval ids differ; ThinkLeakage when the
// eval template is the no-think variant yet sampled generations still open
// a think tag (count = how many).
std::vector<Finding> lint_templates(const std::string & train_template,
                                    const std::string & eval_template,
                                    const std::vector<std::string> & generations);

} // namespace loramix

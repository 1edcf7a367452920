#include "loramix/train_log.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "loramix/errors.hpp"

namespace loramix {

namespace {
using json = nlohmann::json;
}

const char * train_stage_name(train_stage s) {
  return s == train_stage::pt ? "PT" : "SFT";
}

const char * train_split_name(train_split s) {
  return s == train_split::train ? "Train" : "Eval";
}

train_stage parse_train_stage(const std::string & name) {
  if (name == "PT" || name == "pt") return train_stage::pt;
  if (name == "SFT" || name == "sft") return train_stage::sft;
  fail(errc::bad_config, "unknown training stage '" + name + "'");
}

TrainLog parse_training_log(const std::filesystem::path & path,
                            train_stage stage) {
  std::ifstream in(path);
  if (!in) fail(errc::io_failure, "cannot open '" + path.string() + "'");

  TrainLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("epoch") ||
        !doc["epoch"].is_number()) {
      log.skipped_lines += 1;
      continue;
    }
    const double epoch = doc["epoch"].get<double>();
    if (!(epoch >= 0.0) || !std::isfinite(epoch)) {
      log.skipped_lines += 1;
      continue;
    }
    bool emitted = false;
    if (doc.contains("loss") && doc["loss"].is_number()) {
      const double loss = doc["loss"].get<double>();
      if (std::isfinite(loss)) {
        log.points.push_back({stage, epoch, train_split::train, loss});
        emitted = true;
      }
    }
    if (doc.contains("eval_loss") && doc["eval_loss"].is_number()) {
      const double loss = doc["eval_loss"].get<double>();
      if (std::isfinite(loss)) {
        log.points.push_back({stage, epoch, train_split::eval, loss});
        emitted = true;
      }
    }
    if (!emitted) log.skipped_lines += 1;
  }
  if (log.points.empty())
    fail(errc::no_valid_lines,
         "'" + path.string() + "' holds no parseable trainer records");
  return log;
}

std::string train_log_json(const TrainLog & log) {
  json points = json::array();
  for (const TrainLogPoint & p : log.points)
    points.push_back({{"epoch", p.epoch},
                      {"loss", p.loss},
                      {"split", train_split_name(p.split)},
                      {"stage", train_stage_name(p.stage)}});
  json doc;
  doc["points"] = std::move(points);
  doc["skipped_lines"] = log.skipped_lines;
  return doc.dump(2);
}

} // namespace loramix

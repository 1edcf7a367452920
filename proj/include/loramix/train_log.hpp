#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace loramix {

enum class train_stage { pt, sft };
enum class train_split { train, eval };

const char * train_stage_name(train_stage s);
const char * train_split_name(train_split s);
train_stage parse_train_stage(const std::string & name);

struct TrainLogPoint {
  train_stage stage = train_stage::pt;
  double epoch = 0.0;
  train_split split = train_split::train;
  double loss = 0.0;
};

struct TrainLog {
  std::vector<TrainLogPoint> points;
  std::uint64_t skipped_lines = 0;
};

// JSONL trainer records: {"epoch": x, "loss": y} makes a Train point,
// {"epoch": x, "eval_loss": y} an Eval point, a line with both makes both.
// Unparseable lines are counted, not fatal; a file yielding no points is.
TrainLog parse_training_log(const std::filesystem::path & path,
                            train_stage stage);

std::string train_log_json(const TrainLog & log);

} // namespace loramix

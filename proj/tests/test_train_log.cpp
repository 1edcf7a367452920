#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "loramix/errors.hpp"
#include "loramix/train_log.hpp"

using namespace loramix;

namespace {

std::filesystem::path data_file(const std::string & name) {
  return std::filesystem::path(TEST_DATA_DIR) / name;
}

std::filesystem::path write_temp(const std::string & tag,
                                 const std::string & body) {
  const auto path =
      std::filesystem::temp_directory_path() / ("loramix_log_" + tag + ".jsonl");
  std::ofstream out(path);
  out << body;
  return path;
}

} // namespace

TEST_SUITE("train_log") {

TEST_CASE("the pt fixture parses its four train points and skips the junk") {
  const TrainLog log = parse_training_log(data_file("pt_log.jsonl"),
                                          train_stage::pt);
  REQUIRE(log.points.size() == 4);
  CHECK(log.skipped_lines == 2);
  CHECK(log.points[0].epoch == doctest::Approx(1.0));
  CHECK(log.points[0].loss == doctest::Approx(2.71));
  CHECK(log.points[0].split == train_split::train);
  const TrainLogPoint & last = log.points.back();
  CHECK(last.stage == train_stage::pt);
  CHECK(last.epoch == doctest::Approx(4.0));
  CHECK(last.split == train_split::train);
  CHECK(last.loss == doctest::Approx(2.12));
}

TEST_CASE("a line carrying both losses yields a train and an eval point") {
  const TrainLog log = parse_training_log(data_file("sft_log.jsonl"),
                                          train_stage::sft);
  REQUIRE(log.points.size() == 4);
  CHECK(log.skipped_lines == 0);
  CHECK(log.points[0].epoch == doctest::Approx(0.5));
  CHECK(log.points[0].split == train_split::train);
  CHECK(log.points[1].epoch == doctest::Approx(1.0));
  CHECK(log.points[1].split == train_split::train);
  CHECK(log.points[1].loss == doctest::Approx(2.45));
  CHECK(log.points[2].epoch == doctest::Approx(1.0));
  CHECK(log.points[2].split == train_split::eval);
  CHECK(log.points[2].loss == doctest::Approx(2.50));
  const TrainLogPoint & last = log.points.back();
  CHECK(last.stage == train_stage::sft);
  CHECK(last.epoch == doctest::Approx(2.0));
  CHECK(last.split == train_split::eval);
  CHECK(last.loss == doctest::Approx(2.14));
}

TEST_CASE("a log with no usable lines is an error, a missing file another") {
  const auto empty = write_temp("empty", "not json\n{\"note\": \"no epoch\"}\n");
  try {
    parse_training_log(empty, train_stage::pt);
    FAIL("expected NoValidLines");
  } catch (const error & e) {
    CHECK(e.code() == errc::no_valid_lines);
  }
  std::filesystem::remove(empty);

  try {
    parse_training_log("/nonexistent/loramix.jsonl", train_stage::pt);
    FAIL("expected IoFailure");
  } catch (const error & e) {
    CHECK(e.code() == errc::io_failure);
  }
}

TEST_CASE("negative and non-finite epochs are skipped, not fatal") {
  const auto path = write_temp("edge",
                               "{\"epoch\": -1, \"loss\": 2.0}\n"
                               "{\"epoch\": \"two\", \"loss\": 2.0}\n"
                               "{\"epoch\": 1, \"loss\": 1.5}\n");
  const TrainLog log = parse_training_log(path, train_stage::pt);
  REQUIRE(log.points.size() == 1);
  CHECK(log.points[0].loss == doctest::Approx(1.5));
  CHECK(log.skipped_lines == 2);
  std::filesystem::remove(path);
}

TEST_CASE("stage names parse in either case") {
  CHECK(parse_train_stage("PT") == train_stage::pt);
  CHECK(parse_train_stage("pt") == train_stage::pt);
  CHECK(parse_train_stage("SFT") == train_stage::sft);
  CHECK(parse_train_stage("sft") == train_stage::sft);
  CHECK(std::string(train_stage_name(train_stage::pt)) == "PT");
  CHECK(std::string(train_stage_name(train_stage::sft)) == "SFT");
  CHECK(std::string(train_split_name(train_split::train)) == "Train");
  CHECK(std::string(train_split_name(train_split::eval)) == "Eval");
  CHECK_THROWS_AS(parse_train_stage("rl"), error);
}

TEST_CASE("the json view exposes points and the skip count") {
  const TrainLog log = parse_training_log(data_file("pt_log.jsonl"),
                                          train_stage::pt);
  const auto doc = nlohmann::json::parse(train_log_json(log));
  CHECK(doc.at("skipped_lines") == 2);
  REQUIRE(doc.at("points").size() == 4);
  CHECK(doc.at("points")[0].at("stage") == "PT");
  CHECK(doc.at("points")[0].at("split") == "Train");
  CHECK(doc.at("points")[0].at("epoch") == 1.0);
}

} // TEST_SUITE

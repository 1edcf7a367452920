#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "loramix/errors.hpp"
#include "loramix/text_eval.hpp"

using namespace loramix;

namespace {

nlohmann::json load_oracle() {
  std::ifstream in(std::string(TEST_DATA_DIR) + "/metric_oracle.json");
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

std::vector<std::pair<std::string, std::string>>
corpus_pairs(const nlohmann::json & corpus) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto & rec : corpus.at("records"))
    out.emplace_back(rec.at(0).get<std::string>(), rec.at(1).get<std::string>());
  return out;
}

std::vector<EvalRecord>
to_records(const std::vector<std::pair<std::string, std::string>> & pairs) {
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EvalRecord r;
    r.id = "r" + std::to_string(i);
    r.generation = pairs[i].first;
    r.reference = pairs[i].second;
    out.push_back(std::move(r));
  }
  return out;
}

void check_prf(const PRF & got, const nlohmann::json & want, const char * tag) {
  CAPTURE(tag);
  CHECK(std::abs(got.precision - want.at(0).get<double>()) <= 1e-9);
  CHECK(std::abs(got.recall - want.at(1).get<double>()) <= 1e-9);
  CHECK(std::abs(got.f1 - want.at(2).get<double>()) <= 1e-9);
}

EvalRecord mc_record(const std::string & generation, char gold) {
  EvalRecord r;
  r.generation = generation;
  r.options = {{'A', "ibuprofen"}, {'B', "paracetamol"}, {'C', "aspirin"}};
  r.gold_letter = gold;
  return r;
}

} // namespace

TEST_SUITE("text_eval") {

TEST_CASE("tokenization matches the frozen reference on every pair") {
  const auto oracle = load_oracle();
  CHECK(std::string(k_tokenizer_tag) == oracle.at("tokenizer").get<std::string>());
  for (const auto & pair : oracle.at("pairs")) {
    CAPTURE(pair.at("id").get<std::string>());
    CHECK(tokenize(pair.at("hyp").get<std::string>()) ==
          pair.at("tokens_hyp").get<std::vector<std::string>>());
    CHECK(tokenize(pair.at("ref").get<std::string>()) ==
          pair.at("tokens_ref").get<std::vector<std::string>>());
  }
}

TEST_CASE("rouge scores match the frozen reference on every pair") {
  const auto oracle = load_oracle();
  for (const auto & pair : oracle.at("pairs")) {
    const std::string id = pair.at("id").get<std::string>();
    CAPTURE(id);
    const std::string hyp = pair.at("hyp").get<std::string>();
    const std::string ref = pair.at("ref").get<std::string>();
    check_prf(rouge_n(hyp, ref, 1), pair.at("rouge1"), "rouge1");
    check_prf(rouge_n(hyp, ref, 2), pair.at("rouge2"), "rouge2");
    check_prf(rouge_l(hyp, ref), pair.at("rougeL"), "rougeL");
  }
}

TEST_CASE("corpus bleu matches the frozen reference on every corpus") {
  const auto oracle = load_oracle();
  for (const auto & corpus : oracle.at("corpora")) {
    const std::string id = corpus.at("id").get<std::string>();
    CAPTURE(id);
    const auto pairs = corpus_pairs(corpus);
    CHECK(std::abs(corpus_bleu4(pairs, false) -
                   corpus.at("bleu4").get<double>()) <= 1e-9);
    CHECK(std::abs(corpus_bleu4(pairs, true) -
                   corpus.at("bleu4_smoothed").get<double>()) <= 1e-6);
  }
}

TEST_CASE("identical text scores exactly one hundred, disjoint exactly zero") {
  const std::vector<std::pair<std::string, std::string>> same = {
      {"the patient should take 500mg twice daily",
       "the patient should take 500mg twice daily"}};
  CHECK(corpus_bleu4(same) == 100.0);
  const PRF r1 = rouge_n(same[0].first, same[0].second, 1);
  CHECK(r1.f1 == 100.0);
  CHECK(rouge_l(same[0].first, same[0].second).f1 == 100.0);

  const std::vector<std::pair<std::string, std::string>> apart = {
      {"alpha beta gamma", "delta epsilon zeta"}};
  CHECK(corpus_bleu4(apart) == 0.0);
  CHECK(rouge_n(apart[0].first, apart[0].second, 1).f1 == 0.0);
  CHECK(rouge_l(apart[0].first, apart[0].second).f1 == 0.0);
}

TEST_CASE("an empty corpus is an error, an empty generation is not") {
  CHECK_THROWS_AS(corpus_bleu4({}), error);
  try {
    evaluate({});
    FAIL("expected EmptyCorpus");
  } catch (const error & e) {
    CHECK(e.code() == errc::empty_corpus);
  }
  CHECK(corpus_bleu4({{"", "take rest"}}) == 0.0);
}

TEST_CASE("mc extraction walks the cascade in order") {
  const std::map<char, std::string> options = {
      {'A', "ibuprofen"}, {'B', "paracetamol"}, {'C', "aspirin"}};

  SUBCASE("standalone letter wins") {
    CHECK(mc_extract("B", options) == 'B');
    CHECK(mc_extract("The answer is B.", options) == 'B');
    CHECK(mc_extract("B) paracetamol", options) == 'B');
    CHECK(mc_extract("Answer: C", options) == 'C');
  }
  SUBCASE("letters inside words or in lowercase do not count") {
    // lowercase "a" is the article, not option A
    CHECK(mc_extract("Bananas are a fruit", options) == std::nullopt);
    CHECK(mc_extract("Cobalt blue", options) == std::nullopt);
  }
  SUBCASE("the think block is ignored") {
    CHECK(mc_extract("<think>maybe A?</think>The answer is B.", options) == 'B');
  }
  SUBCASE("unique option text is the fallback") {
    CHECK(mc_extract("Definitely aspirin here.", options) == 'C');
    CHECK(mc_extract("I would take Paracetamol today", options) == 'B');
  }
  SUBCASE("ambiguous or absent answers extract nothing") {
    CHECK(mc_extract("aspirin or paracetamol, hard to say", options) ==
          std::nullopt);
    CHECK(mc_extract("no idea", options) == std::nullopt);
    CHECK(mc_extract("", options) == std::nullopt);
  }
  SUBCASE("first standalone letter beats later option text") {
    CHECK(mc_extract("A, although aspirin tempted me", options) == 'A');
  }
}

TEST_CASE("mc accuracy counts unanswered records separately") {
  std::vector<EvalRecord> records;
  records.push_back(mc_record("<think>hm</think>The answer is B.", 'B'));
  records.push_back(mc_record("Definitely aspirin here.", 'C'));
  records.push_back(mc_record("I refuse to answer.", 'A'));
  const McResult result = mc_accuracy(records);
  CHECK(result.accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(result.unanswered == 1);
}

TEST_CASE("mc accuracy requires gold labels and matching options") {
  CHECK_THROWS_AS(mc_accuracy({}), error);
  std::vector<EvalRecord> records;
  records.push_back(mc_record("B", 'B'));
  records[0].gold_letter = std::nullopt;
  try {
    mc_accuracy(records);
    FAIL("expected BadConfig");
  } catch (const error & e) {
    CHECK(e.code() == errc::bad_config);
  }
}

TEST_CASE("refusal markers are matched on the stripped answer only") {
  std::vector<EvalRecord> records(4);
  records[0].generation = "I cannot help with that request.";
  records[1].generation = "Take 500mg twice daily.";
  records[2].generation = "<think>should i refuse? no.</think>Sure, here it is.";
  records[3].generation = "The dose is 250mg.";
  CHECK(refusal_rate(records) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("the fixture records evaluate to the frozen mixed-corpus numbers") {
  const auto records =
      load_records_jsonl(std::string(TEST_DATA_DIR) + "/eval_records.jsonl");
  REQUIRE(records.size() == 4);
  CHECK(records[0].id == "mixed-0");
  const MetricReport report = evaluate(records);
  CHECK(std::abs(report.bleu4 - 43.69675662523402) <= 1e-9);
  CHECK(std::abs(report.rouge1_f - 71.96969696969697) <= 1e-9);
  CHECK(std::abs(report.rouge2_f - 59.44444444444445) <= 1e-9);
  CHECK(std::abs(report.rougeL_f - 71.96969696969697) <= 1e-9);
  CHECK(report.n_records == 4);
  CHECK_FALSE(report.mc_accuracy.has_value());
  CHECK_FALSE(report.refusal_rate.has_value());
}

TEST_CASE("raw scoring punishes leaked think text that stripping forgives") {
  std::vector<EvalRecord> records(1);
  records[0].generation =
      "<think> the user asks about dosage </think> take 500mg twice daily";
  records[0].reference = "take 500mg twice daily";

  EvalOptions raw;
  raw.basis = score_basis::raw_text;
  const MetricReport on_raw = evaluate(records, raw);
  CHECK(std::abs(on_raw.bleu4 - 23.462350320528) <= 1e-9);
  CHECK(on_raw.scored_on == score_basis::raw_text);

  const MetricReport on_stripped = evaluate(records);
  CHECK(on_stripped.bleu4 == 100.0);
  CHECK(on_stripped.rouge1_f == 100.0);
  CHECK(on_stripped.scored_on == score_basis::stripped_answer);
}

TEST_CASE("record order does not change any corpus metric") {
  const auto oracle = load_oracle();
  for (const auto & corpus : oracle.at("corpora")) {
    auto pairs = corpus_pairs(corpus);
    if (pairs.size() < 2) continue;
    const MetricReport before = evaluate(to_records(pairs));
    std::reverse(pairs.begin(), pairs.end());
    const MetricReport after = evaluate(to_records(pairs));
    // bleu pools integer counts, so reordering cannot move it at all
    CHECK(before.bleu4 == after.bleu4);
    // the rouge means sum per record floats, so allow summation-order noise
    CHECK(std::abs(before.rouge1_f - after.rouge1_f) <= 1e-9);
    CHECK(std::abs(before.rouge2_f - after.rouge2_f) <= 1e-9);
    CHECK(std::abs(before.rougeL_f - after.rougeL_f) <= 1e-9);
  }
}

TEST_CASE("all metrics stay inside the 0 to 100 range on random text") {
  std::mt19937 rng(81);
  const std::vector<std::string> vocabulary = {"a",    "b",   "cat", "mat",
                                               "dose", "mg",  "the", "on",
                                               "take", "give"};
  auto random_text = [&]() {
    std::string out;
    const std::size_t len = rng() % 12;
    for (std::size_t i = 0; i < len; ++i) {
      if (!out.empty()) out += ' ';
      out += vocabulary[rng() % vocabulary.size()];
    }
    return out;
  };
  for (int iter = 0; iter < 200; ++iter) {
    const std::string hyp = random_text();
    const std::string ref = random_text();
    for (const PRF & s : {rouge_n(hyp, ref, 1), rouge_n(hyp, ref, 2),
                          rouge_l(hyp, ref)}) {
      CHECK(s.precision >= 0.0);
      CHECK(s.precision <= 100.0);
      CHECK(s.recall >= 0.0);
      CHECK(s.recall <= 100.0);
      CHECK(s.f1 >= 0.0);
      CHECK(s.f1 <= 100.0);
    }
    const double plain = corpus_bleu4({{hyp, ref}});
    const double smoothed = corpus_bleu4({{hyp, ref}}, true);
    CHECK(plain >= 0.0);
    CHECK(plain <= 100.0);
    CHECK(smoothed >= 0.0);
    CHECK(smoothed <= 100.0);
  }
}

TEST_CASE("the leak audit separates span overlap from exact duplication") {
  const std::vector<std::string> train = {
      "The counselor documented the full dosing schedule for the newly "
      "admitted patient cohort before rounds.",
      "Unrelated training text about fevers and hydration."};

  SUBCASE("a shared 13 token span contaminates") {
    const std::vector<std::string> eval = {
        "Notes: the counselor documented the full dosing schedule for the "
        "newly admitted patient cohort, per protocol."};
    const LeakReport report = leakage_audit(train, eval);
    CHECK(report.contaminated_eval == 1);
    CHECK(report.exact_dups == 0);
    CHECK(report.contamination_fraction == doctest::Approx(1.0));
    REQUIRE(!report.examples.empty());
    CHECK(report.examples[0].ngram.find("counselor") != std::string::npos);
  }
  SUBCASE("a short verbatim copy is a duplicate but not a contamination") {
    const std::vector<std::string> eval = {
        "Unrelated training text about fevers and hydration."};
    const LeakReport report = leakage_audit(train, eval);
    CHECK(report.exact_dups == 1);
    CHECK(report.contaminated_eval == 0);
  }
  SUBCASE("disjoint corpora are clean") {
    const std::vector<std::string> eval = {"Completely novel evaluation text."};
    const LeakReport report = leakage_audit(train, eval);
    CHECK(report.exact_dups == 0);
    CHECK(report.contaminated_eval == 0);
    CHECK(report.contamination_fraction == 0.0);
    CHECK(report.examples.empty());
  }
  SUBCASE("auditing the train set against itself flags every long text") {
    const LeakReport report = leakage_audit(train, train);
    CHECK(report.exact_dups == 2);
    CHECK(report.contaminated_eval == 1); // only the first has >= 13 tokens
  }
  SUBCASE("empty sides are an error") {
    CHECK_THROWS_AS(leakage_audit({}, {"x"}), error);
    CHECK_THROWS_AS(leakage_audit({"x"}, {}), error);
  }
}

TEST_CASE("leak ids label the examples when given") {
  const std::vector<std::string> train = {
      "one two three four five six seven eight nine ten eleven twelve thirteen"};
  const LeakReport report = leakage_audit(train, train, 13, {"eval-a"});
  REQUIRE(report.examples.size() == 1);
  CHECK(report.examples[0].eval_id == "eval-a");
}

TEST_CASE("the metric table lines up labels and four score columns") {
  MetricReport a;
  a.label = "raw";
  a.bleu4 = 23.462350320528;
  a.rouge1_f = 53.333333333333336;
  MetricReport b;
  b.label = "stripped";
  b.bleu4 = 100.0;
  b.rouge1_f = 100.0;
  const std::string table = metric_table({a, b});
  CHECK(table.find("raw") != std::string::npos);
  CHECK(table.find("stripped") != std::string::npos);
  CHECK(table.find("23.46") != std::string::npos);
  CHECK(table.find("100.00") != std::string::npos);
  CHECK(table.find("BLEU-4") != std::string::npos);
  CHECK(table.find("R-L") != std::string::npos);
}

TEST_CASE("metric and leak reports serialize their headline fields") {
  std::vector<EvalRecord> records(1);
  // multi token so every bleu order has counts; one token would zero bleu4
  records[0].generation = "take 500 mg twice daily with food";
  records[0].reference = "take 500 mg twice daily with food";
  EvalOptions options;
  options.label = "smoke";
  options.with_refusal = true;
  const auto doc =
      nlohmann::json::parse(metric_report_json(evaluate(records, options)));
  CHECK(doc.at("label") == "smoke");
  CHECK(doc.at("bleu4") == 100.0);
  CHECK(doc.at("scored_on") == "StrippedAnswer");
  CHECK(doc.at("tokenizer") == k_tokenizer_tag);
  CHECK(doc.at("refusal_rate") == 0.0);
  CHECK_FALSE(doc.contains("mc_accuracy")); // only present for mc corpora

  const auto leak_doc = nlohmann::json::parse(
      leak_report_json(leakage_audit({"a b c"}, {"x y z"}, 2)));
  CHECK(leak_doc.at("exact_dups") == 0);
  CHECK(leak_doc.at("contaminated_eval") == 0);
}

} // TEST_SUITE

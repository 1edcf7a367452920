// Contract tests for the installed command surface: exit codes, JSON
// shapes, config layering and exact rendered output. Runs the real binary.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "fixtures.hpp"
#include "loramix/fingerprint.hpp"
#include "loramix/lora.hpp"
#include "loramix/tensor_store.hpp"

using namespace loramix;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using ModuleDims =
    std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>>;

std::vector<std::string> g_problems;

void expect(bool ok, const std::string & what) {
  if (!ok) g_problems.push_back(what);
}

fs::path data_file(const std::string & name) {
  return fs::path(TEST_DATA_DIR) / name;
}

fs::path g_work;

int run(const std::string & args, const std::string & stdout_to = "out.txt",
        const std::string & env = "") {
  const std::string cmd = "cd " + g_work.string() + " && " +
                          (env.empty() ? std::string() : env + " ") +
                          LORAMIX_CLI_PATH + " " + args + " > " + stdout_to +
                          " 2> err.txt";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string & name) {
  std::ifstream in(g_work / name, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

json slurp_json(const std::string & name) { return json::parse(slurp(name)); }

void write_text(const fs::path & path, const std::string & body) {
  std::ofstream out(path);
  out << body;
}

// base + two adapters + spec, shared by the merge-flow tests
void lay_out_merge_inputs() {
  std::mt19937 rng(201);
  const ModuleDims mods = {{"layers.0.q", {8, 8}}, {"layers.1.v", {6, 10}}};
  write_store(fixtures::make_base(rng, mods), g_work / "base.safetensors");
  for (const char * name : {"pt", "sft"}) {
    const LoraAdapter a = fixtures::make_adapter(rng, name, 2, 16.0f, mods);
    write_store(adapter_to_store(a), g_work / (a.name + ".safetensors"));
    json sidecar = {{"r", a.rank}, {"lora_alpha", a.alpha}, {"name", a.name}};
    write_text(g_work / (a.name + ".json"), sidecar.dump());
  }
  const json spec = {
      {"label", "mix"},
      {"output_dtype", "F32"},
      {"entries",
       {{{"adapter", "pt.safetensors"}, {"weight", 0.3}},
        {{"adapter", "sft.safetensors"}, {"weight", 0.7}}}}};
  write_text(g_work / "spec.json", spec.dump(2));
  const json bf16_spec = {
      {"label", "mix-bf16"},
      {"output_dtype", "BF16"},
      {"entries",
       {{{"adapter", "pt.safetensors"}, {"weight", 0.3}},
        {{"adapter", "sft.safetensors"}, {"weight", 0.7}}}}};
  write_text(g_work / "spec_bf16.json", bf16_spec.dump(2));
}

// ---- tests ----

void test_exit_codes() {
  expect(run("--help") == 0, "--help should exit 0");
  expect(run("no-such-command") == 3, "unknown subcommand should exit 3");
  expect(run("--bogus-flag") == 3, "unknown flag should exit 3");
  expect(run("verify") == 3, "missing required options should exit 3");
  expect(run("") == 3, "no subcommand should exit 3");
  expect(run("fingerprint /nonexistent.safetensors") == 3,
         "io failures should exit 3");
}

void test_fingerprint() {
  expect(run("fingerprint " + data_file("single_tensor.safetensors").string()) ==
             0,
         "fingerprint should exit 0");
  const std::string text = slurp("out.txt");
  const Fingerprint fp = fingerprint_file(data_file("single_tensor.safetensors"));
  expect(text.rfind(fp.digest, 0) == 0,
         "plain output should begin with the digest");

  expect(run("--json fingerprint " +
             data_file("single_tensor.safetensors").string()) == 0,
         "json fingerprint should exit 0");
  const json doc = slurp_json("out.txt");
  expect(doc.at("digest") == fp.digest, "json digest should match the library");
  expect(doc.at("name_count") == 1, "fixture holds one tensor");
}

void test_merge_and_verify_flow() {
  lay_out_merge_inputs();
  expect(run("--json merge --base base.safetensors --spec spec.json "
             "--out export") == 0,
         "merge should exit 0");
  const json merged = slurp_json("out.txt");
  expect(merged.at("digest").get<std::string>().size() == 64,
         "merge output should carry the export digest");
  expect(fs::exists(g_work / "export" / "merged.safetensors"),
         "merge should write the checkpoint");
  expect(fs::exists(g_work / "export" / "merge_manifest.json"),
         "merge should write the manifest");

  expect(run("--json verify --base base.safetensors --spec spec.json "
             "--candidate export/merged.safetensors") == 0,
         "verify should exit 0 on a faithful export");
  expect(slurp_json("out.txt").at("verdict") == "Pass",
         "verify json should say Pass");

  // tamper: flip one byte of tensor data at the end of the file
  auto bytes = [&] {
    std::ifstream in(g_work / "export" / "merged.safetensors", std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>());
  }();
  bytes.back() = static_cast<char>(bytes.back() ^ 0x3F);
  std::ofstream(g_work / "tampered.safetensors", std::ios::binary)
      .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  expect(run("--json verify --base base.safetensors --spec spec.json "
             "--candidate tampered.safetensors") == 2,
         "verify should exit 2 on a tampered export");
  const json failed = slurp_json("out.txt");
  expect(failed.at("verdict") == "Fail", "verify json should say Fail");
  expect(!failed.at("failing_tensors").empty(),
         "the tampered tensor should be listed");
}

void test_attribute() {
  expect(run("attribute --base base.safetensors --spec spec.json "
             "--candidate export/merged.safetensors") == 0,
         "attribute should exit 0");
  const json doc = slurp_json("out.txt");
  expect(std::abs(doc.at("inferred_weights").at("pt").get<double>() - 0.3) <=
             1e-4,
         "pt weight should come back as 0.3");
  expect(std::abs(doc.at("inferred_weights").at("sft").get<double>() - 0.7) <=
             1e-4,
         "sft weight should come back as 0.7");
  // the hypothesis set names the declared recipe after the spec label
  expect(doc.at("best_hypothesis") == "mix",
         "the declared recipe should win the classification");
}

void test_tolerance_profile_env() {
  expect(run("merge --base base.safetensors --spec spec_bf16.json "
             "--out export_bf16") == 0,
         "bf16 merge should exit 0");
  expect(run("verify --base base.safetensors --spec spec_bf16.json "
             "--candidate export_bf16/merged.safetensors") == 2,
         "bf16 export should fail the f32 default tolerances");
  expect(run("verify --base base.safetensors --spec spec_bf16.json "
             "--candidate export_bf16/merged.safetensors",
             "out.txt", "LORAMIX_TOL_PROFILE=bf16") == 0,
         "the bf16 tolerance profile should make it pass");
  expect(run("verify --base base.safetensors --spec spec_bf16.json "
             "--candidate export_bf16/merged.safetensors --tol-rel 0.0078125") ==
             0,
         "an explicit --tol-rel should work the same");
}

void test_eval() {
  expect(run("eval --records " + data_file("eval_records.jsonl").string()) == 0,
         "eval should exit 0");
  json doc = slurp_json("out.txt");
  expect(std::abs(doc.at("bleu4").get<double>() - 43.69675662523402) <= 1e-9,
         "eval bleu4 should match the frozen corpus value");
  expect(std::abs(doc.at("rouge1_f").get<double>() - 71.96969696969697) <= 1e-9,
         "eval rouge1 should match the frozen corpus value");
  expect(doc.at("label") == "eval_records", "label should default to the stem");
  expect(doc.at("scored_on") == "StrippedAnswer", "default basis is stripped");

  expect(run("eval --records " + data_file("eval_records.jsonl").string() +
             " --smooth --label sm") == 0,
         "smoothed eval should exit 0");
  doc = slurp_json("out.txt");
  expect(std::abs(doc.at("bleu4").get<double>() - 48.864624733252896) <= 1e-6,
         "smoothed bleu4 should match the frozen corpus value");
  expect(doc.at("bleu_smoothed") == true, "the smoothing flag should be echoed");
  expect(doc.at("label") == "sm", "an explicit label should win");

  expect(run("eval --records " + data_file("eval_records.jsonl").string() +
             " --table") == 0,
         "table eval should exit 0");
  const std::string table = slurp("out.txt");
  expect(table.find("BLEU-4") != std::string::npos, "table should name columns");

  expect(run("eval --records " + data_file("mc_records.jsonl").string()) == 0,
         "mc eval should exit 0");
  doc = slurp_json("out.txt");
  expect(std::abs(doc.at("mc_accuracy").get<double>() - 2.0 / 3.0) <= 1e-12,
         "mc accuracy should be 2/3");
  expect(doc.at("mc_unanswered") == 1, "one record extracts no answer");

  expect(run("eval --records /nonexistent.jsonl") == 3,
         "a missing records file should exit 3");
}

void test_config_layering() {
  write_text(g_work / "cfg.json",
             R"({"eval": {"label": "fromconfig", "smooth": true}})");
  expect(run("--config cfg.json eval --records " +
             data_file("eval_records.jsonl").string()) == 0,
         "config-driven eval should exit 0");
  json doc = slurp_json("out.txt");
  expect(doc.at("label") == "fromconfig", "config should set the label");
  expect(doc.at("bleu_smoothed") == true, "config should set the smooth flag");

  expect(run("--config cfg.json eval --records " +
             data_file("eval_records.jsonl").string() + " --label flagwins") ==
             0,
         "flag-over-config eval should exit 0");
  doc = slurp_json("out.txt");
  expect(doc.at("label") == "flagwins", "a command-line flag should beat config");

  write_text(g_work / "bad_cfg.json", "not json");
  expect(run("--config bad_cfg.json eval --records " +
             data_file("eval_records.jsonl").string()) == 3,
         "a malformed config should exit 3");
}

void test_lint() {
  expect(run("lint --train-template qwen3 --eval-template qwen3") == 0,
         "agreeing templates should exit 0");
  expect(run("--json lint --train-template qwen3 --eval-template "
             "qwen3_nothink") == 2,
         "differing templates should exit 2");
  json doc = slurp_json("out.txt");
  expect(doc.at(0).at("kind") == "TemplateMismatch",
         "the mismatch should be named");

  expect(run("--json lint --train-template qwen3_nothink --eval-template "
             "qwen3_nothink --generations " +
             data_file("think_generations.jsonl").string()) == 2,
         "leaked think tags should exit 2");
  doc = slurp_json("out.txt");
  bool saw = false;
  for (const auto & f : doc)
    if (f.at("kind") == "ThinkLeakage") {
      saw = true;
      expect(f.at("count") == 20, "twenty generations carry the open marker");
    }
  expect(saw, "the leakage finding should be present");
}

void test_leak_audit() {
  expect(run("leak-audit --train " + data_file("leak_train.jsonl").string() +
             " --eval " + data_file("leak_eval.jsonl").string()) == 2,
         "the planted fixtures should exit 2");
  const json doc = slurp_json("out.txt");
  expect(doc.at("contaminated_eval") == 1, "one eval text shares the span");
  expect(doc.at("exact_dups") == 1, "one eval text is a verbatim copy");

  write_text(g_work / "clean_eval.jsonl",
             R"({"id": "c0", "text": "completely novel sentence"})"
             "\n");
  expect(run("leak-audit --train " + data_file("leak_train.jsonl").string() +
             " --eval clean_eval.jsonl") == 0,
         "a clean eval set should exit 0");
}

void test_report() {
  expect(run("eval --records " + data_file("eval_records.jsonl").string() +
             " --label run_a", "report_a.json") == 0,
         "first eval for the report should exit 0");
  expect(run("eval --records " + data_file("mc_records.jsonl").string() +
             " --label run_b", "report_b.json") == 0,
         "second eval for the report should exit 0");
  expect(run("report report_a.json report_b.json") == 0,
         "report should exit 0");
  const std::string table = slurp("out.txt");
  expect(table.find("run_a") != std::string::npos, "table should list run_a");
  expect(table.find("run_b") != std::string::npos, "table should list run_b");
  expect(table.find("BLEU-4") != std::string::npos, "table should name columns");
  expect(run("--json report report_a.json report_b.json") == 0,
         "json report should exit 0");
  expect(slurp_json("out.txt").size() == 2, "json report should hold two rows");
}

void test_ingest_log() {
  expect(run("ingest-log --log " + data_file("pt_log.jsonl").string() +
             " --stage PT") == 0,
         "ingest-log should exit 0");
  const json doc = slurp_json("out.txt");
  expect(doc.at("points").size() == 4, "the pt fixture yields four points");
  expect(doc.at("skipped_lines") == 2, "two junk lines should be skipped");
  expect(run("ingest-log --log " + data_file("pt_log.jsonl").string() +
             " --stage rl") == 3,
         "an unknown stage should exit 3");
  write_text(g_work / "noise.jsonl", "zzz\n");
  expect(run("ingest-log --log noise.jsonl --stage PT") == 3,
         "a log without usable lines should exit 3");
}

void test_render() {
  expect(run("render --messages " + data_file("messages.jsonl").string() +
             " --template qwen3_nothink") == 0,
         "render should exit 0");
  expect(slurp("out.txt") ==
             "<|im_start|>user\nhi<|im_end|>\n"
             "<|im_start|>assistant\n<think>\n\n</think>\n\n",
         "nothink render should match byte for byte");

  expect(run("render --messages " + data_file("messages.jsonl").string() +
             " --template qwen3 --no-generation-prompt") == 0,
         "render without prologue should exit 0");
  expect(slurp("out.txt") == "<|im_start|>user\nhi<|im_end|>\n",
         "closed transcript should match byte for byte");

  expect(run("render --messages " + data_file("messages.jsonl").string() +
             " --template qwen3 --jsonl") == 0,
         "jsonl render should exit 0");
  expect(slurp_json("out.txt").at("prompt") ==
             "<|im_start|>user\nhi<|im_end|>\n<|im_start|>assistant\n",
         "jsonl render should wrap the prompt");

  expect(run("render --messages " + data_file("messages.jsonl").string() +
             " --template alpaca") == 3,
         "an unknown template id should exit 3");
}

} // namespace

int main() {
  g_work = fs::temp_directory_path() / "loramix_cli_tests";
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  const std::vector<std::pair<std::string, std::function<void()>>> tests = {
      {"exit codes", test_exit_codes},
      {"fingerprint output", test_fingerprint},
      {"merge and verify flow", test_merge_and_verify_flow},
      {"attribution over the cli", test_attribute},
      {"tolerance profile env var", test_tolerance_profile_env},
      {"eval metrics and labels", test_eval},
      {"config file layering", test_config_layering},
      {"template lint", test_lint},
      {"leak audit", test_leak_audit},
      {"report table", test_report},
      {"ingest-log", test_ingest_log},
      {"render", test_render},
  };

  int failed = 0;
  for (const auto & [name, fn] : tests) {
    try {
      fn();
    } catch (const std::exception & e) {
      expect(false, std::string("threw: ") + e.what());
    }
    if (g_problems.empty()) {
      std::cout << "[PASS] " << name << '\n';
    } else {
      ++failed;
      std::cout << "[FAIL] " << name << ": " << g_problems.front();
      if (g_problems.size() > 1)
        std::cout << " (+" << g_problems.size() - 1 << " more)";
      std::cout << '\n';
    }
    g_problems.clear();
  }

  fs::remove_all(g_work);
  if (failed == 0) {
    std::cout << "all " << tests.size() << " cli contracts hold\n";
    return 0;
  }
  std::cout << failed << " of " << tests.size() << " cli contracts failed\n";
  return 1;
}

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "loramix/chat_template.hpp"
#include "loramix/errors.hpp"
#include "loramix/fingerprint.hpp"
#include "loramix/lora.hpp"
#include "loramix/manifest.hpp"
#include "loramix/merge_audit.hpp"
#include "loramix/pipeline_guard.hpp"
#include "loramix/tensor_store.hpp"
#include "loramix/text_eval.hpp"
#include "loramix/train_log.hpp"
#include "loramix/version.hpp"

namespace {

using json = nlohmann::json;
using namespace loramix;

constexpr int k_exit_ok = 0;
constexpr int k_exit_finding = 2;
constexpr int k_exit_structural = 3;

// Flat or nested JSON config file; nesting mirrors subcommand names, e.g.
// {"verify": {"tol-abs": 1e-6}}. Command-line flags win over the file.
class JsonConfig : public CLI::Config {
public:
  std::string to_config(const CLI::App *, bool, bool,
                        std::string) const override {
    return "{}\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream & input) const override {
    json doc;
    try {
      doc = json::parse(input);
    } catch (const json::exception & e) {
      throw CLI::FileError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object())
      throw CLI::FileError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    walk(doc, {}, items);
    return items;
  }

private:
  static std::string scalar(const json & v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void walk(const json & node, std::vector<std::string> parents,
                   std::vector<CLI::ConfigItem> & items) {
    for (const auto & [key, value] : node.items()) {
      if (value.is_object()) {
        auto deeper = parents;
        deeper.push_back(key);
        walk(value, std::move(deeper), items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array())
        for (const auto & e : value) item.inputs.push_back(scalar(e));
      else
        item.inputs.push_back(scalar(value));
      items.push_back(std::move(item));
    }
  }
};

// Reads one document per line: either a JSON object (picking `field`, with
// optional "id") or, when the line is not JSON, the raw line itself.
std::vector<std::pair<std::string, std::string>>
load_lines(const std::filesystem::path & path, const std::string & field) {
  std::ifstream in(path);
  if (!in) fail(errc::io_failure, "cannot open '" + path.string() + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string id = "line" + std::to_string(lineno);
    std::string text = line;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_object()) {
      if (doc.contains(field) && doc[field].is_string())
        text = doc[field].get<std::string>();
      if (doc.contains("id") && doc["id"].is_string())
        id = doc["id"].get<std::string>();
    }
    out.emplace_back(std::move(id), std::move(text));
  }
  return out;
}

double default_tol_rel() {
  if (const char * profile = std::getenv("LORAMIX_TOL_PROFILE"))
    if (std::string(profile) == "bf16") return k_tol_rel_bf16;
  return k_tol_rel_default;
}

RunManifest build_manifest(const TensorStore & base, const MergeSpec & spec,
                           const std::string & template_name,
                           const DecodingPreset & decoding) {
  RunManifest m;
  m.base_fp = fingerprint_store(base);
  for (const MergeEntry & e : spec.entries) {
    m.adapter_fps[e.adapter.name] =
        fingerprint_store(adapter_to_store(e.adapter));
    m.merge_weights[e.adapter.name] = e.weight;
  }
  m.template_id = template_name;
  m.decoding = decoding;
  m.created_at = utc_timestamp_now();
  m.tool_version = k_tool_version;
  return m;
}

int cmd_merge(const std::string & base_path, const std::string & spec_path,
              const std::string & out_dir, const std::string & template_name,
              double temperature, double top_p, bool force, bool as_json) {
  const TensorStore base = read_store(base_path);
  const MergeSpec spec = load_merge_spec(spec_path);
  const RunManifest manifest =
      build_manifest(base, spec, template_name, {temperature, top_p});

  const std::vector<Finding> findings = check_export_dir(out_dir, manifest);
  if (!all_clean(findings) && !force) {
    std::cout << findings_json(findings) << '\n';
    std::cerr << "refusing to write into '" << out_dir
              << "' (use --force to override)\n";
    return k_exit_finding;
  }

  const MergeResult result = apply_merge(base, spec);
  for (const std::string & w : result.warnings) std::cerr << "warning: " << w << '\n';
  if (result.saturated_casts > 0)
    std::cerr << "warning: " << result.saturated_casts
              << " element(s) saturated to infinity in the f16 cast\n";

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path checkpoint =
      std::filesystem::path(out_dir) / "merged.safetensors";
  write_store(result.store, checkpoint);
  save_manifest(manifest, std::filesystem::path(out_dir) / k_manifest_filename);

  const Fingerprint fp = fingerprint_store(result.store);
  if (as_json) {
    json doc;
    doc["checkpoint"] = checkpoint.string();
    doc["digest"] = fp.digest;
    doc["name_count"] = fp.name_count;
    doc["saturated_casts"] = result.saturated_casts;
    doc["total_bytes"] = fp.total_bytes;
    doc["warnings"] = result.warnings;
    std::cout << doc.dump(2) << '\n';
  } else {
    std::cout << "wrote " << checkpoint.string() << " (" << fp.name_count
              << " tensors, digest " << fp.digest << ")\n";
  }
  return k_exit_ok;
}

int cmd_verify(const std::string & base_path, const std::string & spec_path,
               const std::string & candidate_path, double tol_abs,
               double tol_rel, bool as_json) {
  const TensorStore base = read_store(base_path);
  const MergeSpec spec = load_merge_spec(spec_path);
  const TensorStore candidate = read_store(candidate_path);
  const VerifyReport report =
      verify_merge(base, spec, candidate, tol_abs, tol_rel);
  if (as_json) {
    std::cout << verify_report_json(report) << '\n';
  } else {
    std::cout << (report.result == verdict::pass ? "Pass" : "Fail") << " ("
              << report.per_tensor.size() << " tensors";
    if (!report.failing_tensors.empty()) {
      std::cout << "; failing:";
      for (const std::string & name : report.failing_tensors)
        std::cout << ' ' << name;
    }
    std::cout << ")\n";
  }
  return report.result == verdict::pass ? k_exit_ok : k_exit_finding;
}

int cmd_attribute(const std::string & base_path,
                  const std::vector<std::string> & adapter_paths,
                  const std::string & spec_path,
                  const std::string & candidate_path,
                  const std::string & suffix) {
  const TensorStore base = read_store(base_path);
  const TensorStore candidate = read_store(candidate_path);

  std::vector<LoraAdapter> adapters;
  std::optional<MergeSpec> declared;
  if (!spec_path.empty()) declared = load_merge_spec(spec_path);
  if (!adapter_paths.empty()) {
    for (const std::string & p : adapter_paths)
      adapters.push_back(load_adapter(p));
  } else if (declared) {
    for (const MergeEntry & e : declared->entries) adapters.push_back(e.adapter);
  } else {
    fail(errc::bad_config, "need --adapters or --spec to know the candidates");
  }

  const std::vector<Hypothesis> hypotheses =
      default_hypotheses(adapters, declared ? &*declared : nullptr);
  const AttributionReport report =
      classify_checkpoint(base, adapters, candidate, hypotheses, suffix);
  std::cout << attribution_report_json(report) << '\n';
  return k_exit_ok;
}

int cmd_fingerprint(const std::string & path, bool as_json) {
  const Fingerprint fp = fingerprint_file(path);
  if (as_json) {
    json doc;
    doc["digest"] = fp.digest;
    doc["name_count"] = fp.name_count;
    doc["total_bytes"] = fp.total_bytes;
    std::cout << doc.dump(2) << '\n';
  } else {
    std::cout << fp.digest << "  " << path << " (" << fp.name_count
              << " tensors, " << fp.total_bytes << " canonical bytes)\n";
  }
  return k_exit_ok;
}

int cmd_lint(const std::string & train_template, const std::string & eval_template,
             const std::string & generations_path, bool as_json) {
  std::vector<std::string> generations;
  if (!generations_path.empty())
    for (auto & [id, text] : load_lines(generations_path, "generation"))
      generations.push_back(std::move(text));
  const std::vector<Finding> findings =
      lint_templates(train_template, eval_template, generations);
  if (as_json) {
    std::cout << findings_json(findings) << '\n';
  } else {
    for (const Finding & f : findings)
      std::cout << finding_name(f.kind) << ": " << f.detail << '\n';
  }
  return all_clean(findings) ? k_exit_ok : k_exit_finding;
}

int cmd_eval(const std::string & records_path, bool raw, bool smooth,
             bool with_refusal, const std::string & label, bool as_table) {
  const std::vector<EvalRecord> records = load_records_jsonl(records_path);
  EvalOptions options;
  options.basis = raw ? score_basis::raw_text : score_basis::stripped_answer;
  options.bleu_smooth = smooth;
  options.with_refusal = with_refusal;
  options.label = label.empty()
                      ? std::filesystem::path(records_path).stem().string()
                      : label;
  const MetricReport report = evaluate(records, options);
  if (as_table)
    std::cout << metric_table({report});
  else
    std::cout << metric_report_json(report) << '\n';
  return k_exit_ok;
}

int cmd_leak_audit(const std::string & train_path, const std::string & eval_path,
                   int n) {
  std::vector<std::string> train_texts;
  for (auto & [id, text] : load_lines(train_path, "text"))
    train_texts.push_back(std::move(text));
  std::vector<std::string> eval_texts;
  std::vector<std::string> eval_ids;
  for (auto & [id, text] : load_lines(eval_path, "text")) {
    eval_ids.push_back(id);
    eval_texts.push_back(text);
  }
  const LeakReport report = leakage_audit(train_texts, eval_texts, n, eval_ids);
  std::cout << leak_report_json(report) << '\n';
  return report.contaminated_eval == 0 && report.exact_dups == 0
             ? k_exit_ok
             : k_exit_finding;
}

MetricReport parse_metric_report(const std::filesystem::path & path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_failure, "cannot open '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception & e) {
    fail(errc::bad_config, "'" + path.string() + "': " + e.what());
  }
  MetricReport r;
  r.label = doc.value("label", path.stem().string());
  if (r.label.empty()) r.label = path.stem().string();
  r.bleu4 = doc.value("bleu4", 0.0);
  r.rouge1_f = doc.value("rouge1_f", 0.0);
  r.rouge2_f = doc.value("rouge2_f", 0.0);
  r.rougeL_f = doc.value("rougeL_f", 0.0);
  if (doc.contains("mc_accuracy")) r.mc_accuracy = doc["mc_accuracy"].get<double>();
  if (doc.contains("refusal_rate")) r.refusal_rate = doc["refusal_rate"].get<double>();
  r.n_records = doc.value("n_records", std::uint64_t{0});
  return r;
}

int cmd_report(const std::vector<std::string> & inputs, bool as_json) {
  std::vector<MetricReport> reports;
  for (const std::string & p : inputs) reports.push_back(parse_metric_report(p));
  if (as_json) {
    json arr = json::array();
    for (const MetricReport & r : reports) arr.push_back(json::parse(metric_report_json(r)));
    std::cout << arr.dump(2) << '\n';
  } else {
    std::cout << metric_table(reports);
  }
  return k_exit_ok;
}

int cmd_ingest_log(const std::string & log_path, const std::string & stage_name) {
  const TrainLog log =
      parse_training_log(log_path, parse_train_stage(stage_name));
  std::cout << train_log_json(log) << '\n';
  if (log.skipped_lines > 0)
    std::cerr << "skipped " << log.skipped_lines << " unparseable line(s)\n";
  return k_exit_ok;
}

int cmd_render(const std::string & messages_path, const std::string & template_name,
               bool no_generation_prompt, bool as_jsonl) {
  std::ifstream in(messages_path);
  if (!in) fail(errc::io_failure, "cannot open '" + messages_path + "'");
  std::vector<Message> messages;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception & e) {
      fail(errc::bad_config, messages_path + ":" + std::to_string(lineno) +
                                 ": " + e.what());
    }
    Message m;
    const std::string role_name = doc.value("role", "");
    if (role_name == "system") m.who = role::system;
    else if (role_name == "user") m.who = role::user;
    else if (role_name == "assistant") m.who = role::assistant;
    else
      fail(errc::bad_role_sequence, messages_path + ":" +
                                        std::to_string(lineno) +
                                        ": unknown role '" + role_name + "'");
    m.content = doc.value("content", "");
    messages.push_back(std::move(m));
  }
  const std::string prompt = render(messages, parse_template_id(template_name),
                                    !no_generation_prompt);
  if (as_jsonl) {
    json doc;
    doc["prompt"] = prompt;
    std::cout << doc.dump() << '\n';
  } else {
    std::cout << prompt;
  }
  return k_exit_ok;
}

} // namespace

int main(int argc, char ** argv) {
  CLI::App app{"weighted LoRA adapter merging, verification and evaluation"};
  app.set_version_flag("--version", std::string(k_tool_name) + " " + k_tool_version);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file supplying option defaults");
  app.require_subcommand(1);

  bool as_json = false;
  app.add_flag("--json", as_json, "emit machine-readable JSON on stdout");

  auto * merge = app.add_subcommand("merge", "merge adapters into a checkpoint");
  std::string base_path, spec_path, out_dir;
  std::string template_name = "qwen3_nothink";
  double temperature = 0.6, top_p = 0.8;
  bool force = false;
  merge->add_option("--base", base_path, "base checkpoint")->required();
  merge->add_option("--spec", spec_path, "merge spec JSON")->required();
  merge->add_option("--out", out_dir, "output directory")->required();
  merge->add_option("--template", template_name, "chat template id for the manifest");
  merge->add_option("--temperature", temperature, "decoding preset, manifest only");
  merge->add_option("--top-p", top_p, "decoding preset, manifest only");
  merge->add_flag("--force", force, "write even when the directory reports findings");

  auto * verify = app.add_subcommand("verify", "check an export against its spec");
  std::string candidate_path;
  double tol_abs = k_tol_abs_default;
  double tol_rel = default_tol_rel();
  verify->add_option("--base", base_path, "base checkpoint")->required();
  verify->add_option("--spec", spec_path, "merge spec JSON")->required();
  verify->add_option("--candidate", candidate_path, "exported checkpoint")->required();
  verify->add_option("--tol-abs", tol_abs, "absolute tolerance");
  verify->add_option("--tol-rel", tol_rel, "relative tolerance");

  auto * attribute = app.add_subcommand(
      "attribute", "infer mixture weights and classify a checkpoint");
  std::vector<std::string> adapter_paths;
  std::string suffix = ".weight";
  attribute->add_option("--base", base_path, "base checkpoint")->required();
  attribute->add_option("--candidate", candidate_path, "checkpoint to attribute")->required();
  attribute->add_option("--adapters", adapter_paths, "candidate adapter files");
  attribute->add_option("--spec", spec_path, "declared merge spec (adds a hypothesis)");
  attribute->add_option("--target-suffix", suffix, "base tensor suffix per module");

  auto * fingerprint = app.add_subcommand("fingerprint", "digest of canonical bytes");
  std::string store_path;
  fingerprint->add_option("file", store_path, "tensor container file")->required();

  auto * lint = app.add_subcommand("lint", "check template ids and sampled generations");
  std::string train_template, eval_template, generations_path;
  lint->add_option("--train-template", train_template, "template used in training")->required();
  lint->add_option("--eval-template", eval_template, "template used in evaluation")->required();
  lint->add_option("--generations", generations_path, "JSONL or plain-text sample");

  auto * eval = app.add_subcommand("eval", "score generations against references");
  std::string records_path, label;
  bool raw = false, smooth = false, with_refusal = false, as_table = false;
  eval->add_option("--records", records_path, "JSONL eval records")->required();
  eval->add_flag("--raw", raw, "score raw text instead of the stripped answer");
  eval->add_flag("--smooth", smooth, "add-one BLEU smoothing on orders >= 2");
  eval->add_flag("--refusal", with_refusal, "include the refusal-rate probe");
  eval->add_option("--label", label, "row label for reports");
  eval->add_flag("--table", as_table, "plain-text table instead of JSON");

  auto * leak = app.add_subcommand("leak-audit", "train/eval contamination scan");
  std::string train_path, eval_path;
  int ngram = k_leak_ngram_default;
  leak->add_option("--train", train_path, "training texts, one per line")->required();
  leak->add_option("--eval", eval_path, "evaluation texts, one per line")->required();
  leak->add_option("--n", ngram, "token n-gram window");

  auto * report = app.add_subcommand("report", "join metric reports into one table");
  std::vector<std::string> report_inputs;
  report->add_option("inputs", report_inputs, "metric report JSON files")->required();

  auto * ingest = app.add_subcommand("ingest-log", "parse a trainer JSONL log");
  std::string log_path, stage_name;
  ingest->add_option("--log", log_path, "trainer log file")->required();
  ingest->add_option("--stage", stage_name, "PT or SFT")->required();

  auto * render_cmd = app.add_subcommand("render", "render a chat prompt");
  std::string messages_path;
  bool no_generation_prompt = false, as_jsonl = false;
  render_cmd->add_option("--messages", messages_path, "JSONL messages file")->required();
  render_cmd->add_option("--template", template_name, "qwen3 or qwen3_nothink");
  render_cmd->add_flag("--no-generation-prompt", no_generation_prompt,
                       "omit the assistant prologue");
  render_cmd->add_flag("--jsonl", as_jsonl, "wrap the prompt as JSONL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? k_exit_ok : k_exit_structural;
  }

  try {
    if (*merge)
      return cmd_merge(base_path, spec_path, out_dir, template_name,
                       temperature, top_p, force, as_json);
    if (*verify)
      return cmd_verify(base_path, spec_path, candidate_path, tol_abs, tol_rel,
                        as_json);
    if (*attribute)
      return cmd_attribute(base_path, adapter_paths, spec_path, candidate_path,
                           suffix);
    if (*fingerprint) return cmd_fingerprint(store_path, as_json);
    if (*lint)
      return cmd_lint(train_template, eval_template, generations_path, as_json);
    if (*eval)
      return cmd_eval(records_path, raw, smooth, with_refusal, label, as_table);
    if (*leak) return cmd_leak_audit(train_path, eval_path, ngram);
    if (*report) return cmd_report(report_inputs, as_json);
    if (*ingest) return cmd_ingest_log(log_path, stage_name);
    if (*render_cmd)
      return cmd_render(messages_path, template_name, no_generation_prompt,
                        as_jsonl);
  } catch (const error & e) {
    std::cerr << "error: " << e.what() << '\n';
    return k_exit_structural;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return k_exit_structural;
  }
  return k_exit_structural;
}

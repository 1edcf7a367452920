#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace loramix {

struct EvalRecord {
  std::string id;
  std::string prompt;
  std::string generation;
  std::string reference;
  std::map<char, std::string> options; // keyed A..E
  std::optional<char> gold_letter;     // requires options to contain it
};

enum class score_basis { raw_text, stripped_answer };
const char * score_basis_name(score_basis basis);

inline constexpr const char * k_tokenizer_tag = "nfc_lower_ws_asciipunct";

inline const std::vector<std::string> k_default_refusal_markers = {
    "i cannot", "i can't",       "i won't",
    "unable to help", "cannot assist", "refuse"};

inline constexpr int k_leak_ngram_default = 13;

// Unicode NFC, lowercase, whitespace split, ASCII punctuation stripped off
// both token ends, empties dropped.
std::vector<std::string> tokenize(const std::string & text);

// Corpus BLEU with orders 1..4: clipped matches pooled over all pairs,
// geometric mean, brevity penalty exp(1 - ref/hyp) when hyp < ref. Scored
// x100; any zero pooled precision gives 0 unless add-one smoothing (orders
// >= 2) is on.
double corpus_bleu4(const std::vector<std::pair<std::string, std::string>> & pairs,
                    bool smooth = false);

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PRF rouge_n(const std::string & hyp, const std::string & ref, int n);
PRF rouge_l(const std::string & hyp, const std::string & ref);

// Cascade on the think-stripped answer: first standalone option letter
// (optionally trailed by . ) :), else the unique option whose text appears
// verbatim case-insensitively, else nothing.
std::optional<char> mc_extract(const std::string & generation,
                               const std::map<char, std::string> & options);

struct McResult {
  double accuracy = 0.0;
  std::uint64_t unanswered = 0;
};

McResult mc_accuracy(const std::vector<EvalRecord> & records);

double refusal_rate(const std::vector<EvalRecord> & records,
                    const std::vector<std::string> & markers =
                        k_default_refusal_markers);

struct LeakExample {
  std::string eval_id;
  std::string ngram;
};

struct LeakReport {
  std::uint64_t exact_dups = 0;
  std::uint64_t contaminated_eval = 0;
  double contamination_fraction = 0.0;
  std::vector<LeakExample> examples;
};

// Token-level n-gram overlap between train and eval texts plus normalized
// exact-duplicate detection. eval_ids (optional) label the examples.
LeakReport leakage_audit(const std::vector<std::string> & train_texts,
                         const std::vector<std::string> & eval_texts,
                         int n = k_leak_ngram_default,
                         const std::vector<std::string> & eval_ids = {});

struct MetricReport {
  std::string label;
  double bleu4 = 0.0;
  double rouge1_f = 0.0;
  double rouge2_f = 0.0;
  double rougeL_f = 0.0;
  std::optional<double> mc_accuracy;
  std::uint64_t mc_unanswered = 0;
  std::optional<double> refusal_rate;
  std::uint64_t n_records = 0;
  score_basis scored_on = score_basis::stripped_answer;
  bool bleu_smoothed = false;
  std::string tokenizer = k_tokenizer_tag;
};

struct EvalOptions {
  score_basis basis = score_basis::stripped_answer;
  bool bleu_smooth = false;
  bool with_refusal = false;
  std::vector<std::string> refusal_markers = k_default_refusal_markers;
  std::string label;
};

MetricReport evaluate(const std::vector<EvalRecord> & records,
                      const EvalOptions & options = {});

std::vector<EvalRecord> load_records_jsonl(const std::filesystem::path & path);

std::string metric_report_json(const MetricReport & report);
std::string leak_report_json(const LeakReport & report);

// Aligned plain-text rows, columns BLEU-4, R-1, R-2, R-L, one per report.
std::string metric_table(const std::vector<MetricReport> & reports);

} // namespace loramix

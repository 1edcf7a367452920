#include "loramix/text_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "loramix/chat_template.hpp"
#include "loramix/errors.hpp"

namespace loramix {

namespace {

using json = nlohmann::json;

bool is_ascii_punct(char c) {
  static const std::string set = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
  return set.find(c) != std::string::npos;
}

std::string strip_ascii_punct(const std::string & token) {
  std::size_t begin = 0;
  std::size_t end = token.size();
  while (begin < end && is_ascii_punct(token[begin])) ++begin;
  while (end > begin && is_ascii_punct(token[end - 1])) --end;
  return token.substr(begin, end - begin);
}

char ascii_lower(char c) {
  return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c;
}

std::string ascii_lower_str(const std::string & s) {
  std::string out = s;
  for (char & c : out) c = ascii_lower(c);
  return out;
}

// n-gram multiset keyed by tokens joined with an unlikely separator byte.
using Counts = std::unordered_map<std::string, std::uint64_t>;

Counts ngram_counts(const std::vector<std::string> & tokens, int n) {
  Counts counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) {
      key += '\x1f';
      key += tokens[i + j];
    }
    counts[key] += 1;
  }
  return counts;
}

PRF prf_from_overlap(double overlap, double hyp_total, double ref_total) {
  PRF out;
  out.precision = hyp_total > 0 ? overlap / hyp_total : 0.0;
  out.recall = ref_total > 0 ? overlap / ref_total : 0.0;
  out.f1 = out.precision + out.recall > 0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  out.precision *= 100.0;
  out.recall *= 100.0;
  out.f1 *= 100.0;
  return out;
}

std::string hyp_text(const EvalRecord & r, score_basis basis) {
  if (basis == score_basis::raw_text) return r.generation;
  return strip_think(r.generation).answer;
}

void require_records(const std::vector<EvalRecord> & records) {
  if (records.empty()) fail(errc::empty_corpus, "no evaluation records");
}

} // namespace

const char * score_basis_name(score_basis basis) {
  return basis == score_basis::raw_text ? "RawText" : "StrippedAnswer";
}

std::vector<std::string> tokenize(const std::string & text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2 * nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || nfc == nullptr)
    fail(errc::bad_config, "ICU NFC normalizer unavailable");

  icu::UnicodeString u = icu::UnicodeString::fromUTF8(text);
  icu::UnicodeString normalized = nfc->normalize(u, status);
  if (U_FAILURE(status))
    fail(errc::bad_config, "Unicode normalization failed");
  normalized.toLower(icu::Locale::getRoot());

  std::vector<std::string> tokens;
  std::string current;
  for (std::int32_t i = 0; i < normalized.length();) {
    const UChar32 c = normalized.char32At(i);
    i += U16_LENGTH(c);
    if (u_hasBinaryProperty(c, UCHAR_WHITE_SPACE)) {
      if (!current.empty()) {
        std::string tok = strip_ascii_punct(current);
        if (!tok.empty()) tokens.push_back(std::move(tok));
        current.clear();
      }
      continue;
    }
    icu::UnicodeString(c).toUTF8String(current);
  }
  if (!current.empty()) {
    std::string tok = strip_ascii_punct(current);
    if (!tok.empty()) tokens.push_back(std::move(tok));
  }
  return tokens;
}

double corpus_bleu4(const std::vector<std::pair<std::string, std::string>> & pairs,
                    bool smooth) {
  if (pairs.empty()) fail(errc::empty_corpus, "no hypothesis/reference pairs");

  std::uint64_t match[5] = {0, 0, 0, 0, 0};
  std::uint64_t total[5] = {0, 0, 0, 0, 0};
  std::uint64_t hyp_len = 0;
  std::uint64_t ref_len = 0;

  for (const auto & [hyp, ref] : pairs) {
    const std::vector<std::string> h = tokenize(hyp);
    const std::vector<std::string> r = tokenize(ref);
    hyp_len += h.size();
    ref_len += r.size();
    for (int n = 1; n <= 4; ++n) {
      const Counts hc = ngram_counts(h, n);
      const Counts rc = ngram_counts(r, n);
      for (const auto & [gram, count] : hc) {
        const auto it = rc.find(gram);
        if (it != rc.end()) match[n] += std::min(count, it->second);
      }
      if (h.size() + 1 > static_cast<std::size_t>(n))
        total[n] += h.size() - n + 1;
    }
  }

  double log_sum = 0.0;
  for (int n = 1; n <= 4; ++n) {
    std::uint64_t m = match[n];
    std::uint64_t t = total[n];
    if (smooth && n >= 2) {
      m += 1;
      t += 1;
    }
    if (m == 0 || t == 0) return 0.0;
    log_sum += std::log(static_cast<double>(m) / static_cast<double>(t));
  }
  if (hyp_len == 0) return 0.0;
  const double bp = hyp_len >= ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) /
                                             static_cast<double>(hyp_len));
  return 100.0 * bp * std::exp(log_sum / 4.0);
}

PRF rouge_n(const std::string & hyp, const std::string & ref, int n) {
  if (n < 1) fail(errc::bad_config, "rouge_n needs n >= 1");
  const Counts hc = ngram_counts(tokenize(hyp), n);
  const Counts rc = ngram_counts(tokenize(ref), n);
  std::uint64_t overlap = 0;
  std::uint64_t hyp_total = 0;
  std::uint64_t ref_total = 0;
  for (const auto & [gram, count] : hc) {
    hyp_total += count;
    const auto it = rc.find(gram);
    if (it != rc.end()) overlap += std::min(count, it->second);
  }
  for (const auto & [gram, count] : rc) ref_total += count;
  return prf_from_overlap(static_cast<double>(overlap),
                          static_cast<double>(hyp_total),
                          static_cast<double>(ref_total));
}

PRF rouge_l(const std::string & hyp, const std::string & ref) {
  const std::vector<std::string> h = tokenize(hyp);
  const std::vector<std::string> r = tokenize(ref);
  const std::size_t hn = h.size();
  const std::size_t rn = r.size();
  if (hn == 0 || rn == 0) return PRF{};

  // Two-row LCS table.
  std::vector<std::uint32_t> prev(rn + 1, 0), cur(rn + 1, 0);
  for (std::size_t i = 1; i <= hn; ++i) {
    for (std::size_t j = 1; j <= rn; ++j) {
      if (h[i - 1] == r[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = prev[rn];
  return prf_from_overlap(lcs, static_cast<double>(hn), static_cast<double>(rn));
}

std::optional<char> mc_extract(const std::string & generation,
                               const std::map<char, std::string> & options) {
  const std::string answer = strip_think(generation).answer;

  auto is_word = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9');
  };

  // Rule 1: first standalone option letter, optional trailing . ) :
  for (std::size_t i = 0; i < answer.size(); ++i) {
    const char c = answer[i];
    if (!options.count(c)) continue;
    if (i > 0 && is_word(answer[i - 1])) continue;
    std::size_t j = i + 1;
    if (j < answer.size() &&
        (answer[j] == '.' || answer[j] == ')' || answer[j] == ':'))
      ++j;
    if (j < answer.size() && is_word(answer[j])) continue;
    return c;
  }

  // Rule 2: unique option text appearing verbatim, case-insensitive.
  const std::string lower = ascii_lower_str(answer);
  std::optional<char> found;
  for (const auto & [letter, text] : options) {
    if (text.empty()) continue;
    if (lower.find(ascii_lower_str(text)) == std::string::npos) continue;
    if (found) return std::nullopt; // ambiguous
    found = letter;
  }
  return found;
}

McResult mc_accuracy(const std::vector<EvalRecord> & records) {
  require_records(records);
  McResult result;
  std::uint64_t correct = 0;
  for (const EvalRecord & r : records) {
    if (!r.gold_letter)
      fail(errc::bad_config, "record '" + r.id + "' lacks a gold letter");
    if (!r.options.count(*r.gold_letter))
      fail(errc::bad_config,
           "record '" + r.id + "' gold letter is not among its options");
    const std::optional<char> got = mc_extract(r.generation, r.options);
    if (!got)
      result.unanswered += 1;
    else if (*got == *r.gold_letter)
      correct += 1;
  }
  result.accuracy = static_cast<double>(correct) /
                    static_cast<double>(records.size());
  return result;
}

double refusal_rate(const std::vector<EvalRecord> & records,
                    const std::vector<std::string> & markers) {
  require_records(records);
  if (markers.empty()) fail(errc::bad_config, "refusal marker list is empty");
  std::uint64_t flagged = 0;
  for (const EvalRecord & r : records) {
    const std::string answer = ascii_lower_str(strip_think(r.generation).answer);
    for (const std::string & m : markers) {
      if (answer.find(ascii_lower_str(m)) != std::string::npos) {
        flagged += 1;
        break;
      }
    }
  }
  return static_cast<double>(flagged) / static_cast<double>(records.size());
}

LeakReport leakage_audit(const std::vector<std::string> & train_texts,
                         const std::vector<std::string> & eval_texts,
                         int n, const std::vector<std::string> & eval_ids) {
  if (n < 1) fail(errc::bad_config, "n-gram window must be >= 1");
  if (train_texts.empty()) fail(errc::empty_corpus, "train side is empty");
  if (eval_texts.empty()) fail(errc::empty_corpus, "eval side is empty");

  std::unordered_set<std::string> train_ngrams;
  std::unordered_set<std::string> train_norm;
  for (const std::string & text : train_texts) {
    const std::vector<std::string> tokens = tokenize(text);
    std::string joined;
    for (const std::string & t : tokens) {
      if (!joined.empty()) joined += ' ';
      joined += t;
    }
    train_norm.insert(joined);
    for (const auto & [gram, count] : ngram_counts(tokens, n))
      train_ngrams.insert(gram);
  }

  LeakReport report;
  for (std::size_t e = 0; e < eval_texts.size(); ++e) {
    const std::vector<std::string> tokens = tokenize(eval_texts[e]);
    std::string joined;
    for (const std::string & t : tokens) {
      if (!joined.empty()) joined += ' ';
      joined += t;
    }
    if (train_norm.count(joined)) report.exact_dups += 1;

    bool contaminated = false;
    for (std::size_t i = 0; !contaminated && i + n <= tokens.size(); ++i) {
      std::string key = tokens[i];
      std::string shown = tokens[i];
      for (int j = 1; j < n; ++j) {
        key += '\x1f';
        key += tokens[i + j];
        shown += ' ';
        shown += tokens[i + j];
      }
      if (train_ngrams.count(key)) {
        contaminated = true;
        report.examples.push_back(
            {e < eval_ids.size() ? eval_ids[e] : "eval[" + std::to_string(e) + "]",
             shown});
      }
    }
    if (contaminated) report.contaminated_eval += 1;
  }
  report.contamination_fraction =
      static_cast<double>(report.contaminated_eval) /
      static_cast<double>(eval_texts.size());
  return report;
}

MetricReport evaluate(const std::vector<EvalRecord> & records,
                      const EvalOptions & options) {
  require_records(records);

  MetricReport report;
  report.label = options.label;
  report.n_records = records.size();
  report.scored_on = options.basis;
  report.bleu_smoothed = options.bleu_smooth;

  std::vector<std::pair<std::string, std::string>> pairs;
  double r1 = 0.0, r2 = 0.0, rl = 0.0;
  for (const EvalRecord & r : records) {
    const std::string hyp = hyp_text(r, options.basis);
    pairs.emplace_back(hyp, r.reference);
    r1 += rouge_n(hyp, r.reference, 1).f1;
    r2 += rouge_n(hyp, r.reference, 2).f1;
    rl += rouge_l(hyp, r.reference).f1;
  }
  report.bleu4 = corpus_bleu4(pairs, options.bleu_smooth);
  report.rouge1_f = r1 / static_cast<double>(records.size());
  report.rouge2_f = r2 / static_cast<double>(records.size());
  report.rougeL_f = rl / static_cast<double>(records.size());

  const bool all_mc = std::all_of(records.begin(), records.end(),
                                  [](const EvalRecord & r) {
                                    return r.gold_letter.has_value();
                                  });
  if (all_mc) {
    const McResult mc = mc_accuracy(records);
    report.mc_accuracy = mc.accuracy;
    report.mc_unanswered = mc.unanswered;
  }
  if (options.with_refusal)
    report.refusal_rate = refusal_rate(records, options.refusal_markers);
  return report;
}

std::vector<EvalRecord> load_records_jsonl(const std::filesystem::path & path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_failure, "cannot open '" + path.string() + "'");

  std::vector<EvalRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception & e) {
      fail(errc::bad_config, path.string() + ":" + std::to_string(lineno) +
                                 ": not valid JSON: " + e.what());
    }
    if (!doc.is_object())
      fail(errc::bad_config, path.string() + ":" + std::to_string(lineno) +
                                 ": record is not a JSON object");
    EvalRecord r;
    r.id = doc.value("id", "line" + std::to_string(lineno));
    r.prompt = doc.value("prompt", "");
    r.generation = doc.value("generation", "");
    r.reference = doc.value("reference", "");
    if (doc.contains("options")) {
      for (const auto & [letter, text] : doc["options"].items()) {
        if (letter.size() != 1 || letter[0] < 'A' || letter[0] > 'E')
          fail(errc::bad_config, path.string() + ":" + std::to_string(lineno) +
                                     ": option keys must be single letters A-E");
        r.options[letter[0]] = text.get<std::string>();
      }
    }
    if (doc.contains("gold_letter")) {
      const std::string g = doc["gold_letter"].get<std::string>();
      if (g.size() != 1 || !r.options.count(g[0]))
        fail(errc::bad_config, path.string() + ":" + std::to_string(lineno) +
                                   ": gold_letter must name one of the options");
      r.gold_letter = g[0];
    }
    records.push_back(std::move(r));
  }
  if (records.empty())
    fail(errc::empty_corpus, "'" + path.string() + "' holds no records");
  return records;
}

std::string metric_report_json(const MetricReport & report) {
  json doc;
  doc["bleu4"] = report.bleu4;
  doc["bleu_smoothed"] = report.bleu_smoothed;
  doc["label"] = report.label;
  if (report.mc_accuracy) {
    doc["mc_accuracy"] = *report.mc_accuracy;
    doc["mc_unanswered"] = report.mc_unanswered;
  }
  doc["n_records"] = report.n_records;
  if (report.refusal_rate) doc["refusal_rate"] = *report.refusal_rate;
  doc["rouge1_f"] = report.rouge1_f;
  doc["rouge2_f"] = report.rouge2_f;
  doc["rougeL_f"] = report.rougeL_f;
  doc["scored_on"] = score_basis_name(report.scored_on);
  doc["tokenizer"] = report.tokenizer;
  return doc.dump(2);
}

std::string leak_report_json(const LeakReport & report) {
  json examples = json::array();
  for (const LeakExample & e : report.examples)
    examples.push_back({{"eval_id", e.eval_id}, {"ngram", e.ngram}});
  json doc;
  doc["contaminated_eval"] = report.contaminated_eval;
  doc["contamination_fraction"] = report.contamination_fraction;
  doc["exact_dups"] = report.exact_dups;
  doc["examples"] = std::move(examples);
  return doc.dump(2);
}

std::string metric_table(const std::vector<MetricReport> & reports) {
  std::ostringstream out;
  std::size_t label_width = std::strlen("run");
  for (const MetricReport & r : reports)
    label_width = std::max(label_width, r.label.size());

  auto cell = [](double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%8.2f", v);
    return std::string(buf);
  };

  out << std::string(label_width, ' ') << "    BLEU-4      R-1      R-2      R-L\n";
  for (const MetricReport & r : reports) {
    out << r.label << std::string(label_width - r.label.size(), ' ') << ' '
        << cell(r.bleu4) << ' ' << cell(r.rouge1_f) << ' ' << cell(r.rouge2_f)
        << ' ' << cell(r.rougeL_f);
    if (r.mc_accuracy) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%8.3f", *r.mc_accuracy);
      out << "  MC" << buf;
    }
    out << '\n';
  }
  return out.str();
}

} // namespace loramix

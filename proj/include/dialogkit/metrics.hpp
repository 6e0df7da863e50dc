#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dialogkit/ingest.hpp"
#include "json.hpp"

namespace dialogkit {

// Normative token units for every metric: split on whitespace when the text
// contains any, otherwise one token per code point.
std::vector<std::string> metric_tokenize(std::string_view text);

// Multiset-overlap unigram F1. Zero when either side is empty or the overlap
// is empty.
double unigram_f1(std::string_view hypothesis, std::string_view reference);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

// LCS F-measure with beta = 1.
double rouge_l(std::string_view hypothesis, std::string_view reference);

// Corpus-level BLEU-4: clipped modified n-gram precisions for n = 1..4,
// geometric mean with zero precisions replaced by 1e-9 inside the log, and
// the standard brevity penalty. Throws on length mismatch.
double bleu4(const std::vector<std::string>& hypotheses,
             const std::vector<std::string>& references);

// Unique n-grams over total n-grams, pooled across all hypotheses.
double distinct_n(const std::vector<std::string>& hypotheses, int n);

struct EvalInstance {
  std::vector<std::string> context;
  std::string reference;
  std::string hypothesis;
};

EvalInstance eval_instance_from_json(const nlohmann::json& j);
nlohmann::json eval_instance_to_json(const EvalInstance& inst);

// Test-set membership flags; an instance can belong to several sets.
struct CategoryFlags {
  bool single = false;  // exactly one context utterance
  bool multi = false;   // more than one
  bool long_resp = false;  // response tokens exceed total context tokens
  bool qa = false;         // final context utterance looks like a question
};

const std::vector<std::string>& default_question_markers();

CategoryFlags categorize(const std::vector<std::string>& context, std::string_view response,
                         const std::vector<std::string>& question_markers =
                             default_question_markers());
CategoryFlags categorize_session(const DialogueSession& s);

// One row of the evaluation table. Scores are stored in [0, 1]; rendering
// multiplies by 100.
struct EvalRow {
  std::string name;
  std::size_t count = 0;
  double f1 = 0.0;
  double rouge = 0.0;
  double bleu = 0.0;
  double dist2 = 0.0;
  double dist3 = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // Single, Multi, Long, QA, Overall

  nlohmann::json to_json() const;
  std::string render() const;
};

EvalReport evaluate(const std::vector<EvalInstance>& instances);

}  // namespace dialogkit

#include "dialogkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "dialogkit/util.hpp"

namespace dialogkit {

std::vector<std::string> metric_tokenize(std::string_view text) {
  if (text.empty()) return {};
  if (has_space(text)) return split_ws(text);
  std::vector<std::string> toks;
  for (uint32_t cp : utf8::decode(text)) {
    std::string t;
    utf8::append(t, cp);
    toks.push_back(std::move(t));
  }
  return toks;
}

namespace {

std::unordered_map<std::string, std::size_t> count_tokens(
    const std::vector<std::string>& toks) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& t : toks) ++counts[t];
  return counts;
}

}  // namespace

double unigram_f1(std::string_view hypothesis, std::string_view reference) {
  auto hyp = metric_tokenize(hypothesis);
  auto ref = metric_tokenize(reference);
  if (hyp.empty() || ref.empty()) return 0.0;
  auto hyp_counts = count_tokens(hyp);
  auto ref_counts = count_tokens(ref);
  std::size_t overlap = 0;
  for (const auto& [tok, c] : hyp_counts) {
    auto it = ref_counts.find(tok);
    if (it != ref_counts.end()) overlap += std::min(c, it->second);
  }
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(hyp.size());
  const double r = static_cast<double>(overlap) / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::string_view hypothesis, std::string_view reference) {
  auto hyp = metric_tokenize(hypothesis);
  auto ref = metric_tokenize(reference);
  if (hyp.empty() || ref.empty()) return 0.0;
  const std::size_t lcs = lcs_length(hyp, ref);
  if (lcs == 0) return 0.0;
  const double p = static_cast<double>(lcs) / static_cast<double>(hyp.size());
  const double r = static_cast<double>(lcs) / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

namespace {

void count_ngrams(const std::vector<std::string>& toks, int n,
                  std::map<std::vector<std::string>, std::size_t>& out) {
  if (toks.size() < static_cast<std::size_t>(n)) return;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
    std::vector<std::string> gram(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                  toks.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++out[std::move(gram)];
  }
}

}  // namespace

double bleu4(const std::vector<std::string>& hypotheses,
             const std::vector<std::string>& references) {
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("bleu4: hypothesis and reference counts differ");

  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  std::size_t matched[4] = {0, 0, 0, 0};
  std::size_t total[4] = {0, 0, 0, 0};

  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    auto hyp = metric_tokenize(hypotheses[s]);
    auto ref = metric_tokenize(references[s]);
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (int n = 1; n <= 4; ++n) {
      std::map<std::vector<std::string>, std::size_t> hyp_grams, ref_grams;
      count_ngrams(hyp, n, hyp_grams);
      count_ngrams(ref, n, ref_grams);
      for (const auto& [gram, c] : hyp_grams) {
        total[n - 1] += c;
        auto it = ref_grams.find(gram);
        if (it != ref_grams.end()) matched[n - 1] += std::min(c, it->second);
      }
    }
  }
  if (hyp_len == 0) return 0.0;

  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    double p = total[n] > 0
                   ? static_cast<double>(matched[n]) / static_cast<double>(total[n])
                   : 0.0;
    if (p <= 0.0) p = 1e-9;
    log_sum += std::log(p) / 4.0;
  }
  const double bp =
      hyp_len < ref_len
          ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len))
          : 1.0;
  return bp * std::exp(log_sum);
}

double distinct_n(const std::vector<std::string>& hypotheses, int n) {
  std::set<std::vector<std::string>> unique;
  std::size_t total = 0;
  for (const auto& h : hypotheses) {
    auto toks = metric_tokenize(h);
    if (toks.size() < static_cast<std::size_t>(n)) continue;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
      std::vector<std::string> gram(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                    toks.begin() + static_cast<std::ptrdiff_t>(i + n));
      unique.insert(std::move(gram));
      ++total;
    }
  }
  if (total == 0) return 0.0;
  return static_cast<double>(unique.size()) / static_cast<double>(total);
}

EvalInstance eval_instance_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("context") || !j["context"].is_array() ||
      !j.contains("reference") || !j.contains("hypothesis"))
    throw std::runtime_error("instance needs context[], reference, hypothesis");
  EvalInstance inst;
  for (const auto& u : j["context"]) inst.context.push_back(u.get<std::string>());
  inst.reference = j["reference"].get<std::string>();
  inst.hypothesis = j["hypothesis"].get<std::string>();
  if (inst.reference.empty() || inst.hypothesis.empty())
    throw std::runtime_error("reference and hypothesis must be non-empty");
  return inst;
}

nlohmann::json eval_instance_to_json(const EvalInstance& inst) {
  nlohmann::json j;
  j["context"] = inst.context;
  j["reference"] = inst.reference;
  j["hypothesis"] = inst.hypothesis;
  return j;
}

const std::vector<std::string>& default_question_markers() {
  static const std::vector<std::string> markers = {"吗", "呢",   "什么",
                                                   "谁", "哪",   "怎么",
                                                   "为什么"};
  return markers;
}

CategoryFlags categorize(const std::vector<std::string>& context, std::string_view response,
                         const std::vector<std::string>& question_markers) {
  CategoryFlags flags;
  flags.single = context.size() == 1;
  flags.multi = context.size() > 1;

  std::size_t ctx_tokens = 0;
  for (const auto& u : context) ctx_tokens += metric_tokenize(u).size();
  flags.long_resp = metric_tokenize(response).size() > ctx_tokens;

  if (!context.empty()) {
    const std::string& last = context.back();
    auto cps = utf8::decode(last);
    if (!cps.empty() && (cps.back() == '?' || cps.back() == 0xFF1F)) {
      flags.qa = true;
    } else {
      for (const auto& m : question_markers) {
        if (last.find(m) != std::string::npos) {
          flags.qa = true;
          break;
        }
      }
    }
  }
  return flags;
}

CategoryFlags categorize_session(const DialogueSession& s) {
  if (s.utterances.size() < 2) return {};
  std::vector<std::string> context(s.utterances.begin(), s.utterances.end() - 1);
  return categorize(context, s.utterances.back());
}

namespace {

EvalRow compute_row(const std::string& name, const std::vector<const EvalInstance*>& insts) {
  EvalRow row;
  row.name = name;
  row.count = insts.size();
  if (insts.empty()) return row;
  std::vector<std::string> hyps, refs;
  hyps.reserve(insts.size());
  refs.reserve(insts.size());
  double f1_sum = 0.0;
  double rouge_sum = 0.0;
  for (const EvalInstance* inst : insts) {
    f1_sum += unigram_f1(inst->hypothesis, inst->reference);
    rouge_sum += rouge_l(inst->hypothesis, inst->reference);
    hyps.push_back(inst->hypothesis);
    refs.push_back(inst->reference);
  }
  row.f1 = f1_sum / static_cast<double>(insts.size());
  row.rouge = rouge_sum / static_cast<double>(insts.size());
  row.bleu = bleu4(hyps, refs);
  row.dist2 = distinct_n(hyps, 2);
  row.dist3 = distinct_n(hyps, 3);
  return row;
}

}  // namespace

EvalReport evaluate(const std::vector<EvalInstance>& instances) {
  std::vector<const EvalInstance*> single, multi, long_resp, qa, overall;
  for (const auto& inst : instances) {
    auto flags = categorize(inst.context, inst.reference);
    if (flags.single) single.push_back(&inst);
    if (flags.multi) multi.push_back(&inst);
    if (flags.long_resp) long_resp.push_back(&inst);
    if (flags.qa) qa.push_back(&inst);
    overall.push_back(&inst);
  }
  EvalReport report;
  report.rows.push_back(compute_row("Single", single));
  report.rows.push_back(compute_row("Multi", multi));
  report.rows.push_back(compute_row("Long", long_resp));
  report.rows.push_back(compute_row("QA", qa));
  report.rows.push_back(compute_row("Overall", overall));
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json jr;
    jr["test_set"] = r.name;
    jr["count"] = r.count;
    jr["f1"] = r.f1 * 100.0;
    jr["rouge_l"] = r.rouge * 100.0;
    jr["bleu4"] = r.bleu * 100.0;
    jr["dist2"] = r.dist2 * 100.0;
    jr["dist3"] = r.dist3 * 100.0;
    rows_json.push_back(std::move(jr));
  }
  nlohmann::json j;
  j["rows"] = rows_json;
  return j;
}

std::string EvalReport::render() const {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-8s %8s %7s %7s %7s %7s %7s\n", "Test Set", "#Inst.",
                "F1", "R-L", "BLEU-4", "Dist-2", "Dist-3");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-8s %8zu %7.1f %7.1f %7.2f %7.1f %7.1f\n",
                  r.name.c_str(), r.count, r.f1 * 100.0, r.rouge * 100.0, r.bleu * 100.0,
                  r.dist2 * 100.0, r.dist3 * 100.0);
    out += buf;
  }
  return out;
}

}  // namespace dialogkit

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <unordered_set>
#include <vector>

#include "dialogkit/ingest.hpp"
#include "json.hpp"

namespace dialogkit {

struct CleaningConfig {
  int max_turns = 30;        // sessions longer than this get split
  int repeat_cap = 6;        // units repeated more than this collapse to one copy
  int min_resp_tokens = 2;   // response length bounds, in non-space code points
  int max_resp_tokens = 128;
  int highfreq_top_k = 1000;
  double highfreq_ratio = 0.9;
  std::vector<std::string> generic_patterns;  // anchored regexes, full-match on the response
  std::vector<std::string> ad_keywords;
  std::string blocklist_path;

  CleaningConfig();

  void validate() const;  // throws ConfigError

  static std::vector<std::string> default_generic_patterns();
  static std::vector<std::string> default_ad_keywords();
};

// Rules in pipeline order. The first four modify text, the rest drop
// sessions; turn_split appears on both sides (split windows too short to be a
// dialogue are dropped under it).
enum class Rule {
  tag_strip,
  url_strip,
  turn_split,
  repeat_collapse,
  length,
  ad,
  highfreq_trigram,
  generic,
  echo,
  blocklist,
};

inline constexpr std::size_t kNumRules = 10;
const char* rule_name(Rule r);

struct FilterVerdict {
  bool kept = true;
  std::optional<Rule> rule_fired;
};

struct NormalizeResult {
  std::string text;
  bool tag_strip = false;
  bool url_strip = false;
  bool repeat_collapse = false;
};

// Strips platform reply/repost tags and URLs, collapses whitespace runs and
// units of 1-10 code points repeated more than repeat_cap times, and trims.
// Applied to a fixpoint, so the result is idempotent.
NormalizeResult normalize_utterance_ex(std::string_view text, int repeat_cap = 6);
std::string normalize_utterance(std::string_view text, int repeat_cap = 6);

// Identity when the session has at most max_turns utterances; otherwise
// consecutive windows of max_turns - 1. Windows shorter than two utterances
// are dropped and counted into *dropped_short.
std::vector<DialogueSession> split_long_session(const DialogueSession& s, int max_turns,
                                                std::size_t* dropped_short = nullptr);

// Character-trigram counter over responses; shards merge associatively.
class TrigramCounter {
 public:
  void add_response(std::string_view response);
  void add_session(const DialogueSession& s);  // counts the final utterance
  void merge(const TrigramCounter& other);

  // top_k most frequent trigrams, ties broken lexicographically. Fewer than
  // top_k distinct trigrams returns them all.
  std::vector<std::string> top(int top_k) const;
  std::unordered_set<std::string> top_set(int top_k) const;

 private:
  std::map<std::string, uint64_t> counts_;
};

std::unordered_set<std::string> build_highfreq_trigrams(
    const std::vector<DialogueSession>& corpus, int top_k);

class Blocklist {
 public:
  Blocklist() = default;
  explicit Blocklist(std::vector<std::string> words);
  static Blocklist load(const std::string& path);  // throws ConfigError when missing

  bool contains_any(std::string_view text) const;
  std::size_t size() const { return words_.size(); }

 private:
  std::vector<std::string> words_;
};

class GenericMatcher {
 public:
  GenericMatcher() = default;
  explicit GenericMatcher(const std::vector<std::string>& patterns);  // throws ConfigError
  bool matches(const std::string& text) const;

 private:
  std::vector<std::regex> compiled_;
};

// Drop rules 5-9 plus the blocklist, applied in spec order to an already
// normalized, already split session. The last utterance is the response.
FilterVerdict filter_session(const DialogueSession& s, const CleaningConfig& config,
                             const std::unordered_set<std::string>& highfreq,
                             const Blocklist& blocklist, const GenericMatcher& generic);
FilterVerdict filter_session(const DialogueSession& s, const CleaningConfig& config,
                             const std::unordered_set<std::string>& highfreq,
                             const Blocklist& blocklist);

struct FilterReport {
  uint64_t sessions_in = 0;    // raw sessions fed to the pipeline
  uint64_t sessions_seen = 0;  // candidates after splitting (each window counts)
  uint64_t sessions_kept = 0;
  std::array<uint64_t, kNumRules> drops{};
  std::array<uint64_t, kNumRules> mods{};

  void merge(const FilterReport& other);
  uint64_t total_drops() const;
  bool reconciles() const { return sessions_seen == sessions_kept + total_drops(); }

  nlohmann::json to_json() const;
  std::string render() const;
};

// Full per-session cleaning: normalize, split, filter, count. One instance
// per shard; merge the reports afterwards.
class CleanPipeline {
 public:
  CleanPipeline(CleaningConfig config, std::unordered_set<std::string> highfreq,
                Blocklist blocklist);

  std::vector<DialogueSession> process(const DialogueSession& s);
  const FilterReport& report() const { return report_; }

 private:
  CleaningConfig config_;
  std::unordered_set<std::string> highfreq_;
  Blocklist blocklist_;
  GenericMatcher generic_;
  FilterReport report_;
};

}  // namespace dialogkit

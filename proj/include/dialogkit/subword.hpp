#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dialogkit {

// Reserved ids 0-4, in this order.
namespace special {
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kSep = 2;
inline constexpr int kEos = 3;
inline constexpr int kBos = 4;
inline constexpr int kCount = 5;
const std::array<std::string, 5>& strings();
}  // namespace special

// Score a Viterbi path pays per unknown character. Far below any real token
// so unknown pieces never displace vocabulary tokens.
inline constexpr double kUnkScore = -1e4;

struct VocabEntry {
  std::string token;
  double log_prob = 0.0;
};

namespace detail {
struct TransparentStringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view sv) const {
    return std::hash<std::string_view>{}(sv);
  }
};
}  // namespace detail

struct UnigramTrainerConfig {
  int target_size = 30000;  // includes the five specials
  int seed_multiplier = 10;
  double prune_keep = 0.75;
  int em_iters_per_round = 2;
  int max_piece_len = 8;  // code points
};

// Unigram language-model token inventory. Entries 0-4 are the specials; the
// probabilities of the remaining entries sum to one.
class SubwordVocab {
 public:
  SubwordVocab() = default;

  // Builds a vocabulary from non-special entries (ids are assigned after the
  // specials, in the given order). Throws when probabilities do not sum to 1
  // within 1e-6 or a token collides with a special string.
  explicit SubwordVocab(std::vector<VocabEntry> pieces,
                        UnigramTrainerConfig config = UnigramTrainerConfig{});

  int size() const { return static_cast<int>(entries_.size()); }
  const VocabEntry& entry(int id) const;
  int id_of(std::string_view token) const;  // -1 when absent; specials resolve too
  bool is_special(int id) const { return id >= 0 && id < special::kCount; }
  int max_piece_cps() const { return max_piece_cps_; }
  const UnigramTrainerConfig& config() const { return config_; }

  double prob_sum() const;  // sum of exp(log_prob) over non-special entries

  void save(const std::string& path) const;
  static SubwordVocab load(const std::string& path);

 private:
  std::vector<VocabEntry> entries_;
  // non-special pieces only; transparent hash allows string_view lookups
  std::unordered_map<std::string, int, detail::TransparentStringHash, std::equal_to<>>
      index_;
  int max_piece_cps_ = 1;
  UnigramTrainerConfig config_;

  friend std::vector<int> encode(std::string_view, const SubwordVocab&);
};

// Trains on whitespace-pre-segmented lines: candidate pieces never cross a
// whitespace boundary. Deterministic for a fixed corpus and config.
SubwordVocab train_unigram(const std::vector<std::string>& corpus,
                           const UnigramTrainerConfig& config);

// Core entry point over pre-counted segment frequencies; memory is bounded
// by the segment/candidate tables rather than the raw corpus.
SubwordVocab train_unigram(const std::map<std::string, uint64_t>& segment_freq,
                           const UnigramTrainerConfig& config);

// Maximum-likelihood Viterbi segmentation. Ties prefer fewer tokens, then the
// lexicographically smallest token sequence. Characters not covered by the
// vocabulary become unk at kUnkScore each.
std::vector<int> encode(std::string_view text, const SubwordVocab& vocab);

// encode() per whitespace-separated segment, concatenated. Whitespace acts as
// a boundary and emits nothing, matching the pre-segmented training contract.
std::vector<int> encode_words(std::string_view text, const SubwordVocab& vocab);

// Concatenates token strings; specials render empty except unk, which renders
// U+FFFD. Throws std::out_of_range on an invalid id.
std::string decode(const std::vector<int>& ids, const SubwordVocab& vocab);

}  // namespace dialogkit

#include "dialogkit/subword.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "dialogkit/util.hpp"

namespace dialogkit {

namespace special {
const std::array<std::string, 5>& strings() {
  static const std::array<std::string, 5> s = {"<pad>", "<unk>", "<sep>", "<eos>", "<bos>"};
  return s;
}
}  // namespace special

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kEmAlpha = 0.1;  // additive smoothing keeps unused pieces alive until pruned

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view sv) const {
    return std::hash<std::string_view>{}(sv);
  }
};
using PieceIndex = std::unordered_map<std::string, int, StringHash, std::equal_to<>>;

struct DpCell {
  double score = kNegInf;
  int ntok = 0;
  std::size_t prev = 0;
  int ref = -2;  // -1 = unk piece
  bool set = false;
};

struct Piece {
  std::size_t begin_cp, end_cp;
  int ref;  // -1 = unk
};

std::vector<std::string_view> path_tokens(const std::vector<DpCell>& dp,
                                          std::string_view text,
                                          const std::vector<std::size_t>& offs,
                                          std::size_t end) {
  std::vector<std::string_view> toks;
  std::size_t cur = end;
  while (cur > 0) {
    const DpCell& c = dp[cur];
    toks.push_back(text.substr(offs[c.prev], offs[cur] - offs[c.prev]));
    cur = c.prev;
  }
  std::reverse(toks.begin(), toks.end());
  return toks;
}

// Maximum-score segmentation; ties prefer fewer pieces, then the
// lexicographically smallest piece sequence. lookup(piece, &lp, &ref) fills
// log prob and a caller id for known pieces.
template <class Lookup>
std::vector<Piece> viterbi_segment(std::string_view text,
                                   const std::vector<std::size_t>& offs, int max_cps,
                                   bool allow_unk, Lookup&& lookup) {
  const std::size_t n = offs.size() - 1;
  std::vector<DpCell> dp(n + 1);
  dp[0].set = true;
  dp[0].score = 0.0;

  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t max_len = std::min<std::size_t>(static_cast<std::size_t>(max_cps), i);
    for (std::size_t len = 1; len <= max_len; ++len) {
      const std::size_t j = i - len;
      if (!dp[j].set) continue;
      std::string_view piece = text.substr(offs[j], offs[i] - offs[j]);
      double lp = 0.0;
      int ref = -2;
      if (!lookup(piece, &lp, &ref)) {
        if (!allow_unk || len != 1) continue;
        lp = kUnkScore;
        ref = -1;
      }
      const double cand_score = dp[j].score + lp;
      const int cand_ntok = dp[j].ntok + 1;
      bool take = false;
      if (!dp[i].set) {
        take = true;
      } else if (cand_score > dp[i].score) {
        take = true;
      } else if (cand_score == dp[i].score) {
        if (cand_ntok < dp[i].ntok) {
          take = true;
        } else if (cand_ntok == dp[i].ntok) {
          auto challenger = path_tokens(dp, text, offs, j);
          challenger.push_back(piece);
          auto incumbent = path_tokens(dp, text, offs, i);
          take = std::lexicographical_compare(challenger.begin(), challenger.end(),
                                              incumbent.begin(), incumbent.end());
        }
      }
      if (take) {
        dp[i] = DpCell{cand_score, cand_ntok, j, ref, true};
      }
    }
  }

  std::vector<Piece> pieces;
  if (n == 0) return pieces;
  if (!dp[n].set) throw std::logic_error("viterbi lattice has no complete path");
  std::size_t cur = n;
  while (cur > 0) {
    const DpCell& c = dp[cur];
    pieces.push_back(Piece{c.prev, cur, c.ref});
    cur = c.prev;
  }
  std::reverse(pieces.begin(), pieces.end());
  return pieces;
}

}  // namespace

SubwordVocab::SubwordVocab(std::vector<VocabEntry> pieces, UnigramTrainerConfig config)
    : config_(config) {
  const auto& sp = special::strings();
  entries_.reserve(pieces.size() + sp.size());
  for (const auto& s : sp) entries_.push_back(VocabEntry{s, 0.0});

  double sum = 0.0;
  for (auto& p : pieces) {
    for (const auto& s : sp) {
      if (p.token == s)
        throw std::invalid_argument("piece collides with special token: " + p.token);
    }
    if (p.token.empty()) throw std::invalid_argument("empty piece");
    sum += std::exp(p.log_prob);
    const int id = static_cast<int>(entries_.size());
    if (!index_.emplace(p.token, id).second)
      throw std::invalid_argument("duplicate piece: " + p.token);
    max_piece_cps_ = std::max(max_piece_cps_, static_cast<int>(utf8::length(p.token)));
    entries_.push_back(std::move(p));
  }
  if (!index_.empty() && std::abs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("piece probabilities sum to " + format_double(sum) +
                                ", expected 1");
}

const VocabEntry& SubwordVocab::entry(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id out of range");
  return entries_[static_cast<std::size_t>(id)];
}

int SubwordVocab::id_of(std::string_view token) const {
  const auto& sp = special::strings();
  for (std::size_t i = 0; i < sp.size(); ++i) {
    if (token == sp[i]) return static_cast<int>(i);
  }
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

double SubwordVocab::prob_sum() const {
  double sum = 0.0;
  for (std::size_t i = special::kCount; i < entries_.size(); ++i)
    sum += std::exp(entries_[i].log_prob);
  return sum;
}

void SubwordVocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << "#unigram-vocab v1"
      << "\ttarget_size=" << config_.target_size
      << "\tseed_multiplier=" << config_.seed_multiplier
      << "\tprune_keep=" << format_double(config_.prune_keep)
      << "\tem_iters=" << config_.em_iters_per_round
      << "\tmax_piece_len=" << config_.max_piece_len << "\n";
  for (const auto& e : entries_) {
    out << e.token << "\t" << format_double(e.log_prob) << "\n";
  }
  if (!out) throw DataError(path + ": write failed");
}

SubwordVocab SubwordVocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open vocabulary file");
  std::string line;
  if (!std::getline(in, line) || line.rfind("#unigram-vocab v1", 0) != 0)
    throw DataError(path + ": not a v1 vocabulary file");

  UnigramTrainerConfig cfg;
  std::size_t pos = 0;
  while ((pos = line.find('\t', pos)) != std::string::npos) {
    ++pos;
    std::size_t eq = line.find('=', pos);
    std::size_t end = line.find('\t', pos);
    if (end == std::string::npos) end = line.size();
    if (eq == std::string::npos || eq > end) break;
    std::string key = line.substr(pos, eq - pos);
    std::string val = line.substr(eq + 1, end - eq - 1);
    if (key == "target_size") cfg.target_size = std::atoi(val.c_str());
    if (key == "seed_multiplier") cfg.seed_multiplier = std::atoi(val.c_str());
    if (key == "prune_keep") cfg.prune_keep = std::atof(val.c_str());
    if (key == "em_iters") cfg.em_iters_per_round = std::atoi(val.c_str());
    if (key == "max_piece_len") cfg.max_piece_len = std::atoi(val.c_str());
  }

  const auto& sp = special::strings();
  std::vector<VocabEntry> pieces;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tab = line.rfind('\t');
    if (tab == std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) + ": missing tab separator");
    std::string token = line.substr(0, tab);
    double lp = std::strtod(line.c_str() + tab + 1, nullptr);
    if (lineno - 2 < sp.size()) {
      if (token != sp[lineno - 2])
        throw DataError(path + ": special tokens missing or out of order");
      continue;
    }
    pieces.push_back(VocabEntry{std::move(token), lp});
  }
  return SubwordVocab(std::move(pieces), cfg);
}

std::vector<int> encode(std::string_view text, const SubwordVocab& vocab) {
  if (text.empty()) return {};
  auto offs = utf8::offsets(text);
  auto pieces = viterbi_segment(
      text, offs, vocab.max_piece_cps(), /*allow_unk=*/true,
      [&vocab](std::string_view piece, double* lp, int* ref) {
        auto it = vocab.index_.find(piece);
        if (it == vocab.index_.end()) return false;
        *lp = vocab.entries_[static_cast<std::size_t>(it->second)].log_prob;
        *ref = it->second;
        return true;
      });
  std::vector<int> ids;
  ids.reserve(pieces.size());
  for (const auto& p : pieces) ids.push_back(p.ref < 0 ? special::kUnk : p.ref);
  return ids;
}

std::vector<int> encode_words(std::string_view text, const SubwordVocab& vocab) {
  std::vector<int> ids;
  for (const auto& seg : split_ws(text)) {
    auto part = encode(seg, vocab);
    ids.insert(ids.end(), part.begin(), part.end());
  }
  return ids;
}

std::string decode(const std::vector<int>& ids, const SubwordVocab& vocab) {
  std::string out;
  for (int id : ids) {
    const VocabEntry& e = vocab.entry(id);
    if (vocab.is_special(id)) {
      if (id == special::kUnk) out += "\xEF\xBF\xBD";  // U+FFFD
      continue;
    }
    out += e.token;
  }
  return out;
}

namespace {

struct Candidate {
  std::string token;
  uint64_t count = 0;
  uint64_t seed_score = 0;  // count * length
  bool is_char = false;
  double log_prob = 0.0;
  double usage = 0.0;
};

struct TrainerState {
  std::vector<Candidate> cands;
  PieceIndex index;
  int max_cps = 1;

  void rebuild_index() {
    index.clear();
    max_cps = 1;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      index.emplace(cands[i].token, static_cast<int>(i));
      max_cps = std::max(max_cps, static_cast<int>(utf8::length(cands[i].token)));
    }
  }
};

// One Viterbi pass over the segment corpus, accumulating hard usage counts.
void e_step(TrainerState& st, const std::map<std::string, uint64_t>& seg_freq) {
  for (auto& c : st.cands) c.usage = 0.0;
  for (const auto& [seg, freq] : seg_freq) {
    auto offs = utf8::offsets(seg);
    auto pieces = viterbi_segment(
        seg, offs, st.max_cps, /*allow_unk=*/false,
        [&st](std::string_view piece, double* lp, int* ref) {
          auto it = st.index.find(piece);
          if (it == st.index.end()) return false;
          *lp = st.cands[static_cast<std::size_t>(it->second)].log_prob;
          *ref = it->second;
          return true;
        });
    for (const auto& p : pieces)
      st.cands[static_cast<std::size_t>(p.ref)].usage += static_cast<double>(freq);
  }
}

void m_step(TrainerState& st) {
  double total = 0.0;
  for (const auto& c : st.cands) total += c.usage;
  const double denom = total + kEmAlpha * static_cast<double>(st.cands.size());
  for (auto& c : st.cands) c.log_prob = std::log((c.usage + kEmAlpha) / denom);
}

// Score of segmenting `token` without using the candidate at `self`.
double alt_score(const TrainerState& st, std::size_t self) {
  const std::string& tok = st.cands[self].token;
  auto offs = utf8::offsets(tok);
  auto pieces = viterbi_segment(
      tok, offs, st.max_cps, /*allow_unk=*/false,
      [&st, self](std::string_view piece, double* lp, int* ref) {
        auto it = st.index.find(piece);
        if (it == st.index.end()) return false;
        if (static_cast<std::size_t>(it->second) == self) return false;
        *lp = st.cands[static_cast<std::size_t>(it->second)].log_prob;
        *ref = it->second;
        return true;
      });
  double score = 0.0;
  for (const auto& p : pieces)
    score += st.cands[static_cast<std::size_t>(p.ref)].log_prob;
  return score;
}

}  // namespace

SubwordVocab train_unigram(const std::vector<std::string>& corpus,
                           const UnigramTrainerConfig& config) {
  std::map<std::string, uint64_t> seg_freq;
  for (const auto& line : corpus) {
    for (auto& seg : split_ws(line)) ++seg_freq[seg];
  }
  return train_unigram(seg_freq, config);
}

SubwordVocab train_unigram(const std::map<std::string, uint64_t>& seg_freq,
                           const UnigramTrainerConfig& config) {
  if (config.target_size <= special::kCount)
    throw ConfigError("target_size must exceed the " + std::to_string(special::kCount) +
                      " special tokens");
  if (config.prune_keep <= 0.0 || config.prune_keep >= 1.0)
    throw ConfigError("prune_keep must be in (0, 1)");
  if (config.em_iters_per_round < 1) throw ConfigError("em_iters_per_round must be >= 1");
  if (config.seed_multiplier < 1) throw ConfigError("seed_multiplier must be >= 1");
  if (config.max_piece_len < 1) throw ConfigError("max_piece_len must be >= 1");

  if (seg_freq.empty()) throw ConfigError("training corpus is empty");

  std::map<std::string, uint64_t> sub_count;
  std::set<std::string> char_set;
  for (const auto& [seg, freq] : seg_freq) {
    auto offs = utf8::offsets(seg);
    const std::size_t n = offs.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t max_len =
          std::min<std::size_t>(static_cast<std::size_t>(config.max_piece_len), n - i);
      for (std::size_t len = 1; len <= max_len; ++len) {
        std::string piece = seg.substr(offs[i], offs[i + len] - offs[i]);
        sub_count[piece] += freq;
        if (len == 1) char_set.insert(std::move(piece));
      }
    }
  }
  for (const auto& sp : special::strings()) sub_count.erase(sp);

  const int target_ns = config.target_size - special::kCount;
  if (static_cast<int>(char_set.size()) > target_ns)
    throw ConfigError("target_size " + std::to_string(config.target_size) +
                      " is below character inventory (" +
                      std::to_string(char_set.size()) + ") plus specials");

  TrainerState st;
  st.cands.reserve(sub_count.size());
  for (const auto& [tok, cnt] : sub_count) {
    Candidate c;
    c.token = tok;
    c.count = cnt;
    const uint64_t len = utf8::length(tok);
    c.seed_score = cnt * len;
    c.is_char = len == 1;
    st.cands.push_back(std::move(c));
  }

  const std::size_t seed_cap = static_cast<std::size_t>(config.seed_multiplier) *
                               static_cast<std::size_t>(config.target_size);
  if (st.cands.size() > seed_cap) {
    std::sort(st.cands.begin(), st.cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.seed_score != b.seed_score) return a.seed_score > b.seed_score;
      return a.token < b.token;
    });
    std::vector<Candidate> kept(st.cands.begin(),
                                st.cands.begin() + static_cast<std::ptrdiff_t>(seed_cap));
    for (std::size_t i = seed_cap; i < st.cands.size(); ++i) {
      if (st.cands[i].is_char) kept.push_back(st.cands[i]);  // full coverage, always
    }
    st.cands = std::move(kept);
  }
  if (static_cast<int>(st.cands.size()) < target_ns)
    throw ConfigError("corpus yields only " + std::to_string(st.cands.size()) +
                      " candidate pieces; target_size " +
                      std::to_string(config.target_size) + " is unreachable");

  // canonical candidate order so every later pass iterates identically
  std::sort(st.cands.begin(), st.cands.end(),
            [](const Candidate& a, const Candidate& b) { return a.token < b.token; });
  st.rebuild_index();

  {
    double total = 0.0;
    for (const auto& c : st.cands) total += static_cast<double>(c.seed_score);
    for (auto& c : st.cands)
      c.log_prob = std::log(static_cast<double>(c.seed_score) / total);
  }

  while (true) {
    for (int it = 0; it < config.em_iters_per_round; ++it) {
      e_step(st, seg_freq);
      m_step(st);
    }
    const std::size_t size = st.cands.size();
    if (size <= static_cast<std::size_t>(target_ns)) break;

    std::size_t new_size = std::max<std::size_t>(
        static_cast<std::size_t>(target_ns),
        static_cast<std::size_t>(std::floor(static_cast<double>(size) * config.prune_keep)));
    if (new_size >= size) new_size = size - 1;

    // likelihood lost by re-segmenting each piece's own occurrences without it
    struct Loss {
      double loss;
      std::size_t idx;
    };
    std::vector<Loss> prunable;
    for (std::size_t i = 0; i < st.cands.size(); ++i) {
      if (st.cands[i].is_char) continue;
      double loss = 0.0;
      if (st.cands[i].usage > 0.0) {
        loss = st.cands[i].usage * (st.cands[i].log_prob - alt_score(st, i));
      }
      prunable.push_back(Loss{loss, i});
    }
    std::sort(prunable.begin(), prunable.end(), [&st](const Loss& a, const Loss& b) {
      if (a.loss != b.loss) return a.loss < b.loss;
      return st.cands[a.idx].token < st.cands[b.idx].token;
    });

    std::size_t to_drop = std::min(size - new_size, prunable.size());
    std::set<std::size_t> dropped;
    for (std::size_t i = 0; i < to_drop; ++i) dropped.insert(prunable[i].idx);

    std::vector<Candidate> survivors;
    survivors.reserve(st.cands.size() - dropped.size());
    double remaining = 0.0;
    for (std::size_t i = 0; i < st.cands.size(); ++i) {
      if (dropped.count(i)) continue;
      remaining += std::exp(st.cands[i].log_prob);
      survivors.push_back(std::move(st.cands[i]));
    }
    const double log_remaining = std::log(remaining);
    for (auto& c : survivors) c.log_prob -= log_remaining;
    st.cands = std::move(survivors);
    st.rebuild_index();
  }

  std::vector<VocabEntry> pieces;
  pieces.reserve(st.cands.size());
  std::sort(st.cands.begin(), st.cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.token < b.token;
  });
  for (auto& c : st.cands) pieces.push_back(VocabEntry{std::move(c.token), c.log_prob});
  return SubwordVocab(std::move(pieces), config);
}

}  // namespace dialogkit

#include "dialogkit/clean.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>

#include "dialogkit/util.hpp"

namespace dialogkit {

CleaningConfig::CleaningConfig()
    : generic_patterns(default_generic_patterns()), ad_keywords(default_ad_keywords()) {}

void CleaningConfig::validate() const {
  if (max_turns < 2) throw ConfigError("max_turns must be >= 2");
  if (repeat_cap < 1) throw ConfigError("repeat_cap must be >= 1");
  if (min_resp_tokens > max_resp_tokens)
    throw ConfigError("min_resp_tokens must not exceed max_resp_tokens");
  if (highfreq_ratio <= 0.0 || highfreq_ratio > 1.0)
    throw ConfigError("highfreq_ratio must be in (0, 1]");
  if (highfreq_top_k < 0) throw ConfigError("highfreq_top_k must be >= 0");
}

std::vector<std::string> CleaningConfig::default_generic_patterns() {
  // Full-match patterns for contentless responses. Multibyte characters are
  // written as alternation groups because std::regex classes are byte-based.
  return {
      "(哈|呵|嘿|嘻|h|H)+(!|！|。|~|～|\\.)*",
      "(嗯|哦|噢|喔|额|呃|唉|啊)+(!|！|。|~|～|\\.)*",
      "(我也是|我也一样|同感|同上|同问|路过|沙发|顶|赞|附议|支持|顶起)(!|！|。|~|～|\\.)*",
      "(\\.|,|!|\\?|。|，|！|？|~|～|…|、|;|；|:|：| )+",
      "(6|六|溜)+",
  };
}

std::vector<std::string> CleaningConfig::default_ad_keywords() {
  return {"优惠", "折扣", "代购", "微商", "加微信", "加v", "加V", "红包",
          "抽奖", "点击链接", "下单", "包邮", "促销", "优惠券", "低价", "爆款"};
}

const char* rule_name(Rule r) {
  switch (r) {
    case Rule::tag_strip:
      return "tag_strip";
    case Rule::url_strip:
      return "url_strip";
    case Rule::turn_split:
      return "turn_split";
    case Rule::repeat_collapse:
      return "repeat_collapse";
    case Rule::length:
      return "length";
    case Rule::ad:
      return "ad";
    case Rule::highfreq_trigram:
      return "highfreq_trigram";
    case Rule::generic:
      return "generic";
    case Rule::echo:
      return "echo";
    case Rule::blocklist:
      return "blocklist";
  }
  return "?";
}

namespace {

// Reply/repost markers. Each marker is followed by a handle and an optional
// colon, all of which are removed.
constexpr std::string_view kTagMarkers[] = {"回复@", "回覆@", "Reply to @", "Repost//@",
                                            "//@"};

constexpr std::string_view kFullWidthColon = "：";  // U+FF1A

bool is_handle_stop(std::string_view s, std::size_t i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) {
    return std::isspace(c) || c == ':' || c == ',' || c == '@';
  }
  return s.substr(i, kFullWidthColon.size()) == kFullWidthColon ||
         s.substr(i, 3) == "，" || s.substr(i, 3) == "。";
}

std::string strip_tags(std::string_view text, bool* fired) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t marker_len = 0;
    for (std::string_view m : kTagMarkers) {
      if (text.substr(i, m.size()) == m) {
        marker_len = m.size();
        break;
      }
    }
    if (marker_len == 0) {
      out.push_back(text[i]);
      ++i;
      continue;
    }
    if (fired) *fired = true;
    i += marker_len;
    std::size_t handle_end = i;
    while (handle_end < text.size() && handle_end - i < 64 &&
           !is_handle_stop(text, handle_end)) {
      ++handle_end;
    }
    i = handle_end;
    if (i < text.size()) {
      if (text[i] == ':')
        ++i;
      else if (text.substr(i, kFullWidthColon.size()) == kFullWidthColon)
        i += kFullWidthColon.size();
    }
  }
  return out;
}

bool is_url_byte(unsigned char c) {
  if (c >= 0x80) return false;
  return std::isalnum(c) || std::strchr("-._~:/?#[]@!$&'()*+,;=%", c) != nullptr;
}

constexpr std::string_view kUrlSchemes[] = {"http://", "https://", "ftp://"};

std::string strip_urls(std::string_view text, bool* fired) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t scheme_len = 0;
    for (std::string_view s : kUrlSchemes) {
      if (text.size() - i >= s.size()) {
        bool eq = true;
        for (std::size_t k = 0; k < s.size(); ++k) {
          if (std::tolower(static_cast<unsigned char>(text[i + k])) != s[k]) {
            eq = false;
            break;
          }
        }
        if (eq) {
          scheme_len = s.size();
          break;
        }
      }
    }
    bool www = false;
    if (scheme_len == 0 && text.substr(i, 4) == "www." &&
        (i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1])))) {
      www = true;
      scheme_len = 4;
    }
    if (scheme_len == 0) {
      out.push_back(text[i]);
      ++i;
      continue;
    }
    std::size_t end = i + scheme_len;
    while (end < text.size() && is_url_byte(static_cast<unsigned char>(text[end]))) ++end;
    // a bare scheme with nothing after it is ordinary text
    if (!www && end == i + scheme_len) {
      out.append(text.substr(i, scheme_len));
      i = end;
      continue;
    }
    if (fired) *fired = true;
    i = end;
  }
  return out;
}

std::vector<uint32_t> collapse_ws(const std::vector<uint32_t>& cps) {
  std::vector<uint32_t> out;
  out.reserve(cps.size());
  bool in_ws = false;
  for (uint32_t cp : cps) {
    if (is_space_cp(cp)) {
      in_ws = true;
      continue;
    }
    if (in_ws && !out.empty()) out.push_back(' ');
    in_ws = false;
    out.push_back(cp);
  }
  return out;
}

constexpr std::size_t kMaxRepeatUnit = 10;

std::vector<uint32_t> collapse_repeats(const std::vector<uint32_t>& cps, int cap,
                                       bool* fired) {
  std::vector<uint32_t> out;
  out.reserve(cps.size());
  const std::size_t n = cps.size();
  std::size_t i = 0;
  while (i < n) {
    bool collapsed = false;
    std::size_t max_len = std::min(kMaxRepeatUnit, (n - i) / 2);
    for (std::size_t len = max_len; len >= 1; --len) {
      std::size_t copies = 1;
      while (i + (copies + 1) * len <= n &&
             std::equal(cps.begin() + static_cast<std::ptrdiff_t>(i),
                        cps.begin() + static_cast<std::ptrdiff_t>(i + len),
                        cps.begin() + static_cast<std::ptrdiff_t>(i + copies * len))) {
        ++copies;
      }
      if (copies > static_cast<std::size_t>(cap)) {
        out.insert(out.end(), cps.begin() + static_cast<std::ptrdiff_t>(i),
                   cps.begin() + static_cast<std::ptrdiff_t>(i + len));
        i += copies * len;
        if (fired) *fired = true;
        collapsed = true;
        break;
      }
      if (len == 1) break;
    }
    if (!collapsed) {
      out.push_back(cps[i]);
      ++i;
    }
  }
  return out;
}

std::string normalize_once(const std::string& text, int repeat_cap, NormalizeResult* flags) {
  bool tag = false;
  bool url = false;
  bool rep = false;
  std::string s = strip_tags(text, &tag);
  s = strip_urls(s, &url);
  auto cps = collapse_ws(utf8::decode(s));
  cps = collapse_repeats(cps, repeat_cap, &rep);
  while (!cps.empty() && is_space_cp(cps.back())) cps.pop_back();
  std::size_t b = 0;
  while (b < cps.size() && is_space_cp(cps[b])) ++b;
  cps.erase(cps.begin(), cps.begin() + static_cast<std::ptrdiff_t>(b));
  if (flags) {
    flags->tag_strip |= tag;
    flags->url_strip |= url;
    flags->repeat_collapse |= rep;
  }
  return utf8::encode(cps);
}

}  // namespace

NormalizeResult normalize_utterance_ex(std::string_view text, int repeat_cap) {
  NormalizeResult result;
  std::string cur(text);
  // Stripping can expose new tags or join new repeat runs, so iterate to a
  // fixpoint. Every stage only removes text, which bounds the loop.
  while (true) {
    std::string next = normalize_once(cur, repeat_cap, &result);
    if (next == cur) break;
    cur = std::move(next);
  }
  result.text = std::move(cur);
  return result;
}

std::string normalize_utterance(std::string_view text, int repeat_cap) {
  return normalize_utterance_ex(text, repeat_cap).text;
}

std::vector<DialogueSession> split_long_session(const DialogueSession& s, int max_turns,
                                                std::size_t* dropped_short) {
  const std::size_t n = s.utterances.size();
  if (n <= static_cast<std::size_t>(max_turns)) return {s};

  const std::size_t window = static_cast<std::size_t>(max_turns) - 1;
  std::vector<DialogueSession> out;
  const bool ids_match = s.origin_ids.size() == n;
  for (std::size_t start = 0; start < n; start += window) {
    std::size_t end = std::min(start + window, n);
    if (end - start < 2) {
      if (dropped_short) ++*dropped_short;
      continue;
    }
    DialogueSession w;
    w.source = s.source;
    w.utterances.assign(s.utterances.begin() + static_cast<std::ptrdiff_t>(start),
                        s.utterances.begin() + static_cast<std::ptrdiff_t>(end));
    if (ids_match) {
      w.origin_ids.assign(s.origin_ids.begin() + static_cast<std::ptrdiff_t>(start),
                          s.origin_ids.begin() + static_cast<std::ptrdiff_t>(end));
    }
    out.push_back(std::move(w));
  }
  return out;
}

void TrigramCounter::add_response(std::string_view response) {
  auto cps = utf8::decode(response);
  if (cps.size() < 3) return;
  for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
    std::string key;
    utf8::append(key, cps[i]);
    utf8::append(key, cps[i + 1]);
    utf8::append(key, cps[i + 2]);
    ++counts_[key];
  }
}

void TrigramCounter::add_session(const DialogueSession& s) {
  if (!s.utterances.empty()) add_response(s.utterances.back());
}

void TrigramCounter::merge(const TrigramCounter& other) {
  for (const auto& [key, count] : other.counts_) counts_[key] += count;
}

std::vector<std::string> TrigramCounter::top(int top_k) const {
  std::vector<std::pair<std::string, uint64_t>> items(counts_.begin(), counts_.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (top_k >= 0 && items.size() > static_cast<std::size_t>(top_k))
    items.resize(static_cast<std::size_t>(top_k));
  std::vector<std::string> out;
  out.reserve(items.size());
  for (auto& [key, count] : items) out.push_back(std::move(key));
  return out;
}

std::unordered_set<std::string> TrigramCounter::top_set(int top_k) const {
  auto v = top(top_k);
  return {v.begin(), v.end()};
}

std::unordered_set<std::string> build_highfreq_trigrams(
    const std::vector<DialogueSession>& corpus, int top_k) {
  TrigramCounter counter;
  for (const auto& s : corpus) counter.add_session(s);
  return counter.top_set(top_k);
}

Blocklist::Blocklist(std::vector<std::string> words) : words_(std::move(words)) {
  words_.erase(std::remove_if(words_.begin(), words_.end(),
                              [](const std::string& w) { return w.empty(); }),
               words_.end());
  std::sort(words_.begin(), words_.end());
  words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
}

Blocklist Blocklist::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("blocklist file not found: " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string w = trim(line);
    if (!w.empty()) words.push_back(std::move(w));
  }
  return Blocklist(std::move(words));
}

bool Blocklist::contains_any(std::string_view text) const {
  for (const auto& w : words_) {
    if (text.find(w) != std::string_view::npos) return true;
  }
  return false;
}

GenericMatcher::GenericMatcher(const std::vector<std::string>& patterns) {
  for (const auto& p : patterns) {
    try {
      compiled_.emplace_back(p, std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw ConfigError("invalid generic pattern '" + p + "': " + e.what());
    }
  }
}

bool GenericMatcher::matches(const std::string& text) const {
  for (const auto& re : compiled_) {
    if (std::regex_match(text, re)) return true;
  }
  return false;
}

namespace {

std::size_t count_non_space_cps(std::string_view s) {
  std::size_t n = 0;
  for (uint32_t cp : utf8::decode(s)) {
    if (!is_space_cp(cp)) ++n;
  }
  return n;
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string_view::npos) {
    ++n;
    pos += needle.size();
  }
  return n;
}

// placeholder text platforms substitute for stripped links
constexpr std::string_view kUrlRemnants[] = {"网页链接", "查看链接", "查看图片", "http",
                                             "www."};

bool looks_like_ad(std::string_view response, const std::vector<std::string>& keywords) {
  bool has_remnant = false;
  for (std::string_view r : kUrlRemnants) {
    if (response.find(r) != std::string_view::npos) {
      has_remnant = true;
      break;
    }
  }
  for (const auto& kw : keywords) {
    std::size_t c = count_occurrences(response, kw);
    if (c >= 2) return true;
    if (c == 1 && has_remnant) return true;
  }
  return false;
}

std::vector<std::string> response_trigrams(std::string_view response) {
  std::vector<std::string> tris;
  auto cps = utf8::decode(response);
  if (cps.size() < 3) return tris;
  for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
    std::string key;
    utf8::append(key, cps[i]);
    utf8::append(key, cps[i + 1]);
    utf8::append(key, cps[i + 2]);
    tris.push_back(std::move(key));
  }
  return tris;
}

}  // namespace

FilterVerdict filter_session(const DialogueSession& s, const CleaningConfig& config,
                             const std::unordered_set<std::string>& highfreq,
                             const Blocklist& blocklist, const GenericMatcher& generic) {
  const std::string& response = s.utterances.back();

  std::size_t resp_tokens = count_non_space_cps(response);
  if (resp_tokens < static_cast<std::size_t>(config.min_resp_tokens) ||
      resp_tokens > static_cast<std::size_t>(config.max_resp_tokens)) {
    return {false, Rule::length};
  }

  if (looks_like_ad(response, config.ad_keywords)) return {false, Rule::ad};

  auto tris = response_trigrams(response);
  if (tris.size() >= 3) {
    std::size_t in_set = 0;
    for (const auto& t : tris) {
      if (highfreq.count(t)) ++in_set;
    }
    if (static_cast<double>(in_set) / static_cast<double>(tris.size()) >=
        config.highfreq_ratio) {
      return {false, Rule::highfreq_trigram};
    }
  }

  if (generic.matches(response)) return {false, Rule::generic};

  if (s.utterances.size() >= 2 && response == s.utterances[s.utterances.size() - 2]) {
    return {false, Rule::echo};
  }

  for (const auto& u : s.utterances) {
    if (blocklist.contains_any(u)) return {false, Rule::blocklist};
  }

  return {true, std::nullopt};
}

FilterVerdict filter_session(const DialogueSession& s, const CleaningConfig& config,
                             const std::unordered_set<std::string>& highfreq,
                             const Blocklist& blocklist) {
  GenericMatcher generic(config.generic_patterns);
  return filter_session(s, config, highfreq, blocklist, generic);
}

void FilterReport::merge(const FilterReport& other) {
  sessions_in += other.sessions_in;
  sessions_seen += other.sessions_seen;
  sessions_kept += other.sessions_kept;
  for (std::size_t i = 0; i < kNumRules; ++i) {
    drops[i] += other.drops[i];
    mods[i] += other.mods[i];
  }
}

uint64_t FilterReport::total_drops() const {
  uint64_t t = 0;
  for (uint64_t d : drops) t += d;
  return t;
}

nlohmann::json FilterReport::to_json() const {
  nlohmann::json j;
  j["sessions_in"] = sessions_in;
  j["sessions_seen"] = sessions_seen;
  j["sessions_kept"] = sessions_kept;
  nlohmann::json jd = nlohmann::json::object();
  nlohmann::json jm = nlohmann::json::object();
  for (std::size_t i = 0; i < kNumRules; ++i) {
    jd[rule_name(static_cast<Rule>(i))] = drops[i];
    jm[rule_name(static_cast<Rule>(i))] = mods[i];
  }
  j["drops"] = jd;
  j["modifications"] = jm;
  j["reconciles"] = reconciles();
  return j;
}

std::string FilterReport::render() const {
  std::string out;
  out += "sessions_in:   " + std::to_string(sessions_in) + "\n";
  out += "sessions_seen: " + std::to_string(sessions_seen) + "\n";
  out += "sessions_kept: " + std::to_string(sessions_kept) + "\n";
  out += "drops:\n";
  for (std::size_t i = 0; i < kNumRules; ++i) {
    if (drops[i] > 0)
      out += "  " + std::string(rule_name(static_cast<Rule>(i))) + ": " +
             std::to_string(drops[i]) + "\n";
  }
  out += "modifications:\n";
  for (std::size_t i = 0; i < kNumRules; ++i) {
    if (mods[i] > 0)
      out += "  " + std::string(rule_name(static_cast<Rule>(i))) + ": " +
             std::to_string(mods[i]) + "\n";
  }
  out += std::string("counters reconcile: ") + (reconciles() ? "yes" : "NO") + "\n";
  return out;
}

CleanPipeline::CleanPipeline(CleaningConfig config, std::unordered_set<std::string> highfreq,
                             Blocklist blocklist)
    : config_(std::move(config)),
      highfreq_(std::move(highfreq)),
      blocklist_(std::move(blocklist)),
      generic_(config_.generic_patterns) {
  config_.validate();
}

std::vector<DialogueSession> CleanPipeline::process(const DialogueSession& s) {
  ++report_.sessions_in;

  DialogueSession norm = s;
  NormalizeResult flags;
  for (auto& u : norm.utterances) {
    NormalizeResult r = normalize_utterance_ex(u, config_.repeat_cap);
    u = std::move(r.text);
    flags.tag_strip |= r.tag_strip;
    flags.url_strip |= r.url_strip;
    flags.repeat_collapse |= r.repeat_collapse;
  }
  if (flags.tag_strip) ++report_.mods[static_cast<std::size_t>(Rule::tag_strip)];
  if (flags.url_strip) ++report_.mods[static_cast<std::size_t>(Rule::url_strip)];
  if (flags.repeat_collapse)
    ++report_.mods[static_cast<std::size_t>(Rule::repeat_collapse)];

  if (norm.utterances.empty() || norm.utterances.back().empty()) {
    ++report_.sessions_seen;
    ++report_.drops[static_cast<std::size_t>(Rule::length)];
    return {};
  }

  // context utterances emptied by normalization carry nothing; drop them
  const bool ids_match = norm.origin_ids.size() == norm.utterances.size();
  for (std::size_t i = norm.utterances.size(); i-- > 0;) {
    if (i + 1 == norm.utterances.size()) continue;  // response stays
    if (norm.utterances[i].empty()) {
      norm.utterances.erase(norm.utterances.begin() + static_cast<std::ptrdiff_t>(i));
      if (ids_match)
        norm.origin_ids.erase(norm.origin_ids.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }
  if (norm.utterances.size() < 2) {
    ++report_.sessions_seen;
    ++report_.drops[static_cast<std::size_t>(Rule::length)];
    return {};
  }

  std::size_t short_windows = 0;
  auto windows = split_long_session(norm, config_.max_turns, &short_windows);
  if (windows.size() + short_windows > 1)
    ++report_.mods[static_cast<std::size_t>(Rule::turn_split)];
  report_.sessions_seen += windows.size() + short_windows;
  report_.drops[static_cast<std::size_t>(Rule::turn_split)] += short_windows;

  std::vector<DialogueSession> kept;
  for (auto& w : windows) {
    FilterVerdict v = filter_session(w, config_, highfreq_, blocklist_, generic_);
    if (v.kept) {
      ++report_.sessions_kept;
      kept.push_back(std::move(w));
    } else {
      ++report_.drops[static_cast<std::size_t>(*v.rule_fired)];
    }
  }
  return kept;
}

}  // namespace dialogkit

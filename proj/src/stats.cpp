#include "dialogkit/stats.hpp"

#include <cstdio>

#include "dialogkit/metrics.hpp"
#include "dialogkit/util.hpp"

namespace dialogkit {

void CorpusStats::add_session(const DialogueSession& s) {
  ++sessions;
  utterances += s.utterances.size();
  for (const auto& u : s.utterances) {
    tokens += metric_tokenize(u).size();
    bytes += u.size();
  }
}

void CorpusStats::merge(const CorpusStats& other) {
  sessions += other.sessions;
  utterances += other.utterances;
  tokens += other.tokens;
  bytes += other.bytes;
}

double CorpusStats::avg_utter_per_sess() const {
  return sessions == 0 ? 0.0
                       : static_cast<double>(utterances) / static_cast<double>(sessions);
}

double CorpusStats::avg_token_per_utter() const {
  return utterances == 0 ? 0.0
                         : static_cast<double>(tokens) / static_cast<double>(utterances);
}

nlohmann::json CorpusStats::to_json() const {
  nlohmann::json j;
  j["sessions"] = sessions;
  j["utterances"] = utterances;
  j["tokens"] = tokens;
  j["bytes"] = bytes;
  j["avg_utter_per_sess"] = avg_utter_per_sess();
  j["avg_token_per_utter"] = avg_token_per_utter();
  return j;
}

std::string CorpusStats::render() const {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%12s %12s %14s %22s %22s %14s\n", "#Sess.", "#Utter.",
                "#Token", "Avg. #utter. per sess.", "Avg. #token per utter.",
                "Storage size");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%12llu %12llu %14llu %22.1f %22.1f %14s\n",
                static_cast<unsigned long long>(sessions),
                static_cast<unsigned long long>(utterances),
                static_cast<unsigned long long>(tokens), avg_utter_per_sess(),
                avg_token_per_utter(), human_bytes(bytes).c_str());
  out += buf;
  return out;
}

}  // namespace dialogkit

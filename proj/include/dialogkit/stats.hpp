#pragma once

#include <cstdint>
#include <string>

#include "dialogkit/ingest.hpp"
#include "json.hpp"

namespace dialogkit {

// Corpus-level counters; shards merge by plain addition.
struct CorpusStats {
  uint64_t sessions = 0;
  uint64_t utterances = 0;
  uint64_t tokens = 0;  // metric_tokenize units
  uint64_t bytes = 0;   // UTF-8 size of utterance text

  void add_session(const DialogueSession& s);
  void merge(const CorpusStats& other);

  double avg_utter_per_sess() const;
  double avg_token_per_utter() const;

  nlohmann::json to_json() const;
  std::string render() const;  // one row shaped like the dataset summary table
};

}  // namespace dialogkit

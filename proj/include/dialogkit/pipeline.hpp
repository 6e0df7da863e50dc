#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dialogkit/clean.hpp"
#include "dialogkit/subword.hpp"
#include "json.hpp"

namespace dialogkit {

struct PackConfig {
  int max_enc_len = 128;
  int max_dec_len = 128;
  bool debug_jsonl = false;
};

struct PipelineConfig {
  std::vector<std::string> inputs;  // files or globs, plain or gzip JSONL
  std::string output_dir = "out";
  std::string blocklist;  // required by the clean stage
  std::string generic_patterns_path;  // optional; built-in defaults otherwise
  CleaningConfig clean;
  UnigramTrainerConfig tokenizer;
  PackConfig pack;
  std::string vocab_path;  // pack input; defaults to <output_dir>/vocab.txt
  int workers = 1;
  uint64_t seed = 0;
  bool disjoint_split = false;  // split-test emits disjoint sets (QA > Long > Multi > Single)

  static PipelineConfig defaults();
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::string& path);  // throws ConfigError
  nlohmann::json to_json() const;

  // Checks invariants and referenced files; stages name the files they need.
  void validate_common() const;
};

// Subcommand drivers. Each writes its artifacts under output_dir and returns
// a small summary for logging/tests. They throw ConfigError / DataError.
nlohmann::json run_ingest(const PipelineConfig& config);
nlohmann::json run_clean(const PipelineConfig& config);
nlohmann::json run_tokenizer(const PipelineConfig& config);
nlohmann::json run_pack(const PipelineConfig& config);
nlohmann::json run_stats(const PipelineConfig& config);
nlohmann::json run_split_test(const PipelineConfig& config);
nlohmann::json run_eval(const PipelineConfig& config);

}  // namespace dialogkit

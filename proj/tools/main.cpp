#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dialogkit/pipeline.hpp"
#include "dialogkit/util.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitConfig = 3;

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> inputs;
  std::string output;
  int workers = -1;
  int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "pipeline config JSON");
  cmd->add_option("--input,-i", flags.inputs, "input files or globs (JSONL, optional gzip)");
  cmd->add_option("--output,-o", flags.output, "output directory");
  cmd->add_option("--workers", flags.workers, "worker threads");
  cmd->add_option("--seed", flags.seed, "deterministic seed");
}

dialogkit::PipelineConfig make_config(const CommonFlags& flags) {
  dialogkit::PipelineConfig config = flags.config_path.empty()
                                         ? dialogkit::PipelineConfig::defaults()
                                         : dialogkit::PipelineConfig::load(flags.config_path);
  if (!flags.inputs.empty()) config.inputs = flags.inputs;
  if (!flags.output.empty()) config.output_dir = flags.output;
  if (flags.workers >= 0) config.workers = flags.workers;
  if (flags.seed >= 0) config.seed = static_cast<uint64_t>(flags.seed);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dialogue pre-training data toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string blocklist_flag;
  bool disjoint = false;

  auto* cmd_ingest = app.add_subcommand("ingest", "reconstruct sessions from raw records");
  add_common(cmd_ingest, flags);
  auto* cmd_clean = app.add_subcommand("clean", "filter sessions with the rule pipeline");
  add_common(cmd_clean, flags);
  cmd_clean->add_option("--blocklist", blocklist_flag, "noise word list, one entry per line");
  auto* cmd_tok = app.add_subcommand("tokenizer", "train the subword vocabulary");
  add_common(cmd_tok, flags);
  auto* cmd_pack = app.add_subcommand("pack", "pack context-response pairs into samples");
  add_common(cmd_pack, flags);
  auto* cmd_stats = app.add_subcommand("stats", "corpus statistics table");
  add_common(cmd_stats, flags);
  auto* cmd_split = app.add_subcommand("split-test", "categorize sessions into test sets");
  add_common(cmd_split, flags);
  cmd_split->add_flag("--disjoint", disjoint,
                      "emit disjoint sets with priority qa > long > multi > single");
  auto* cmd_eval = app.add_subcommand("eval", "score hypotheses against references");
  add_common(cmd_eval, flags);
  auto* cmd_print = app.add_subcommand("print-config", "dump the effective configuration");
  add_common(cmd_print, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    dialogkit::PipelineConfig config = make_config(flags);
    if (!blocklist_flag.empty()) config.blocklist = blocklist_flag;
    if (disjoint) config.disjoint_split = true;

    nlohmann::json summary;
    if (cmd_print->parsed()) {
      std::cout << config.to_json().dump(2) << "\n";
      return kExitOk;
    }
    if (cmd_ingest->parsed()) summary = dialogkit::run_ingest(config);
    if (cmd_clean->parsed()) summary = dialogkit::run_clean(config);
    if (cmd_tok->parsed()) summary = dialogkit::run_tokenizer(config);
    if (cmd_pack->parsed()) summary = dialogkit::run_pack(config);
    if (cmd_stats->parsed()) summary = dialogkit::run_stats(config);
    if (cmd_split->parsed()) summary = dialogkit::run_split_test(config);
    if (cmd_eval->parsed()) summary = dialogkit::run_eval(config);
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
  } catch (const dialogkit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dialogkit::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}

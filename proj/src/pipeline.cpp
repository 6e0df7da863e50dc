#include "dialogkit/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include "dialogkit/jsonl.hpp"
#include "dialogkit/metrics.hpp"
#include "dialogkit/pack.hpp"
#include "dialogkit/stats.hpp"
#include "dialogkit/util.hpp"

namespace dialogkit {

namespace fs = std::filesystem;

PipelineConfig PipelineConfig::defaults() { return PipelineConfig{}; }

namespace {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j[key].get<T>();
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  read_field(j, "inputs", c.inputs);
  read_field(j, "output_dir", c.output_dir);
  read_field(j, "blocklist", c.blocklist);
  read_field(j, "generic_patterns", c.generic_patterns_path);
  read_field(j, "vocab_path", c.vocab_path);
  read_field(j, "workers", c.workers);
  read_field(j, "seed", c.seed);
  read_field(j, "disjoint_split", c.disjoint_split);
  if (j.contains("clean")) {
    const auto& jc = j["clean"];
    read_field(jc, "max_turns", c.clean.max_turns);
    read_field(jc, "repeat_cap", c.clean.repeat_cap);
    read_field(jc, "min_resp_tokens", c.clean.min_resp_tokens);
    read_field(jc, "max_resp_tokens", c.clean.max_resp_tokens);
    read_field(jc, "highfreq_top_k", c.clean.highfreq_top_k);
    read_field(jc, "highfreq_ratio", c.clean.highfreq_ratio);
    read_field(jc, "ad_keywords", c.clean.ad_keywords);
    read_field(jc, "generic_patterns", c.clean.generic_patterns);
  }
  if (j.contains("tokenizer")) {
    const auto& jt = j["tokenizer"];
    read_field(jt, "target_size", c.tokenizer.target_size);
    read_field(jt, "seed_multiplier", c.tokenizer.seed_multiplier);
    read_field(jt, "prune_keep", c.tokenizer.prune_keep);
    read_field(jt, "em_iters_per_round", c.tokenizer.em_iters_per_round);
    read_field(jt, "max_piece_len", c.tokenizer.max_piece_len);
  }
  if (j.contains("pack")) {
    const auto& jp = j["pack"];
    read_field(jp, "max_enc_len", c.pack.max_enc_len);
    read_field(jp, "max_dec_len", c.pack.max_dec_len);
    read_field(jp, "debug_jsonl", c.pack.debug_jsonl);
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  return from_json(j);
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j;
  j["inputs"] = inputs;
  j["output_dir"] = output_dir;
  j["blocklist"] = blocklist;
  j["generic_patterns"] = generic_patterns_path;
  j["vocab_path"] = vocab_path;
  j["workers"] = workers;
  j["seed"] = seed;
  j["disjoint_split"] = disjoint_split;
  j["clean"] = {{"max_turns", clean.max_turns},
                {"repeat_cap", clean.repeat_cap},
                {"min_resp_tokens", clean.min_resp_tokens},
                {"max_resp_tokens", clean.max_resp_tokens},
                {"highfreq_top_k", clean.highfreq_top_k},
                {"highfreq_ratio", clean.highfreq_ratio},
                {"ad_keywords", clean.ad_keywords},
                {"generic_patterns", clean.generic_patterns}};
  j["tokenizer"] = {{"target_size", tokenizer.target_size},
                    {"seed_multiplier", tokenizer.seed_multiplier},
                    {"prune_keep", tokenizer.prune_keep},
                    {"em_iters_per_round", tokenizer.em_iters_per_round},
                    {"max_piece_len", tokenizer.max_piece_len}};
  j["pack"] = {{"max_enc_len", pack.max_enc_len},
               {"max_dec_len", pack.max_dec_len},
               {"debug_jsonl", pack.debug_jsonl}};
  return j;
}

void PipelineConfig::validate_common() const {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
}

namespace {

void ensure_output_dir(const PipelineConfig& config) {
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw ConfigError("cannot create output_dir " + config.output_dir);
}

std::vector<std::string> resolve_inputs(const PipelineConfig& config) {
  if (config.inputs.empty()) throw ConfigError("no inputs configured");
  return glob_paths(config.inputs);
}

std::string out_path(const PipelineConfig& config, const std::string& name) {
  return (fs::path(config.output_dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << text;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

struct LocatedLine {
  std::string line;
  const std::string* path;  // points into the resolved paths vector
  std::size_t lineno;
};

// Reads every input line by line, forwarding (path, lineno, line).
template <class Fn>
void for_each_line(const std::vector<std::string>& paths, Fn&& fn) {
  for (const auto& p : paths) {
    LineReader reader(p);
    std::string line;
    while (reader.next(line)) {
      if (line.empty()) continue;
      fn(p, reader.line_number(), line);
    }
  }
}

// Ordered fan-out: chunks are processed by up to `workers` threads and the
// results are consumed in submission order, so output never depends on
// scheduling. Work(chunk) -> R must be pure.
template <class Work, class Consume>
void process_chunks(const std::vector<std::string>& paths, int workers,
                    std::size_t chunk_lines, Work&& work, Consume&& consume) {
  using Result = decltype(work(std::vector<LocatedLine>{}));

  std::vector<LocatedLine> chunk;
  chunk.reserve(chunk_lines);
  std::vector<std::vector<LocatedLine>> batch;
  std::exception_ptr first_error;

  auto run_batch = [&]() {
    if (batch.empty()) return;
    std::vector<Result> results(batch.size());
    if (workers <= 1 || batch.size() == 1) {
      for (std::size_t i = 0; i < batch.size(); ++i) results[i] = work(batch[i]);
    } else {
      std::vector<std::thread> threads;
      std::mutex error_mutex;
      threads.reserve(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        threads.emplace_back([&, i]() {
          try {
            results[i] = work(batch[i]);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        });
      }
      for (auto& t : threads) t.join();
      if (first_error) std::rethrow_exception(first_error);
    }
    for (auto& r : results) consume(std::move(r));
    batch.clear();
  };

  for (const auto& p : paths) {
    LineReader reader(p);
    std::string line;
    while (reader.next(line)) {
      if (line.empty()) continue;
      chunk.push_back(LocatedLine{line, &p, reader.line_number()});
      if (chunk.size() >= chunk_lines) {
        batch.push_back(std::move(chunk));
        chunk = {};
        chunk.reserve(chunk_lines);
        if (batch.size() >= static_cast<std::size_t>(workers)) run_batch();
      }
    }
  }
  if (!chunk.empty()) batch.push_back(std::move(chunk));
  run_batch();
}

DialogueSession parse_session_line(const std::string& line, const std::string& path,
                                   std::size_t lineno) {
  nlohmann::json j = parse_json_line(line, path, lineno);
  try {
    return session_from_json(j);
  } catch (const std::exception& e) {
    throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
  }
}

constexpr std::size_t kChunkLines = 2048;

}  // namespace

nlohmann::json run_ingest(const PipelineConfig& config) {
  config.validate_common();
  ensure_output_dir(config);
  auto paths = resolve_inputs(config);
  if (paths.empty()) {
    std::cerr << "warning: inputs matched no files\n";
  }

  // group records per thread; threads are independent afterwards
  std::map<std::string, std::vector<RawRecord>> threads;
  uint64_t parse_errors = 0;
  for (const auto& p : paths) {
    LineReader reader(p);
    std::string line;
    while (reader.next(line)) {
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) {
        ++parse_errors;
        continue;
      }
      try {
        RawRecord r = record_from_json(j);
        threads[r.thread_id].push_back(std::move(r));
      } catch (const std::exception&) {
        ++parse_errors;
      }
    }
  }

  uint64_t trees_total = 0;
  uint64_t sessions_total = 0;
  uint64_t single_node_trees = 0;
  uint64_t orphan_records = 0;
  uint64_t malformed_records = 0;
  nlohmann::json thread_reports = nlohmann::json::array();

  std::ofstream out(out_path(config, "sessions.jsonl"), std::ios::binary);
  if (!out) throw DataError("cannot write sessions.jsonl");

  for (auto& [thread_id, records] : threads) {
    bool qa_thread = false;
    for (const auto& r : records) {
      if (r.kind == RecordKind::qa_question) {
        qa_thread = true;
        break;
      }
    }

    std::vector<DialogueSession> sessions;
    if (qa_thread) {
      // one question plus its answers; anything unattached is an orphan
      std::vector<const RawRecord*> questions;
      std::vector<const RawRecord*> answers;
      OrphanReport rep;
      rep.thread_id = thread_id;
      for (const auto& r : records) {
        if (r.record_id.empty() || r.text.empty()) {
          ++rep.malformed;
        } else if (r.kind == RecordKind::qa_question) {
          questions.push_back(&r);
        } else if (r.kind == RecordKind::qa_answer) {
          answers.push_back(&r);
        } else {
          rep.orphan_ids.push_back(r.record_id);
        }
      }
      std::sort(questions.begin(), questions.end(),
                [](const RawRecord* a, const RawRecord* b) {
                  return a->record_id < b->record_id;
                });
      std::sort(answers.begin(), answers.end(), [](const RawRecord* a, const RawRecord* b) {
        if (a->timestamp.value_or(INT64_MAX) != b->timestamp.value_or(INT64_MAX))
          return a->timestamp.value_or(INT64_MAX) < b->timestamp.value_or(INT64_MAX);
        return a->record_id < b->record_id;
      });
      for (const RawRecord* q : questions) {
        std::vector<std::string> texts, ids;
        for (const RawRecord* a : answers) {
          const bool attached = a->parent_id.has_value()
                                    ? *a->parent_id == q->record_id
                                    : questions.size() == 1;
          if (attached) {
            texts.push_back(a->text);
            ids.push_back(a->record_id);
          }
        }
        auto qa_sessions = qa_to_sessions(q->text, texts, q->record_id, ids);
        sessions.insert(sessions.end(), qa_sessions.begin(), qa_sessions.end());
      }
      for (const RawRecord* a : answers) {
        bool used = a->parent_id.has_value()
                        ? std::any_of(questions.begin(), questions.end(),
                                      [&](const RawRecord* q) {
                                        return *a->parent_id == q->record_id;
                                      })
                        : questions.size() == 1;
        if (!used) rep.orphan_ids.push_back(a->record_id);
      }
      orphan_records += rep.orphan_ids.size();
      malformed_records += rep.malformed;
      if (!rep.orphan_ids.empty() || rep.malformed > 0) {
        std::sort(rep.orphan_ids.begin(), rep.orphan_ids.end());
        nlohmann::json jt;
        jt["thread_id"] = rep.thread_id;
        jt["orphans"] = rep.orphan_ids;
        jt["malformed"] = rep.malformed;
        thread_reports.push_back(std::move(jt));
      }
    } else {
      auto built = build_reply_trees(records);
      trees_total += built.trees.size();
      for (const auto& tree : built.trees) {
        if (tree.nodes.size() == 1) ++single_node_trees;
        auto tree_sessions = extract_sessions(tree);
        sessions.insert(sessions.end(), tree_sessions.begin(), tree_sessions.end());
      }
      for (const auto& rep : built.orphans) {
        orphan_records += rep.orphan_ids.size();
        malformed_records += rep.malformed;
        nlohmann::json jt;
        jt["thread_id"] = rep.thread_id;
        jt["orphans"] = rep.orphan_ids;
        jt["malformed"] = rep.malformed;
        thread_reports.push_back(std::move(jt));
      }
    }

    for (const auto& s : sessions) {
      out << session_to_json(s).dump() << "\n";
    }
    sessions_total += sessions.size();
  }
  out.close();

  nlohmann::json summary;
  summary["threads"] = threads.size();
  summary["trees"] = trees_total;
  summary["sessions"] = sessions_total;
  summary["single_node_trees"] = single_node_trees;
  summary["orphan_records"] = orphan_records;
  summary["malformed_records"] = malformed_records;
  summary["parse_errors"] = parse_errors;
  summary["threads_with_issues"] = thread_reports;
  write_json(out_path(config, "orphan_report.json"), summary);
  if (sessions_total == 0) std::cerr << "warning: no sessions extracted\n";
  return summary;
}

nlohmann::json run_clean(const PipelineConfig& config) {
  config.validate_common();
  config.clean.validate();
  ensure_output_dir(config);
  auto paths = resolve_inputs(config);

  if (config.blocklist.empty()) throw ConfigError("clean requires a blocklist file");
  Blocklist blocklist = Blocklist::load(config.blocklist);

  CleaningConfig clean_cfg = config.clean;
  if (!config.generic_patterns_path.empty()) {
    std::ifstream in(config.generic_patterns_path);
    if (!in) throw ConfigError("generic patterns file not found: " +
                               config.generic_patterns_path);
    clean_cfg.generic_patterns.clear();
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      clean_cfg.generic_patterns.push_back(line);
    }
  }

  // pass 1: high-frequency trigrams over responses
  TrigramCounter trigrams;
  process_chunks(
      paths, config.workers, kChunkLines,
      [&](const std::vector<LocatedLine>& lines) {
        TrigramCounter local;
        for (const auto& ll : lines) {
          DialogueSession s = parse_session_line(ll.line, *ll.path, ll.lineno);
          local.add_session(s);
        }
        return local;
      },
      [&](TrigramCounter&& local) { trigrams.merge(local); });
  auto highfreq = trigrams.top_set(clean_cfg.highfreq_top_k);

  // pass 2: normalize, split, filter
  std::ofstream out(out_path(config, "cleaned.jsonl"), std::ios::binary);
  if (!out) throw DataError("cannot write cleaned.jsonl");
  FilterReport report;

  struct ShardResult {
    std::string lines;
    FilterReport report;
  };
  process_chunks(
      paths, config.workers, kChunkLines,
      [&](const std::vector<LocatedLine>& lines) {
        CleanPipeline pipeline(clean_cfg, highfreq, blocklist);
        ShardResult res;
        for (const auto& ll : lines) {
          DialogueSession s = parse_session_line(ll.line, *ll.path, ll.lineno);
          for (const auto& kept : pipeline.process(s)) {
            res.lines += session_to_json(kept).dump();
            res.lines += "\n";
          }
        }
        res.report = pipeline.report();
        return res;
      },
      [&](ShardResult&& res) {
        out << res.lines;
        report.merge(res.report);
      });
  out.close();

  write_json(out_path(config, "filter_report.json"), report.to_json());
  write_text(out_path(config, "filter_report.txt"), report.render());
  return report.to_json();
}

nlohmann::json run_tokenizer(const PipelineConfig& config) {
  config.validate_common();
  ensure_output_dir(config);
  auto paths = resolve_inputs(config);

  // stream utterances into segment counts; memory scales with segment types
  std::map<std::string, uint64_t> seg_freq;
  uint64_t lines_in = 0;
  for_each_line(paths, [&](const std::string& p, std::size_t lineno, const std::string& line) {
    DialogueSession s = parse_session_line(line, p, lineno);
    for (const auto& u : s.utterances) {
      ++lines_in;
      for (auto& seg : split_ws(u)) ++seg_freq[seg];
    }
  });

  SubwordVocab vocab = train_unigram(seg_freq, config.tokenizer);
  std::string path = config.vocab_path.empty() ? out_path(config, "vocab.txt")
                                               : config.vocab_path;
  vocab.save(path);

  nlohmann::json summary;
  summary["vocab_path"] = path;
  summary["vocab_size"] = vocab.size();
  summary["training_lines"] = lines_in;
  return summary;
}

nlohmann::json run_pack(const PipelineConfig& config) {
  config.validate_common();
  ensure_output_dir(config);
  auto paths = resolve_inputs(config);

  std::string vocab_path = config.vocab_path.empty() ? out_path(config, "vocab.txt")
                                                     : config.vocab_path;
  if (!fs::exists(vocab_path))
    throw ConfigError("vocabulary file not found: " + vocab_path);
  SubwordVocab vocab = SubwordVocab::load(vocab_path);

  Packer packer(config.pack.max_enc_len, config.pack.max_dec_len, special::kPad);
  PackedWriter writer(out_path(config, "packed.bin"), config.pack.max_enc_len,
                      config.pack.max_dec_len);
  std::ofstream debug;
  if (config.pack.debug_jsonl) {
    debug.open(out_path(config, "packed_debug.jsonl"), std::ios::binary);
  }

  auto emit = [&](const PackedSample& s) {
    writer.write(s);
    if (debug.is_open()) debug << packed_sample_to_json(s).dump() << "\n";
  };

  for_each_line(paths, [&](const std::string& p, std::size_t lineno, const std::string& line) {
    DialogueSession s = parse_session_line(line, p, lineno);
    if (s.utterances.size() < 2) return;
    ContextResponsePair pair;
    for (std::size_t i = 0; i + 1 < s.utterances.size(); ++i) {
      for (int id : encode_words(s.utterances[i], vocab))
        pair.context_ids.push_back(static_cast<int32_t>(id));
      pair.context_ids.push_back(special::kSep);
    }
    for (int id : encode_words(s.utterances.back(), vocab))
      pair.response_ids.push_back(static_cast<int32_t>(id));
    pair.response_ids.push_back(special::kEos);
    if (auto flushed = packer.add(pair)) emit(*flushed);
  });
  if (auto last = packer.flush()) emit(*last);
  writer.close();

  nlohmann::json manifest =
      packer.stats().to_json(config.pack.max_enc_len, config.pack.max_dec_len);
  write_json(out_path(config, "pack_manifest.json"), manifest);
  return manifest;
}

nlohmann::json run_stats(const PipelineConfig& config) {
  config.validate_common();
  ensure_output_dir(config);
  auto paths = resolve_inputs(config);

  CorpusStats stats;
  process_chunks(
      paths, config.workers, kChunkLines,
      [&](const std::vector<LocatedLine>& lines) {
        CorpusStats local;
        for (const auto& ll : lines) {
          local.add_session(parse_session_line(ll.line, *ll.path, ll.lineno));
        }
        return local;
      },
      [&](CorpusStats&& local) { stats.merge(local); });

  write_json(out_path(config, "stats.json"), stats.to_json());
  write_text(out_path(config, "stats.txt"), stats.render());
  return stats.to_json();
}

nlohmann::json run_split_test(const PipelineConfig& config) {
  config.validate_common();
  ensure_output_dir(config);
  auto paths = resolve_inputs(config);

  std::ofstream single(out_path(config, "test_single.jsonl"), std::ios::binary);
  std::ofstream multi(out_path(config, "test_multi.jsonl"), std::ios::binary);
  std::ofstream long_resp(out_path(config, "test_long.jsonl"), std::ios::binary);
  std::ofstream qa(out_path(config, "test_qa.jsonl"), std::ios::binary);
  uint64_t counts[4] = {0, 0, 0, 0};

  for_each_line(paths, [&](const std::string& p, std::size_t lineno, const std::string& line) {
    DialogueSession s = parse_session_line(line, p, lineno);
    if (s.utterances.size() < 2) return;
    auto flags = categorize_session(s);
    const std::string dumped = session_to_json(s).dump() + "\n";
    if (config.disjoint_split) {
      // priority order keeps the four files disjoint
      if (flags.qa) {
        qa << dumped;
        ++counts[3];
      } else if (flags.long_resp) {
        long_resp << dumped;
        ++counts[2];
      } else if (flags.multi) {
        multi << dumped;
        ++counts[1];
      } else {
        single << dumped;
        ++counts[0];
      }
    } else {
      if (flags.single) {
        single << dumped;
        ++counts[0];
      }
      if (flags.multi) {
        multi << dumped;
        ++counts[1];
      }
      if (flags.long_resp) {
        long_resp << dumped;
        ++counts[2];
      }
      if (flags.qa) {
        qa << dumped;
        ++counts[3];
      }
    }
  });

  nlohmann::json summary;
  summary["single"] = counts[0];
  summary["multi"] = counts[1];
  summary["long"] = counts[2];
  summary["qa"] = counts[3];
  summary["disjoint"] = config.disjoint_split;
  write_json(out_path(config, "split_summary.json"), summary);
  return summary;
}

nlohmann::json run_eval(const PipelineConfig& config) {
  config.validate_common();
  ensure_output_dir(config);
  auto paths = resolve_inputs(config);

  std::vector<EvalInstance> instances;
  for_each_line(paths, [&](const std::string& p, std::size_t lineno, const std::string& line) {
    nlohmann::json j = parse_json_line(line, p, lineno);
    try {
      instances.push_back(eval_instance_from_json(j));
    } catch (const std::exception& e) {
      throw DataError(p + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });

  EvalReport report = evaluate(instances);
  write_json(out_path(config, "eval_report.json"), report.to_json());
  write_text(out_path(config, "eval_report.txt"), report.render());
  return report.to_json();
}

}  // namespace dialogkit

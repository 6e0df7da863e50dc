// End-to-end tests driving the command-line binary with file fixtures.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>
#include <unistd.h>
#include <zlib.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dialogkit/util.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dialogkit_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args, std::string* out = nullptr) {
  const std::string cmd = std::string(DIALOGKIT_BIN) + " " + args;
  if (out == nullptr) {
    int status = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  }
  const std::string capture = cmd + " 2>/dev/null";
  FILE* pipe = popen(capture.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  out->clear();
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) out->append(buf, n);
  return WEXITSTATUS(pclose(pipe));
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  REQUIRE(f.good());
  f << content;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json read_json(const std::string& path) { return json::parse(read_file(path)); }

std::size_t count_lines(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::string line;
  std::size_t n = 0;
  while (std::getline(f, line)) {
    if (!line.empty()) ++n;
  }
  return n;
}

const std::string kDataDir = DIALOGKIT_DATA_DIR;

std::string sessions_fixture() {
  return std::string() +
         R"({"utterances": ["今天天气怎么样", "外面在下雨记得带伞"], "source": "comment"})" + "\n" +
         R"({"utterances": ["你好呀", "你好呀"], "source": "comment"})" + "\n" +           // echo
         R"({"utterances": ["问个问题可以吗", "行"], "source": "comment"})" + "\n" +        // too short
         R"({"utterances": ["这个有测试屏蔽词哦", "正常回复的内容呀"], "source": "comment"})" + "\n" +  // blocklist
         R"({"utterances": ["周末去哪里玩好呢", "去爬山或者去海边都可以"], "source": "qa"})" + "\n";
}

}  // namespace

TEST_CASE("print-config dumps valid JSON defaults") {
  std::string out;
  int code = run("print-config", &out);
  CHECK(code == 0);
  json j = json::parse(out);
  CHECK(j["pack"]["max_enc_len"] == 128);
  CHECK(j["pack"]["max_dec_len"] == 128);
  CHECK(j["clean"]["max_turns"] == 30);
  CHECK(j["clean"]["repeat_cap"] == 6);
  CHECK(j["tokenizer"]["target_size"] == 30000);
  CHECK(j["workers"] == 1);
}

TEST_CASE("usage errors exit 1") {
  CHECK(run("no-such-command") == 1);
  CHECK(run("") == 1);
}

TEST_CASE("ingest: toy thread fixture yields two sessions") {
  TempDir tmp;
  std::string out;
  int code = run("ingest --input " + kDataDir + "/toy/records.jsonl --output " +
                     tmp.file("out"),
                 &out);
  REQUIRE(code == 0);
  json summary = json::parse(out);
  CHECK(summary["sessions"] == 2);
  CHECK(summary["trees"] == 1);
  CHECK(summary["orphan_records"] == 0);
  CHECK(count_lines(tmp.file("out/sessions.jsonl")) == 2);
  CHECK(fs::exists(tmp.file("out/orphan_report.json")));
}

TEST_CASE("ingest: QA threads become single-turn sessions") {
  TempDir tmp;
  write_file(tmp.file("qa.jsonl"),
             R"({"record_id": "q1", "thread_id": "z", "text": "什么语言最好", "kind": "qa_question"})"
             "\n"
             R"({"record_id": "a1", "parent_id": "q1", "thread_id": "z", "text": "当然是跟团队匹配的那个", "kind": "qa_answer"})"
             "\n"
             R"({"record_id": "a2", "parent_id": "q1", "thread_id": "z", "text": "看场景选合适的工具", "kind": "qa_answer"})"
             "\n");
  std::string out;
  int code = run("ingest --input " + tmp.file("qa.jsonl") + " --output " + tmp.file("out"),
                 &out);
  REQUIRE(code == 0);
  CHECK(json::parse(out)["sessions"] == 2);
  auto text = read_file(tmp.file("out/sessions.jsonl"));
  CHECK(text.find("qa") != std::string::npos);
}

TEST_CASE("ingest: gzip input produces identical output") {
  TempDir tmp;
  const std::string plain = read_file(kDataDir + "/toy/records.jsonl");
  gzFile gz = gzopen(tmp.file("records.jsonl.gz").c_str(), "wb");
  REQUIRE(gz != nullptr);
  gzwrite(gz, plain.data(), static_cast<unsigned>(plain.size()));
  gzclose(gz);

  REQUIRE(run("ingest --input " + kDataDir + "/toy/records.jsonl --output " +
              tmp.file("a")) == 0);
  REQUIRE(run("ingest --input " + tmp.file("records.jsonl.gz") + " --output " +
              tmp.file("b")) == 0);
  CHECK(read_file(tmp.file("a/sessions.jsonl")) == read_file(tmp.file("b/sessions.jsonl")));
}

TEST_CASE("ingest: empty input directory warns but succeeds") {
  TempDir tmp;
  fs::create_directories(tmp.file("empty"));
  std::string out;
  int code = run("ingest --input '" + tmp.file("empty") + "/*.jsonl' --output " +
                     tmp.file("out"),
                 &out);
  CHECK(code == 0);
  CHECK(json::parse(out)["sessions"] == 0);
  CHECK(count_lines(tmp.file("out/sessions.jsonl")) == 0);
}

TEST_CASE("ingest: unreadable input exits 2 naming the file") {
  CHECK(run("ingest --input /nonexistent/nowhere.jsonl --output /tmp/dialogkit_x") == 2);
}

TEST_CASE("clean: planted violations produce exact counts") {
  TempDir tmp;
  write_file(tmp.file("sessions.jsonl"), sessions_fixture());
  // a tiny corpus makes every trigram "high frequency"; disable that rule here
  write_file(tmp.file("config.json"),
             json({{"clean", {{"highfreq_top_k", 0}}}}).dump());
  std::string out;
  int code = run("clean --config " + tmp.file("config.json") + " --input " +
                     tmp.file("sessions.jsonl") + " --output " + tmp.file("out") +
                     " --blocklist " + kDataDir + "/blocklist.txt",
                 &out);
  REQUIRE(code == 0);
  json report = json::parse(out);
  CHECK(report["sessions_in"] == 5);
  CHECK(report["sessions_kept"] == 2);
  CHECK(report["drops"]["echo"] == 1);
  CHECK(report["drops"]["length"] == 1);
  CHECK(report["drops"]["blocklist"] == 1);
  CHECK(report["reconciles"] == true);
  CHECK(count_lines(tmp.file("out/cleaned.jsonl")) == 2);
  CHECK(fs::exists(tmp.file("out/filter_report.txt")));
}

TEST_CASE("clean: dominant responses trip the high-frequency trigram rule") {
  TempDir tmp;
  std::string lines;
  for (int i = 0; i < 40; ++i) {
    json j;
    j["utterances"] = {std::string("问题编号") + std::to_string(i), std::string("非常感谢你的分享")};
    j["source"] = "comment";
    lines += j.dump() + "\n";
  }
  const char* varied[] = {"明天记得多穿一点", "这家店味道很地道", "电影票我已经买好",
                          "下午的会议改时间", "周末去郊外露营吧", "新书下周才能到货",
                          "这条路线风景很美", "代码今晚就能改完", "晚饭想吃火锅配菜",
                          "运动之后记得拉伸"};
  for (int i = 0; i < 10; ++i) {
    json j;
    j["utterances"] = {std::string("随便聊聊第") + std::to_string(i), std::string(varied[i])};
    j["source"] = "comment";
    lines += j.dump() + "\n";
  }
  write_file(tmp.file("sessions.jsonl"), lines);
  // top 6 trigram types are exactly the dominant response's six trigrams
  write_file(tmp.file("config.json"), json({{"clean", {{"highfreq_top_k", 6}}}}).dump());
  std::string out;
  int code = run("clean --config " + tmp.file("config.json") + " --input " +
                     tmp.file("sessions.jsonl") + " --output " + tmp.file("out") +
                     " --blocklist " + kDataDir + "/blocklist.txt",
                 &out);
  REQUIRE(code == 0);
  json report = json::parse(out);
  CHECK(report["drops"]["highfreq_trigram"] == 40);
  CHECK(report["sessions_kept"] == 10);
  CHECK(report["reconciles"] == true);
}

TEST_CASE("clean: missing blocklist is a config error (exit 3)") {
  TempDir tmp;
  write_file(tmp.file("sessions.jsonl"), sessions_fixture());
  CHECK(run("clean --input " + tmp.file("sessions.jsonl") + " --output " + tmp.file("out") +
            " --blocklist /nonexistent/words.txt") == 3);
  CHECK(run("clean --input " + tmp.file("sessions.jsonl") + " --output " +
            tmp.file("out")) == 3);
}

TEST_CASE("clean: exit 0 even when everything is filtered") {
  TempDir tmp;
  write_file(tmp.file("sessions.jsonl"),
             R"({"utterances": ["重复", "重复"], "source": "comment"})"
             "\n");
  std::string out;
  int code = run("clean --input " + tmp.file("sessions.jsonl") + " --output " +
                     tmp.file("out") + " --blocklist " + kDataDir + "/blocklist.txt",
                 &out);
  CHECK(code == 0);
  json report = json::parse(out);
  CHECK(report["sessions_kept"] == 0);
  CHECK(count_lines(tmp.file("out/cleaned.jsonl")) == 0);
}

TEST_CASE("schema violations carry file and line number") {
  TempDir tmp;
  write_file(tmp.file("bad.jsonl"), "{\"utterances\": [\"好的好的\", \"知道了知道了\"]}\nnot json\n");
  std::string cmd = "stats --input " + tmp.file("bad.jsonl") + " --output " + tmp.file("o");
  const std::string full = std::string(DIALOGKIT_BIN) + " " + cmd + " 2>&1";
  FILE* pipe = popen(full.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string output;
  char buf[1024];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, n);
  int code = WEXITSTATUS(pclose(pipe));
  CHECK(code == 2);
  CHECK(output.find("bad.jsonl:2") != std::string::npos);
}

TEST_CASE("tokenizer + pack round trip with manifest conservation") {
  TempDir tmp;
  // small whitespace-segmented corpus
  std::string lines;
  const char* texts[] = {"we all like tea", "we like green tea", "they like tea too",
                         "all of us like it", "tea time is nice"};
  for (const char* t : texts) {
    json j;
    j["utterances"] = {std::string("do you like tea"), std::string(t)};
    j["source"] = "comment";
    lines += j.dump() + "\n";
  }
  write_file(tmp.file("cleaned.jsonl"), lines);
  write_file(tmp.file("config.json"),
             json({{"tokenizer", {{"target_size", 40}}},
                   {"pack", {{"debug_jsonl", true}}}})
                 .dump());

  std::string out;
  int code = run("tokenizer --config " + tmp.file("config.json") + " --input " +
                     tmp.file("cleaned.jsonl") + " --output " + tmp.file("out"),
                 &out);
  REQUIRE(code == 0);
  json tok_summary = json::parse(out);
  CHECK(tok_summary["vocab_size"] == 40);
  CHECK(count_lines(tmp.file("out/vocab.txt")) == 41);  // header + 40 entries

  code = run("pack --config " + tmp.file("config.json") + " --input " +
                 tmp.file("cleaned.jsonl") + " --output " + tmp.file("out"),
             &out);
  REQUIRE(code == 0);
  json manifest = json::parse(out);
  CHECK(manifest["pairs_in"] == 5);
  CHECK(manifest["pairs_packed"].get<int>() + manifest["rejected_pairs"].get<int>() == 5);
  CHECK(fs::exists(tmp.file("out/packed.bin")));
  CHECK(read_json(tmp.file("out/pack_manifest.json")) == manifest);
  // debug mirror carries one JSON object per sample
  CHECK(count_lines(tmp.file("out/packed_debug.jsonl")) ==
        manifest["samples"].get<std::size_t>());
}

TEST_CASE("stats: bundled toy corpus matches hand-computed values") {
  TempDir tmp;
  std::string out;
  int code = run("stats --input " + kDataDir + "/toy/stats_sessions.jsonl --output " +
                     tmp.file("out"),
                 &out);
  REQUIRE(code == 0);
  json stats = json::parse(out);
  CHECK(stats["sessions"] == 2);
  CHECK(stats["utterances"] == 4);
  CHECK(stats["tokens"] == 12);
  CHECK(stats["bytes"] == 36);
  CHECK(stats["avg_utter_per_sess"] == 2.0);
  CHECK(stats["avg_token_per_utter"] == 3.0);

  auto table = read_file(tmp.file("out/stats.txt"));
  for (const char* column : {"#Sess.", "#Utter.", "#Token", "Avg. #utter. per sess.",
                             "Avg. #token per utter.", "Storage size"}) {
    CHECK(table.find(column) != std::string::npos);
  }
}

TEST_CASE("split-test: multi-label and disjoint modes") {
  TempDir tmp;
  std::string lines;
  lines += json({{"utterances", {"天气如何?", "很好"}}, {"source", "comment"}}).dump() + "\n";
  lines += json({{"utterances", {"a", "b", "c d e"}}, {"source", "comment"}}).dump() + "\n";
  lines += json({{"utterances", {"四个字呢", "这里有六个字"}}, {"source", "comment"}}).dump() + "\n";
  write_file(tmp.file("sessions.jsonl"), lines);

  std::string out;
  int code = run("split-test --input " + tmp.file("sessions.jsonl") + " --output " +
                     tmp.file("multi"),
                 &out);
  REQUIRE(code == 0);
  json summary = json::parse(out);
  CHECK(summary["single"] == 2);   // sessions 1 and 3
  CHECK(summary["multi"] == 1);    // session 2
  CHECK(summary["qa"] == 2);       // sessions 1 and 3 (? and 呢)
  CHECK(summary["long"] == 2);     // sessions 2 (3>2) and 3 (6>4)

  code = run("split-test --disjoint --input " + tmp.file("sessions.jsonl") + " --output " +
                 tmp.file("disjoint"),
             &out);
  REQUIRE(code == 0);
  json dj = json::parse(out);
  int total = dj["single"].get<int>() + dj["multi"].get<int>() + dj["long"].get<int>() +
              dj["qa"].get<int>();
  CHECK(total == 3);
  CHECK(dj["qa"] == 2);    // priority over long/single
  CHECK(dj["long"] == 1);  // session 2 falls through qa to long
}

TEST_CASE("eval: derived metric fixtures reproduce exactly") {
  TempDir tmp;
  // single-instance runs so the Overall row is the metric itself
  auto overall = [&](const std::string& name, const std::string& ref,
                     const std::string& hyp) {
    write_file(tmp.file(name),
               json({{"context", {"上下文"}}, {"reference", ref}, {"hypothesis", hyp}})
                       .dump() +
                   "\n");
    std::string out;
    REQUIRE(run("eval --input " + tmp.file(name) + " --output " + tmp.file("out"), &out) ==
            0);
    return json::parse(out)["rows"][4];
  };

  auto f1_row = overall("f1.jsonl", "a d", "a b c");
  CHECK(std::abs(f1_row["f1"].get<double>() / 100.0 - 0.4) < 1e-9);

  auto rl_row = overall("rl.jsonl", "a c d", "a b c d");
  CHECK(std::abs(rl_row["rouge_l"].get<double>() / 100.0 - 6.0 / 7.0) < 1e-9);

  auto bleu_row = overall("bleu.jsonl", "a b c d e", "a b c d");
  CHECK(std::abs(bleu_row["bleu4"].get<double>() / 100.0 - std::exp(-0.25)) < 1e-9);

  auto dist_row = overall("dist.jsonl", "a b", "a b a b");
  CHECK(std::abs(dist_row["dist2"].get<double>() / 100.0 - 2.0 / 3.0) < 1e-9);

  CHECK(fs::exists(tmp.file("out/eval_report.txt")));
  CHECK(fs::exists(tmp.file("out/eval_report.json")));
}

TEST_CASE("end-to-end determinism: identical bytes across runs and worker counts") {
  TempDir tmp;
  // build a corpus big enough to span several chunks is unnecessary here;
  // worker counts must not change bytes regardless
  std::string lines;
  dialogkit::Lcg rng(55);
  const char* ctx[] = {"今天做什么好呢", "有推荐的电影吗", "午饭吃什么", "周末去哪里"};
  const char* resp[] = {"去公园散步呀", "最近那部新片不错", "来碗牛肉面吧", "可以去郊外走走"};
  for (int i = 0; i < 500; ++i) {
    json j;
    j["utterances"] = {std::string(ctx[rng.below(4)]), std::string(resp[rng.below(4)])};
    j["source"] = "comment";
    lines += j.dump() + "\n";
  }
  write_file(tmp.file("sessions.jsonl"), lines);
  write_file(tmp.file("config.json"),
             json({{"clean", {{"highfreq_top_k", 0}}},
                   {"tokenizer", {{"target_size", 60}}}})
                 .dump());

  auto run_clean_pack = [&](const std::string& dir, int workers) {
    REQUIRE(run("clean --config " + tmp.file("config.json") + " --input " +
                tmp.file("sessions.jsonl") + " --output " + tmp.file(dir) +
                " --blocklist " + kDataDir + "/blocklist.txt --workers " +
                std::to_string(workers)) == 0);
    REQUIRE(run("tokenizer --config " + tmp.file("config.json") + " --input " +
                tmp.file(dir + "/cleaned.jsonl") + " --output " + tmp.file(dir)) == 0);
    REQUIRE(run("pack --input " + tmp.file(dir + "/cleaned.jsonl") + " --output " +
                tmp.file(dir) + " --workers " + std::to_string(workers)) == 0);
  };
  run_clean_pack("run1", 1);
  run_clean_pack("run2", 1);
  run_clean_pack("run4", 4);

  CHECK(read_file(tmp.file("run1/cleaned.jsonl")) == read_file(tmp.file("run2/cleaned.jsonl")));
  CHECK(read_file(tmp.file("run1/cleaned.jsonl")) == read_file(tmp.file("run4/cleaned.jsonl")));
  CHECK(read_file(tmp.file("run1/vocab.txt")) == read_file(tmp.file("run2/vocab.txt")));
  CHECK(read_file(tmp.file("run1/vocab.txt")) == read_file(tmp.file("run4/vocab.txt")));
  CHECK(read_file(tmp.file("run1/packed.bin")) == read_file(tmp.file("run2/packed.bin")));
  CHECK(read_file(tmp.file("run1/packed.bin")) == read_file(tmp.file("run4/packed.bin")));
}

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace dialogkit {

enum class RecordKind { repost, comment, qa_question, qa_answer };

const char* kind_name(RecordKind k);
std::optional<RecordKind> kind_from_name(std::string_view name);

// One scraped interaction unit. parent_id is absent for thread roots.
struct RawRecord {
  std::string record_id;
  std::optional<std::string> parent_id;
  std::string thread_id;
  std::string text;
  RecordKind kind = RecordKind::comment;
  std::optional<int64_t> timestamp;
};

struct TreeNode {
  std::string text;
  std::vector<std::string> children;  // ordered by (timestamp, record_id), missing timestamps last
};

struct ReplyTree {
  std::string thread_id;
  std::string root_id;
  RecordKind kind = RecordKind::comment;
  std::map<std::string, TreeNode> nodes;

  std::size_t leaf_count() const;
};

// Per-thread account of records that could not be placed in a tree.
struct OrphanReport {
  std::string thread_id;
  std::vector<std::string> orphan_ids;  // dangling parent or unreachable from any root
  std::size_t malformed = 0;            // missing record_id/text, duplicate record_id
};

enum class SessionSource { repost, comment, qa };

const char* source_name(SessionSource s);
std::optional<SessionSource> source_from_name(std::string_view name);

struct DialogueSession {
  std::vector<std::string> utterances;
  SessionSource source = SessionSource::comment;
  std::vector<std::string> origin_ids;
};

struct TreeBuildResult {
  std::vector<ReplyTree> trees;
  std::vector<OrphanReport> orphans;  // one per thread that had problems
};

// Groups records by thread_id and links parent/child edges. Threads are
// emitted in thread_id order, trees within a thread in root (timestamp,
// record_id) order, so the result is independent of input order. Records with
// a dangling parent (or unreachable through one) are reported, never promoted
// to roots.
TreeBuildResult build_reply_trees(const std::vector<RawRecord>& records);

// One session per leaf, utterances in root-to-leaf order. Children are
// visited in stored order. A single-node tree yields nothing.
std::vector<DialogueSession> extract_sessions(const ReplyTree& tree);

// A question plus each answer becomes one single-turn session.
std::vector<DialogueSession> qa_to_sessions(const std::string& question,
                                            const std::vector<std::string>& answers,
                                            const std::string& question_id = {},
                                            const std::vector<std::string>& answer_ids = {});

// JSONL schemas.
RawRecord record_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const RawRecord& r);
DialogueSession session_from_json(const nlohmann::json& j);
nlohmann::json session_to_json(const DialogueSession& s);

}  // namespace dialogkit

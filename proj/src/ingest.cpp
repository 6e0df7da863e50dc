#include "dialogkit/ingest.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <stdexcept>

#include "dialogkit/util.hpp"

namespace dialogkit {

const char* kind_name(RecordKind k) {
  switch (k) {
    case RecordKind::repost:
      return "repost";
    case RecordKind::comment:
      return "comment";
    case RecordKind::qa_question:
      return "qa_question";
    case RecordKind::qa_answer:
      return "qa_answer";
  }
  return "comment";
}

std::optional<RecordKind> kind_from_name(std::string_view name) {
  if (name == "repost") return RecordKind::repost;
  if (name == "comment") return RecordKind::comment;
  if (name == "qa_question") return RecordKind::qa_question;
  if (name == "qa_answer") return RecordKind::qa_answer;
  return std::nullopt;
}

const char* source_name(SessionSource s) {
  switch (s) {
    case SessionSource::repost:
      return "repost";
    case SessionSource::comment:
      return "comment";
    case SessionSource::qa:
      return "qa";
  }
  return "comment";
}

std::optional<SessionSource> source_from_name(std::string_view name) {
  if (name == "repost") return SessionSource::repost;
  if (name == "comment") return SessionSource::comment;
  if (name == "qa") return SessionSource::qa;
  return std::nullopt;
}

std::size_t ReplyTree::leaf_count() const {
  std::size_t n = 0;
  for (const auto& [id, node] : nodes) {
    if (node.children.empty()) ++n;
  }
  return n;
}

namespace {

SessionSource source_from_kind(RecordKind k) {
  switch (k) {
    case RecordKind::repost:
      return SessionSource::repost;
    case RecordKind::comment:
      return SessionSource::comment;
    default:
      return SessionSource::qa;
  }
}

// Missing timestamps sort after every real one; record_id breaks ties.
struct ChildOrder {
  int64_t ts;
  std::string id;

  explicit ChildOrder(const RawRecord& r)
      : ts(r.timestamp.value_or(std::numeric_limits<int64_t>::max())),
        id(r.record_id) {}

  bool operator<(const ChildOrder& o) const {
    if (ts != o.ts) return ts < o.ts;
    return id < o.id;
  }
};

}  // namespace

TreeBuildResult build_reply_trees(const std::vector<RawRecord>& records) {
  TreeBuildResult result;

  std::map<std::string, std::vector<const RawRecord*>> by_thread;
  for (const auto& r : records) by_thread[r.thread_id].push_back(&r);

  for (auto& [thread_id, recs] : by_thread) {
    OrphanReport report;
    report.thread_id = thread_id;

    std::map<std::string, const RawRecord*> by_id;
    for (const RawRecord* r : recs) {
      if (r->record_id.empty() || r->text.empty()) {
        ++report.malformed;
        continue;
      }
      auto [it, inserted] = by_id.emplace(r->record_id, r);
      if (!inserted) ++report.malformed;  // duplicate record_id, keep first
    }

    std::map<std::string, std::vector<const RawRecord*>> children;
    std::vector<const RawRecord*> roots;
    for (const auto& [id, r] : by_id) {
      if (!r->parent_id.has_value()) {
        roots.push_back(r);
      } else if (by_id.count(*r->parent_id) && *r->parent_id != id) {
        children[*r->parent_id].push_back(r);
      } else {
        report.orphan_ids.push_back(id);  // dangling or self-referencing parent
      }
    }
    for (auto& [pid, kids] : children) {
      std::sort(kids.begin(), kids.end(), [](const RawRecord* a, const RawRecord* b) {
        return ChildOrder(*a) < ChildOrder(*b);
      });
    }
    std::sort(roots.begin(), roots.end(), [](const RawRecord* a, const RawRecord* b) {
      return ChildOrder(*a) < ChildOrder(*b);
    });

    std::set<std::string> reachable;
    for (const RawRecord* root : roots) {
      ReplyTree tree;
      tree.thread_id = thread_id;
      tree.root_id = root->record_id;
      tree.kind = root->kind;

      std::vector<const RawRecord*> stack = {root};
      while (!stack.empty()) {
        const RawRecord* cur = stack.back();
        stack.pop_back();
        if (!reachable.insert(cur->record_id).second) continue;
        TreeNode node;
        node.text = cur->text;
        auto it = children.find(cur->record_id);
        if (it != children.end()) {
          for (const RawRecord* kid : it->second) node.children.push_back(kid->record_id);
          for (auto rit = it->second.rbegin(); rit != it->second.rend(); ++rit)
            stack.push_back(*rit);
        }
        tree.nodes.emplace(cur->record_id, std::move(node));
      }
      result.trees.push_back(std::move(tree));
    }

    // anything linked under a cycle or an orphan never reaches a root
    for (const auto& [id, r] : by_id) {
      if (!reachable.count(id) &&
          std::find(report.orphan_ids.begin(), report.orphan_ids.end(), id) ==
              report.orphan_ids.end()) {
        report.orphan_ids.push_back(id);
      }
    }
    std::sort(report.orphan_ids.begin(), report.orphan_ids.end());

    if (!report.orphan_ids.empty() || report.malformed > 0) {
      result.orphans.push_back(std::move(report));
    }
  }
  return result;
}

std::vector<DialogueSession> extract_sessions(const ReplyTree& tree) {
  std::vector<DialogueSession> sessions;
  if (tree.nodes.empty()) return sessions;

  std::vector<std::string> path;
  // explicit stack of (node_id, depth) keeps child order and avoids recursion
  std::vector<std::pair<std::string, std::size_t>> stack = {{tree.root_id, 0}};
  while (!stack.empty()) {
    auto [id, depth] = std::move(stack.back());
    stack.pop_back();
    path.resize(depth);
    path.push_back(id);
    const auto it = tree.nodes.find(id);
    if (it == tree.nodes.end()) continue;
    const TreeNode& node = it->second;
    if (node.children.empty()) {
      if (path.size() >= 2) {
        DialogueSession s;
        s.source = source_from_kind(tree.kind);
        s.origin_ids = path;
        for (const auto& pid : path) s.utterances.push_back(tree.nodes.at(pid).text);
        sessions.push_back(std::move(s));
      }
      continue;
    }
    for (auto rit = node.children.rbegin(); rit != node.children.rend(); ++rit) {
      stack.emplace_back(*rit, depth + 1);
    }
  }
  return sessions;
}

std::vector<DialogueSession> qa_to_sessions(const std::string& question,
                                            const std::vector<std::string>& answers,
                                            const std::string& question_id,
                                            const std::vector<std::string>& answer_ids) {
  std::vector<DialogueSession> sessions;
  if (question.empty()) return sessions;
  sessions.reserve(answers.size());
  for (std::size_t i = 0; i < answers.size(); ++i) {
    DialogueSession s;
    s.source = SessionSource::qa;
    s.utterances = {question, answers[i]};
    if (!question_id.empty()) {
      s.origin_ids.push_back(question_id);
      s.origin_ids.push_back(i < answer_ids.size() ? answer_ids[i] : "");
    }
    sessions.push_back(std::move(s));
  }
  return sessions;
}

RawRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::runtime_error("record is not an object");
  RawRecord r;
  if (j.contains("record_id") && j["record_id"].is_string())
    r.record_id = j["record_id"].get<std::string>();
  if (j.contains("parent_id") && j["parent_id"].is_string())
    r.parent_id = j["parent_id"].get<std::string>();
  if (j.contains("thread_id") && j["thread_id"].is_string())
    r.thread_id = j["thread_id"].get<std::string>();
  if (j.contains("text") && j["text"].is_string()) r.text = j["text"].get<std::string>();
  if (j.contains("kind") && j["kind"].is_string()) {
    auto k = kind_from_name(j["kind"].get<std::string>());
    if (!k) throw std::runtime_error("unknown record kind");
    r.kind = *k;
  }
  if (j.contains("timestamp") && j["timestamp"].is_number_integer())
    r.timestamp = j["timestamp"].get<int64_t>();
  return r;
}

nlohmann::json record_to_json(const RawRecord& r) {
  nlohmann::json j;
  j["record_id"] = r.record_id;
  if (r.parent_id) j["parent_id"] = *r.parent_id;
  j["thread_id"] = r.thread_id;
  j["text"] = r.text;
  j["kind"] = kind_name(r.kind);
  if (r.timestamp) j["timestamp"] = *r.timestamp;
  return j;
}

DialogueSession session_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("utterances") || !j["utterances"].is_array())
    throw std::runtime_error("session needs an utterances array");
  DialogueSession s;
  for (const auto& u : j["utterances"]) {
    if (!u.is_string()) throw std::runtime_error("utterance is not a string");
    s.utterances.push_back(u.get<std::string>());
  }
  if (j.contains("source") && j["source"].is_string()) {
    auto src = source_from_name(j["source"].get<std::string>());
    if (!src) throw std::runtime_error("unknown session source");
    s.source = *src;
  }
  if (j.contains("origin_ids") && j["origin_ids"].is_array()) {
    for (const auto& id : j["origin_ids"]) s.origin_ids.push_back(id.get<std::string>());
  }
  return s;
}

nlohmann::json session_to_json(const DialogueSession& s) {
  nlohmann::json j;
  j["utterances"] = s.utterances;
  j["source"] = source_name(s.source);
  if (!s.origin_ids.empty()) j["origin_ids"] = s.origin_ids;
  return j;
}

}  // namespace dialogkit

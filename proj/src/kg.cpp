#include "ksgrank/kg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <stdexcept>

namespace ksgrank {

using nlohmann::json;

std::int32_t Interner::intern(std::string_view s) {
  auto it = ids_.find(std::string(s));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(names_.size());
  names_.emplace_back(s);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<std::int32_t> Interner::find(std::string_view s) const {
  auto it = ids_.find(std::string(s));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

void KnowledgeGraph::add_triple(std::string_view s, std::string_view r, std::string_view o) {
  triples.push_back({entities.intern(s), relations.intern(r), entities.intern(o)});
}

void KnowledgeGraph::build_indices() {
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  out_adj.assign(entities.size(), {});
  in_adj.assign(entities.size(), {});
  for (const Triple& t : triples) {
    out_adj[static_cast<std::size_t>(t.subject)].emplace_back(t.relation, t.object);
    in_adj[static_cast<std::size_t>(t.object)].emplace_back(t.relation, t.subject);
  }
  for (auto& v : out_adj) std::sort(v.begin(), v.end());
  for (auto& v : in_adj) std::sort(v.begin(), v.end());
}

KnowledgeGraph load_triples(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_triples: cannot open " + path.string());
  KnowledgeGraph g;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    const auto tab3 = tab2 == std::string::npos ? std::string::npos : line.find('\t', tab2 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos || tab3 != std::string::npos)
      throw std::runtime_error("load_triples: line " + std::to_string(lineno) +
                               ": expected 3 tab-separated fields");
    const std::string_view s(line.data(), tab1);
    const std::string_view r(line.data() + tab1 + 1, tab2 - tab1 - 1);
    const std::string_view o(line.data() + tab2 + 1, line.size() - tab2 - 1);
    if (s.empty() || r.empty() || o.empty())
      throw std::runtime_error("load_triples: line " + std::to_string(lineno) + ": empty field");
    g.add_triple(s, r, o);
  }
  g.build_indices();
  return g;
}

void save_triples(const KnowledgeGraph& g, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_triples: cannot open " + path.string());
  for (const Triple& t : g.triples)
    os << g.entities.name(t.subject) << '\t' << g.relations.name(t.relation) << '\t'
       << g.entities.name(t.object) << '\n';
}

QuestionLoadResult load_questions(const std::filesystem::path& path, const KnowledgeGraph& g) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_questions: cannot open " + path.string());
  QuestionLoadResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      result.errors.push_back("line " + std::to_string(lineno) + ": invalid record");
      continue;
    }
    const std::string id = rec.value("id", "");
    auto record_error = [&](const std::string& what) {
      result.errors.push_back((id.empty() ? "line " + std::to_string(lineno) : "question " + id) +
                              ": " + what);
    };
    if (id.empty()) { record_error("missing field 'id'"); continue; }
    bool missing = false;
    for (const char* field : {"text", "tokens", "topic_entities", "answers"})
      if (!rec.contains(field)) { record_error(std::string("missing field '") + field + "'"); missing = true; break; }
    if (missing) continue;

    QuestionRecord q;
    q.id = id;
    q.text = rec["text"].get<std::string>();
    for (const auto& t : rec["tokens"]) q.tokens.push_back(t.get<std::string>());
    if (q.tokens.empty()) { record_error("empty token list"); continue; }

    for (const auto& e : rec["topic_entities"]) {
      const std::string name = e.get<std::string>();
      if (auto eid = g.entities.find(name)) {
        q.topic_entities.push_back(*eid);
      } else {
        q.fully_resolved = false;
        q.unresolved.push_back(name);
        result.warnings.push_back("question " + id + ": unknown topic entity '" + name + "'");
      }
    }
    std::set<EntityId> ans;
    for (const auto& e : rec["answers"]) {
      const std::string name = e.get<std::string>();
      if (auto eid = g.entities.find(name)) {
        ans.insert(*eid);
      } else {
        q.fully_resolved = false;
        q.unresolved.push_back(name);
        result.warnings.push_back("question " + id + ": unknown answer entity '" + name + "'");
      }
    }
    q.answers.assign(ans.begin(), ans.end());

    if (rec.contains("dependency_edges")) {
      std::set<std::pair<int, int>> edges;
      bool bad = false;
      for (const auto& e : rec["dependency_edges"]) {
        if (!e.is_array() || e.size() != 2) { bad = true; break; }
        const int head = e[0].get<int>();
        const int dep = e[1].get<int>();
        if (head < 0 || dep < 0 || head >= static_cast<int>(q.tokens.size()) ||
            dep >= static_cast<int>(q.tokens.size())) { bad = true; break; }
        edges.emplace(head, dep);
      }
      if (bad) { record_error("dependency edge index out of range"); continue; }
      q.dependency_edges.assign(edges.begin(), edges.end());
    }
    result.records.push_back(std::move(q));
  }
  return result;
}

bool Ksg::contains(EntityId e) const {
  return std::binary_search(nodes.begin(), nodes.end(), e);
}

Ksg khop_retrieve(const KnowledgeGraph& g, std::span<const EntityId> topics, int hops) {
  if (topics.empty()) throw std::invalid_argument("khop_retrieve: no topic entities");
  if (hops < 0) throw std::invalid_argument("khop_retrieve: negative hop count");
  for (EntityId t : topics)
    if (t < 0 || static_cast<std::size_t>(t) >= g.num_entities())
      throw std::invalid_argument("khop_retrieve: topic entity id out of range");

  std::unordered_map<EntityId, int> depth;
  std::deque<EntityId> frontier;
  for (EntityId t : topics) {
    if (depth.emplace(t, 0).second) frontier.push_back(t);
  }
  while (!frontier.empty()) {
    const EntityId u = frontier.front();
    frontier.pop_front();
    const int d = depth[u];
    if (d >= hops) continue;
    auto visit = [&](EntityId v) {
      if (depth.emplace(v, d + 1).second) frontier.push_back(v);
    };
    for (const auto& [rel, v] : g.out_adj[static_cast<std::size_t>(u)]) visit(v);
    for (const auto& [rel, v] : g.in_adj[static_cast<std::size_t>(u)]) visit(v);
  }

  Ksg ksg;
  ksg.nodes.reserve(depth.size());
  for (const auto& [node, d] : depth) ksg.nodes.push_back(node);
  std::sort(ksg.nodes.begin(), ksg.nodes.end());
  for (const Triple& t : g.triples)
    if (ksg.contains(t.subject) && ksg.contains(t.object)) ksg.triples.push_back(t);
  return ksg;
}

}  // namespace ksgrank

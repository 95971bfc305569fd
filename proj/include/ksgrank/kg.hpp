#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ksgrank {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
  EntityId subject;
  RelationId relation;
  EntityId object;

  auto operator<=>(const Triple&) const = default;
};

// string <-> dense id, ids assigned in first-seen order
class Interner {
 public:
  std::int32_t intern(std::string_view s);
  std::optional<std::int32_t> find(std::string_view s) const;
  const std::string& name(std::int32_t id) const { return names_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

// Immutable after load; adjacency indices are exact transposes of each
// other and sorted by (relation id, neighbor id).
struct KnowledgeGraph {
  Interner entities;
  Interner relations;
  std::vector<Triple> triples;  // deduplicated, sorted
  std::vector<std::vector<std::pair<RelationId, EntityId>>> out_adj;
  std::vector<std::vector<std::pair<RelationId, EntityId>>> in_adj;

  std::size_t num_entities() const { return entities.size(); }
  std::size_t num_relations() const { return relations.size(); }
  std::size_t num_triples() const { return triples.size(); }

  void add_triple(std::string_view s, std::string_view r, std::string_view o);
  void build_indices();
};

// UTF-8 TSV, one subject<TAB>relation<TAB>object per line. Empty lines are
// skipped; anything else with a field count != 3 is a parse error.
KnowledgeGraph load_triples(const std::filesystem::path& path);

void save_triples(const KnowledgeGraph& g, const std::filesystem::path& path);

struct QuestionRecord {
  std::string id;
  std::string text;
  std::vector<std::string> tokens;
  std::vector<EntityId> topic_entities;            // resolved, first-seen order
  std::vector<EntityId> answers;                   // resolved, sorted unique
  std::vector<std::pair<int, int>> dependency_edges;  // (head, dependent), deduplicated
  bool fully_resolved = true;                      // false if any topic/answer failed to resolve
  std::vector<std::string> unresolved;             // surface forms that failed
};

struct QuestionLoadResult {
  std::vector<QuestionRecord> records;
  std::vector<std::string> errors;    // malformed records, by id or line
  std::vector<std::string> warnings;  // unresolved entity reports
};

// Line-delimited JSON records with fields id, text, tokens, topic_entities,
// answers and optional dependency_edges.
QuestionLoadResult load_questions(const std::filesystem::path& path, const KnowledgeGraph& g);

// Question-specific subgraph: induced on all entities within `hops`
// of a topic entity, expanding along both edge directions.
struct Ksg {
  std::vector<EntityId> nodes;   // sorted
  std::vector<Triple> triples;   // induced, sorted

  bool contains(EntityId e) const;
};

Ksg khop_retrieve(const KnowledgeGraph& g, std::span<const EntityId> topics, int hops);

}  // namespace ksgrank

#pragma once

#include "ksgrank/kg.hpp"
#include "ksgrank/partition.hpp"
#include "ksgrank/rng.hpp"
#include "ksgrank/tensor.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace ksgrank {

// Shared small-graph shape consumed by the graph encoder.
struct DiGraph {
  std::size_t n = 0;
  std::vector<std::pair<int, int>> edges;  // deduplicated
};

struct QuestionGraph {
  std::vector<std::string> tokens;
  DiGraph graph;
};

// Dependency edges when present (labels dropped), else a linear chain
// token_i -> token_{i+1}.
QuestionGraph build_question_graph(const QuestionRecord& rec);

// Optional entity_id<TAB>display name map for opaque ids.
class NameMap {
 public:
  static NameMap load(const std::filesystem::path& path);

  void set(const std::string& entity, const std::string& name) { names_[entity] = name; }
  // display name if mapped, else the raw entity string
  const std::string& surface(const std::string& entity) const;
  std::size_t size() const { return names_.size(); }

 private:
  std::unordered_map<std::string, std::string> names_;
};

// lowercase split on '.' and '_' (Freebase-style relation strings)
std::vector<std::string> relation_tokens(const std::string& relation);
// lowercase split on whitespace
std::vector<std::string> surface_tokens(const std::string& surface);

// Relations become nodes: each triple (s, r, o) contributes a fresh r node
// and edges s -> r and r -> o.
struct GraphizedSubKsg {
  std::vector<std::vector<std::string>> node_tokens;
  std::vector<EntityId> node_entity;  // -1 for relation nodes
  DiGraph graph;
};

GraphizedSubKsg graphize_subksg(const SubKsg& s, const KnowledgeGraph& g, const NameMap& names);

// Token sequence for the sequence-matching branch: triples in stored order
// (root-to-anchor path first, then anchor children), each as subject
// tokens + relation tokens + object tokens.
std::vector<std::string> linearize_subksg(const SubKsg& s, const KnowledgeGraph& g, const NameMap& names);

class EmbeddingTable {
 public:
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vocab_.size(); }

  std::optional<std::size_t> find(const std::string& token) const;

  // arithmetic mean of member token vectors; out-of-vocabulary tokens
  // contribute zero vectors
  num::Tensor embed_tokens(const std::vector<std::string>& tokens) const;
  // one row per node
  num::Tensor embed_nodes(const std::vector<std::vector<std::string>>& node_tokens) const;
  // one row per token (no averaging)
  num::Tensor embed_token_rows(const std::vector<std::string>& tokens) const;

  // whitespace-delimited `token v1 ... vD` lines; when a vocabulary filter
  // is given, only those tokens are kept
  static EmbeddingTable load(const std::filesystem::path& path,
                             const std::set<std::string>* vocab_filter = nullptr);
  void save(const std::filesystem::path& path) const;

  static EmbeddingTable random(const std::vector<std::string>& vocab, std::size_t dim, num::Rng& rng);

  const std::vector<std::string>& tokens() const { return tokens_; }
  const num::Tensor& matrix() const { return matrix_; }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> vocab_;
  num::Tensor matrix_;  // V x D
};

}  // namespace ksgrank

#pragma once

#include "ksgrank/kg.hpp"

#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ksgrank {

// BFS shortest-path tree over the KSG's directed edges, rooted at a topic
// entity. Ties between equal-depth predecessors break to the smallest
// entity id; self-loops never enter the tree; unreachable nodes are absent.
struct ShortestPathTree {
  EntityId root = -1;
  std::vector<EntityId> nodes;  // reachable, sorted by id
  std::unordered_map<EntityId, EntityId> parent;  // root absent
  std::unordered_map<EntityId, int> depth;
  std::map<EntityId, std::vector<EntityId>> children;  // child lists sorted

  bool is_leaf(EntityId v) const { return children.find(v) == children.end(); }
  std::vector<EntityId> path_from_root(EntityId v) const;
};

ShortestPathTree shortest_path_tree(const Ksg& ksg, EntityId root);

// One partition: the root-to-anchor tree path plus the anchor's tree
// children, with every KSG edge between consecutive path nodes and from
// the anchor to each child.
struct SubKsg {
  std::string question_id;
  EntityId root = -1;
  EntityId anchor = -1;
  std::vector<EntityId> nodes;  // path order, then children sorted by id
  std::vector<Triple> edges;
  int label = 0;
};

enum class LabelMode {
  membership,            // label 1 iff an answer is one of the sub-KSG's nodes
  literal_reachability,  // label 1 iff any answer is reachable from the root
};

int label_subksg(const SubKsg& s, std::span<const EntityId> answers);

// Anchors are tree nodes whose children are all leaves (the root included);
// output is ordered by anchor id.
std::vector<SubKsg> partition_ksg(const Ksg& ksg, EntityId root, std::span<const EntityId> answers,
                                  LabelMode mode = LabelMode::membership);

struct QuestionPartition {
  std::string question_id;
  std::vector<SubKsg> subksgs;      // concatenated over topic entities
  bool excluded = false;            // unanswerable record, skipped in coverage
  std::size_t unreachable_nodes = 0;  // KSG nodes outside every tree
};

// Fraction of non-excluded questions with at least one positive sub-KSG.
double coverage_rate(std::span<const QuestionPartition> questions);

}  // namespace ksgrank

#include "ksgrank/partition.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <stdexcept>

namespace ksgrank {

namespace {

// neighbor lists inside the KSG, deduplicated, self-loops dropped
std::unordered_map<EntityId, std::vector<EntityId>> neighbor_index(const Ksg& ksg, bool forward) {
  std::unordered_map<EntityId, std::vector<EntityId>> adj;
  for (const Triple& t : ksg.triples) {
    if (t.subject == t.object) continue;
    if (forward)
      adj[t.subject].push_back(t.object);
    else
      adj[t.object].push_back(t.subject);
  }
  for (auto& [node, nbrs] : adj) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  return adj;
}

}  // namespace

std::vector<EntityId> ShortestPathTree::path_from_root(EntityId v) const {
  std::vector<EntityId> path;
  EntityId cur = v;
  while (true) {
    path.push_back(cur);
    auto it = parent.find(cur);
    if (it == parent.end()) break;
    cur = it->second;
  }
  std::reverse(path.begin(), path.end());
  if (path.front() != root) throw std::logic_error("path_from_root: node not in tree");
  return path;
}

ShortestPathTree shortest_path_tree(const Ksg& ksg, EntityId root) {
  if (!ksg.contains(root))
    throw std::invalid_argument("shortest_path_tree: root " + std::to_string(root) + " not in KSG");
  const auto adj = neighbor_index(ksg, true);
  const auto pred = neighbor_index(ksg, false);

  ShortestPathTree tree;
  tree.root = root;
  tree.depth[root] = 0;
  std::deque<EntityId> frontier{root};
  while (!frontier.empty()) {
    const EntityId u = frontier.front();
    frontier.pop_front();
    auto it = adj.find(u);
    if (it == adj.end()) continue;
    const int d = tree.depth[u];
    for (EntityId v : it->second) {
      if (tree.depth.emplace(v, d + 1).second) frontier.push_back(v);
    }
  }

  // parent(v) = smallest-id predecessor one level up; BFS discovery order
  // would depend on adjacency order, the min-id rule does not.
  for (const auto& [v, d] : tree.depth) {
    tree.nodes.push_back(v);
    if (v == root) continue;
    EntityId best = -1;
    for (EntityId u : pred.at(v)) {
      auto du = tree.depth.find(u);
      if (du == tree.depth.end() || du->second != d - 1) continue;
      if (best < 0 || u < best) best = u;
      break;  // pred list is sorted, the first hit is the minimum
    }
    tree.parent[v] = best;
  }
  std::sort(tree.nodes.begin(), tree.nodes.end());
  for (const auto& [child, par] : tree.parent) tree.children[par].push_back(child);
  for (auto& [par, kids] : tree.children) std::sort(kids.begin(), kids.end());
  return tree;
}

int label_subksg(const SubKsg& s, std::span<const EntityId> answers) {
  for (EntityId a : answers)
    if (std::find(s.nodes.begin(), s.nodes.end(), a) != s.nodes.end()) return 1;
  return 0;
}

std::vector<SubKsg> partition_ksg(const Ksg& ksg, EntityId root, std::span<const EntityId> answers,
                                  LabelMode mode) {
  const ShortestPathTree tree = shortest_path_tree(ksg, root);

  // edges grouped by endpoint pair, so a path step picks up every
  // parallel relation between its two nodes
  std::map<std::pair<EntityId, EntityId>, std::vector<Triple>> by_pair;
  for (const Triple& t : ksg.triples) by_pair[{t.subject, t.object}].push_back(t);

  int reachable_label = 0;
  if (mode == LabelMode::literal_reachability) {
    for (EntityId a : answers)
      if (tree.depth.count(a)) { reachable_label = 1; break; }
  }

  std::vector<SubKsg> out;
  for (EntityId anchor : tree.nodes) {
    auto kids = tree.children.find(anchor);
    if (kids == tree.children.end()) continue;  // no children
    bool all_leaves = true;
    for (EntityId c : kids->second)
      if (!tree.is_leaf(c)) { all_leaves = false; break; }
    if (!all_leaves) continue;

    SubKsg s;
    s.root = root;
    s.anchor = anchor;
    s.nodes = tree.path_from_root(anchor);
    for (EntityId c : kids->second) s.nodes.push_back(c);
    const std::size_t path_len = s.nodes.size() - kids->second.size();
    for (std::size_t i = 0; i + 1 < path_len; ++i) {
      auto it = by_pair.find({s.nodes[i], s.nodes[i + 1]});
      if (it != by_pair.end()) s.edges.insert(s.edges.end(), it->second.begin(), it->second.end());
    }
    for (EntityId c : kids->second) {
      auto it = by_pair.find({anchor, c});
      if (it != by_pair.end()) s.edges.insert(s.edges.end(), it->second.begin(), it->second.end());
    }
    s.label = mode == LabelMode::membership ? label_subksg(s, answers) : reachable_label;
    out.push_back(std::move(s));
  }
  // tree.nodes is sorted by id, so output is already ordered by anchor
  return out;
}

double coverage_rate(std::span<const QuestionPartition> questions) {
  std::size_t considered = 0, covered = 0;
  for (const QuestionPartition& q : questions) {
    if (q.excluded) continue;
    ++considered;
    for (const SubKsg& s : q.subksgs)
      if (s.label == 1) { ++covered; break; }
  }
  if (considered == 0) throw std::invalid_argument("coverage_rate: no questions to evaluate");
  return static_cast<double>(covered) / static_cast<double>(considered);
}

}  // namespace ksgrank

#include "ksgrank/partition.hpp"
#include "ksgrank/rng.hpp"
#include "ksgrank/selfcheck.hpp"

#include <doctest.h>

#include <set>
#include <sstream>

using namespace ksgrank;

namespace {

Ksg make_ksg(std::size_t n, const std::vector<std::pair<EntityId, EntityId>>& edges) {
  Ksg ksg;
  for (std::size_t i = 0; i < n; ++i) ksg.nodes.push_back(static_cast<EntityId>(i));
  std::set<Triple> uniq;
  for (const auto& [s, o] : edges) uniq.insert({s, 0, o});
  ksg.triples.assign(uniq.begin(), uniq.end());
  return ksg;
}

std::string serialize(const std::vector<SubKsg>& parts) {
  std::ostringstream os;
  for (const SubKsg& s : parts) {
    os << s.anchor << ':';
    for (EntityId v : s.nodes) os << v << ',';
    os << '=' << s.label << ';';
    for (const Triple& t : s.edges) os << t.subject << '>' << t.object << ' ';
    os << '\n';
  }
  return os.str();
}

}  // namespace

TEST_CASE("shortest path tree over a chain") {
  const Ksg ksg = make_ksg(3, {{0, 1}, {1, 2}});
  const ShortestPathTree tree = shortest_path_tree(ksg, 0);
  CHECK(tree.depth.at(0) == 0);
  CHECK(tree.depth.at(1) == 1);
  CHECK(tree.depth.at(2) == 2);
  CHECK(tree.parent.at(1) == 0);
  CHECK(tree.parent.at(2) == 1);
  CHECK(tree.parent.count(0) == 0);
}

TEST_CASE("diamond ties resolve to the smallest parent id") {
  // 0 -> 1 -> 3 and 0 -> 2 -> 3; both paths have length 2
  const Ksg ksg = make_ksg(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  const ShortestPathTree tree = shortest_path_tree(ksg, 0);
  CHECK(tree.parent.at(3) == 1);
}

TEST_CASE("nodes outside the root's reach stay out of the tree") {
  // 3 -> 1 gives node 3 only an incoming path from outside root 0's reach
  const Ksg ksg = make_ksg(4, {{0, 1}, {1, 2}, {3, 1}});
  const ShortestPathTree tree = shortest_path_tree(ksg, 0);
  CHECK(tree.depth.count(3) == 0);
  CHECK(tree.nodes == std::vector<EntityId>{0, 1, 2});
}

TEST_CASE("tree requires the root to be in the subgraph") {
  const Ksg ksg = make_ksg(2, {{0, 1}});
  CHECK_THROWS_AS(shortest_path_tree(ksg, 7), std::invalid_argument);
}

TEST_CASE("self-loops never enter the tree") {
  const Ksg ksg = make_ksg(2, {{0, 0}, {0, 1}, {1, 1}});
  const ShortestPathTree tree = shortest_path_tree(ksg, 0);
  CHECK(tree.parent.at(1) == 0);
  CHECK(tree.children.at(0) == std::vector<EntityId>{1});
}

TEST_CASE("a chain partitions into one sub-KSG anchored mid-path") {
  const Ksg ksg = make_ksg(3, {{0, 1}, {1, 2}});
  const auto parts = partition_ksg(ksg, 0, {});
  REQUIRE(parts.size() == 1);
  CHECK(parts[0].anchor == 1);
  CHECK(parts[0].nodes == std::vector<EntityId>{0, 1, 2});
}

TEST_CASE("a star around the root gives one sub-KSG anchored at the root") {
  const Ksg ksg = make_ksg(4, {{0, 1}, {0, 2}, {0, 3}});
  const auto parts = partition_ksg(ksg, 0, {});
  REQUIRE(parts.size() == 1);
  CHECK(parts[0].anchor == 0);
  CHECK(parts[0].nodes == std::vector<EntityId>{0, 1, 2, 3});
}

TEST_CASE("a root with no outgoing edges yields no sub-KSGs") {
  const Ksg ksg = make_ksg(3, {{1, 2}});
  CHECK(partition_ksg(ksg, 0, {}).empty());
}

TEST_CASE("labels follow answer membership") {
  const Ksg ksg = make_ksg(4, {{0, 1}, {1, 2}, {1, 3}});
  SUBCASE("answers disjoint from the nodes") {
    const auto parts = partition_ksg(ksg, 0, std::vector<EntityId>{});
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].label == 0);
  }
  SUBCASE("an answer among the anchor's children") {
    const auto parts = partition_ksg(ksg, 0, std::vector<EntityId>{3});
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].label == 1);
  }
}

TEST_CASE("literal reachability labeling marks every sub-KSG of an answerable question") {
  // two branches; answer 2 sits in only one of them
  const Ksg ksg = make_ksg(5, {{0, 1}, {1, 2}, {0, 3}, {3, 4}});
  const std::vector<EntityId> answers{2};
  const auto membership = partition_ksg(ksg, 0, answers, LabelMode::membership);
  REQUIRE(membership.size() == 2);
  CHECK(membership[0].label + membership[1].label == 1);
  const auto literal = partition_ksg(ksg, 0, answers, LabelMode::literal_reachability);
  CHECK(literal[0].label == 1);
  CHECK(literal[1].label == 1);
}

TEST_CASE("sub-KSG edges cover the path and the anchor's children") {
  const Ksg ksg = make_ksg(4, {{0, 1}, {1, 2}, {1, 3}});
  const auto parts = partition_ksg(ksg, 0, {});
  REQUIRE(parts.size() == 1);
  std::set<std::pair<EntityId, EntityId>> edges;
  for (const Triple& t : parts[0].edges) edges.emplace(t.subject, t.object);
  CHECK(edges == std::set<std::pair<EntityId, EntityId>>{{0, 1}, {1, 2}, {1, 3}});
}

TEST_CASE("parallel relations between path nodes are all kept") {
  Ksg ksg;
  ksg.nodes = {0, 1, 2};
  ksg.triples = {{0, 0, 1}, {0, 1, 1}, {1, 0, 2}};
  const auto parts = partition_ksg(ksg, 0, {});
  REQUIRE(parts.size() == 1);
  CHECK(parts[0].edges.size() == 3);
}

TEST_CASE("random graphs match the literal reference simulation") {
  num::Rng rng(607);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng.index(20);
    std::vector<std::pair<EntityId, EntityId>> edges;
    const std::size_t m = 1 + rng.index(40);
    std::set<std::pair<EntityId, EntityId>> uniq;
    for (std::size_t e = 0; e < m; ++e)
      uniq.emplace(static_cast<EntityId>(rng.index(n)), static_cast<EntityId>(rng.index(n)));
    edges.assign(uniq.begin(), uniq.end());
    std::vector<EntityId> answers;
    for (std::size_t a = 0; a < rng.index(3); ++a)
      answers.push_back(static_cast<EntityId>(rng.index(n)));
    const EntityId root = static_cast<EntityId>(rng.index(n));

    const auto got = partition_ksg(make_ksg(n, edges), root, answers);
    const auto want = selfcheck::reference_partition(n, edges, root, answers);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].anchor == want[i].anchor);
      CHECK(got[i].nodes == want[i].nodes);
      CHECK(got[i].label == want[i].label);
    }
  }
}

TEST_CASE("every deepest tree leaf is covered by some sub-KSG") {
  // the parent of a maximum-depth leaf has all-leaf children, so it
  // becomes an anchor; shallower leaves can be skipped by the algorithm
  num::Rng rng(608);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + rng.index(15);
    std::set<std::pair<EntityId, EntityId>> edges;
    for (std::size_t e = 0; e < n * 2; ++e)
      edges.emplace(static_cast<EntityId>(rng.index(n)), static_cast<EntityId>(rng.index(n)));
    const Ksg ksg = make_ksg(n, {edges.begin(), edges.end()});
    const ShortestPathTree tree = shortest_path_tree(ksg, 0);
    int max_depth = 0;
    for (const auto& [v, d] : tree.depth) max_depth = std::max(max_depth, d);
    if (max_depth == 0) continue;
    const auto parts = partition_ksg(ksg, 0, {});
    std::set<EntityId> covered;
    for (const SubKsg& s : parts) covered.insert(s.nodes.begin(), s.nodes.end());
    for (const auto& [v, d] : tree.depth)
      if (d == max_depth) CHECK(covered.count(v) == 1);
  }
}

TEST_CASE("path validity holds on random partitions") {
  num::Rng rng(609);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng.index(15);
    std::set<std::pair<EntityId, EntityId>> edge_set;
    for (std::size_t e = 0; e < n * 2; ++e)
      edge_set.emplace(static_cast<EntityId>(rng.index(n)), static_cast<EntityId>(rng.index(n)));
    const Ksg ksg = make_ksg(n, {edge_set.begin(), edge_set.end()});
    const ShortestPathTree tree = shortest_path_tree(ksg, 0);
    for (const SubKsg& s : partition_ksg(ksg, 0, {})) {
      const std::size_t path_len = s.nodes.size() - tree.children.at(s.anchor).size();
      for (std::size_t i = 0; i + 1 < path_len; ++i)
        CHECK(edge_set.count({s.nodes[i], s.nodes[i + 1]}) == 1);
      for (std::size_t i = path_len; i < s.nodes.size(); ++i)
        CHECK(tree.parent.at(s.nodes[i]) == s.anchor);
    }
  }
}

TEST_CASE("partition output is deterministic across runs") {
  num::Rng rng(610);
  const std::size_t n = 12;
  std::vector<std::pair<EntityId, EntityId>> edges;
  for (std::size_t e = 0; e < 30; ++e)
    edges.emplace_back(static_cast<EntityId>(rng.index(n)), static_cast<EntityId>(rng.index(n)));
  const Ksg ksg = make_ksg(n, edges);
  CHECK(serialize(partition_ksg(ksg, 0, {3, 7})) == serialize(partition_ksg(ksg, 0, {3, 7})));
}

TEST_CASE("coverage rate counts questions with a positive sub-KSG") {
  QuestionPartition a;
  a.subksgs.push_back({"a", 0, 1, {0, 1}, {}, 1});
  QuestionPartition b;
  b.subksgs.push_back({"b", 0, 1, {0, 1}, {}, 0});
  SUBCASE("all covered") {
    CHECK(coverage_rate(std::vector<QuestionPartition>{a, a}) == 1.0);
  }
  SUBCASE("half covered") {
    CHECK(coverage_rate(std::vector<QuestionPartition>{a, b}) == 0.5);
  }
  SUBCASE("excluded questions are skipped") {
    QuestionPartition c;
    c.excluded = true;
    CHECK(coverage_rate(std::vector<QuestionPartition>{a, b, c}) == 0.5);
  }
  SUBCASE("empty input is an error") {
    CHECK_THROWS_AS(coverage_rate(std::vector<QuestionPartition>{}), std::invalid_argument);
  }
}

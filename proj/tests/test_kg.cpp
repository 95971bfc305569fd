#include "ksgrank/kg.hpp"
#include "ksgrank/rng.hpp"

#include <doctest.h>

#include <deque>
#include <filesystem>
#include <fstream>
#include <set>

using namespace ksgrank;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
  const fs::path dir = fs::temp_directory_path() / "ksgrank-kg-test";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream os(p, std::ios::binary);
  os << content;
  return p;
}

KnowledgeGraph random_graph(num::Rng& rng, std::size_t n, std::size_t m) {
  KnowledgeGraph g;
  for (std::size_t i = 0; i < n; ++i) g.entities.intern("n" + std::to_string(i));
  for (std::size_t e = 0; e < m; ++e)
    g.add_triple("n" + std::to_string(rng.index(n)), "r" + std::to_string(rng.index(3)),
                 "n" + std::to_string(rng.index(n)));
  g.build_indices();
  return g;
}

// independent breadth-first expansion in both directions
std::set<EntityId> brute_force_khop(const KnowledgeGraph& g, EntityId topic, int k) {
  std::set<EntityId> seen{topic};
  std::deque<std::pair<EntityId, int>> q{{topic, 0}};
  while (!q.empty()) {
    auto [u, d] = q.front();
    q.pop_front();
    if (d == k) continue;
    for (const Triple& t : g.triples) {
      if (t.subject == u && !seen.count(t.object)) {
        seen.insert(t.object);
        q.emplace_back(t.object, d + 1);
      }
      if (t.object == u && !seen.count(t.subject)) {
        seen.insert(t.subject);
        q.emplace_back(t.subject, d + 1);
      }
    }
  }
  return seen;
}

}  // namespace

TEST_CASE("two triples intern three entities and two relations") {
  const auto p = write_temp("two.tsv", "a\tr\tb\nb\tr2\tc\n");
  const KnowledgeGraph g = load_triples(p);
  CHECK(g.num_entities() == 3);
  CHECK(g.num_relations() == 2);
  CHECK(g.num_triples() == 2);
}

TEST_CASE("empty file loads an empty graph") {
  const auto p = write_temp("empty.tsv", "");
  const KnowledgeGraph g = load_triples(p);
  CHECK(g.num_entities() == 0);
  CHECK(g.num_triples() == 0);
}

TEST_CASE("duplicate triples collapse to one") {
  const auto p = write_temp("dup.tsv", "a\tr\tb\na\tr\tb\n");
  CHECK(load_triples(p).num_triples() == 1);
}

TEST_CASE("malformed lines report their line number") {
  const auto p = write_temp("bad.tsv", "a\tr\tb\nbroken line\n");
  CHECK_THROWS_WITH_AS(load_triples(p), "load_triples: line 2: expected 3 tab-separated fields",
                       std::runtime_error);
}

TEST_CASE("out and in adjacency indices are exact transposes") {
  num::Rng rng(21);
  const KnowledgeGraph g = random_graph(rng, 40, 200);
  std::size_t out_count = 0, in_count = 0;
  for (std::size_t s = 0; s < g.num_entities(); ++s)
    for (const auto& [r, o] : g.out_adj[s]) {
      ++out_count;
      const auto& back = g.in_adj[static_cast<std::size_t>(o)];
      CHECK(std::find(back.begin(), back.end(),
                      std::make_pair(r, static_cast<EntityId>(s))) != back.end());
    }
  for (std::size_t o = 0; o < g.num_entities(); ++o)
    for (const auto& [r, s] : g.in_adj[o]) {
      ++in_count;
      const auto& fwd = g.out_adj[static_cast<std::size_t>(s)];
      CHECK(std::find(fwd.begin(), fwd.end(),
                      std::make_pair(r, static_cast<EntityId>(o))) != fwd.end());
    }
  CHECK(out_count == in_count);
  CHECK(out_count == g.num_triples());
}

TEST_CASE("adjacency lists are sorted by relation then neighbor") {
  num::Rng rng(22);
  const KnowledgeGraph g = random_graph(rng, 20, 120);
  for (const auto& adj : g.out_adj) CHECK(std::is_sorted(adj.begin(), adj.end()));
  for (const auto& adj : g.in_adj) CHECK(std::is_sorted(adj.begin(), adj.end()));
}

TEST_CASE("khop on a chain stops at the hop budget") {
  const auto p = write_temp("chain.tsv", "a\tr\tb\nb\tr\tc\nc\tr\td\n");
  const KnowledgeGraph g = load_triples(p);
  const EntityId a = *g.entities.find("a");
  const Ksg ksg = khop_retrieve(g, std::vector<EntityId>{a}, 2);
  CHECK(ksg.nodes.size() == 3);
  CHECK(ksg.contains(*g.entities.find("a")));
  CHECK(ksg.contains(*g.entities.find("b")));
  CHECK(ksg.contains(*g.entities.find("c")));
  CHECK_FALSE(ksg.contains(*g.entities.find("d")));
}

TEST_CASE("khop with zero hops returns just the topic") {
  const auto p = write_temp("chain2.tsv", "a\tr\tb\n");
  const KnowledgeGraph g = load_triples(p);
  const Ksg ksg = khop_retrieve(g, std::vector<EntityId>{*g.entities.find("a")}, 0);
  CHECK(ksg.nodes.size() == 1);
  CHECK(ksg.triples.empty());
}

TEST_CASE("khop rejects empty topic lists") {
  const auto p = write_temp("chain3.tsv", "a\tr\tb\n");
  const KnowledgeGraph g = load_triples(p);
  CHECK_THROWS_AS(khop_retrieve(g, std::vector<EntityId>{}, 2), std::invalid_argument);
}

TEST_CASE("khop matches a brute-force breadth-first oracle") {
  num::Rng rng(23);
  const KnowledgeGraph g = random_graph(rng, 30, 70);
  for (int trial = 0; trial < 10; ++trial) {
    const EntityId topic = static_cast<EntityId>(rng.index(30));
    const Ksg ksg = khop_retrieve(g, std::vector<EntityId>{topic}, 3);
    const auto want = brute_force_khop(g, topic, 3);
    CHECK(std::set<EntityId>(ksg.nodes.begin(), ksg.nodes.end()) == want);
    // induced edges: both endpoints inside
    for (const Triple& t : ksg.triples) {
      CHECK(want.count(t.subject));
      CHECK(want.count(t.object));
    }
  }
}

TEST_CASE("khop is monotone in the hop count") {
  num::Rng rng(24);
  const KnowledgeGraph g = random_graph(rng, 25, 60);
  const EntityId topic = 0;
  for (int k = 0; k < 4; ++k) {
    const Ksg a = khop_retrieve(g, std::vector<EntityId>{topic}, k);
    const Ksg b = khop_retrieve(g, std::vector<EntityId>{topic}, k + 1);
    for (EntityId v : a.nodes) CHECK(b.contains(v));
  }
}

TEST_CASE("save and reload round-trips the triple set") {
  num::Rng rng(25);
  const KnowledgeGraph g = random_graph(rng, 15, 40);
  const fs::path p = fs::temp_directory_path() / "ksgrank-kg-test" / "roundtrip.tsv";
  save_triples(g, p);
  const KnowledgeGraph g2 = load_triples(p);
  REQUIRE(g2.num_triples() == g.num_triples());
  for (const Triple& t : g.triples) {
    const Triple mapped{*g2.entities.find(g.entities.name(t.subject)),
                        *g2.relations.find(g.relations.name(t.relation)),
                        *g2.entities.find(g.entities.name(t.object))};
    CHECK(std::binary_search(g2.triples.begin(), g2.triples.end(), mapped));
  }
}

TEST_CASE("question records load and resolve against the graph") {
  const auto kg_path = write_temp("qkg.tsv", "a\tr\tb\nb\tr\tc\n");
  const KnowledgeGraph g = load_triples(kg_path);
  const auto q_path = write_temp(
      "qs.jsonl",
      R"({"id":"q1","text":"x","tokens":["where","is","a"],"topic_entities":["a"],"answers":["b","c"]})"
      "\n");
  const auto result = load_questions(q_path, g);
  REQUIRE(result.records.size() == 1);
  CHECK(result.records[0].answers.size() == 2);
  CHECK(result.records[0].topic_entities.size() == 1);
  CHECK(result.records[0].fully_resolved);
  CHECK(result.errors.empty());
}

TEST_CASE("unknown answers flag the record and warn") {
  const auto kg_path = write_temp("qkg2.tsv", "a\tr\tb\n");
  const KnowledgeGraph g = load_triples(kg_path);
  const auto q_path = write_temp(
      "qs2.jsonl",
      R"({"id":"q1","text":"x","tokens":["t"],"topic_entities":["a"],"answers":["missing"]})"
      "\n");
  const auto result = load_questions(q_path, g);
  REQUIRE(result.records.size() == 1);
  CHECK_FALSE(result.records[0].fully_resolved);
  CHECK(result.records[0].answers.empty());
  CHECK(result.warnings.size() == 1);
}

TEST_CASE("malformed records are reported alongside good ones") {
  const auto kg_path = write_temp("qkg3.tsv", "a\tr\tb\n");
  const KnowledgeGraph g = load_triples(kg_path);
  const auto q_path = write_temp(
      "qs3.jsonl",
      R"({"id":"q1","text":"x","tokens":["t"],"topic_entities":["a"],"answers":["b"]})"
      "\n"
      R"({"id":"q2","text":"x","topic_entities":["a"],"answers":["b"]})"
      "\n"
      R"({"id":"q3","text":"x","tokens":["t"],"topic_entities":["b"],"answers":["a"]})"
      "\n");
  const auto result = load_questions(q_path, g);
  CHECK(result.records.size() == 2);
  REQUIRE(result.errors.size() == 1);
  CHECK(result.errors[0].find("q2") != std::string::npos);
}

TEST_CASE("dependency edges out of range are record errors") {
  const auto kg_path = write_temp("qkg4.tsv", "a\tr\tb\n");
  const KnowledgeGraph g = load_triples(kg_path);
  const auto q_path = write_temp(
      "qs4.jsonl",
      R"({"id":"q1","text":"x","tokens":["t","u"],"topic_entities":["a"],"answers":["b"],"dependency_edges":[[0,5]]})"
      "\n");
  const auto result = load_questions(q_path, g);
  CHECK(result.records.empty());
  CHECK(result.errors.size() == 1);
}

#include "ksgrank/text.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace ksgrank;
namespace fs = std::filesystem;

namespace {

KnowledgeGraph tiny_kg() {
  KnowledgeGraph g;
  g.add_triple("a", "education.institution", "b");
  g.add_triple("a", "education.institution", "c");
  g.add_triple("b", "people.person_spouse", "c");
  g.build_indices();
  return g;
}

SubKsg make_subksg(const KnowledgeGraph& g, const std::vector<std::array<const char*, 3>>& triples) {
  SubKsg s;
  for (const auto& [subj, rel, obj] : triples) {
    s.edges.push_back({*g.entities.find(subj), *g.relations.find(rel), *g.entities.find(obj)});
    for (const char* e : {subj, obj}) {
      const EntityId id = *g.entities.find(e);
      if (std::find(s.nodes.begin(), s.nodes.end(), id) == s.nodes.end()) s.nodes.push_back(id);
    }
  }
  return s;
}

fs::path write_temp(const std::string& name, const std::string& content) {
  const fs::path dir = fs::temp_directory_path() / "ksgrank-text-test";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream os(p, std::ios::binary);
  os << content;
  return p;
}

}  // namespace

TEST_CASE("question graph falls back to a token chain") {
  QuestionRecord rec;
  rec.tokens = {"what", "is", "this"};
  const QuestionGraph qg = build_question_graph(rec);
  CHECK(qg.graph.n == 3);
  CHECK(qg.graph.edges == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});
}

TEST_CASE("question graph uses parse edges when present") {
  QuestionRecord rec;
  rec.tokens = {"a", "b", "c"};
  rec.dependency_edges = {{1, 0}, {1, 2}};
  const QuestionGraph qg = build_question_graph(rec);
  CHECK(qg.graph.edges == std::vector<std::pair<int, int>>{{1, 0}, {1, 2}});
}

TEST_CASE("duplicate parse edges collapse") {
  QuestionRecord rec;
  rec.tokens = {"a", "b"};
  rec.dependency_edges = {{0, 1}, {0, 1}};
  CHECK(build_question_graph(rec).graph.edges.size() == 1);
}

TEST_CASE("graphizing one triple gives three nodes and two edges") {
  const KnowledgeGraph g = tiny_kg();
  const SubKsg s = make_subksg(g, {{"a", "education.institution", "b"}});
  const GraphizedSubKsg gs = graphize_subksg(s, g, {});
  CHECK(gs.graph.n == 3);
  CHECK(gs.graph.edges == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});
  CHECK(gs.node_entity[0] >= 0);
  CHECK(gs.node_entity[1] == -1);  // relation node
  CHECK(gs.node_tokens[1] == std::vector<std::string>{"education", "institution"});
}

TEST_CASE("two triples sharing a subject make five nodes") {
  const KnowledgeGraph g = tiny_kg();
  const SubKsg s = make_subksg(
      g, {{"a", "education.institution", "b"}, {"a", "people.person_spouse", "c"}});
  // wrong relation for the kg's (a, c) pair is fine here; graphize reads the triples as given
  const GraphizedSubKsg gs = graphize_subksg(s, g, {});
  CHECK(gs.graph.n == 5);
  CHECK(gs.graph.edges.size() == 4);
}

TEST_CASE("a relation used twice becomes two distinct nodes") {
  const KnowledgeGraph g = tiny_kg();
  const SubKsg s = make_subksg(
      g, {{"a", "education.institution", "b"}, {"b", "education.institution", "c"}});
  const GraphizedSubKsg gs = graphize_subksg(s, g, {});
  // node count = distinct entities + one relation node per triple
  CHECK(gs.graph.n == 3 + 2);
  CHECK(gs.graph.edges.size() == 2 * 2);
  std::size_t relation_nodes = 0;
  for (EntityId e : gs.node_entity)
    if (e < 0) ++relation_nodes;
  CHECK(relation_nodes == 2);
}

TEST_CASE("graphize rejects empty sub-KSGs") {
  SubKsg s;
  CHECK_THROWS_AS(graphize_subksg(s, tiny_kg(), {}), std::invalid_argument);
}

TEST_CASE("linearize splits relations on dots and underscores") {
  const KnowledgeGraph g = tiny_kg();
  const SubKsg s = make_subksg(g, {{"a", "education.institution", "b"}});
  CHECK(linearize_subksg(s, g, {}) ==
        std::vector<std::string>{"a", "education", "institution", "b"});
}

TEST_CASE("linearize keeps path order") {
  const KnowledgeGraph g = tiny_kg();
  const SubKsg s = make_subksg(
      g, {{"a", "education.institution", "b"}, {"b", "people.person_spouse", "c"}});
  CHECK(linearize_subksg(s, g, {}) ==
        std::vector<std::string>{"a", "education", "institution", "b",
                                 "b", "people", "person", "spouse", "c"});
}

TEST_CASE("an empty relation name contributes no tokens") {
  CHECK(relation_tokens("").empty());
  CHECK(relation_tokens("...___").empty());
}

TEST_CASE("display names map through the name table") {
  NameMap names;
  names.set("a", "Ada Lovelace");
  CHECK(names.surface("a") == "Ada Lovelace");
  CHECK(names.surface("unknown") == "unknown");
  CHECK(surface_tokens("Ada Lovelace") == std::vector<std::string>{"ada", "lovelace"});
}

TEST_CASE("embedding means over member tokens") {
  const auto p = write_temp("emb.txt", "hot 1 0 2\ncold 0 2 0\n");
  const EmbeddingTable table = EmbeddingTable::load(p);
  REQUIRE(table.dim() == 3);
  REQUIRE(table.size() == 2);

  SUBCASE("singleton is the vector itself") {
    const auto v = table.embed_tokens({"hot"});
    CHECK(v(0, 0) == 1.0);
    CHECK(v(0, 2) == 2.0);
  }
  SUBCASE("two tokens average") {
    const auto v = table.embed_tokens({"hot", "cold"});
    CHECK(v(0, 0) == 0.5);
    CHECK(v(0, 1) == 1.0);
    CHECK(v(0, 2) == 1.0);
  }
  SUBCASE("all tokens out of vocabulary give the zero vector") {
    const auto v = table.embed_tokens({"snow", "rain"});
    for (std::size_t j = 0; j < 3; ++j) CHECK(v(0, j) == 0.0);
  }
  SUBCASE("the mean is permutation invariant") {
    const auto a = table.embed_tokens({"hot", "cold", "snow"});
    const auto b = table.embed_tokens({"snow", "hot", "cold"});
    CHECK(a.data() == b.data());
  }
}

TEST_CASE("embedding load enforces a consistent width") {
  const auto p = write_temp("bad_emb.txt", "a 1 2 3\nb 1 2\n");
  CHECK_THROWS_AS(EmbeddingTable::load(p), std::runtime_error);
}

TEST_CASE("vocabulary filter restricts the table") {
  const auto p = write_temp("emb2.txt", "a 1 2\nb 3 4\nc 5 6\n");
  const std::set<std::string> keep{"a", "c"};
  const EmbeddingTable table = EmbeddingTable::load(p, &keep);
  CHECK(table.size() == 2);
  CHECK(table.find("b") == std::nullopt);
}

TEST_CASE("saved embeddings reload with an identical matrix") {
  num::Rng rng(19);
  const EmbeddingTable table = EmbeddingTable::random({"x", "y", "z"}, 5, rng);
  const fs::path p = write_temp("roundtrip_emb.txt", "");
  table.save(p);
  const EmbeddingTable again = EmbeddingTable::load(p);
  REQUIRE(again.size() == table.size());
  REQUIRE(again.dim() == table.dim());
  CHECK(again.matrix().data() == table.matrix().data());
}

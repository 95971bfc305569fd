#include "ksgrank/synth.hpp"

#include "ksgrank/kg.hpp"
#include "ksgrank/partition.hpp"
#include "ksgrank/rng.hpp"
#include "ksgrank/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ksgrank::synth {

using nlohmann::json;

namespace {

const char* const kNouns[] = {
    "amber", "birch", "cedar", "delta", "ember",  "falcon", "garnet", "harbor",
    "iris",  "jade",  "krait", "lotus", "maple",  "nickel", "onyx",   "prairie",
    "quartz", "raven", "stone", "tundra", "umber", "violet", "willow", "zephyr",
};

const char* const kRelations[] = {
    "person.education.institution",
    "person.place_of_birth",
    "person.employment.company",
    "person.sibling",
    "organization.founder",
    "organization.headquarters.location",
    "location.contained_by",
    "location.capital",
    "film.directed_by",
    "film.performance.character",
    "book.author",
    "music.genre",
};

std::string entity_key(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "e%03u", static_cast<unsigned>(i));
  return buf;
}

}  // namespace

SynthDataset generate(const SynthSpec& spec) {
  num::Rng rng(spec.seed);
  const std::size_t n = spec.entities;
  constexpr std::size_t noun_count = sizeof(kNouns) / sizeof(kNouns[0]);
  constexpr std::size_t rel_count = sizeof(kRelations) / sizeof(kRelations[0]);

  std::vector<std::string> names(n);
  for (std::size_t i = 0; i < n; ++i)
    names[i] = std::string(kNouns[rng.index(noun_count)]) + " " + kNouns[rng.index(noun_count)];

  // ring backbone for connectivity plus random fan-out; a couple of
  // self-loops exercise the loop-handling paths
  std::set<std::array<std::size_t, 3>> edge_set;  // (subject, relation, object)
  for (std::size_t i = 0; i < n; ++i)
    edge_set.insert({i, rng.index(rel_count), (i + 1) % n});
  const std::size_t extra = 2 * n;
  for (std::size_t k = 0; k < extra; ++k) {
    const std::size_t s = rng.index(n);
    const std::size_t o = rng.index(n);
    edge_set.insert({s, rng.index(rel_count), o});
  }
  edge_set.insert({3, 0, 3});
  edge_set.insert({17, 4, 17});

  KnowledgeGraph kg;
  std::ostringstream triples;
  for (const auto& [s, r, o] : edge_set) {
    triples << entity_key(s) << '\t' << kRelations[r] << '\t' << entity_key(o) << '\n';
    kg.add_triple(entity_key(s), kRelations[r], entity_key(o));
  }
  kg.build_indices();

  std::ostringstream names_tsv;
  for (std::size_t i = 0; i < n; ++i) names_tsv << entity_key(i) << '\t' << names[i] << '\n';

  std::set<std::string> vocab{"what", "of", "the", "which"};
  for (std::size_t i = 0; i < n; ++i)
    for (const std::string& w : surface_tokens(names[i])) vocab.insert(w);
  for (std::size_t r = 0; r < rel_count; ++r)
    for (const std::string& w : relation_tokens(kRelations[r])) vocab.insert(w);

  std::ostringstream questions;
  for (std::size_t qi = 0; qi < spec.questions; ++qi) {
    const EntityId topic = static_cast<EntityId>(rng.index(n));
    const Ksg ksg = khop_retrieve(kg, std::vector<EntityId>{topic}, 2);
    const auto subksgs = partition_ksg(ksg, topic, {});

    std::set<EntityId> partitioned;
    for (const SubKsg& s : subksgs)
      for (EntityId v : s.nodes)
        if (v != topic) partitioned.insert(v);

    std::string answer;
    bool covered = false;
    if (qi < spec.questions - 5 && !partitioned.empty()) {
      std::vector<EntityId> pool(partitioned.begin(), partitioned.end());
      answer = kg.entities.name(pool[rng.index(pool.size())]);
      covered = true;
    } else if (qi >= spec.questions - 2) {
      answer = "m.unknown" + std::to_string(qi);  // unresolvable on purpose
    } else {
      // a node outside every sub-KSG: answerable in the KG, never covered
      for (std::size_t i = 0; i < n; ++i) {
        const auto e = static_cast<EntityId>((qi * 31 + i) % n);
        if (e != topic && !partitioned.count(e)) { answer = kg.entities.name(e); break; }
      }
    }

    // phrase the question around a relation that actually points at the
    // answer when one exists
    std::vector<std::string> rel_toks;
    if (covered) {
      const EntityId aid = *kg.entities.find(answer);
      for (const Triple& t : ksg.triples)
        if (t.object == aid) { rel_toks = relation_tokens(kg.relations.name(t.relation)); break; }
    }
    if (rel_toks.empty()) rel_toks = relation_tokens(kRelations[rng.index(rel_count)]);

    std::vector<std::string> tokens{"what"};
    tokens.insert(tokens.end(), rel_toks.begin(), rel_toks.end());
    tokens.push_back("of");
    for (const std::string& w : surface_tokens(names[static_cast<std::size_t>(topic)]))
      tokens.push_back(w);

    json q;
    q["id"] = "q" + std::to_string(qi);
    std::string text;
    for (const std::string& t : tokens) {
      if (!text.empty()) text += ' ';
      text += t;
    }
    q["text"] = text;
    q["tokens"] = tokens;
    q["topic_entities"] = json::array({kg.entities.name(topic)});
    q["answers"] = json::array({answer});
    if (qi % 3 == 0) {
      // flat parse rooted at the wh-word
      json edges = json::array();
      for (std::size_t i = 1; i < tokens.size(); ++i) edges.push_back(json::array({0, i}));
      q["dependency_edges"] = edges;
    }
    questions << q.dump() << '\n';
  }

  std::ostringstream emb;
  char buf[32];
  for (const std::string& w : vocab) {
    emb << w;
    for (std::size_t d = 0; d < spec.embedding_dim; ++d) {
      std::snprintf(buf, sizeof(buf), " %.6f", rng.uniform(-0.5, 0.5));
      emb << buf;
    }
    emb << '\n';
  }

  SynthDataset ds;
  ds.triples_tsv = triples.str();
  ds.questions_jsonl = questions.str();
  ds.entity_names_tsv = names_tsv.str();
  ds.embeddings_txt = emb.str();
  return ds;
}

void write(const SynthDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto dump = [&](const char* file, const std::string& text) {
    std::ofstream os(dir / file, std::ios::binary);
    os << text;
  };
  dump("triples.tsv", ds.triples_tsv);
  dump("questions.jsonl", ds.questions_jsonl);
  dump("entity_names.tsv", ds.entity_names_tsv);
  dump("embeddings.txt", ds.embeddings_txt);
}

}  // namespace ksgrank::synth

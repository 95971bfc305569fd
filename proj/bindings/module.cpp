#include "ksgrank/kg.hpp"
#include "ksgrank/metrics.hpp"
#include "ksgrank/partition.hpp"
#include "ksgrank/pipeline.hpp"
#include "ksgrank/ranker.hpp"
#include "ksgrank/selfcheck.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

namespace py = pybind11;
using namespace ksgrank;

namespace {

std::vector<EntityId> resolve_entities(const KnowledgeGraph& g, const std::vector<std::string>& names) {
  std::vector<EntityId> out;
  for (const std::string& n : names) {
    auto id = g.entities.find(n);
    if (!id) throw std::invalid_argument("unknown entity: " + n);
    out.push_back(*id);
  }
  return out;
}

py::dict subksg_to_dict(const KnowledgeGraph& g, const SubKsg& s) {
  py::dict d;
  d["question_id"] = s.question_id;
  d["root"] = g.entities.name(s.root);
  d["anchor"] = g.entities.name(s.anchor);
  py::list nodes;
  for (EntityId e : s.nodes) nodes.append(g.entities.name(e));
  d["nodes"] = nodes;
  py::list edges;
  for (const Triple& t : s.edges) {
    py::list e;
    e.append(g.entities.name(t.subject));
    e.append(g.relations.name(t.relation));
    e.append(g.entities.name(t.object));
    edges.append(e);
  }
  d["edges"] = edges;
  d["label"] = s.label;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ksgrank, m) {
  m.doc() = "knowledge-subgraph partitioning, ranking and evaluation core";

  py::class_<Ksg>(m, "Ksg")
      .def_property_readonly("num_nodes", [](const Ksg& k) { return k.nodes.size(); })
      .def_property_readonly("num_triples", [](const Ksg& k) { return k.triples.size(); });

  py::class_<KnowledgeGraph>(m, "KnowledgeGraph")
      .def_property_readonly("num_entities", &KnowledgeGraph::num_entities)
      .def_property_readonly("num_relations", &KnowledgeGraph::num_relations)
      .def_property_readonly("num_triples", &KnowledgeGraph::num_triples)
      .def("entity_names",
           [](const KnowledgeGraph& g, const Ksg& k) {
             std::vector<std::string> out;
             for (EntityId e : k.nodes) out.push_back(g.entities.name(e));
             return out;
           },
           py::arg("ksg"), "node names of a retrieved subgraph")
      .def("khop",
           [](const KnowledgeGraph& g, const std::vector<std::string>& topics, int hops) {
             return khop_retrieve(g, resolve_entities(g, topics), hops);
           },
           py::arg("topics"), py::arg("hops") = 2,
           "induced subgraph within `hops` of the topic entities (both edge directions)")
      .def("partition",
           [](const KnowledgeGraph& g, const Ksg& ksg, const std::string& root,
              const std::vector<std::string>& answers, bool literal_labels) {
             auto root_id = g.entities.find(root);
             if (!root_id) throw std::invalid_argument("unknown entity: " + root);
             const auto parts = partition_ksg(
                 ksg, *root_id, resolve_entities(g, answers),
                 literal_labels ? LabelMode::literal_reachability : LabelMode::membership);
             py::list out;
             for (const SubKsg& s : parts) out.append(subksg_to_dict(g, s));
             return out;
           },
           py::arg("ksg"), py::arg("root"), py::arg("answers"), py::arg("literal_labels") = false,
           "shortest-path-tree partition into labeled sub-KSGs");

  m.def("load_triples", &load_triples, py::arg("path"),
        "load a subject<TAB>relation<TAB>object file");

  m.def("recall_at_k",
        [](const std::vector<std::vector<int>>& lists, std::size_t k) {
          std::vector<RankedLabels> ranked;
          for (std::size_t i = 0; i < lists.size(); ++i)
            ranked.push_back({std::to_string(i), lists[i]});
          return recall_at_k(ranked, k);
        },
        py::arg("label_lists"), py::arg("k"));

  m.def("mrr",
        [](const std::vector<std::vector<int>>& lists, const std::string& mode) {
          std::vector<RankedLabels> ranked;
          for (std::size_t i = 0; i < lists.size(); ++i)
            ranked.push_back({std::to_string(i), lists[i]});
          return mrr(ranked, mode == "all" ? MrrMode::all_relevant : MrrMode::first_relevant);
        },
        py::arg("label_lists"), py::arg("mode") = "first");

  m.def("tfidf_cosine", &tfidf_cosine, py::arg("a"), py::arg("b"), py::arg("corpus"),
        "smoothed tf-idf cosine between two token lists");

  m.def("run_pipeline",
        [](const std::filesystem::path& config, const std::vector<std::string>& overrides) {
          run_pipeline(PipelineConfig::from_file(config, overrides));
        },
        py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
        "run every pipeline stage for a config file");

  m.def("selftest_quick",
        [](const std::filesystem::path& repo_root) {
          py::list out;
          for (const auto& r : selfcheck::run_all(repo_root, {}, /*quick=*/true)) {
            py::dict d;
            d["name"] = r.name;
            d["pass"] = r.pass;
            d["detail"] = r.detail;
            out.append(d);
          }
          return out;
        },
        py::arg("repo_root"), "oracle suite without the end-to-end pipeline checks");
}

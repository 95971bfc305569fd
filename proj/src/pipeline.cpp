#include "ksgrank/pipeline.hpp"

#include "ksgrank/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ksgrank {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

json load_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  json j;
  is >> j;
  return j;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing " + path.string());
  os << text;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

// stage inputs must exist; the error names the stage that produces them
void require_artifact(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path))
    throw std::runtime_error("missing " + path.string() + " - run `" + producer + "` first");
}

struct PipelineQuestion {
  QuestionRecord rec;
  bool excluded = false;
};

constexpr const char* kStageVersions[][2] = {
    {"ingest", "1"},     {"retrieve", "1"}, {"partition", "1"},
    {"make-pairs", "1"}, {"train-ranker", "1"}, {"rank", "1"},
    {"merge", "1"},      {"train-answerer", "1"}, {"evaluate", "1"},
};

std::string stage_version(const std::string& stage) {
  for (const auto& [name, version] : kStageVersions)
    if (stage == name) return version;
  return "1";
}

void update_manifest(const PipelineConfig& cfg, const std::string& stage) {
  const fs::path path = cfg.run_dir / "manifest.json";
  json m;
  if (fs::exists(path)) m = load_json_file(path);
  m["config"] = cfg.raw;
  m["config_hash"] = cfg.config_hash();
  m["seed"] = cfg.seed;
  m["stages"][stage] = stage_version(stage);
  write_text_file(path, m.dump(2) + "\n");
}

void check_manifest(const PipelineConfig& cfg) {
  const fs::path path = cfg.run_dir / "manifest.json";
  if (!fs::exists(path)) return;
  const json m = load_json_file(path);
  if (m.contains("config_hash") && m["config_hash"] != cfg.config_hash())
    std::cerr << "warning: config differs from the one recorded in " << path.string() << "\n";
}

fs::path stage_dir(const PipelineConfig& cfg, const std::string& stage) {
  const fs::path dir = cfg.run_dir / stage;
  fs::create_directories(dir);
  return dir;
}

// ---- artifact (de)serialization -------------------------------------------

json question_to_json(const KnowledgeGraph& g, const PipelineQuestion& q) {
  json j;
  j["id"] = q.rec.id;
  j["text"] = q.rec.text;
  j["tokens"] = q.rec.tokens;
  json topics = json::array();
  for (EntityId e : q.rec.topic_entities) topics.push_back(g.entities.name(e));
  j["topic_entities"] = topics;
  json answers = json::array();
  for (EntityId e : q.rec.answers) answers.push_back(g.entities.name(e));
  j["answers"] = answers;
  if (!q.rec.dependency_edges.empty()) {
    json edges = json::array();
    for (const auto& [h, d] : q.rec.dependency_edges) edges.push_back(json::array({h, d}));
    j["dependency_edges"] = edges;
  }
  j["excluded"] = q.excluded;
  return j;
}

std::vector<PipelineQuestion> load_question_artifact(const PipelineConfig& cfg,
                                                     const KnowledgeGraph& g) {
  const fs::path path = cfg.run_dir / "ingest" / "questions.jsonl";
  require_artifact(path, "ingest");
  std::ifstream is(path);
  std::vector<PipelineQuestion> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    PipelineQuestion q;
    q.rec.id = j["id"];
    q.rec.text = j["text"];
    q.rec.tokens = j["tokens"].get<std::vector<std::string>>();
    for (const auto& e : j["topic_entities"]) {
      auto id = g.entities.find(e.get<std::string>());
      if (id) q.rec.topic_entities.push_back(*id);
    }
    for (const auto& e : j["answers"]) {
      auto id = g.entities.find(e.get<std::string>());
      if (id) q.rec.answers.push_back(*id);
    }
    std::sort(q.rec.answers.begin(), q.rec.answers.end());
    if (j.contains("dependency_edges"))
      for (const auto& e : j["dependency_edges"])
        q.rec.dependency_edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    q.excluded = j.value("excluded", false);
    out.push_back(std::move(q));
  }
  return out;
}

json subksg_to_json(const KnowledgeGraph& g, const SubKsg& s) {
  json j;
  j["question_id"] = s.question_id;
  j["root"] = g.entities.name(s.root);
  j["anchor"] = g.entities.name(s.anchor);
  json nodes = json::array();
  for (EntityId e : s.nodes) nodes.push_back(g.entities.name(e));
  j["nodes"] = nodes;
  json edges = json::array();
  for (const Triple& t : s.edges)
    edges.push_back(json::array(
        {g.entities.name(t.subject), g.relations.name(t.relation), g.entities.name(t.object)}));
  j["edges"] = edges;
  j["label"] = s.label;
  return j;
}

SubKsg subksg_from_json(const KnowledgeGraph& g, const json& j) {
  auto entity = [&](const std::string& name) {
    auto id = g.entities.find(name);
    if (!id) throw std::runtime_error("subksg artifact references unknown entity '" + name + "'");
    return *id;
  };
  SubKsg s;
  s.question_id = j["question_id"];
  s.root = entity(j["root"]);
  s.anchor = entity(j["anchor"]);
  for (const auto& n : j["nodes"]) s.nodes.push_back(entity(n.get<std::string>()));
  for (const auto& e : j["edges"]) {
    auto rel = g.relations.find(e[1].get<std::string>());
    if (!rel) throw std::runtime_error("subksg artifact references unknown relation");
    s.edges.push_back({entity(e[0].get<std::string>()), *rel, entity(e[2].get<std::string>())});
  }
  s.label = j["label"];
  return s;
}

// ordered by first appearance in the artifact, i.e. question order
struct SubksgStore {
  std::vector<std::string> order;  // question ids
  std::map<std::string, std::vector<SubKsg>> by_question;
};

SubksgStore load_subksg_artifact(const PipelineConfig& cfg, const KnowledgeGraph& g) {
  const fs::path path = cfg.run_dir / "partition" / "subksgs.jsonl";
  require_artifact(path, "partition");
  std::ifstream is(path);
  SubksgStore store;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    SubKsg s = subksg_from_json(g, json::parse(line));
    auto it = store.by_question.find(s.question_id);
    if (it == store.by_question.end()) store.order.push_back(s.question_id);
    store.by_question[s.question_id].push_back(std::move(s));
  }
  return store;
}

KnowledgeGraph load_kg_artifact(const PipelineConfig& cfg) {
  const fs::path path = cfg.run_dir / "ingest" / "kg.tsv";
  require_artifact(path, "ingest");
  return load_triples(path);
}

std::set<std::string> load_vocab_artifact(const PipelineConfig& cfg) {
  const fs::path path = cfg.run_dir / "ingest" / "vocab.txt";
  require_artifact(path, "ingest");
  std::ifstream is(path);
  std::set<std::string> vocab;
  std::string tok;
  while (std::getline(is, tok))
    if (!tok.empty()) vocab.insert(tok);
  return vocab;
}

NameMap load_names(const PipelineConfig& cfg) {
  if (cfg.entity_names.empty()) return {};
  return NameMap::load(cfg.entity_names);
}

struct Split {
  std::vector<std::string> train, dev, test;

  const std::vector<std::string>& of(const std::string& name) const {
    if (name == "train") return train;
    if (name == "dev") return dev;
    if (name == "test") return test;
    throw std::invalid_argument("unknown split: " + name);
  }
};

Split load_split(const PipelineConfig& cfg) {
  const fs::path path = cfg.run_dir / "pairs" / "split.json";
  require_artifact(path, "make-pairs");
  const json j = load_json_file(path);
  Split s;
  s.train = j["train"].get<std::vector<std::string>>();
  s.dev = j["dev"].get<std::vector<std::string>>();
  s.test = j["test"].get<std::vector<std::string>>();
  return s;
}

struct RankedArtifact {
  std::string question_id;
  std::vector<std::string> anchors;  // rank order
  std::vector<double> scores;
  std::vector<int> labels;
};

std::vector<RankedArtifact> load_rankings(const PipelineConfig& cfg) {
  const fs::path path = cfg.run_dir / "rank" / "rankings.jsonl";
  require_artifact(path, "rank");
  std::ifstream is(path);
  std::vector<RankedArtifact> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    RankedArtifact r;
    r.question_id = j["question_id"];
    for (const auto& item : j["items"]) {
      r.anchors.push_back(item["anchor"].get<std::string>());
      r.scores.push_back(item["score"].get<double>());
      r.labels.push_back(item["label"].get<int>());
    }
    out.push_back(std::move(r));
  }
  return out;
}

struct MergedArtifact {
  std::string question_id;
  std::vector<std::string> nodes;
  std::vector<std::array<std::string, 3>> edges;
};

std::vector<MergedArtifact> load_merged(const PipelineConfig& cfg, const std::string& file) {
  const fs::path path = cfg.run_dir / "merge" / file;
  require_artifact(path, "merge");
  std::ifstream is(path);
  std::vector<MergedArtifact> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    MergedArtifact m;
    m.question_id = j["question_id"];
    m.nodes = j["nodes"].get<std::vector<std::string>>();
    for (const auto& e : j["edges"])
      m.edges.push_back({e[0].get<std::string>(), e[1].get<std::string>(), e[2].get<std::string>()});
    out.push_back(std::move(m));
  }
  return out;
}

std::string merged_file_for_regime(const PipelineConfig& cfg) {
  if (cfg.input_regime == "full") return "merged_full.jsonl";
  if (cfg.input_regime == "topk")
    return "merged_top" + std::to_string(cfg.merge_topk.empty() ? 1 : cfg.merge_topk.front()) + ".jsonl";
  throw std::invalid_argument("unknown input_regime: " + cfg.input_regime);
}

// corpus bundle shared by the model-facing stages
struct Corpus {
  KnowledgeGraph kg;
  std::vector<PipelineQuestion> questions;
  NameMap names;
  EmbeddingTable emb;

  const PipelineQuestion* find_question(const std::string& id) const {
    for (const auto& q : questions)
      if (q.rec.id == id) return &q;
    return nullptr;
  }
};

Corpus load_corpus(const PipelineConfig& cfg) {
  Corpus c;
  c.kg = load_kg_artifact(cfg);
  c.questions = load_question_artifact(cfg, c.kg);
  c.names = load_names(cfg);
  const auto vocab = load_vocab_artifact(cfg);
  c.emb = EmbeddingTable::load(cfg.embeddings, &vocab);
  return c;
}

std::size_t effective_word_dim(const PipelineConfig& cfg, const EmbeddingTable& emb) {
  return cfg.word_dim ? cfg.word_dim : emb.dim();
}

GGEConfig gge_config(const PipelineConfig& cfg, const EmbeddingTable& emb) {
  GGEConfig g;
  g.gnn = cfg.gnn;
  g.mpm = cfg.mpm;
  g.word_dim = effective_word_dim(cfg, emb);
  g.share_graph_encoders = cfg.share_graph_encoders;
  g.ablation = ablation_from_string(cfg.ablation);
  return g;
}

AnswerModelConfig answer_config(const PipelineConfig& cfg, const EmbeddingTable& emb) {
  return {cfg.answer_question_gnn, cfg.answer_graph_gnn, effective_word_dim(cfg, emb)};
}

// question -> rankable candidates with prebuilt features, question order
std::vector<RankQuestionData> build_rank_data(const Corpus& corpus, const SubksgStore& store) {
  FeatureBuilder fb(corpus.kg, corpus.emb, corpus.names);
  std::vector<RankQuestionData> out;
  for (const auto& q : corpus.questions) {
    auto it = store.by_question.find(q.rec.id);
    if (it == store.by_question.end() || it->second.empty()) continue;
    RankQuestionData data;
    data.id = q.rec.id;
    for (const SubKsg& s : it->second)
      data.candidates.push_back({s.anchor, s.label, fb.build(q.rec, s)});
    out.push_back(std::move(data));
  }
  return out;
}

void write_train_log(const fs::path& path, const std::vector<EpochLog>& log,
                     const char* metric_name) {
  std::ofstream os(path, std::ios::binary);
  for (const EpochLog& e : log) {
    json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_mse;
    j[metric_name] = e.dev_mrr;
    j["wall_sec"] = e.wall_sec;
    os << j.dump() << '\n';
  }
}

}  // namespace

// ---- config ----------------------------------------------------------------

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must look like key.path=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;

  json* node = &doc;
  std::istringstream ks(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ks, part, '.')) parts.push_back(part);
  if (parts.empty()) throw std::invalid_argument("empty override key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = parsed;
}

PipelineConfig PipelineConfig::from_file(const fs::path& path,
                                         const std::vector<std::string>& overrides,
                                         std::optional<std::uint64_t> seed_override) {
  json j = load_json_file(path);
  for (const std::string& o : overrides) apply_override(j, o);
  return from_json(std::move(j), fs::absolute(path).parent_path(), seed_override);
}

PipelineConfig PipelineConfig::from_json(json j, const fs::path& base_dir,
                                         std::optional<std::uint64_t> seed_override) {
  PipelineConfig c;

  const json data = j.value("data", json::object());
  c.triples = resolve(base_dir, data.value("triples", ""));
  c.questions = resolve(base_dir, data.value("questions", ""));
  c.embeddings = resolve(base_dir, data.value("embeddings", ""));
  c.entity_names = resolve(base_dir, data.value("entity_names", ""));
  c.run_dir = resolve(base_dir, j.value("run_dir", "run"));

  if (seed_override) {
    c.seed = *seed_override;
  } else if (j.contains("seed")) {
    c.seed = j["seed"].get<std::uint64_t>();
  } else if (const char* env = std::getenv("KSGRANK_SEED")) {
    c.seed = std::strtoull(env, nullptr, 10);
  }
  j["seed"] = c.seed;

  const json retrieval = j.value("retrieval", json::object());
  c.hops = retrieval.value("hops", 2);

  const json partition = j.value("partition", json::object());
  c.label_mode = partition.value("label_mode", "membership");

  const json split = j.value("split", json::object());
  c.split_train = split.value("train", 0.7);
  c.split_dev = split.value("dev", 0.15);

  const json negatives = j.value("negatives", json::object());
  c.negatives_mode = negatives.value("mode", "random");
  c.negatives_count = negatives.value("count", 20);

  const json model = j.value("model", json::object());
  c.word_dim = model.value("word_dim", 0);
  c.gnn.layers = model.value("gnn_layers", 2);
  c.gnn.hidden = model.value("gnn_hidden", 128);
  c.mpm.context_hidden = model.value("context_hidden", 64);
  c.mpm.perspectives = model.value("perspectives", 20);
  c.mpm.enhance_dim = model.value("enhance_dim", 0);
  c.mpm.agg_hidden = model.value("agg_hidden", 0);
  c.share_graph_encoders = model.value("share_graph_encoders", false);
  c.ablation = model.value("ablation", "g-g-e");

  const json train = j.value("train", json::object());
  c.lr = train.value("lr", 5e-4);
  c.batch_size = train.value("batch_size", 50);
  c.max_epochs = train.value("max_epochs", 30);
  c.patience = train.value("patience", 5);
  c.rescale_targets = train.value("rescale_targets", false);

  const json answer = j.value("answer", json::object());
  c.answer_question_gnn.layers = answer.value("question_gnn_layers", 2);
  c.answer_question_gnn.hidden = answer.value("question_gnn_hidden", 16);
  c.answer_graph_gnn.layers = answer.value("gnn_layers", 2);
  c.answer_graph_gnn.hidden = answer.value("gnn_hidden", 16);
  c.answer_lr = answer.value("lr", 1e-3);
  c.answer_batch_size = answer.value("batch_size", 8);
  c.answer_max_epochs = answer.value("max_epochs", 30);
  c.answer_patience = answer.value("patience", 5);
  c.answer_threshold = answer.value("threshold", 0.5);
  c.input_regime = answer.value("input_regime", "topk");
  c.hits_mode = answer.value("hits_mode", "top1");

  const json eval = j.value("eval", json::object());
  c.recall_ks = eval.value("recall_ks", std::vector<std::size_t>{1, 2, 5, 10});
  c.merge_topk = eval.value("merge_topk", std::vector<std::size_t>{5});
  c.mrr_mode = eval.value("mrr_mode", "first");
  c.eval_split = eval.value("split", "test");
  c.workers = j.value("workers", 1);

  c.raw = std::move(j);
  return c;
}

std::string PipelineConfig::config_hash() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(raw.dump())));
  return buf;
}

MrrMode PipelineConfig::mrr_mode_enum() const {
  if (mrr_mode == "first") return MrrMode::first_relevant;
  if (mrr_mode == "all") return MrrMode::all_relevant;
  throw std::invalid_argument("unknown mrr_mode: " + mrr_mode);
}

LabelMode PipelineConfig::label_mode_enum() const {
  if (label_mode == "membership") return LabelMode::membership;
  if (label_mode == "literal") return LabelMode::literal_reachability;
  throw std::invalid_argument("unknown label_mode: " + label_mode);
}

// ---- stages ------------------------------------------------------------------

namespace stages {

void ingest(const PipelineConfig& cfg) {
  check_manifest(cfg);
  const fs::path dir = stage_dir(cfg, "ingest");

  const KnowledgeGraph kg = load_triples(cfg.triples);
  save_triples(kg, dir / "kg.tsv");

  QuestionLoadResult loaded = load_questions(cfg.questions, kg);
  const NameMap names = load_names(cfg);

  std::ofstream qs(dir / "questions.jsonl", std::ios::binary);
  std::size_t excluded = 0;
  for (const QuestionRecord& rec : loaded.records) {
    PipelineQuestion q{rec, rec.topic_entities.empty() || rec.answers.empty()};
    if (q.excluded) ++excluded;
    qs << question_to_json(kg, q).dump() << '\n';
  }

  // corpus vocabulary: question tokens + entity surfaces + relation tokens
  std::set<std::string> vocab;
  for (const QuestionRecord& rec : loaded.records)
    for (const std::string& t : rec.tokens) vocab.insert(t);
  for (std::size_t e = 0; e < kg.num_entities(); ++e)
    for (const std::string& t : surface_tokens(names.surface(kg.entities.name(static_cast<EntityId>(e)))))
      vocab.insert(t);
  for (std::size_t r = 0; r < kg.num_relations(); ++r)
    for (const std::string& t : relation_tokens(kg.relations.name(static_cast<RelationId>(r))))
      vocab.insert(t);
  std::ofstream vs(dir / "vocab.txt", std::ios::binary);
  for (const std::string& t : vocab) vs << t << '\n';

  json stats;
  stats["entities"] = kg.num_entities();
  stats["relations"] = kg.num_relations();
  stats["triples"] = kg.num_triples();
  stats["questions"] = loaded.records.size();
  stats["excluded"] = excluded;
  stats["errors"] = loaded.errors;
  stats["warnings"] = loaded.warnings;
  write_text_file(dir / "stats.json", stats.dump(2) + "\n");
  update_manifest(cfg, "ingest");

  for (const std::string& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
  for (const std::string& e : loaded.errors) std::cerr << "error: " << e << '\n';
}

void retrieve(const PipelineConfig& cfg) {
  check_manifest(cfg);
  const fs::path dir = stage_dir(cfg, "retrieve");
  const KnowledgeGraph kg = load_kg_artifact(cfg);
  const auto questions = load_question_artifact(cfg, kg);

  std::ofstream os(dir / "ksgs.jsonl", std::ios::binary);
  std::size_t retrieved = 0;
  double node_total = 0;
  for (const PipelineQuestion& q : questions) {
    if (q.rec.topic_entities.empty()) continue;
    const Ksg ksg = khop_retrieve(kg, q.rec.topic_entities, cfg.hops);
    json j;
    j["question_id"] = q.rec.id;
    json nodes = json::array();
    for (EntityId e : ksg.nodes) nodes.push_back(kg.entities.name(e));
    j["nodes"] = nodes;
    json triples = json::array();
    for (const Triple& t : ksg.triples)
      triples.push_back(json::array({kg.entities.name(t.subject), kg.relations.name(t.relation),
                                     kg.entities.name(t.object)}));
    j["triples"] = triples;
    os << j.dump() << '\n';
    ++retrieved;
    node_total += static_cast<double>(ksg.nodes.size());
  }
  json stats;
  stats["hops"] = cfg.hops;
  stats["questions_retrieved"] = retrieved;
  stats["mean_ksg_nodes"] = retrieved ? node_total / static_cast<double>(retrieved) : 0.0;
  write_text_file(dir / "stats.json", stats.dump(2) + "\n");
  update_manifest(cfg, "retrieve");
}

void partition(const PipelineConfig& cfg) {
  check_manifest(cfg);
  const fs::path dir = stage_dir(cfg, "partition");
  const KnowledgeGraph kg = load_kg_artifact(cfg);
  const auto questions = load_question_artifact(cfg, kg);

  const fs::path ksg_path = cfg.run_dir / "retrieve" / "ksgs.jsonl";
  require_artifact(ksg_path, "retrieve");
  std::map<std::string, Ksg> ksgs;
  {
    std::ifstream is(ksg_path);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      Ksg ksg;
      for (const auto& n : j["nodes"]) ksg.nodes.push_back(*kg.entities.find(n.get<std::string>()));
      for (const auto& e : j["triples"])
        ksg.triples.push_back({*kg.entities.find(e[0].get<std::string>()),
                               *kg.relations.find(e[1].get<std::string>()),
                               *kg.entities.find(e[2].get<std::string>())});
      std::sort(ksg.nodes.begin(), ksg.nodes.end());
      std::sort(ksg.triples.begin(), ksg.triples.end());
      ksgs.emplace(j["question_id"].get<std::string>(), std::move(ksg));
    }
  }

  std::ofstream os(dir / "subksgs.jsonl", std::ios::binary);
  std::vector<QuestionPartition> partitions;
  for (const PipelineQuestion& q : questions) {
    QuestionPartition qp;
    qp.question_id = q.rec.id;
    qp.excluded = q.excluded;
    auto it = ksgs.find(q.rec.id);
    if (it != ksgs.end()) {
      for (EntityId topic : q.rec.topic_entities) {
        auto subksgs = partition_ksg(it->second, topic, q.rec.answers, cfg.label_mode_enum());
        const ShortestPathTree tree = shortest_path_tree(it->second, topic);
        qp.unreachable_nodes += it->second.nodes.size() - tree.nodes.size();
        for (SubKsg& s : subksgs) {
          s.question_id = q.rec.id;
          os << subksg_to_json(kg, s).dump() << '\n';
          qp.subksgs.push_back(std::move(s));
        }
      }
    }
    partitions.push_back(std::move(qp));
  }

  json stats;
  stats["questions"] = partitions.size();
  std::size_t total = 0;
  std::size_t unreachable = 0;
  for (const auto& qp : partitions) {
    total += qp.subksgs.size();
    unreachable += qp.unreachable_nodes;
  }
  stats["subksgs"] = total;
  stats["unreachable_nodes"] = unreachable;
  stats["coverage_rate"] = coverage_rate(partitions);
  write_text_file(dir / "stats.json", stats.dump(2) + "\n");
  update_manifest(cfg, "partition");
}

void make_pairs(const PipelineConfig& cfg) {
  check_manifest(cfg);
  const fs::path dir = stage_dir(cfg, "pairs");
  const KnowledgeGraph kg = load_kg_artifact(cfg);
  const auto questions = load_question_artifact(cfg, kg);
  const SubksgStore store = load_subksg_artifact(cfg, kg);
  const NameMap names = load_names(cfg);

  // deterministic split over question order
  Split split;
  const std::size_t n = questions.size();
  const auto n_train = static_cast<std::size_t>(static_cast<double>(n) * cfg.split_train);
  const auto n_dev = static_cast<std::size_t>(static_cast<double>(n) * cfg.split_dev);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = questions[i].rec.id;
    if (i < n_train)
      split.train.push_back(id);
    else if (i < n_train + n_dev)
      split.dev.push_back(id);
    else
      split.test.push_back(id);
  }
  json sj;
  sj["train"] = split.train;
  sj["dev"] = split.dev;
  sj["test"] = split.test;
  write_text_file(dir / "split.json", sj.dump(2) + "\n");

  std::set<std::string> training_ids(split.train.begin(), split.train.end());
  training_ids.insert(split.dev.begin(), split.dev.end());

  num::Rng rng(num::Rng::derive(cfg.seed, "negatives"));
  std::ofstream os(dir / "pairs.jsonl", std::ios::binary);
  std::size_t pos_count = 0, neg_count = 0, skipped = 0;
  for (const PipelineQuestion& q : questions) {
    if (q.excluded || !training_ids.count(q.rec.id)) continue;
    auto it = store.by_question.find(q.rec.id);
    if (it == store.by_question.end()) continue;
    const std::vector<SubKsg>& cands = it->second;

    const SubKsg* positive = nullptr;
    for (const SubKsg& s : cands)
      if (s.label == 1) { positive = &s; break; }  // anchors ascend, first is deterministic
    if (!positive) { ++skipped; continue; }

    auto emit = [&](const SubKsg& s, int label) {
      json j;
      j["question_id"] = q.rec.id;
      j["anchor"] = kg.entities.name(s.anchor);
      j["label"] = label;
      os << j.dump() << '\n';
    };
    emit(*positive, 1);
    ++pos_count;

    std::vector<const SubKsg*> pool;
    for (const SubKsg& s : cands)
      if (s.label == 0) pool.push_back(&s);
    if (pool.empty()) continue;

    if (cfg.negatives_mode == "random") {
      for (std::size_t idx : sample_negatives_random(pool.size(), cfg.negatives_count, rng)) {
        emit(*pool[idx], 0);
        ++neg_count;
      }
    } else if (cfg.negatives_mode == "tfidf") {
      std::vector<TfidfCandidate> tc;
      tc.reserve(pool.size());
      for (const SubKsg* s : pool)
        tc.push_back({s->anchor, linearize_subksg(*s, kg, names), true});
      const std::size_t pick =
          pick_tfidf_negative(linearize_subksg(*positive, kg, names), tc);
      emit(*pool[pick], 0);
      ++neg_count;
    } else {
      throw std::invalid_argument("unknown negatives mode: " + cfg.negatives_mode);
    }
  }

  json stats;
  stats["positives"] = pos_count;
  stats["negatives"] = neg_count;
  stats["questions_without_positive"] = skipped;
  write_text_file(dir / "stats.json", stats.dump(2) + "\n");
  update_manifest(cfg, "make-pairs");
}

void train_ranker(const PipelineConfig& cfg) {
  check_manifest(cfg);
  const fs::path dir = stage_dir(cfg, "ranker");
  const Corpus corpus = load_corpus(cfg);
  const SubksgStore store = load_subksg_artifact(cfg, corpus.kg);
  const Split split = load_split(cfg);

  const std::vector<RankQuestionData> rank_data = build_rank_data(corpus, store);
  std::map<std::string, std::size_t> question_index;
  for (std::size_t i = 0; i < rank_data.size(); ++i) question_index[rank_data[i].id] = i;

  // pairs artifact -> (question, candidate) references
  const fs::path pairs_path = cfg.run_dir / "pairs" / "pairs.jsonl";
  require_artifact(pairs_path, "make-pairs");
  std::vector<TrainPairRef> pairs;
  {
    std::ifstream is(pairs_path);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      auto qi = question_index.find(j["question_id"].get<std::string>());
      if (qi == question_index.end()) continue;
      const auto anchor = corpus.kg.entities.find(j["anchor"].get<std::string>());
      if (!anchor) continue;
      const auto& cands = rank_data[qi->second].candidates;
      for (std::size_t ci = 0; ci < cands.size(); ++ci) {
        if (cands[ci].anchor == *anchor) {
          pairs.push_back({qi->second, ci, static_cast<double>(j["label"].get<int>())});
          break;
        }
      }
    }
  }

  std::vector<std::size_t> dev_questions;
  for (const std::string& id : split.dev) {
    auto it = question_index.find(id);
    if (it != question_index.end()) dev_questions.push_back(it->second);
  }

  GGEModel model(gge_config(cfg, corpus.emb));
  num::ParameterSet params;
  params.set_seed(cfg.seed);
  num::Rng rng(num::Rng::derive(cfg.seed, "ranker-init"));
  model.init(params, rng);

  RankTrainConfig tc;
  tc.lr = cfg.lr;
  tc.batch_size = cfg.batch_size;
  tc.max_epochs = cfg.max_epochs;
  tc.patience = cfg.patience;
  tc.seed = cfg.seed;
  tc.rescale_targets = cfg.rescale_targets;

  RankTrainResult result = ksgrank::train_ranker(model, params, rank_data, pairs, dev_questions, tc);
  result.best_params.set_seed(cfg.seed);
  result.best_params.save(dir / "checkpoint.bin", cfg.raw.dump());
  write_train_log(dir / "train_log.jsonl", result.log, "dev_mrr");

  json stats;
  stats["pairs"] = pairs.size();
  stats["best_epoch"] = result.best_epoch;
  stats["best_dev_mrr"] = result.best_dev_mrr;
  write_text_file(dir / "stats.json", stats.dump(2) + "\n");
  update_manifest(cfg, "train-ranker");
}

void rank(const PipelineConfig& cfg) {
  check_manifest(cfg);
  const fs::path dir = stage_dir(cfg, "rank");
  const Corpus corpus = load_corpus(cfg);
  const SubksgStore store = load_subksg_artifact(cfg, corpus.kg);

  const fs::path ckpt = cfg.run_dir / "ranker" / "checkpoint.bin";
  require_artifact(ckpt, "train-ranker");
  const num::ParameterSet params = num::ParameterSet::load(ckpt);

  const GGEModel model(gge_config(cfg, corpus.emb));
  const std::vector<RankQuestionData> rank_data = build_rank_data(corpus, store);
  const std::vector<RankedList> ranked = rank_all(model, params, rank_data, cfg.workers);

  std::ofstream scores(dir / "scores.tsv", std::ios::binary);
  std::ofstream rankings(dir / "rankings.jsonl", std::ios::binary);
  for (const RankedList& list : ranked) {
    json j;
    j["question_id"] = list.question_id;
    json items = json::array();
    for (const auto& item : list.items) {
      const std::string anchor = corpus.kg.entities.name(item.anchor);
      scores << list.question_id << '\t' << anchor << '\t' << fmt17(item.score) << '\n';
      json ij;
      ij["anchor"] = anchor;
      ij["score"] = item.score;
      ij["label"] = item.label;
      items.push_back(std::move(ij));
    }
    j["items"] = std::move(items);
    rankings << j.dump() << '\n';
  }
  update_manifest(cfg, "rank");
}

void merge(const PipelineConfig& cfg) {
  check_manifest(cfg);
  const fs::path dir = stage_dir(cfg, "merge");
  const KnowledgeGraph kg = load_kg_artifact(cfg);
  const SubksgStore store = load_subksg_artifact(cfg, kg);
  const std::vector<RankedArtifact> rankings = load_rankings(cfg);

  auto write_merged = [&](const std::string& file, auto select) {
    std::ofstream os(dir / file, std::ios::binary);
    for (const RankedArtifact& r : rankings) {
      auto it = store.by_question.find(r.question_id);
      if (it == store.by_question.end()) continue;
      const MergedGraph m = select(r, it->second);
      json j;
      j["question_id"] = m.question_id;
      json nodes = json::array();
      for (EntityId e : m.nodes) nodes.push_back(kg.entities.name(e));
      j["nodes"] = nodes;
      json edges = json::array();
      for (const Triple& t : m.edges)
        edges.push_back(json::array({kg.entities.name(t.subject), kg.relations.name(t.relation),
                                     kg.entities.name(t.object)}));
      j["edges"] = edges;
      os << j.dump() << '\n';
    }
  };

  for (std::size_t k : cfg.merge_topk) {
    write_merged("merged_top" + std::to_string(k) + ".jsonl",
                 [&](const RankedArtifact& r, const std::vector<SubKsg>& cands) {
                   // rebuild the ranked list in candidate-index terms
                   RankedList list;
                   list.question_id = r.question_id;
                   for (std::size_t i = 0; i < r.anchors.size(); ++i) {
                     const auto anchor = kg.entities.find(r.anchors[i]);
                     for (std::size_t ci = 0; ci < cands.size(); ++ci)
                       if (anchor && cands[ci].anchor == *anchor) {
                         list.items.push_back({ci, *anchor, r.scores[i], r.labels[i]});
                         break;
                       }
                   }
                   return merge_topk(list, cands, k);
                 });
  }
  write_merged("merged_full.jsonl", [&](const RankedArtifact& r, const std::vector<SubKsg>& cands) {
    return merge_all(r.question_id, cands);
  });
  update_manifest(cfg, "merge");
}

namespace {
std::vector<AnswerExample> build_answer_examples(const PipelineConfig&, const Corpus& corpus,
                                                 const std::vector<MergedArtifact>& merged) {
  FeatureBuilder fb(corpus.kg, corpus.emb, corpus.names);
  std::vector<AnswerExample> out;
  for (const MergedArtifact& m : merged) {
    const PipelineQuestion* q = corpus.find_question(m.question_id);
    if (!q || q->excluded) continue;
    MergedGraph graph;
    graph.question_id = m.question_id;
    for (const std::string& n : m.nodes) graph.nodes.push_back(*corpus.kg.entities.find(n));
    for (const auto& [s, r, o] : m.edges)
      graph.edges.push_back({*corpus.kg.entities.find(s), *corpus.kg.relations.find(r),
                             *corpus.kg.entities.find(o)});
    std::sort(graph.nodes.begin(), graph.nodes.end());
    std::sort(graph.edges.begin(), graph.edges.end());
    out.push_back(build_answer_example(q->rec, graph, fb, corpus.kg, corpus.names, corpus.emb));
  }
  return out;
}
}  // namespace

void train_answerer(const PipelineConfig& cfg) {
  check_manifest(cfg);
  const fs::path dir = stage_dir(cfg, "answerer");
  const Corpus corpus = load_corpus(cfg);
  const Split split = load_split(cfg);
  const auto merged = load_merged(cfg, merged_file_for_regime(cfg));
  const std::vector<AnswerExample> all = build_answer_examples(cfg, corpus, merged);

  std::vector<AnswerExample> train, dev;
  const std::set<std::string> train_ids(split.train.begin(), split.train.end());
  const std::set<std::string> dev_ids(split.dev.begin(), split.dev.end());
  for (const AnswerExample& ex : all) {
    if (train_ids.count(ex.question_id)) train.push_back(ex);
    else if (dev_ids.count(ex.question_id)) dev.push_back(ex);
  }

  const AnswerModel model(answer_config(cfg, corpus.emb));
  num::ParameterSet params;
  params.set_seed(cfg.seed);
  num::Rng rng(num::Rng::derive(cfg.seed, "answerer-init"));
  model.init(params, rng);

  AnswerTrainConfig tc;
  tc.lr = cfg.answer_lr;
  tc.batch_size = cfg.answer_batch_size;
  tc.max_epochs = cfg.answer_max_epochs;
  tc.patience = cfg.answer_patience;
  tc.seed = cfg.seed;
  tc.threshold = cfg.answer_threshold;

  AnswerTrainResult result = ksgrank::train_answerer(model, params, train, dev, tc);
  result.best_params.set_seed(cfg.seed);
  result.best_params.save(dir / "checkpoint.bin", cfg.raw.dump());
  write_train_log(dir / "train_log.jsonl", result.log, "dev_hits");
  for (const std::string& w : result.warnings) std::cerr << "warning: " << w << '\n';

  json stats;
  stats["train_examples"] = train.size();
  stats["dev_examples"] = dev.size();
  stats["best_epoch"] = result.best_epoch;
  stats["best_dev_hits"] = result.best_dev_hits;
  stats["input_regime"] = cfg.input_regime;
  write_text_file(dir / "stats.json", stats.dump(2) + "\n");
  update_manifest(cfg, "train-answerer");
}

void evaluate(const PipelineConfig& cfg) {
  check_manifest(cfg);
  const fs::path dir = stage_dir(cfg, "evaluate");
  const KnowledgeGraph kg = load_kg_artifact(cfg);
  const auto questions = load_question_artifact(cfg, kg);
  const std::vector<RankedArtifact> rankings = load_rankings(cfg);
  const Split split = load_split(cfg);

  std::set<std::string> wanted;
  if (cfg.eval_split == "all") {
    for (const auto& q : questions) wanted.insert(q.rec.id);
  } else {
    const auto& ids = split.of(cfg.eval_split);
    wanted.insert(ids.begin(), ids.end());
  }

  std::vector<RankedLabels> ranked;
  for (const RankedArtifact& r : rankings) {
    if (!wanted.count(r.question_id)) continue;
    ranked.push_back({r.question_id, r.labels});
  }

  MetricReport report = build_ranking_report(ranked, cfg.recall_ks, cfg.mrr_mode_enum());

  // answer metrics when an answer model was trained
  const fs::path ckpt = cfg.run_dir / "answerer" / "checkpoint.bin";
  if (fs::exists(ckpt)) {
    Corpus corpus = load_corpus(cfg);
    const num::ParameterSet params = num::ParameterSet::load(ckpt);
    const AnswerModel model(answer_config(cfg, corpus.emb));
    const auto merged = load_merged(cfg, merged_file_for_regime(cfg));
    const std::vector<AnswerExample> examples = build_answer_examples(cfg, corpus, merged);

    std::ofstream preds_out(dir / "predictions.jsonl", std::ios::binary);
    std::vector<AnswerOutcome> outcomes;
    for (const AnswerExample& ex : examples) {
      if (!wanted.count(ex.question_id)) continue;
      const PipelineQuestion* q = corpus.find_question(ex.question_id);
      if (!q || q->rec.answers.empty()) continue;
      const auto preds = model.classify(params, ex, cfg.answer_threshold);
      const AnswerSelection sel = select_answers(preds, cfg.answer_threshold);
      for (const NodePrediction& p : preds) {
        json pj;
        pj["question_id"] = ex.question_id;
        pj["node"] = kg.entities.name(p.node);
        pj["probability"] = p.probability;
        pj["selected"] = p.selected;
        preds_out << pj.dump() << '\n';
      }
      AnswerOutcome outcome;
      outcome.question_id = ex.question_id;
      outcome.top1 = kg.entities.name(sel.top1);
      for (EntityId e : sel.selected) outcome.predicted.insert(kg.entities.name(e));
      for (EntityId a : q->rec.answers) outcome.gold.insert(kg.entities.name(a));
      outcomes.push_back(std::move(outcome));
    }
    if (!outcomes.empty()) {
      report.has_answer_metrics = true;
      report.answer = hits_precision_recall_f1(outcomes);
      if (cfg.hits_mode == "set") {
        double hits = 0;
        for (const AnswerOutcome& o : outcomes) {
          for (const std::string& p : o.predicted)
            if (o.gold.count(p)) { hits += 1.0; break; }
        }
        report.answer.hits = hits / static_cast<double>(outcomes.size());
      }
    }
  }

  write_report_json(report, dir / "report.json");
  write_report_text(report, dir / "report.txt");
  write_recall_curve_csv(report, dir / "recall_curve.csv");
  update_manifest(cfg, "evaluate");
}

}  // namespace stages

void run_pipeline(const PipelineConfig& cfg) {
  stages::ingest(cfg);
  stages::retrieve(cfg);
  stages::partition(cfg);
  stages::make_pairs(cfg);
  stages::train_ranker(cfg);
  stages::rank(cfg);
  stages::merge(cfg);
  stages::train_answerer(cfg);
  stages::evaluate(cfg);
}

}  // namespace ksgrank

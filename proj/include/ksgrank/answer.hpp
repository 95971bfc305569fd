#pragma once

#include "ksgrank/biggnn.hpp"
#include "ksgrank/kg.hpp"
#include "ksgrank/partition.hpp"
#include "ksgrank/ranker.hpp"
#include "ksgrank/text.hpp"

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace ksgrank {

// Union of the top-ranked sub-KSGs of one question.
struct MergedGraph {
  std::string question_id;
  std::vector<EntityId> nodes;   // sorted
  std::vector<Triple> edges;     // sorted, deduplicated
  std::map<EntityId, std::vector<EntityId>> provenance;  // node -> contributing anchors
};

MergedGraph merge_topk(const RankedList& ranked, std::span<const SubKsg> candidates, std::size_t k);

// Merge of every sub-KSG (the "full" regime input).
MergedGraph merge_all(const std::string& question_id, std::span<const SubKsg> candidates);

struct NodePrediction {
  EntityId node = -1;
  double probability = 0.0;
  bool selected = false;
};

// Inputs for one classification example, tensors prebuilt.
struct AnswerExample {
  std::string question_id;
  DiGraph q_graph;
  num::Tensor q_nodes;           // question token embeddings
  DiGraph graph;                 // merged entity graph
  num::Tensor node_words;        // n x word_dim entity embeddings
  std::vector<EntityId> node_ids;
  std::vector<double> labels;    // answer membership per node
};

struct AnswerModelConfig {
  BiGGNNConfig question_gnn;
  BiGGNNConfig graph_gnn;
  std::size_t word_dim = 300;
};

// Question-conditioned node classifier: the merged graph is encoded by a
// BiGGNN whose initial node embedding is [entity word embedding; question
// graph embedding], and each node state feeds a sigmoid binary classifier.
class AnswerModel {
 public:
  explicit AnswerModel(AnswerModelConfig cfg);

  void init(num::ParameterSet& ps, num::Rng& rng) const;

  num::Var node_logits(num::Tape& tape, num::ParamBinding& pb, const AnswerExample& ex) const;  // n x 1
  std::vector<NodePrediction> classify(const num::ParameterSet& params, const AnswerExample& ex,
                                       double threshold = 0.5) const;

  const AnswerModelConfig& config() const { return cfg_; }

 private:
  AnswerModelConfig cfg_;
  BiGGNN q_enc_;
  BiGGNN g_enc_;
};

AnswerExample build_answer_example(const QuestionRecord& rec, const MergedGraph& merged,
                                   const FeatureBuilder& features, const KnowledgeGraph& g,
                                   const NameMap& names, const EmbeddingTable& emb);

struct AnswerTrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  std::uint64_t seed = 42;
  double threshold = 0.5;
};

struct AnswerTrainResult {
  num::ParameterSet best_params;
  std::size_t best_epoch = 0;
  double best_dev_hits = 0.0;
  std::vector<EpochLog> log;  // dev_mrr field carries dev Hits here
  std::vector<std::string> warnings;
};

AnswerTrainResult train_answerer(const AnswerModel& model, const num::ParameterSet& init,
                                 std::span<const AnswerExample> train,
                                 std::span<const AnswerExample> dev, const AnswerTrainConfig& cfg);

struct AnswerSelection {
  std::set<EntityId> selected;  // probability >= threshold
  EntityId top1 = -1;           // argmax, ties to the smallest id
};

AnswerSelection select_answers(std::span<const NodePrediction> preds, double threshold = 0.5);

}  // namespace ksgrank

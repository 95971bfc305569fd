#pragma once

#include "ksgrank/biggnn.hpp"
#include "ksgrank/ebimpm.hpp"
#include "ksgrank/kg.hpp"
#include "ksgrank/partition.hpp"
#include "ksgrank/text.hpp"

#include <span>
#include <string>
#include <vector>

namespace ksgrank {

enum class Ablation { gge, gg, ebimpm };

Ablation ablation_from_string(const std::string& s);
std::string to_string(Ablation a);

struct GGEConfig {
  BiGGNNConfig gnn;
  EBiMPMConfig mpm;
  std::size_t word_dim = 300;
  bool share_graph_encoders = false;  // one parameter set for both graph types
  Ablation ablation = Ablation::gge;
};

// Tensors for one (question, sub-KSG) pair; embeddings are frozen, so
// these are built once and reused across epochs.
struct PairFeatures {
  DiGraph q_graph;
  num::Tensor q_nodes;  // question graph node embeddings (= token rows)
  DiGraph s_graph;
  num::Tensor s_nodes;  // graphized sub-KSG node embeddings
  num::Tensor q_seq;    // l1 x word_dim token rows
  num::Tensor s_seq;    // l2 x word_dim token rows
};

class FeatureBuilder {
 public:
  FeatureBuilder(const KnowledgeGraph& g, const EmbeddingTable& emb, const NameMap& names)
      : g_(&g), emb_(&emb), names_(&names) {}

  std::pair<DiGraph, num::Tensor> question_features(const QuestionRecord& rec) const;
  PairFeatures build(const QuestionRecord& rec, const SubKsg& s) const;

  const EmbeddingTable& embeddings() const { return *emb_; }

 private:
  const KnowledgeGraph* g_;
  const EmbeddingTable* emb_;
  const NameMap* names_;
};

// Graph-augmented matcher: two graph encoders plus the sequence matcher,
// concatenated per side and compared with cosine. Ablations drop one branch.
class GGEModel {
 public:
  explicit GGEModel(GGEConfig cfg);

  void init(num::ParameterSet& ps, num::Rng& rng) const;
  num::Var score(num::Tape& tape, num::ParamBinding& pb, const PairFeatures& pair) const;

  const GGEConfig& config() const { return cfg_; }

 private:
  GGEConfig cfg_;
  BiGGNN gnn_q_, gnn_s_;
  EBiMPM mpm_;
};

// (1/N) * sum (y - yhat)^2; throws on empty or mismatched batches
double mse_loss(std::span<const double> predictions, std::span<const double> labels);

// n distinct indices into a label-0 pool (all of them when the pool is
// smaller), deterministic under the caller's RNG
std::vector<std::size_t> sample_negatives_random(std::size_t pool_size, std::size_t n, num::Rng& rng);

// --- TF-IDF confusion negatives ---------------------------------------

// smoothed idf: ln((1 + N) / (1 + df)) + 1, tf = raw count
std::vector<double> tfidf_vector(const std::vector<std::string>& doc,
                                 const std::vector<std::string>& vocab,
                                 const std::vector<double>& idf);
double tfidf_cosine(const std::vector<std::string>& a, const std::vector<std::string>& b,
                    const std::vector<std::vector<std::string>>& corpus);

struct TfidfCandidate {
  EntityId anchor = -1;
  std::vector<std::string> text;
  bool answer_free = false;
};

// answer-free candidate whose text is most TF-IDF-similar to the positive
// text; ties break to the smallest anchor id
std::size_t pick_tfidf_negative(const std::vector<std::string>& positive_text,
                                std::span<const TfidfCandidate> candidates);

// --- training / ranking ------------------------------------------------

struct RankCandidate {
  EntityId anchor = -1;
  int label = 0;
  PairFeatures features;
};

struct RankQuestionData {
  std::string id;
  std::vector<RankCandidate> candidates;
};

struct TrainPairRef {
  std::size_t question = 0;
  std::size_t candidate = 0;
  double target = 0.0;
};

struct RankTrainConfig {
  double lr = 5e-4;
  std::size_t batch_size = 50;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  std::uint64_t seed = 42;
  bool rescale_targets = false;  // map {0,1} labels to {-1,1} cosine targets
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double dev_mrr = 0.0;
  double wall_sec = 0.0;
};

struct RankTrainResult {
  num::ParameterSet best_params;
  std::size_t best_epoch = 0;
  double best_dev_mrr = 0.0;
  std::vector<EpochLog> log;
};

RankTrainResult train_ranker(const GGEModel& model, const num::ParameterSet& init,
                             const std::vector<RankQuestionData>& questions,
                             const std::vector<TrainPairRef>& pairs,
                             const std::vector<std::size_t>& dev_questions,
                             const RankTrainConfig& cfg);

struct RankedList {
  struct Item {
    std::size_t candidate = 0;
    EntityId anchor = -1;
    double score = 0.0;
    int label = 0;
  };
  std::string question_id;
  std::vector<Item> items;  // descending score, ties ascending anchor id
};

RankedList rank_candidates(const GGEModel& model, const num::ParameterSet& params,
                           const RankQuestionData& question);

// deterministic parallel map over questions; results in input order
std::vector<RankedList> rank_all(const GGEModel& model, const num::ParameterSet& params,
                                 std::span<const RankQuestionData> questions, std::size_t workers = 1);

}  // namespace ksgrank

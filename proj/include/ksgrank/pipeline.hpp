#pragma once

#include "ksgrank/answer.hpp"
#include "ksgrank/biggnn.hpp"
#include "ksgrank/ebimpm.hpp"
#include "ksgrank/metrics.hpp"
#include "ksgrank/ranker.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ksgrank {

// Everything a run needs, resolved from one JSON config file. Relative
// paths resolve against the config file's directory; command-line
// overrides use dotted keys ("train.lr=0.01").
struct PipelineConfig {
  std::filesystem::path triples;
  std::filesystem::path questions;
  std::filesystem::path embeddings;
  std::filesystem::path entity_names;  // optional, may be empty
  std::filesystem::path run_dir;

  std::uint64_t seed = 42;
  int hops = 2;
  std::string label_mode = "membership";  // membership | literal

  double split_train = 0.7;
  double split_dev = 0.15;

  std::string negatives_mode = "random";  // random | tfidf
  std::size_t negatives_count = 20;

  std::size_t word_dim = 0;  // 0 = take the embedding table's width
  BiGGNNConfig gnn{2, 128};
  EBiMPMConfig mpm;
  bool share_graph_encoders = false;
  std::string ablation = "g-g-e";

  double lr = 5e-4;
  std::size_t batch_size = 50;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  bool rescale_targets = false;

  BiGGNNConfig answer_question_gnn{2, 16};
  BiGGNNConfig answer_graph_gnn{2, 16};
  double answer_lr = 1e-3;
  std::size_t answer_batch_size = 8;
  std::size_t answer_max_epochs = 30;
  std::size_t answer_patience = 5;
  double answer_threshold = 0.5;
  std::string input_regime = "topk";  // topk | full
  std::string hits_mode = "top1";     // top1 | set

  std::vector<std::size_t> recall_ks = {1, 2, 5, 10};
  std::vector<std::size_t> merge_topk = {5};
  std::string mrr_mode = "first";  // first | all
  std::string eval_split = "test";  // train | dev | test | all
  std::size_t workers = 1;

  nlohmann::json raw;  // merged config as given, echoed into artifacts

  static PipelineConfig from_file(const std::filesystem::path& path,
                                  const std::vector<std::string>& overrides = {},
                                  std::optional<std::uint64_t> seed_override = std::nullopt);
  static PipelineConfig from_json(nlohmann::json j, const std::filesystem::path& base_dir,
                                  std::optional<std::uint64_t> seed_override = std::nullopt);

  std::string config_hash() const;
  MrrMode mrr_mode_enum() const;
  LabelMode label_mode_enum() const;
};

// apply "a.b.c=value" onto a json document (value parsed as JSON when
// possible, else kept as string)
void apply_override(nlohmann::json& doc, const std::string& assignment);

namespace stages {

void ingest(const PipelineConfig& cfg);
void retrieve(const PipelineConfig& cfg);
void partition(const PipelineConfig& cfg);
void make_pairs(const PipelineConfig& cfg);
void train_ranker(const PipelineConfig& cfg);
void rank(const PipelineConfig& cfg);
void merge(const PipelineConfig& cfg);
void train_answerer(const PipelineConfig& cfg);
void evaluate(const PipelineConfig& cfg);

}  // namespace stages

// all stages in order
void run_pipeline(const PipelineConfig& cfg);

}  // namespace ksgrank

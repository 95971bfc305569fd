#pragma once

#include "ksgrank/params.hpp"
#include "ksgrank/rnn.hpp"
#include "ksgrank/tape.hpp"
#include "ksgrank/text.hpp"

#include <string>

namespace ksgrank {

struct BiGGNNConfig {
  std::size_t layers = 2;
  std::size_t hidden = 128;
};

// Bidirectional gated graph encoder. Per layer, each node sums linearly
// transformed neighbor states separately over outgoing and incoming
// edges, then a per-direction GRU folds the message into the node state.
// Node output is [h_out; h_in] (n x 2D); the graph embedding is the
// column-wise max over nodes (1 x 2D).
class BiGGNN {
 public:
  BiGGNN(std::string prefix, std::size_t input_dim, BiGGNNConfig cfg);

  void init(num::ParameterSet& ps, num::Rng& rng) const;

  struct Encoding {
    num::Var nodes;   // n x 2D
    num::Var pooled;  // 1 x 2D
  };

  Encoding encode(num::Tape& tape, num::ParamBinding& pb, const DiGraph& graph,
                  num::Var node_embeddings) const;

  std::size_t output_dim() const { return 2 * cfg_.hidden; }
  const BiGGNNConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }

 private:
  std::string prefix_;
  std::size_t input_dim_;
  BiGGNNConfig cfg_;
  num::GruParams gru_out_, gru_in_;
};

}  // namespace ksgrank

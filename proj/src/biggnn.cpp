#include "ksgrank/biggnn.hpp"

#include <stdexcept>

namespace ksgrank {

using num::ParamBinding;
using num::ParameterSet;
using num::Rng;
using num::Tape;
using num::Tensor;
using num::Var;

BiGGNN::BiGGNN(std::string prefix, std::size_t input_dim, BiGGNNConfig cfg)
    : prefix_(std::move(prefix)), input_dim_(input_dim), cfg_(cfg) {
  if (cfg_.layers < 1 || cfg_.hidden < 1)
    throw std::invalid_argument("biggnn: layers and hidden width must be >= 1");
  gru_out_ = {prefix_ + ".gru_out", cfg_.hidden, cfg_.hidden};
  gru_in_ = {prefix_ + ".gru_in", cfg_.hidden, cfg_.hidden};
}

void BiGGNN::init(ParameterSet& ps, Rng& rng) const {
  ps.create_glorot(prefix_ + ".proj.w", input_dim_, cfg_.hidden, rng);
  ps.create(prefix_ + ".proj.b", {1, cfg_.hidden});
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    ps.create_glorot(prefix_ + ".agg" + std::to_string(l) + ".out", cfg_.hidden, cfg_.hidden, rng);
    ps.create_glorot(prefix_ + ".agg" + std::to_string(l) + ".in", cfg_.hidden, cfg_.hidden, rng);
  }
  gru_out_.init(ps, rng);
  gru_in_.init(ps, rng);
}

BiGGNN::Encoding BiGGNN::encode(Tape& tape, ParamBinding& pb, const DiGraph& graph,
                                Var node_embeddings) const {
  const std::size_t n = graph.n;
  if (n == 0) throw std::invalid_argument("biggnn: empty graph");
  const auto& emb = node_embeddings.value();
  if (emb.rank() != 2 || emb.rows() != n || emb.cols() != input_dim_)
    throw std::invalid_argument("biggnn: embeddings " + emb.shape_str() + " do not match graph n=" +
                                std::to_string(n) + ", input_dim=" + std::to_string(input_dim_));

  // succ(v, u) = 1 iff v -> u; messages for the outgoing direction come
  // from successors, the incoming direction uses the transpose
  Tensor succ({n, n});
  for (const auto& [a, b] : graph.edges) succ(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) = 1.0;
  Tensor pred({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) pred(i, j) = succ(j, i);
  Var a_succ = tape.constant(std::move(succ));
  Var a_pred = tape.constant(std::move(pred));

  Var h0 = tape.add_rowvec(tape.matmul(node_embeddings, pb[prefix_ + ".proj.w"]), pb[prefix_ + ".proj.b"]);
  Var h_out = h0;
  Var h_in = h0;
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const std::string layer = prefix_ + ".agg" + std::to_string(l);
    Var m_out = tape.matmul(a_succ, tape.matmul(h_out, pb[layer + ".out"]));
    Var m_in = tape.matmul(a_pred, tape.matmul(h_in, pb[layer + ".in"]));
    h_out = gru_cell(tape, pb, gru_out_, m_out, h_out);
    h_in = gru_cell(tape, pb, gru_in_, m_in, h_in);
  }
  Var nodes = tape.concat_cols({h_out, h_in});
  return {nodes, tape.max_over_rows(nodes)};
}

}  // namespace ksgrank

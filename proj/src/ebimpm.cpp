#include "ksgrank/ebimpm.hpp"

#include <stdexcept>
#include <vector>

namespace ksgrank {

using num::ParamBinding;
using num::ParameterSet;
using num::Rng;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {
const char* const kStrategies[] = {"full", "maxpool", "att", "maxatt"};
const char* const kDirections[] = {"fw", "bw"};
}

EBiMPM::EBiMPM(std::string prefix, std::size_t word_dim, EBiMPMConfig cfg)
    : prefix_(std::move(prefix)), word_dim_(word_dim), cfg_(cfg) {
  if (cfg_.perspectives < 1) throw std::invalid_argument("ebimpm: perspectives must be >= 1");
  if (cfg_.context_hidden < 1) throw std::invalid_argument("ebimpm: context width must be >= 1");
  ctx_ = {prefix_ + ".ctx", word_dim_, cfg_.context_hidden};
  agg_ = {prefix_ + ".agg", 8 * cfg_.perspectives + cfg_.enhance_out(),
          cfg_.agg_hidden ? cfg_.agg_hidden : cfg_.context_hidden};
}

void EBiMPM::init(ParameterSet& ps, Rng& rng) const {
  ctx_.init(ps, rng);
  ps.create_glorot(prefix_ + ".enh.w", 4 * cfg_.token_dim(), cfg_.enhance_out(), rng);
  ps.create(prefix_ + ".enh.b", {1, cfg_.enhance_out()});
  for (const char* dir : kDirections)
    for (const char* strat : kStrategies)
      ps.create_glorot(prefix_ + ".persp." + dir + "." + strat, cfg_.perspectives,
                       cfg_.context_hidden, rng);
  agg_.init(ps, rng);
}

std::pair<Var, Var> EBiMPM::context_encode(Tape& tape, ParamBinding& pb, Var q_words,
                                           Var s_words) const {
  if (q_words.value().rows() == 0 || s_words.value().rows() == 0)
    throw std::invalid_argument("ebimpm: empty input sequence");
  return {bilstm(tape, pb, ctx_, q_words), bilstm(tape, pb, ctx_, s_words)};
}

std::pair<Var, Var> EBiMPM::cross_attention(Tape& tape, Var q, Var s) {
  Var scores = tape.matmul(q, tape.transpose(s));           // l1 x l2
  Var q_att = tape.matmul(tape.softmax_rows(scores), s);    // l1 x d
  Var scores_t = tape.transpose(scores);                    // l2 x l1
  Var s_att = tape.matmul(tape.softmax_rows(scores_t), q);  // l2 x d
  return {q_att, s_att};
}

Var EBiMPM::enhance(Tape& tape, ParamBinding& pb, Var x, Var x_att) const {
  Var fused = tape.concat_cols({x, x_att, tape.sub(x, x_att), tape.mul(x, x_att)});
  return tape.tanh(tape.add_rowvec(tape.matmul(fused, pb[prefix_ + ".enh.w"]),
                                   pb[prefix_ + ".enh.b"]));
}

// Matching vectors for every token of `self_states` against `other_states`.
// Strategy order per direction: full, maxpooling, attentive, max-attentive;
// forward direction first. Output m x 8l.
Var EBiMPM::match_one_side(Tape& tape, ParamBinding& pb, Var self_states, Var other_states) const {
  const std::size_t h = cfg_.context_hidden;
  const std::size_t m = self_states.value().rows();
  const std::size_t n = other_states.value().rows();

  std::vector<std::vector<Var>> token_parts(m);
  for (int d = 0; d < 2; ++d) {
    const bool fw = d == 0;
    Var self_dir = tape.slice_cols(self_states, fw ? 0 : h, fw ? h : 2 * h);
    Var other_dir = tape.slice_cols(other_states, fw ? 0 : h, fw ? h : 2 * h);
    // the last state of the other sentence in traversal order: final row
    // for the forward LSTM, first row for the backward one
    Var full_target = tape.row(other_dir, fw ? n - 1 : 0);

    Var w_full = pb[prefix_ + ".persp." + kDirections[d] + ".full"];
    Var w_max = pb[prefix_ + ".persp." + kDirections[d] + ".maxpool"];
    Var w_att = pb[prefix_ + ".persp." + kDirections[d] + ".att"];
    Var w_matt = pb[prefix_ + ".persp." + kDirections[d] + ".maxatt"];

    Var full_scaled = tape.mul_rowvec(w_full, full_target);  // l x h
    std::vector<Var> max_scaled;                             // per other token, l x h
    max_scaled.reserve(n);
    for (std::size_t j = 0; j < n; ++j)
      max_scaled.push_back(tape.mul_rowvec(w_max, tape.row(other_dir, j)));

    // plain cosine drives both attentive variants
    Var cos = tape.cosine_matrix(self_dir, other_dir);          // m x n
    Var att_vec = tape.weighted_mean_rows(other_dir, cos);      // m x h
    std::vector<std::size_t> best(m, 0);
    const Tensor& cv = cos.value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 1; j < n; ++j)
        if (cv(i, j) > cv(i, best[i])) best[i] = j;
    Var picked = tape.pick_rows(other_dir, best);               // m x h

    for (std::size_t i = 0; i < m; ++i) {
      Var x = tape.row(self_dir, i);
      Var m_full = tape.rowwise_cosine(tape.mul_rowvec(w_full, x), full_scaled);
      Var x_max = tape.mul_rowvec(w_max, x);
      std::vector<Var> cols;
      cols.reserve(n);
      for (std::size_t j = 0; j < n; ++j)
        cols.push_back(tape.rowwise_cosine(x_max, max_scaled[j]));
      Var m_max = tape.max_over_cols(tape.concat_cols(cols));
      Var m_att = tape.rowwise_cosine(tape.mul_rowvec(w_att, x),
                                      tape.mul_rowvec(w_att, tape.row(att_vec, i)));
      Var m_matt = tape.rowwise_cosine(tape.mul_rowvec(w_matt, x),
                                       tape.mul_rowvec(w_matt, tape.row(picked, i)));
      token_parts[i].push_back(tape.transpose(m_full));
      token_parts[i].push_back(tape.transpose(m_max));
      token_parts[i].push_back(tape.transpose(m_att));
      token_parts[i].push_back(tape.transpose(m_matt));
    }
  }

  std::vector<Var> rows;
  rows.reserve(m);
  for (std::size_t i = 0; i < m; ++i) rows.push_back(tape.concat_cols(token_parts[i]));
  return tape.concat_rows(rows);
}

std::pair<Var, Var> EBiMPM::multi_perspective_match(Tape& tape, ParamBinding& pb, Var q,
                                                    Var s) const {
  return {match_one_side(tape, pb, q, s), match_one_side(tape, pb, s, q)};
}

Var EBiMPM::aggregate_side(Tape& tape, ParamBinding& pb, Var matched, Var enhanced) const {
  Var folded = bilstm(tape, pb, agg_, tape.concat_cols({matched, enhanced}));
  return tape.max_over_rows(folded);
}

EBiMPM::Output EBiMPM::match(Tape& tape, ParamBinding& pb, Var q_words, Var s_words) const {
  auto [q_ctx, s_ctx] = context_encode(tape, pb, q_words, s_words);
  auto [q_att, s_att] = cross_attention(tape, q_ctx, s_ctx);
  Var q_enh = enhance(tape, pb, q_ctx, q_att);
  Var s_enh = enhance(tape, pb, s_ctx, s_att);
  auto [q_matched, s_matched] = multi_perspective_match(tape, pb, q_ctx, s_ctx);
  return {aggregate_side(tape, pb, q_matched, q_enh), aggregate_side(tape, pb, s_matched, s_enh)};
}

}  // namespace ksgrank

#pragma once

#include "ksgrank/params.hpp"
#include "ksgrank/rnn.hpp"
#include "ksgrank/tape.hpp"

#include <string>
#include <utility>

namespace ksgrank {

struct EBiMPMConfig {
  std::size_t context_hidden = 64;  // per-direction BiLSTM width; token states are 2x this
  std::size_t perspectives = 20;
  std::size_t enhance_dim = 0;  // 0 -> 2 * context_hidden
  std::size_t agg_hidden = 0;   // 0 -> context_hidden

  std::size_t token_dim() const { return 2 * context_hidden; }
  std::size_t enhance_out() const { return enhance_dim ? enhance_dim : token_dim(); }
  std::size_t agg_out() const { return 2 * (agg_hidden ? agg_hidden : context_hidden); }
};

// Bilateral multi-perspective matching with a bidirectional attention
// layer and an enhanced representation layer. Both input sequences go
// through one shared BiLSTM; the matching layer compares the raw context
// states under four strategies (full, maxpooling, attentive,
// max-attentive) in both LSTM directions, each under `perspectives`
// learned elementwise weightings; matched and enhanced states are then
// folded by a shared aggregation BiLSTM and max-pooled.
class EBiMPM {
 public:
  EBiMPM(std::string prefix, std::size_t word_dim, EBiMPMConfig cfg);

  void init(num::ParameterSet& ps, num::Rng& rng) const;

  struct Output {
    num::Var r_q;  // 1 x agg_out()
    num::Var r_s;
  };

  Output match(num::Tape& tape, num::ParamBinding& pb, num::Var q_words, num::Var s_words) const;

  // pieces exposed for tests
  std::pair<num::Var, num::Var> context_encode(num::Tape& tape, num::ParamBinding& pb,
                                               num::Var q_words, num::Var s_words) const;
  static std::pair<num::Var, num::Var> cross_attention(num::Tape& tape, num::Var q, num::Var s);
  num::Var enhance(num::Tape& tape, num::ParamBinding& pb, num::Var x, num::Var x_att) const;
  std::pair<num::Var, num::Var> multi_perspective_match(num::Tape& tape, num::ParamBinding& pb,
                                                        num::Var q, num::Var s) const;
  num::Var aggregate_side(num::Tape& tape, num::ParamBinding& pb, num::Var matched,
                          num::Var enhanced) const;

  const EBiMPMConfig& config() const { return cfg_; }

 private:
  num::Var match_one_side(num::Tape& tape, num::ParamBinding& pb, num::Var self_states,
                          num::Var other_states) const;

  std::string prefix_;
  std::size_t word_dim_;
  EBiMPMConfig cfg_;
  num::BiLstmParams ctx_, agg_;
};

}  // namespace ksgrank

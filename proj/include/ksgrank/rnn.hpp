#pragma once

#include "ksgrank/params.hpp"
#include "ksgrank/tape.hpp"

#include <string>
#include <utility>

namespace ksgrank::num {

// Row convention throughout: states are 1 x H rows (or N x H batches),
// weights are stored (in x out) so a step is x * W.

struct GruParams {
  std::string prefix;
  std::size_t input = 0;
  std::size_t hidden = 0;

  void init(ParameterSet& ps, Rng& rng) const;
};

// z = sig(m Wz + h Uz + bz); r = sig(m Wr + h Ur + br)
// htil = tanh(m Wh + (r*h) Uh + bh); h' = (1-z)*h + z*htil
Var gru_cell(Tape& tape, ParamBinding& pb, const GruParams& p, Var m, Var h_prev);

struct LstmParams {
  std::string prefix;
  std::size_t input = 0;
  std::size_t hidden = 0;

  void init(ParameterSet& ps, Rng& rng) const;
};

// returns (h', c')
std::pair<Var, Var> lstm_cell(Tape& tape, ParamBinding& pb, const LstmParams& p, Var x, Var h, Var c);

struct BiLstmParams {
  std::string prefix;
  std::size_t input = 0;
  std::size_t hidden = 0;

  LstmParams forward() const { return {prefix + ".fw", input, hidden}; }
  LstmParams backward() const { return {prefix + ".bw", input, hidden}; }
  void init(ParameterSet& ps, Rng& rng) const;
};

// seq: l x input  ->  l x 2*hidden ([forward; backward] per step)
Var bilstm(Tape& tape, ParamBinding& pb, const BiLstmParams& p, Var seq);

}  // namespace ksgrank::num

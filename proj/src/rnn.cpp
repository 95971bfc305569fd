#include "ksgrank/rnn.hpp"

#include <stdexcept>
#include <vector>

namespace ksgrank::num {

namespace {
Var linear(Tape& t, Var x, Var w, Var b) { return t.add_rowvec(t.matmul(x, w), b); }
}

void GruParams::init(ParameterSet& ps, Rng& rng) const {
  for (const char* gate : {"z", "r", "h"}) {
    ps.create_glorot(prefix + ".w" + gate, input, hidden, rng);
    ps.create_glorot(prefix + ".u" + gate, hidden, hidden, rng);
    ps.create(prefix + ".b" + gate, {1, hidden});
  }
}

Var gru_cell(Tape& tape, ParamBinding& pb, const GruParams& p, Var m, Var h_prev) {
  const auto& mv = m.value();
  const auto& hv = h_prev.value();
  if (mv.cols() != p.input || hv.cols() != p.hidden || mv.rows() != hv.rows())
    throw std::invalid_argument("gru_cell: widths " + mv.shape_str() + " / " + hv.shape_str() +
                                " do not match cell (" + std::to_string(p.input) + " -> " +
                                std::to_string(p.hidden) + ")");
  Var z = tape.sigmoid(tape.add(linear(tape, m, pb[p.prefix + ".wz"], pb[p.prefix + ".bz"]),
                                tape.matmul(h_prev, pb[p.prefix + ".uz"])));
  Var r = tape.sigmoid(tape.add(linear(tape, m, pb[p.prefix + ".wr"], pb[p.prefix + ".br"]),
                                tape.matmul(h_prev, pb[p.prefix + ".ur"])));
  Var htil = tape.tanh(tape.add(linear(tape, m, pb[p.prefix + ".wh"], pb[p.prefix + ".bh"]),
                                tape.matmul(tape.mul(r, h_prev), pb[p.prefix + ".uh"])));
  Var one_minus_z = tape.sub(tape.constant(num::Tensor(z.value().shape(), 1.0)), z);
  return tape.add(tape.mul(one_minus_z, h_prev), tape.mul(z, htil));
}

void LstmParams::init(ParameterSet& ps, Rng& rng) const {
  for (const char* gate : {"i", "f", "o", "c"}) {
    ps.create_glorot(prefix + ".w" + gate, input, hidden, rng);
    ps.create_glorot(prefix + ".u" + gate, hidden, hidden, rng);
    ps.create(prefix + ".b" + gate, {1, hidden});
  }
}

std::pair<Var, Var> lstm_cell(Tape& tape, ParamBinding& pb, const LstmParams& p, Var x, Var h, Var c) {
  Var i = tape.sigmoid(tape.add(linear(tape, x, pb[p.prefix + ".wi"], pb[p.prefix + ".bi"]),
                                tape.matmul(h, pb[p.prefix + ".ui"])));
  Var f = tape.sigmoid(tape.add(linear(tape, x, pb[p.prefix + ".wf"], pb[p.prefix + ".bf"]),
                                tape.matmul(h, pb[p.prefix + ".uf"])));
  Var o = tape.sigmoid(tape.add(linear(tape, x, pb[p.prefix + ".wo"], pb[p.prefix + ".bo"]),
                                tape.matmul(h, pb[p.prefix + ".uo"])));
  Var ctil = tape.tanh(tape.add(linear(tape, x, pb[p.prefix + ".wc"], pb[p.prefix + ".bc"]),
                                tape.matmul(h, pb[p.prefix + ".uc"])));
  Var c_next = tape.add(tape.mul(f, c), tape.mul(i, ctil));
  Var h_next = tape.mul(o, tape.tanh(c_next));
  return {h_next, c_next};
}

void BiLstmParams::init(ParameterSet& ps, Rng& rng) const {
  forward().init(ps, rng);
  backward().init(ps, rng);
}

Var bilstm(Tape& tape, ParamBinding& pb, const BiLstmParams& p, Var seq) {
  const auto& sv = seq.value();
  if (sv.rank() != 2 || sv.rows() == 0)
    throw std::invalid_argument("bilstm: expects a non-empty l x d sequence, got " + sv.shape_str());
  const std::size_t len = sv.rows();
  const LstmParams fw = p.forward();
  const LstmParams bw = p.backward();

  Var h = tape.constant(Tensor({1, p.hidden}));
  Var c = tape.constant(Tensor({1, p.hidden}));
  std::vector<Var> fw_states(len, Var{});
  for (std::size_t t = 0; t < len; ++t) {
    auto [hn, cn] = lstm_cell(tape, pb, fw, tape.row(seq, t), h, c);
    h = hn;
    c = cn;
    fw_states[t] = h;
  }

  h = tape.constant(Tensor({1, p.hidden}));
  c = tape.constant(Tensor({1, p.hidden}));
  std::vector<Var> bw_states(len, Var{});
  for (std::size_t t = len; t-- > 0;) {
    auto [hn, cn] = lstm_cell(tape, pb, bw, tape.row(seq, t), h, c);
    h = hn;
    c = cn;
    bw_states[t] = h;
  }

  std::vector<Var> rows;
  rows.reserve(len);
  for (std::size_t t = 0; t < len; ++t)
    rows.push_back(tape.concat_cols({fw_states[t], bw_states[t]}));
  return tape.concat_rows(rows);
}

}  // namespace ksgrank::num

#include "ksgrank/biggnn.hpp"
#include "ksgrank/ebimpm.hpp"

#include <doctest.h>

#include <cmath>

using namespace ksgrank;
using namespace ksgrank::num;

namespace {
Tensor rand_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}
}  // namespace

TEST_CASE("biggnn config defaults to two layers") {
  CHECK(BiGGNNConfig{}.layers == 2);
}

TEST_CASE("single-node graph pools to that node's state") {
  Rng rng(41);
  BiGGNN gnn("g", 4, {2, 3});
  ParameterSet ps;
  gnn.init(ps, rng);
  DiGraph graph;
  graph.n = 1;
  Tape t;
  ParamBinding pb(t, ps);
  const auto enc = gnn.encode(t, pb, graph, t.constant(rand_tensor({1, 4}, rng)));
  for (std::size_t j = 0; j < 6; ++j)
    CHECK(enc.pooled.value()(0, j) == enc.nodes.value()(0, j));
}

TEST_CASE("an isolated node encodes as if it were alone") {
  // empty neighborhoods mean zero messages, so company that is not
  // connected cannot change a node's state
  Rng rng(42);
  BiGGNN gnn("g", 3, {2, 4});
  ParameterSet ps;
  gnn.init(ps, rng);
  const Tensor solo = rand_tensor({1, 3}, rng);

  Tape t1;
  ParamBinding p1(t1, ps);
  DiGraph alone;
  alone.n = 1;
  const Tensor enc_alone = gnn.encode(t1, p1, alone, t1.constant(solo)).nodes.value();

  Tape t2;
  ParamBinding p2(t2, ps);
  DiGraph with_pair;
  with_pair.n = 3;
  with_pair.edges = {{1, 2}};
  Tensor trio({3, 3});
  for (std::size_t j = 0; j < 3; ++j) trio(0, j) = solo(0, j);
  trio(1, 0) = 0.3;
  trio(2, 1) = -0.7;
  const Tensor enc_with = gnn.encode(t2, p2, with_pair, t2.constant(три)).nodes.value();

  for (std::size_t j = 0; j < enc_alone.cols(); ++j)
    CHECK(enc_alone(0, j) == doctest::Approx(enc_with(0, j)).epsilon(1e-12));
}

TEST_CASE("three-node path matches a by-hand layer computation") {
  // one layer, width 1: every weight fixed to simple values so the update
  // can be traced with a calculator
  BiGGNN gnn("g", 1, {1, 1});
  ParameterSet ps;
  Rng rng(43);
  gnn.init(ps, rng);
  auto set = [&](const std::string& name, double v) {
    Tensor& t = ps.get(name);
    for (auto& x : t.data()) x = v;
  };
  set("g.proj.w", 1.0);
  set("g.proj.b", 0.0);
  set("g.agg0.out", 2.0);
  set("g.agg0.in", 3.0);
  for (const char* dir : {"gru_out", "gru_in"})
    for (const char* gate : {"z", "r", "h"}) {
      set("g." + std::string(dir) + ".w" + gate, 0.5);
      set("g." + std::string(dir) + ".u" + gate, 0.25);
      set("g." + std::string(dir) + ".b" + gate, 0.1);
    }

  DiGraph graph;
  graph.n = 3;
  graph.edges = {{0, 1}, {1, 2}};
  Tensor x({3, 1});
  x(0, 0) = 0.2;
  x(1, 0) = -0.4;
  x(2, 0) = 0.6;

  Tape t;
  ParamBinding pb(t, ps);
  const Tensor got = gnn.encode(t, pb, graph, t.constant(x)).nodes.value();

  auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  auto gru = [&](double m, double h) {
    const double z = sigmoid(0.5 * m + 0.25 * h + 0.1);
    const double r = sigmoid(0.5 * m + 0.25 * h + 0.1);
    const double htil = std::tanh(0.5 * m + 0.25 * (r * h) + 0.1);
    return (1.0 - z) * h + z * htil;
  };
  // h0 = x; outgoing messages aggregate successors, incoming aggregate predecessors
  const double h[3] = {0.2, -0.4, 0.6};
  const double m_out[3] = {2.0 * h[1], 2.0 * h[2], 0.0};
  const double m_in[3] = {0.0, 3.0 * h[0], 3.0 * h[1]};
  for (int v = 0; v < 3; ++v) {
    CHECK(got(v, 0) == doctest::Approx(gru(m_out[v], h[v])).epsilon(1e-12));
    CHECK(got(v, 1) == doctest::Approx(gru(m_in[v], h[v])).epsilon(1e-12));
  }
}

TEST_CASE("graph embedding is invariant under node relabeling") {
  Rng rng(44);
  BiGGNN gnn("g", 3, {2, 5});
  ParameterSet ps;
  gnn.init(ps, rng);

  DiGraph graph;
  graph.n = 4;
  graph.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}};
  const Tensor x = rand_tensor({4, 3}, rng);

  // permutation (0 1 2 3) -> (2 0 3 1)
  const std::size_t perm[4] = {2, 0, 3, 1};
  DiGraph permuted;
  permuted.n = 4;
  for (const auto& [a, b] : graph.edges) permuted.edges.emplace_back(perm[a], perm[b]);
  Tensor px({4, 3});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) px(perm[i], j) = x(i, j);

  Tape t1;
  ParamBinding p1(t1, ps);
  const Tensor r1 = gnn.encode(t1, p1, graph, t1.constant(x)).pooled.value();
  Tape t2;
  ParamBinding p2(t2, ps);
  const auto enc2 = gnn.encode(t2, p2, permuted, t2.constant(px));
  const Tensor r2 = enc2.pooled.value();
  for (std::size_t j = 0; j < r1.cols(); ++j)
    CHECK(r1(0, j) == doctest::Approx(r2(0, j)).epsilon(1e-12));

  // node rows follow the permutation
  Tape t3;
  ParamBinding p3(t3, ps);
  const Tensor n1 = gnn.encode(t3, p3, graph, t3.constant(x)).nodes.value();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < n1.cols(); ++j)
      CHECK(n1(i, j) == doctest::Approx(enc2.nodes.value()(perm[i], j)).epsilon(1e-12));
}

TEST_CASE("L layers bound the receptive field on a path graph") {
  Rng rng(45);
  const std::size_t L = 2;
  BiGGNN gnn("g", 2, {L, 3});
  ParameterSet ps;
  gnn.init(ps, rng);

  DiGraph path;
  path.n = 6;
  for (int i = 0; i + 1 < 6; ++i) path.edges.emplace_back(i, i + 1);
  Tensor x = rand_tensor({6, 2}, rng);

  Tape t1;
  ParamBinding p1(t1, ps);
  const Tensor before = gnn.encode(t1, p1, path, t1.constant(x)).nodes.value();

  // perturb node 5, which is 5 hops from node 0: with L=2 layers node 0
  // cannot see it in either direction
  x(5, 0) += 0.5;
  Tape t2;
  ParamBinding p2(t2, ps);
  const Tensor after = gnn.encode(t2, p2, path, t2.constant(x)).nodes.value();

  for (std::size_t j = 0; j < before.cols(); ++j)
    CHECK(before(0, j) == after(0, j));
  bool changed = false;
  for (std::size_t j = 0; j < before.cols(); ++j)
    if (before(5, j) != after(5, j)) changed = true;
  CHECK(changed);
}

TEST_CASE("encoder rejects empty graphs") {
  Rng rng(46);
  BiGGNN gnn("g", 2, {1, 2});
  ParameterSet ps;
  gnn.init(ps, rng);
  Tape t;
  ParamBinding pb(t, ps);
  DiGraph empty;
  CHECK_THROWS_AS(gnn.encode(t, pb, empty, t.constant(Tensor({0, 2}))), std::invalid_argument);
}

// ---- EBiMPM ----------------------------------------------------------------

TEST_CASE("shared context encoder treats both inputs identically") {
  Rng rng(47);
  EBiMPM mpm("m", 4, {.context_hidden = 3, .perspectives = 2, .enhance_dim = 0, .agg_hidden = 0});
  ParameterSet ps;
  mpm.init(ps, rng);
  const Tensor seq = rand_tensor({3, 4}, rng);
  Tape t;
  ParamBinding pb(t, ps);
  auto [q, s] = mpm.context_encode(t, pb, t.constant(seq), t.constant(seq));
  CHECK(q.value().data() == s.value().data());

  // swapping which argument is the "question" changes nothing
  const Tensor other = rand_tensor({2, 4}, rng);
  Tape t2;
  ParamBinding pb2(t2, ps);
  auto [q2, s2] = mpm.context_encode(t2, pb2, t2.constant(other), t2.constant(seq));
  CHECK(s2.value().data() == q.value().data());
}

TEST_CASE("attention over a single row copies that row") {
  Rng rng(48);
  Tape t;
  Var q = t.constant(rand_tensor({3, 4}, rng));
  Var s = t.constant(rand_tensor({1, 4}, rng));
  auto [q_att, s_att] = EBiMPM::cross_attention(t, q, s);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(q_att.value()(i, j) == doctest::Approx(s.value()(0, j)));
}

TEST_CASE("attention weights are a convex combination") {
  Rng rng(49);
  Tape t;
  Var q = t.constant(rand_tensor({3, 4}, rng));
  Var s = t.constant(rand_tensor({5, 4}, rng));
  auto [q_att, s_att] = EBiMPM::cross_attention(t, q, s);
  // attentive vectors stay inside the attended rows' bounding box
  for (std::size_t j = 0; j < 4; ++j) {
    double lo = 1e9, hi = -1e9;
    for (std::size_t r = 0; r < 5; ++r) {
      lo = std::min(lo, s.value()(r, j));
      hi = std::max(hi, s.value()(r, j));
    }
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(q_att.value()(i, j) >= lo - 1e-12);
      CHECK(q_att.value()(i, j) <= hi + 1e-12);
    }
  }
}

TEST_CASE("two-by-two attention matches a hand computation") {
  Tape t;
  Var q = t.constant(Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0}));
  Var s = t.constant(Tensor::matrix(2, 2, {2.0, 0.0, 0.0, 2.0}));
  auto [q_att, s_att] = EBiMPM::cross_attention(t, q, s);
  // scores row 0: (2, 0) -> softmax (e^2, 1)/(e^2+1)
  const double w = std::exp(2.0) / (std::exp(2.0) + 1.0);
  CHECK(q_att.value()(0, 0) == doctest::Approx(2.0 * w));
  CHECK(q_att.value()(0, 1) == doctest::Approx(2.0 * (1.0 - w)));
  CHECK(q_att.value()(1, 0) == doctest::Approx(2.0 * (1.0 - w)));
  CHECK(q_att.value()(1, 1) == doctest::Approx(2.0 * w));
}

TEST_CASE("enhancement with zero weights collapses to tanh of the bias") {
  Rng rng(50);
  EBiMPM mpm("m", 4, {.context_hidden = 2, .perspectives = 2, .enhance_dim = 0, .agg_hidden = 0});
  ParameterSet ps;
  mpm.init(ps, rng);
  Tensor& w = ps.get("m.enh.w");
  for (auto& v : w.data()) v = 0.0;
  Tensor& b = ps.get("m.enh.b");
  for (auto& v : b.data()) v = 0.3;
  Tape t;
  ParamBinding pb(t, ps);
  Var x = t.constant(rand_tensor({3, 4}, rng));
  Var xa = t.constant(rand_tensor({3, 4}, rng));
  const Tensor out = mpm.enhance(t, pb, x, xa).value();
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(out[i] == doctest::Approx(std::tanh(0.3)));
}

TEST_CASE("enhancement fuses [x, xa, x - xa, x * xa]") {
  // identity-reading weights: place a single 1 to pick out each block
  EBiMPM mpm("m", 2, {.context_hidden = 1, .perspectives = 1, .enhance_dim = 4, .agg_hidden = 0});
  ParameterSet ps;
  Rng rng(51);
  mpm.init(ps, rng);
  Tensor& w = ps.get("m.enh.w");  // 8 x 4 (token_dim 2, fused 8)
  for (auto& v : w.data()) v = 0.0;
  w(0, 0) = 1.0;  // x[0]
  w(2, 1) = 1.0;  // xa[0]
  w(4, 2) = 1.0;  // (x - xa)[0]
  w(6, 3) = 1.0;  // (x * xa)[0]
  for (auto& v : ps.get("m.enh.b").data()) v = 0.0;

  Tape t;
  ParamBinding pb(t, ps);
  Var x = t.constant(Tensor::row({0.4, 0.0}));
  Var xa = t.constant(Tensor::row({0.4, 0.0}));  // equal, so difference vanishes
  const Tensor out = mpm.enhance(t, pb, x, xa).value();
  CHECK(out(0, 0) == doctest::Approx(std::tanh(0.4)));
  CHECK(out(0, 1) == doctest::Approx(std::tanh(0.4)));
  CHECK(out(0, 2) == doctest::Approx(0.0));
  CHECK(out(0, 3) == doctest::Approx(std::tanh(0.16)));
}

TEST_CASE("matching output width is eight times the perspectives") {
  Rng rng(52);
  for (std::size_t l : {1, 3, 5}) {
    EBiMPM mpm("m", 3, {.context_hidden = 2, .perspectives = l, .enhance_dim = 0, .agg_hidden = 0});
    ParameterSet ps;
    mpm.init(ps, rng);
    Tape t;
    ParamBinding pb(t, ps);
    auto [q, s] = mpm.context_encode(t, pb, t.constant(rand_tensor({4, 3}, rng)),
                                     t.constant(rand_tensor({2, 3}, rng)));
    auto [qm, sm] = mpm.multi_perspective_match(t, pb, q, s);
    CHECK(qm.value().rows() == 4);
    CHECK(qm.value().cols() == 8 * l);
    CHECK(sm.value().rows() == 2);
    CHECK(sm.value().cols() == 8 * l);
  }
}

TEST_CASE("all-ones perspective weights reduce to plain cosine") {
  EBiMPM mpm("m", 2, {.context_hidden = 2, .perspectives = 1, .enhance_dim = 0, .agg_hidden = 0});
  ParameterSet ps;
  Rng rng(53);
  mpm.init(ps, rng);
  for (const char* dir : {"fw", "bw"})
    for (const char* strat : {"full", "maxpool", "att", "maxatt"}) {
      Tensor& w = ps.get("m.persp." + std::string(dir) + "." + strat);
      for (auto& v : w.data()) v = 1.0;
    }
  Tape t;
  ParamBinding pb(t, ps);
  // hand-built "context" states, bypassing the LSTM: fw half then bw half
  Var q = t.constant(Tensor::matrix(2, 4, {1.0, 0.0, 0.5, 0.5, 0.0, 1.0, 0.25, 0.75}));
  Var s = t.constant(Tensor::matrix(1, 4, {1.0, 1.0, 0.5, 0.5}));
  auto [qm, sm] = mpm.multi_perspective_match(t, pb, q, s);
  // single other token: every strategy compares q_i's fw half against s's fw half
  const double cos_fw_0 = 1.0 / std::sqrt(2.0);  // (1,0) vs (1,1)
  for (int strat = 0; strat < 4; ++strat)
    CHECK(qm.value()(0, strat) == doctest::Approx(cos_fw_0));
}

TEST_CASE("full matching of identical sequences scores 1 at the last token") {
  Rng rng(54);
  EBiMPM mpm("m", 3, {.context_hidden = 2, .perspectives = 2, .enhance_dim = 0, .agg_hidden = 0});
  ParameterSet ps;
  mpm.init(ps, rng);
  Tape t;
  ParamBinding pb(t, ps);
  const Tensor seq = rand_tensor({3, 3}, rng);
  auto [q, s] = mpm.context_encode(t, pb, t.constant(seq), t.constant(seq));
  auto [qm, sm] = mpm.multi_perspective_match(t, pb, q, s);
  // forward full-matching compares token i with the other's final forward
  // state; at i = l-1 with identical sequences this is a self-comparison
  for (std::size_t k = 0; k < 2; ++k)
    CHECK(qm.value()(2, k) == doctest::Approx(1.0));
}

TEST_CASE("aggregation is order sensitive") {
  Rng rng(55);
  EBiMPM mpm("m", 3, {.context_hidden = 2, .perspectives = 2, .enhance_dim = 0, .agg_hidden = 0});
  ParameterSet ps;
  mpm.init(ps, rng);

  const Tensor a = rand_tensor({3, 3}, rng);
  Tensor swapped = a;
  for (std::size_t j = 0; j < 3; ++j) std::swap(swapped(0, j), swapped(2, j));
  const Tensor s = rand_tensor({2, 3}, rng);

  auto run = [&](const Tensor& q_in) {
    Tape t;
    ParamBinding pb(t, ps);
    return mpm.match(t, pb, t.constant(q_in), t.constant(s)).r_q.value();
  };
  const Tensor r1 = run(a);
  const Tensor r2 = run(swapped);
  bool any_diff = false;
  for (std::size_t j = 0; j < r1.cols(); ++j)
    if (r1(0, j) != r2(0, j)) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("single-token sequences make max pooling the identity") {
  Rng rng(56);
  EBiMPM mpm("m", 3, {.context_hidden = 2, .perspectives = 1, .enhance_dim = 0, .agg_hidden = 0});
  ParameterSet ps;
  mpm.init(ps, rng);
  Tape t;
  ParamBinding pb(t, ps);
  auto out = mpm.match(t, pb, t.constant(rand_tensor({1, 3}, rng)),
                       t.constant(rand_tensor({1, 3}, rng)));
  CHECK(out.r_q.value().rows() == 1);
  CHECK(out.r_q.value().cols() == mpm.config().agg_out());
}

TEST_CASE("empty sequences are rejected") {
  Rng rng(57);
  EBiMPM mpm("m", 3, {.context_hidden = 2, .perspectives = 1, .enhance_dim = 0, .agg_hidden = 0});
  ParameterSet ps;
  mpm.init(ps, rng);
  Tape t;
  ParamBinding pb(t, ps);
  CHECK_THROWS_AS(
      mpm.context_encode(t, pb, t.constant(Tensor({0, 3})), t.constant(rand_tensor({1, 3}, rng))),
      std::invalid_argument);
}

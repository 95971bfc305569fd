#include "ksgrank/selfcheck.hpp"

#include "ksgrank/answer.hpp"
#include "ksgrank/gradcheck.hpp"
#include "ksgrank/metrics.hpp"
#include "ksgrank/partition.hpp"
#include "ksgrank/pipeline.hpp"
#include "ksgrank/ranker.hpp"
#include "ksgrank/rnn.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace ksgrank::selfcheck {

using num::ParamBinding;
using num::ParameterSet;
using num::Rng;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

class Timer {
 public:
  Timer() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

CheckResult finish(const std::string& name, bool pass, const std::string& detail, const Timer& t) {
  return {name, pass, detail, t.seconds()};
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

// ---- criterion 1: literal partition simulation -----------------------------

std::vector<RefSubKsg> reference_partition(std::size_t n_nodes,
                                           const std::vector<std::pair<EntityId, EntityId>>& edges,
                                           EntityId root, const std::vector<EntityId>& answers) {
  constexpr int kInf = 1 << 29;
  std::vector<int> dist(n_nodes, kInf);
  dist[static_cast<std::size_t>(root)] = 0;
  // unit-weight relaxation until fixpoint (not BFS on purpose)
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [u, v] : edges) {
      if (u == v) continue;  // self-loops never shorten a path
      if (dist[u] != kInf && dist[u] + 1 < dist[v]) {
        dist[v] = dist[u] + 1;
        changed = true;
      }
    }
  }

  std::vector<EntityId> parent(n_nodes, -1);
  for (std::size_t v = 0; v < n_nodes; ++v) {
    if (dist[v] == kInf || static_cast<EntityId>(v) == root) continue;
    EntityId best = -1;
    for (const auto& [a, b] : edges)
      if (a != b && b == static_cast<EntityId>(v) && dist[a] == dist[v] - 1)
        if (best < 0 || a < best) best = a;
    parent[v] = best;
  }

  std::map<EntityId, std::vector<EntityId>> children;
  for (std::size_t v = 0; v < n_nodes; ++v)
    if (parent[v] >= 0) children[parent[v]].push_back(static_cast<EntityId>(v));
  for (auto& [p, kids] : children) std::sort(kids.begin(), kids.end());

  auto is_leaf = [&](EntityId v) { return children.find(v) == children.end(); };

  std::vector<RefSubKsg> out;
  for (std::size_t vi = 0; vi < n_nodes; ++vi) {
    const auto v = static_cast<EntityId>(vi);
    if (dist[vi] == kInf) continue;
    auto kids = children.find(v);
    if (kids == children.end()) continue;
    bool all_leaves = true;
    for (EntityId c : kids->second)
      if (!is_leaf(c)) all_leaves = false;
    if (!all_leaves) continue;

    RefSubKsg s;
    s.anchor = v;
    EntityId cur = v;
    std::vector<EntityId> rev;
    while (cur != root) {
      rev.push_back(cur);
      cur = parent[static_cast<std::size_t>(cur)];
    }
    rev.push_back(root);
    s.nodes.assign(rev.rbegin(), rev.rend());
    for (EntityId c : kids->second) s.nodes.push_back(c);
    for (EntityId a : answers)
      if (std::find(s.nodes.begin(), s.nodes.end(), a) != s.nodes.end()) s.label = 1;
    out.push_back(std::move(s));
  }
  return out;
}

CheckResult check_partition_oracle() {
  Timer timer;
  Rng rng(411);
  const int graphs = 200;
  for (int g = 0; g < graphs; ++g) {
    const std::size_t n = 2 + rng.index(29);              // <= 30 nodes
    const std::size_t m = 1 + rng.index(60);              // <= 60 edges
    std::set<std::pair<EntityId, EntityId>> edge_set;
    for (std::size_t e = 0; e < m; ++e)
      edge_set.emplace(static_cast<EntityId>(rng.index(n)), static_cast<EntityId>(rng.index(n)));
    const EntityId root = static_cast<EntityId>(rng.index(n));
    std::vector<EntityId> answers;
    for (std::size_t a = 0; a < rng.index(4); ++a)
      answers.push_back(static_cast<EntityId>(rng.index(n)));

    Ksg ksg;
    for (std::size_t i = 0; i < n; ++i) ksg.nodes.push_back(static_cast<EntityId>(i));
    for (const auto& [u, v] : edge_set) ksg.triples.push_back({u, 0, v});
    std::sort(ksg.triples.begin(), ksg.triples.end());

    const auto got = partition_ksg(ksg, root, answers);
    const auto want = reference_partition(
        n, std::vector<std::pair<EntityId, EntityId>>(edge_set.begin(), edge_set.end()), root,
        answers);

    if (got.size() != want.size())
      return finish("partition-oracle", false,
                    "graph " + std::to_string(g) + ": " + std::to_string(got.size()) + " vs " +
                        std::to_string(want.size()) + " sub-KSGs",
                    timer);
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i].anchor != want[i].anchor || got[i].nodes != want[i].nodes ||
          got[i].label != want[i].label)
        return finish("partition-oracle", false, "graph " + std::to_string(g) + ": sub-KSG " +
                          std::to_string(i) + " differs", timer);
    }
  }
  const bool in_time = timer.seconds() < 10.0;
  return finish("partition-oracle", in_time,
                "200 random graphs agree with the reference simulation in " +
                    std::to_string(timer.seconds()) + "s",
                timer);
}

// ---- criterion 2: hand-encoded figure fixture ------------------------------

CheckResult check_fig1(const std::filesystem::path& fig1_dir) {
  Timer timer;
  const KnowledgeGraph kg = load_triples(fig1_dir / "triples.tsv");
  const auto loaded = load_questions(fig1_dir / "questions.jsonl", kg);
  if (loaded.records.size() != 1)
    return finish("fig1-fixture", false, "expected exactly one question record", timer);
  const QuestionRecord& q = loaded.records.front();

  const Ksg ksg = khop_retrieve(kg, q.topic_entities, 3);
  const auto parts = partition_ksg(ksg, q.topic_entities.front(), q.answers);
  if (parts.size() != 2)
    return finish("fig1-fixture", false, "expected 2 sub-KSGs, got " + std::to_string(parts.size()),
                  timer);

  auto names = [&](const SubKsg& s) {
    std::vector<std::string> out;
    for (EntityId e : s.nodes) out.push_back(kg.entities.name(e));
    return out;
  };
  const SubKsg* education = nullptr;
  const SubKsg* namesake = nullptr;
  for (const SubKsg& s : parts) {
    const auto ns = names(s);
    if (std::find(ns.begin(), ns.end(), "m.0gl5_") != ns.end())
      education = &s;
    else
      namesake = &s;
  }
  if (!education || !namesake)
    return finish("fig1-fixture", false, "could not identify the two sub-KSGs", timer);

  const std::vector<std::string> want_edu = {"m.051cc", "m.0chgzm", "m.0gl5_"};
  const std::vector<std::string> want_name = {"m.051cc", "m.076hxb3", "m.04fx3kb", "m.0v1s8qh"};
  if (names(*education) != want_edu)
    return finish("fig1-fixture", false, "education sub-KSG node set differs", timer);
  if (names(*namesake) != want_name)
    return finish("fig1-fixture", false, "namesake sub-KSG node set differs", timer);
  if (education->label != 1 || namesake->label != 0)
    return finish("fig1-fixture", false, "labels are not {1, 0}", timer);
  return finish("fig1-fixture", true, "education sub-KSG labeled 1, namesake labeled 0", timer);
}

// ---- criterion 3: gradient verification -------------------------------------

namespace {

struct GradCase {
  std::string name;
  double err = 0.0;
};

// fabricated tiny pair for the full-loss check: 3-token question,
// 2-entity sub-KSG graphized to 3 nodes
PairFeatures tiny_pair(Rng& rng, std::size_t word_dim) {
  PairFeatures f;
  f.q_graph.n = 3;
  f.q_graph.edges = {{0, 1}, {1, 2}};
  f.q_nodes = random_tensor({3, word_dim}, rng);
  f.q_seq = f.q_nodes;
  f.s_graph.n = 3;
  f.s_graph.edges = {{0, 1}, {1, 2}};
  f.s_nodes = random_tensor({3, word_dim}, rng);
  f.s_seq = random_tensor({4, word_dim}, rng);
  return f;
}

}  // namespace

CheckResult check_gradients() {
  Timer timer;
  Rng rng(1902);
  std::vector<GradCase> cases;
  auto run = [&](const std::string& name, const num::BuildFn& build, std::vector<Tensor> inputs) {
    const auto rep = num::gradcheck(build, inputs);
    cases.push_back({name + " (" + rep.worst + ")", rep.max_rel_err});
  };

  run("matmul", [](Tape& t, const std::vector<Var>& in) {
    return t.mean_all(t.matmul(in[0], in[1]));
  }, {random_tensor({2, 3}, rng), random_tensor({3, 2}, rng)});
  run("add/sub/mul", [](Tape& t, const std::vector<Var>& in) {
    return t.sum_all(t.mul(t.add(in[0], in[1]), t.sub(in[0], in[1])));
  }, {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
  run("rowvec ops", [](Tape& t, const std::vector<Var>& in) {
    return t.mean_all(t.mul_rowvec(t.add_rowvec(in[0], in[1]), in[1]));
  }, {random_tensor({3, 4}, rng), random_tensor({1, 4}, rng)});
  run("concat/slice/transpose", [](Tape& t, const std::vector<Var>& in) {
    Var c = t.concat_cols({in[0], in[1]});
    Var r = t.concat_rows({t.transpose(c), t.transpose(c)});
    return t.mean_all(t.slice_cols(r, 0, 2));
  }, {random_tensor({2, 2}, rng), random_tensor({2, 3}, rng)});
  run("softmax", [](Tape& t, const std::vector<Var>& in) {
    return t.mean_all(t.mul(t.softmax_rows(in[0]), in[1]));
  }, {random_tensor({3, 5}, rng), random_tensor({3, 5}, rng)});
  run("sigmoid@0", [](Tape& t, const std::vector<Var>& in) {
    return t.sum_all(t.sigmoid(in[0]));
  }, {Tensor({1, 1})});
  run("sigmoid/tanh", [](Tape& t, const std::vector<Var>& in) {
    return t.mean_all(t.mul(t.sigmoid(in[0]), t.tanh(in[0])));
  }, {random_tensor({2, 4}, rng)});
  run("maxpool", [](Tape& t, const std::vector<Var>& in) {
    return t.sum_all(t.add(t.max_over_rows(in[0]), t.transpose(t.max_over_cols(in[0]))));
  }, {random_tensor({3, 3}, rng)});
  run("cosine", [](Tape& t, const std::vector<Var>& in) {
    return t.cosine(in[0], in[1]);
  }, {random_tensor({1, 5}, rng), random_tensor({1, 5}, rng)});
  run("cosine-matrix", [](Tape& t, const std::vector<Var>& in) {
    return t.mean_all(t.cosine_matrix(in[0], in[1]));
  }, {random_tensor({3, 4}, rng), random_tensor({2, 4}, rng)});
  run("weighted-mean", [](Tape& t, const std::vector<Var>& in) {
    return t.mean_all(t.weighted_mean_rows(in[0], t.sigmoid(in[1])));
  }, {random_tensor({3, 4}, rng), random_tensor({2, 3}, rng)});
  run("mse", [](Tape& t, const std::vector<Var>& in) {
    return t.mse(in[0], Tensor::row({0.3, -0.4, 0.9}));
  }, {random_tensor({1, 3}, rng)});
  run("bce", [](Tape& t, const std::vector<Var>& in) {
    return t.bce_with_logits(in[0], Tensor::column({1.0, 0.0, 1.0}));
  }, {random_tensor({3, 1}, rng, -2.0, 2.0)});

  // recurrent cells
  {
    ParameterSet ps;
    Rng prng(77);
    num::GruParams gp{"gru", 6, 6};
    gp.init(ps, prng);
    const Tensor m = random_tensor({1, 6}, rng);
    const Tensor h = random_tensor({1, 6}, rng);
    const auto rep = num::gradcheck_params(
        [&](Tape& t, ParamBinding& pb) {
          Var out = gru_cell(t, pb, gp, t.input(m), t.input(h));
          return t.sum_all(t.mul(out, out));
        },
        ps);
    cases.push_back({"gru-cell (" + rep.worst + ")", rep.max_rel_err});
  }
  {
    ParameterSet ps;
    Rng prng(78);
    num::BiLstmParams bp{"lstm", 5, 4};
    bp.init(ps, prng);
    const Tensor seq = random_tensor({3, 5}, rng);
    const auto rep = num::gradcheck_params(
        [&](Tape& t, ParamBinding& pb) {
          Var out = bilstm(t, pb, bp, t.input(seq));
          return t.mean_all(t.mul(out, out));
        },
        ps);
    cases.push_back({"bilstm (" + rep.worst + ")", rep.max_rel_err});
  }

  // full model loss on a 2-node sub-KSG + 3-token question
  {
    GGEConfig cfg;
    cfg.gnn = {2, 4};
    cfg.mpm = {.context_hidden = 3, .perspectives = 2, .enhance_dim = 0, .agg_hidden = 0};
    cfg.word_dim = 5;
    GGEModel model(cfg);
    ParameterSet ps;
    Rng prng(79);
    model.init(ps, prng);
    const PairFeatures pair = tiny_pair(rng, cfg.word_dim);
    const auto rep = num::gradcheck_params(
        [&](Tape& t, ParamBinding& pb) {
          Var s = model.score(t, pb, pair);
          return t.mse(t.stack_scalars({s}), Tensor::row({1.0}));
        },
        ps);
    cases.push_back({"gge-loss (" + rep.worst + ")", rep.max_rel_err});
  }

  double worst = 0.0;
  std::string worst_name;
  for (const GradCase& c : cases)
    if (c.err > worst) { worst = c.err; worst_name = c.name; }

  // negative control: a corrupted analytic gradient must be flagged
  bool control_detected = false;
  {
    const Tensor a = random_tensor({2, 2}, rng);
    const Tensor b = random_tensor({2, 2}, rng);
    Tape tape;
    Var va = tape.input(a), vb = tape.input(b);
    Var loss = tape.sum_all(tape.matmul(va, vb));
    tape.backward(loss);
    // analytic dA = 1 * B^T entries; corrupt one coordinate by 1%
    const double analytic = va.grad()[0] * 1.01;
    const double eps = 1e-5;
    Tensor ap = a;
    ap[0] = a[0] + eps;
    Tape tp;
    const double fp = tp.sum_all(tp.matmul(tp.constant(ap), tp.constant(b))).value().scalar_value();
    ap[0] = a[0] - eps;
    Tape tm;
    const double fm = tm.sum_all(tm.matmul(tm.constant(ap), tm.constant(b))).value().scalar_value();
    const double numeric = (fp - fm) / (2 * eps);
    control_detected = num::grad_rel_err(analytic, numeric) > 1e-4;
  }

  std::ostringstream detail;
  detail << cases.size() << " checks, max rel err " << worst << " at " << worst_name
         << "; corruption " << (control_detected ? "detected" : "MISSED");
  return finish("gradient-verification", worst <= 1e-4 && control_detected, detail.str(), timer);
}

// ---- criterion 4: overfit oracle --------------------------------------------

CheckResult check_overfit() {
  Timer timer;
  Rng rng(5150);
  GGEConfig cfg;
  cfg.gnn = {2, 16};
  cfg.mpm = {.context_hidden = 8, .perspectives = 4, .enhance_dim = 0, .agg_hidden = 0};
  cfg.word_dim = 12;
  GGEModel model(cfg);
  ParameterSet params;
  Rng init_rng(5151);
  model.init(params, init_rng);

  std::vector<PairFeatures> pairs;
  Tensor targets({1, 20});
  for (std::size_t i = 0; i < 20; ++i) {
    PairFeatures f;
    const std::size_t qn = 3 + rng.index(3);
    const std::size_t sn = 3 + rng.index(4);
    f.q_graph.n = qn;
    for (std::size_t v = 0; v + 1 < qn; ++v) f.q_graph.edges.emplace_back(v, v + 1);
    f.q_nodes = random_tensor({qn, cfg.word_dim}, rng);
    f.q_seq = f.q_nodes;
    f.s_graph.n = sn;
    for (std::size_t v = 0; v + 1 < sn; ++v) f.s_graph.edges.emplace_back(v, v + 1);
    f.s_graph.edges.emplace_back(0, sn - 1);
    f.s_nodes = random_tensor({sn, cfg.word_dim}, rng);
    f.s_seq = random_tensor({sn + 2, cfg.word_dim}, rng);
    pairs.push_back(std::move(f));
    targets(0, i) = i % 2 == 0 ? 1.0 : 0.0;
  }

  num::AdamState adam({.lr = 0.01});
  double mse = 1.0;
  std::size_t epoch = 0;
  for (epoch = 1; epoch <= 200; ++epoch) {
    Tape tape;
    ParamBinding pb(tape, params);
    std::vector<Var> scores;
    scores.reserve(pairs.size());
    for (const PairFeatures& f : pairs) scores.push_back(model.score(tape, pb, f));
    Var loss = tape.mse(tape.stack_scalars(scores), targets);
    mse = loss.value().scalar_value();
    if (mse < 0.01) break;
    tape.backward(loss);
    num::GradMap grads;
    pb.collect_grads(grads);
    adam.step(params, grads);
  }
  std::ostringstream detail;
  detail << "mse " << mse << " after " << epoch << " epochs in " << timer.seconds() << "s";
  return finish("overfit-oracle", mse < 0.01 && epoch <= 200 && timer.seconds() < 60.0,
                detail.str(), timer);
}

// ---- criterion 5: metric oracles ---------------------------------------------

CheckResult check_metric_oracles() {
  Timer timer;
  Rng rng(6001);
  std::vector<RankedLabels> lists(1000);
  for (std::size_t i = 0; i < lists.size(); ++i) {
    lists[i].question_id = "q" + std::to_string(i);
    const std::size_t len = 1 + rng.index(30);
    for (std::size_t j = 0; j < len; ++j)
      lists[i].labels.push_back(rng.uniform() < 0.15 ? 1 : 0);
  }

  // brute force, recomputed from scratch
  const std::vector<std::size_t> ks{1, 2, 3, 5, 8, 13, 21, 34};
  for (std::size_t k : ks) {
    std::size_t denom = 0, numer = 0;
    for (const auto& q : lists) {
      bool any = false, top = false;
      for (std::size_t j = 0; j < q.labels.size(); ++j) {
        if (q.labels[j] == 1) {
          any = true;
          if (j < k) top = true;
        }
      }
      if (any) {
        ++denom;
        if (top) ++numer;
      }
    }
    const double brute = denom ? double(numer) / double(denom) : 0.0;
    if (brute != recall_at_k(lists, k))
      return finish("metric-oracles", false, "recall@" + std::to_string(k) + " mismatch", timer);
  }
  {
    double total = 0.0;
    std::size_t denom = 0;
    for (const auto& q : lists) {
      for (std::size_t j = 0; j < q.labels.size(); ++j)
        if (q.labels[j] == 1) {
          total += 1.0 / double(j + 1);
          ++denom;
          break;
        }
    }
    const double brute = denom ? total / double(denom) : 0.0;
    if (brute != mrr(lists))
      return finish("metric-oracles", false, "mrr mismatch", timer);
  }
  for (std::size_t i = 0; i + 1 < ks.size(); ++i)
    if (recall_at_k(lists, ks[i]) > recall_at_k(lists, ks[i + 1]))
      return finish("metric-oracles", false, "recall@k not monotone", timer);
  // MRR bounds implied by the rank distribution
  const double r1 = recall_at_k(lists, 1);
  const double m = mrr(lists);
  for (std::size_t k : ks) {
    const double rk = recall_at_k(lists, k);
    if (m > rk + (1.0 - rk) / double(k + 1) + 1e-12)
      return finish("metric-oracles", false, "mrr upper bound violated at k=" + std::to_string(k),
                    timer);
  }
  if (m + 1e-12 < r1)
    return finish("metric-oracles", false, "mrr below recall@1", timer);
  return finish("metric-oracles", true, "1000 ranked lists match brute force exactly", timer);
}

// ---- criterion 6: dimension contracts ----------------------------------------

CheckResult check_dimension_contracts() {
  Timer timer;
  Rng rng(7003);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 1 + rng.index(12);
    const std::size_t d_in = 2 + rng.index(6);
    const BiGGNNConfig cfg{1 + rng.index(3), 1 + rng.index(16)};
    BiGGNN gnn("g", d_in, cfg);
    ParameterSet ps;
    Rng prng(trial + 1);
    gnn.init(ps, prng);
    DiGraph graph;
    graph.n = n;
    for (std::size_t e = 0; e < n; ++e) {
      const std::size_t a = rng.index(n), b = rng.index(n);
      if (a != b) graph.edges.emplace_back(a, b);
    }
    std::sort(graph.edges.begin(), graph.edges.end());
    graph.edges.erase(std::unique(graph.edges.begin(), graph.edges.end()), graph.edges.end());
    Tape tape;
    ParamBinding pb(tape, ps);
    const auto enc = gnn.encode(tape, pb, graph, tape.constant(random_tensor({n, d_in}, rng)));
    if (enc.nodes.value().rows() != n || enc.nodes.value().cols() != 2 * cfg.hidden)
      return finish("dimension-contracts", false, "node matrix shape wrong", timer);
    if (enc.pooled.value().rows() != 1 || enc.pooled.value().cols() != 2 * cfg.hidden)
      return finish("dimension-contracts", false, "graph embedding shape wrong", timer);
  }
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t l1 = 1 + rng.index(9);
    const std::size_t l2 = 1 + rng.index(9);
    const std::size_t word = 2 + rng.index(5);
    EBiMPMConfig cfg{.context_hidden = 1 + rng.index(6), .perspectives = 1 + rng.index(8),
                     .enhance_dim = 0, .agg_hidden = 0};
    EBiMPM mpm("m", word, cfg);
    ParameterSet ps;
    Rng prng(trial + 100);
    mpm.init(ps, prng);
    Tape tape;
    ParamBinding pb(tape, ps);
    auto [q_ctx, s_ctx] = mpm.context_encode(tape, pb, tape.constant(random_tensor({l1, word}, rng)),
                                             tape.constant(random_tensor({l2, word}, rng)));
    auto [q_m, s_m] = mpm.multi_perspective_match(tape, pb, q_ctx, s_ctx);
    if (q_m.value().rows() != l1 || q_m.value().cols() != 8 * cfg.perspectives)
      return finish("dimension-contracts", false, "matching output must be l1 x 8l", timer);
    if (s_m.value().rows() != l2 || s_m.value().cols() != 8 * cfg.perspectives)
      return finish("dimension-contracts", false, "matching output must be l2 x 8l", timer);
  }
  return finish("dimension-contracts", true, "BiGGNN and matching shapes hold on random sizes",
                timer);
}

// ---- criteria 7 & 8: end-to-end pipeline --------------------------------------

namespace {

PipelineConfig scratch_config(const std::filesystem::path& synth_config,
                              const std::filesystem::path& run_dir) {
  return PipelineConfig::from_file(synth_config, {"run_dir=" + run_dir.string()});
}

struct E2eOutcome {
  bool ok = false;
  std::string detail;
};

E2eOutcome verify_run(const PipelineConfig& cfg) {
  using nlohmann::json;
  std::ifstream rep(cfg.run_dir / "evaluate" / "report.json");
  if (!rep) return {false, "report.json missing"};
  json report;
  rep >> report;
  const double r1 = report["recall_at"]["1"].get<double>();
  const double r5 = report["recall_at"]["5"].get<double>();
  if (r5 < r1) return {false, "Recall@5 < Recall@1"};

  // answer containment: a question can only score answer recall when its
  // merged graph holds a gold answer, and selected nodes live in the graph
  const KnowledgeGraph kg = load_triples(cfg.run_dir / "ingest" / "kg.tsv");
  std::map<std::string, std::set<std::string>> merged_nodes;
  {
    std::ifstream is(cfg.run_dir / "merge" / "merged_top5.jsonl");
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      auto& s = merged_nodes[j["question_id"].get<std::string>()];
      for (const auto& n : j["nodes"]) s.insert(n.get<std::string>());
    }
  }
  std::map<std::string, std::set<std::string>> gold;
  {
    std::ifstream is(cfg.run_dir / "ingest" / "questions.jsonl");
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      auto& s = gold[j["id"].get<std::string>()];
      for (const auto& a : j["answers"]) s.insert(a.get<std::string>());
    }
  }
  std::map<std::string, std::set<std::string>> selected;
  {
    std::ifstream is(cfg.run_dir / "evaluate" / "predictions.jsonl");
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (j["selected"].get<bool>())
        selected[j["question_id"].get<std::string>()].insert(j["node"].get<std::string>());
    }
  }
  for (const auto& [qid, sel] : selected) {
    const auto& nodes = merged_nodes[qid];
    std::size_t correct = 0;
    for (const std::string& s : sel) {
      if (!nodes.count(s)) return {false, qid + ": selected node outside merged graph"};
      if (gold[qid].count(s)) ++correct;
    }
    if (correct > 0) {
      bool contains = false;
      for (const std::string& a : gold[qid])
        if (nodes.count(a)) contains = true;
      if (!contains) return {false, qid + ": answer recall without answer in merged graph"};
    }
  }
  std::ostringstream os;
  os << "Recall@1 " << r1 << ", Recall@5 " << r5 << ", containment bound holds on "
     << selected.size() << " questions";
  return {true, os.str()};
}

}  // namespace

CheckResult check_end_to_end(const std::filesystem::path& synth_config,
                             const std::filesystem::path& scratch) {
  Timer timer;
  const PipelineConfig cfg = scratch_config(synth_config, scratch / "run1");
  run_pipeline(cfg);
  const E2eOutcome out = verify_run(cfg);
  const bool in_time = timer.seconds() < 600.0;
  return finish("end-to-end", out.ok && in_time,
                out.detail + " (" + std::to_string(timer.seconds()) + "s)", timer);
}

CheckResult check_determinism(const std::filesystem::path& synth_config,
                              const std::filesystem::path& scratch) {
  Timer timer;
  const PipelineConfig cfg1 = scratch_config(synth_config, scratch / "run1");
  if (!std::filesystem::exists(cfg1.run_dir / "evaluate" / "report.json")) run_pipeline(cfg1);
  const PipelineConfig cfg2 = scratch_config(synth_config, scratch / "run2");
  run_pipeline(cfg2);

  for (const char* file : {"evaluate/report.json", "evaluate/report.txt",
                           "evaluate/recall_curve.csv", "rank/scores.tsv"}) {
    const std::string a = read_file(cfg1.run_dir / file);
    const std::string b = read_file(cfg2.run_dir / file);
    if (a.empty() || a != b)
      return finish("determinism", false, std::string(file) + " differs between seeded runs",
                    timer);
  }
  return finish("determinism", true, "two seeded runs produced byte-identical reports", timer);
}

std::vector<CheckResult> run_all(const std::filesystem::path& repo_root,
                                 const std::filesystem::path& scratch, bool quick) {
  std::vector<CheckResult> results;
  results.push_back(check_partition_oracle());
  results.push_back(check_fig1(repo_root / "data" / "fig1"));
  results.push_back(check_gradients());
  results.push_back(check_overfit());
  results.push_back(check_metric_oracles());
  results.push_back(check_dimension_contracts());
  if (!quick) {
    const auto config = repo_root / "configs" / "synth.json";
    results.push_back(check_end_to_end(config, scratch));
    results.push_back(check_determinism(config, scratch));
  }
  return results;
}

}  // namespace ksgrank::selfcheck

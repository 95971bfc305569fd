#include "ksgrank/answer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace ksgrank {

using num::ParamBinding;
using num::ParameterSet;
using num::Rng;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {
MergedGraph merge_subksgs(const std::string& question_id,
                          std::span<const SubKsg> candidates,
                          std::span<const std::size_t> take) {
  MergedGraph m;
  m.question_id = question_id;
  std::set<EntityId> nodes;
  std::set<Triple> edges;
  for (std::size_t idx : take) {
    const SubKsg& s = candidates[idx];
    for (EntityId v : s.nodes) {
      nodes.insert(v);
      auto& prov = m.provenance[v];
      if (std::find(prov.begin(), prov.end(), s.anchor) == prov.end()) prov.push_back(s.anchor);
    }
    edges.insert(s.edges.begin(), s.edges.end());
  }
  m.nodes.assign(nodes.begin(), nodes.end());
  m.edges.assign(edges.begin(), edges.end());
  for (auto& [node, prov] : m.provenance) std::sort(prov.begin(), prov.end());
  return m;
}
}  // namespace

MergedGraph merge_topk(const RankedList& ranked, std::span<const SubKsg> candidates, std::size_t k) {
  if (k < 1) throw std::invalid_argument("merge_topk: k must be >= 1");
  if (ranked.items.empty()) throw std::invalid_argument("merge_topk: empty ranked list");
  std::vector<std::size_t> take;
  for (std::size_t i = 0; i < std::min(k, ranked.items.size()); ++i)
    take.push_back(ranked.items[i].candidate);
  return merge_subksgs(ranked.question_id, candidates, take);
}

MergedGraph merge_all(const std::string& question_id, std::span<const SubKsg> candidates) {
  if (candidates.empty()) throw std::invalid_argument("merge_all: no sub-KSGs");
  std::vector<std::size_t> take(candidates.size());
  for (std::size_t i = 0; i < take.size(); ++i) take[i] = i;
  return merge_subksgs(question_id, candidates, take);
}

AnswerModel::AnswerModel(AnswerModelConfig cfg)
    : cfg_(cfg),
      q_enc_("ans.q", cfg.word_dim, cfg.question_gnn),
      g_enc_("ans.g", cfg.word_dim + 2 * cfg.question_gnn.hidden, cfg.graph_gnn) {}

void AnswerModel::init(ParameterSet& ps, Rng& rng) const {
  q_enc_.init(ps, rng);
  g_enc_.init(ps, rng);
  ps.create_glorot("ans.cls.w", 2 * cfg_.graph_gnn.hidden, 1, rng);
  ps.create("ans.cls.b", {1, 1});
}

Var AnswerModel::node_logits(Tape& tape, ParamBinding& pb, const AnswerExample& ex) const {
  if (ex.graph.n == 0) throw std::invalid_argument("answer model: empty merged graph");
  Var r_q = q_enc_.encode(tape, pb, ex.q_graph, tape.constant(ex.q_nodes)).pooled;
  Var conditioned = tape.concat_cols(
      {tape.constant(ex.node_words), tape.repeat_row(r_q, ex.graph.n)});
  Var nodes = g_enc_.encode(tape, pb, ex.graph, conditioned).nodes;
  return tape.add_rowvec(tape.matmul(nodes, pb["ans.cls.w"]), pb["ans.cls.b"]);
}

std::vector<NodePrediction> AnswerModel::classify(const ParameterSet& params, const AnswerExample& ex,
                                                  double threshold) const {
  Tape tape;
  ParamBinding pb(tape, params);
  Var probs = tape.sigmoid(node_logits(tape, pb, ex));
  const Tensor& p = probs.value();
  std::vector<NodePrediction> out(ex.node_ids.size());
  for (std::size_t i = 0; i < ex.node_ids.size(); ++i)
    out[i] = {ex.node_ids[i], p(i, 0), p(i, 0) >= threshold};
  return out;
}

AnswerExample build_answer_example(const QuestionRecord& rec, const MergedGraph& merged,
                                   const FeatureBuilder& features, const KnowledgeGraph& g,
                                   const NameMap& names, const EmbeddingTable& emb) {
  AnswerExample ex;
  ex.question_id = rec.id;
  auto [qg, q_nodes] = features.question_features(rec);
  ex.q_graph = std::move(qg);
  ex.q_nodes = std::move(q_nodes);

  ex.node_ids = merged.nodes;
  std::unordered_map<EntityId, int> node_index;
  std::vector<std::vector<std::string>> node_tokens;
  node_tokens.reserve(merged.nodes.size());
  for (std::size_t i = 0; i < merged.nodes.size(); ++i) {
    node_index[merged.nodes[i]] = static_cast<int>(i);
    node_tokens.push_back(surface_tokens(names.surface(g.entities.name(merged.nodes[i]))));
  }
  ex.node_words = emb.embed_nodes(node_tokens);

  ex.graph.n = merged.nodes.size();
  std::set<std::pair<int, int>> edges;
  for (const Triple& t : merged.edges)
    edges.emplace(node_index.at(t.subject), node_index.at(t.object));
  ex.graph.edges.assign(edges.begin(), edges.end());

  ex.labels.resize(merged.nodes.size(), 0.0);
  for (EntityId a : rec.answers) {
    auto it = node_index.find(a);
    if (it != node_index.end()) ex.labels[static_cast<std::size_t>(it->second)] = 1.0;
  }
  return ex;
}

namespace {
double dev_hits(const AnswerModel& model, const ParameterSet& params,
                std::span<const AnswerExample> dev, double threshold) {
  if (dev.empty()) return 0.0;
  double hits = 0.0;
  for (const AnswerExample& ex : dev) {
    const auto preds = model.classify(params, ex, threshold);
    const AnswerSelection sel = select_answers(preds, threshold);
    auto it = std::find(ex.node_ids.begin(), ex.node_ids.end(), sel.top1);
    if (it != ex.node_ids.end() &&
        ex.labels[static_cast<std::size_t>(it - ex.node_ids.begin())] == 1.0)
      hits += 1.0;
  }
  return hits / static_cast<double>(dev.size());
}
}  // namespace

AnswerTrainResult train_answerer(const AnswerModel& model, const ParameterSet& init,
                                 std::span<const AnswerExample> train,
                                 std::span<const AnswerExample> dev, const AnswerTrainConfig& cfg) {
  AnswerTrainResult result;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].graph.n == 0) {
      result.warnings.push_back("question " + train[i].question_id + ": empty example skipped");
      continue;
    }
    usable.push_back(i);
  }
  if (usable.empty()) throw std::invalid_argument("train_answerer: no usable examples");

  ParameterSet params = init;
  num::AdamState adam({.lr = cfg.lr});
  Rng rng(Rng::derive(cfg.seed, "train-answerer"));

  result.best_params = params;
  result.best_dev_hits = -1.0;

  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(usable);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < usable.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(usable.size(), start + cfg.batch_size);
      Tape tape;
      ParamBinding pb(tape, params);
      std::vector<Var> losses;
      for (std::size_t i = start; i < end; ++i) {
        const AnswerExample& ex = train[usable[i]];
        Var logits = model.node_logits(tape, pb, ex);
        Tensor labels({ex.labels.size(), 1});
        for (std::size_t j = 0; j < ex.labels.size(); ++j) labels(j, 0) = ex.labels[j];
        losses.push_back(tape.bce_with_logits(logits, std::move(labels)));
      }
      Var loss = tape.mean_all(tape.stack_scalars(losses));
      const double loss_value = loss.value().scalar_value();
      if (!std::isfinite(loss_value))
        throw std::runtime_error("train_answerer: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += loss_value * static_cast<double>(end - start);
      tape.backward(loss);
      num::GradMap grads;
      pb.collect_grads(grads);
      adam.step(params, grads);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_mse = epoch_loss / static_cast<double>(usable.size());
    log.dev_mrr = dev_hits(model, params, dev, cfg.threshold);
    log.wall_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);

    if (log.dev_mrr > result.best_dev_hits) {
      result.best_dev_hits = log.dev_mrr;
      result.best_epoch = epoch;
      result.best_params = params;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

AnswerSelection select_answers(std::span<const NodePrediction> preds, double threshold) {
  if (preds.empty()) throw std::invalid_argument("select_answers: no predictions");
  AnswerSelection sel;
  double best = -1.0;
  for (const NodePrediction& p : preds) {
    if (p.probability >= threshold) sel.selected.insert(p.node);
    if (p.probability > best || (p.probability == best && p.node < sel.top1)) {
      best = p.probability;
      sel.top1 = p.node;
    }
  }
  return sel;
}

}  // namespace ksgrank

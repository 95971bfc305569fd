#include "ksgrank/ranker.hpp"

#include "ksgrank/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>

namespace ksgrank {

using num::ParamBinding;
using num::ParameterSet;
using num::Rng;
using num::Tape;
using num::Tensor;
using num::Var;

Ablation ablation_from_string(const std::string& s) {
  if (s == "g-g-e" || s == "gge") return Ablation::gge;
  if (s == "g-g" || s == "gg") return Ablation::gg;
  if (s == "ebimpm") return Ablation::ebimpm;
  throw std::invalid_argument("unknown ablation mode: " + s);
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::gge: return "g-g-e";
    case Ablation::gg: return "g-g";
    case Ablation::ebimpm: return "ebimpm";
  }
  return "g-g-e";
}

std::pair<DiGraph, Tensor> FeatureBuilder::question_features(const QuestionRecord& rec) const {
  const QuestionGraph qg = build_question_graph(rec);
  return {qg.graph, emb_->embed_token_rows(qg.tokens)};
}

PairFeatures FeatureBuilder::build(const QuestionRecord& rec, const SubKsg& s) const {
  PairFeatures f;
  auto [qg, q_nodes] = question_features(rec);
  f.q_graph = std::move(qg);
  f.q_nodes = q_nodes;
  f.q_seq = std::move(q_nodes);  // question graph nodes are the tokens in order

  const GraphizedSubKsg gs = graphize_subksg(s, *g_, *names_);
  f.s_graph = gs.graph;
  f.s_nodes = emb_->embed_nodes(gs.node_tokens);
  f.s_seq = emb_->embed_token_rows(linearize_subksg(s, *g_, *names_));
  return f;
}

GGEModel::GGEModel(GGEConfig cfg)
    : cfg_(cfg),
      gnn_q_("gnn.q", cfg.word_dim, cfg.gnn),
      gnn_s_(cfg.share_graph_encoders ? "gnn.q" : "gnn.s", cfg.word_dim, cfg.gnn),
      mpm_("mpm", cfg.word_dim, cfg.mpm) {}

void GGEModel::init(ParameterSet& ps, Rng& rng) const {
  if (cfg_.ablation != Ablation::ebimpm) {
    gnn_q_.init(ps, rng);
    if (!cfg_.share_graph_encoders) gnn_s_.init(ps, rng);
  }
  if (cfg_.ablation != Ablation::gg) mpm_.init(ps, rng);
}

Var GGEModel::score(Tape& tape, ParamBinding& pb, const PairFeatures& pair) const {
  std::vector<Var> q_parts, s_parts;
  if (cfg_.ablation != Ablation::ebimpm) {
    q_parts.push_back(gnn_q_.encode(tape, pb, pair.q_graph, tape.constant(pair.q_nodes)).pooled);
    s_parts.push_back(gnn_s_.encode(tape, pb, pair.s_graph, tape.constant(pair.s_nodes)).pooled);
  }
  if (cfg_.ablation != Ablation::gg) {
    auto out = mpm_.match(tape, pb, tape.constant(pair.q_seq), tape.constant(pair.s_seq));
    q_parts.push_back(out.r_q);
    s_parts.push_back(out.r_s);
  }
  Var q = q_parts.size() == 1 ? q_parts[0] : tape.concat_cols(q_parts);
  Var s = s_parts.size() == 1 ? s_parts[0] : tape.concat_cols(s_parts);
  return tape.cosine(q, s);
}

double mse_loss(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.empty()) throw std::invalid_argument("mse_loss: empty batch");
  if (predictions.size() != labels.size())
    throw std::invalid_argument("mse_loss: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = labels[i] - predictions[i];
    s += d * d;
  }
  return s / static_cast<double>(predictions.size());
}

std::vector<std::size_t> sample_negatives_random(std::size_t pool_size, std::size_t n, Rng& rng) {
  return rng.sample_without_replacement(pool_size, n);
}

std::vector<double> tfidf_vector(const std::vector<std::string>& doc,
                                 const std::vector<std::string>& vocab,
                                 const std::vector<double>& idf) {
  std::map<std::string, double> counts;
  for (const std::string& t : doc) counts[t] += 1.0;
  std::vector<double> vec(vocab.size(), 0.0);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    auto it = counts.find(vocab[i]);
    if (it != counts.end()) vec[i] = it->second * idf[i];
  }
  return vec;
}

namespace {
double dense_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

void tfidf_stats(const std::vector<std::vector<std::string>>& corpus,
                 std::vector<std::string>& vocab, std::vector<double>& idf) {
  std::map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    std::set<std::string> uniq(doc.begin(), doc.end());
    for (const std::string& t : uniq) ++df[t];
  }
  const double n = static_cast<double>(corpus.size());
  for (const auto& [term, count] : df) {
    vocab.push_back(term);
    idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
}
}  // namespace

double tfidf_cosine(const std::vector<std::string>& a, const std::vector<std::string>& b,
                    const std::vector<std::vector<std::string>>& corpus) {
  std::vector<std::string> vocab;
  std::vector<double> idf;
  tfidf_stats(corpus, vocab, idf);
  return dense_cosine(tfidf_vector(a, vocab, idf), tfidf_vector(b, vocab, idf));
}

std::size_t pick_tfidf_negative(const std::vector<std::string>& positive_text,
                                std::span<const TfidfCandidate> candidates) {
  std::vector<std::vector<std::string>> corpus;
  corpus.push_back(positive_text);
  for (const TfidfCandidate& c : candidates) corpus.push_back(c.text);
  std::vector<std::string> vocab;
  std::vector<double> idf;
  tfidf_stats(corpus, vocab, idf);
  const std::vector<double> pos_vec = tfidf_vector(positive_text, vocab, idf);

  bool found = false;
  std::size_t best = 0;
  double best_sim = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates[i].answer_free) continue;
    const double sim = dense_cosine(pos_vec, tfidf_vector(candidates[i].text, vocab, idf));
    const bool better =
        !found || sim > best_sim ||
        (sim == best_sim && candidates[i].anchor < candidates[best].anchor);
    if (better) {
      best = i;
      best_sim = sim;
      found = true;
    }
  }
  if (!found) throw std::runtime_error("pick_tfidf_negative: no answer-free candidate");
  return best;
}

RankedList rank_candidates(const GGEModel& model, const ParameterSet& params,
                           const RankQuestionData& question) {
  if (question.candidates.empty())
    throw std::invalid_argument("rank_candidates: no candidates for " + question.id);
  RankedList out;
  out.question_id = question.id;
  out.items.reserve(question.candidates.size());
  for (std::size_t i = 0; i < question.candidates.size(); ++i) {
    Tape tape;
    ParamBinding pb(tape, params);
    const double score = model.score(tape, pb, question.candidates[i].features).value().scalar_value();
    out.items.push_back({i, question.candidates[i].anchor, score, question.candidates[i].label});
  }
  std::sort(out.items.begin(), out.items.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.anchor < b.anchor;
  });
  return out;
}

std::vector<RankedList> rank_all(const GGEModel& model, const ParameterSet& params,
                                 std::span<const RankQuestionData> questions, std::size_t workers) {
  std::vector<RankedList> out(questions.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < questions.size(); ++i)
      out[i] = rank_candidates(model, params, questions[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  auto run = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= questions.size()) break;
      out[i] = rank_candidates(model, params, questions[i]);
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  return out;
}

namespace {
double dev_mrr(const GGEModel& model, const ParameterSet& params,
               const std::vector<RankQuestionData>& questions,
               const std::vector<std::size_t>& dev_questions) {
  std::vector<RankedLabels> ranked;
  ranked.reserve(dev_questions.size());
  for (std::size_t qi : dev_questions) {
    const RankedList list = rank_candidates(model, params, questions[qi]);
    RankedLabels rl;
    rl.question_id = list.question_id;
    for (const auto& item : list.items) rl.labels.push_back(item.label);
    ranked.push_back(std::move(rl));
  }
  return mrr(ranked, MrrMode::first_relevant);
}
}  // namespace

RankTrainResult train_ranker(const GGEModel& model, const ParameterSet& init,
                             const std::vector<RankQuestionData>& questions,
                             const std::vector<TrainPairRef>& pairs,
                             const std::vector<std::size_t>& dev_questions,
                             const RankTrainConfig& cfg) {
  if (pairs.empty()) throw std::invalid_argument("train_ranker: no training pairs");
  if (dev_questions.empty()) throw std::invalid_argument("train_ranker: no dev questions");
  if (cfg.batch_size < 1) throw std::invalid_argument("train_ranker: batch size must be >= 1");

  ParameterSet params = init;
  num::AdamState adam({.lr = cfg.lr});
  Rng rng(Rng::derive(cfg.seed, "train-ranker"));

  RankTrainResult result;
  result.best_params = params;
  result.best_dev_mrr = -1.0;

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);
    double epoch_sq_err = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Tape tape;
      ParamBinding pb(tape, params);
      std::vector<Var> scores;
      Tensor targets({1, end - start});
      for (std::size_t i = start; i < end; ++i) {
        const TrainPairRef& ref = pairs[order[i]];
        scores.push_back(model.score(tape, pb, questions[ref.question].candidates[ref.candidate].features));
        const double y = ref.target;
        targets(0, i - start) = cfg.rescale_targets ? 2.0 * y - 1.0 : y;
      }
      Var loss = tape.mse(tape.stack_scalars(scores), std::move(targets));
      const double loss_value = loss.value().scalar_value();
      if (!std::isfinite(loss_value))
        throw std::runtime_error("train_ranker: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch starting at pair " + std::to_string(start));
      epoch_sq_err += loss_value * static_cast<double>(end - start);
      tape.backward(loss);
      num::GradMap grads;
      pb.collect_grads(grads);
      adam.step(params, grads);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_mse = epoch_sq_err / static_cast<double>(pairs.size());
    log.dev_mrr = dev_mrr(model, params, questions, dev_questions);
    log.wall_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);

    if (log.dev_mrr > result.best_dev_mrr) {
      result.best_dev_mrr = log.dev_mrr;
      result.best_epoch = epoch;
      result.best_params = params;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace ksgrank

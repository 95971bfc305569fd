#include "ksgrank/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace ksgrank {

namespace {
bool has_positive(const RankedLabels& q) {
  return std::find(q.labels.begin(), q.labels.end(), 1) != q.labels.end();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}
}  // namespace

double recall_at_k(std::span<const RankedLabels> questions, std::size_t k) {
  if (k < 1) throw std::invalid_argument("recall_at_k: K must be >= 1");
  std::size_t considered = 0, hit = 0;
  for (const RankedLabels& q : questions) {
    if (!has_positive(q)) continue;
    ++considered;
    const std::size_t top = std::min(k, q.labels.size());
    for (std::size_t i = 0; i < top; ++i)
      if (q.labels[i] == 1) { ++hit; break; }
  }
  return considered == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(considered);
}

double mrr(std::span<const RankedLabels> questions, MrrMode mode) {
  std::size_t considered = 0;
  double sum = 0.0;
  for (const RankedLabels& q : questions) {
    if (!has_positive(q)) continue;
    ++considered;
    if (mode == MrrMode::first_relevant) {
      for (std::size_t i = 0; i < q.labels.size(); ++i)
        if (q.labels[i] == 1) { sum += 1.0 / static_cast<double>(i + 1); break; }
    } else {
      double acc = 0.0;
      std::size_t rel = 0;
      for (std::size_t i = 0; i < q.labels.size(); ++i)
        if (q.labels[i] == 1) { acc += 1.0 / static_cast<double>(i + 1); ++rel; }
      sum += acc / static_cast<double>(rel);
    }
  }
  return considered == 0 ? 0.0 : sum / static_cast<double>(considered);
}

HitsPrf hits_precision_recall_f1(std::span<const AnswerOutcome> outcomes) {
  if (outcomes.empty()) return {};
  double hits = 0, p_sum = 0, r_sum = 0, f_sum = 0;
  for (const AnswerOutcome& o : outcomes) {
    if (o.gold.empty()) throw std::invalid_argument("hits_prf: empty gold set for " + o.question_id);
    if (o.gold.count(o.top1)) hits += 1.0;
    std::size_t correct = 0;
    for (const std::string& pred : o.predicted)
      if (o.gold.count(pred)) ++correct;
    const double p = o.predicted.empty() ? 0.0
                                         : static_cast<double>(correct) / static_cast<double>(o.predicted.size());
    const double r = static_cast<double>(correct) / static_cast<double>(o.gold.size());
    const double f = (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
    p_sum += p;
    r_sum += r;
    f_sum += f;
  }
  const double n = static_cast<double>(outcomes.size());
  return {hits / n, p_sum / n, r_sum / n, f_sum / n};
}

MetricReport build_ranking_report(std::span<const RankedLabels> questions,
                                  std::span<const std::size_t> recall_ks, MrrMode mode) {
  MetricReport r;
  r.question_count = questions.size();
  for (const RankedLabels& q : questions)
    if (!has_positive(q)) ++r.excluded_count;
  const std::size_t included = r.question_count - r.excluded_count;
  r.coverage = r.question_count == 0
                   ? 0.0
                   : static_cast<double>(included) / static_cast<double>(r.question_count);
  r.mrr = mrr(questions, mode);
  for (std::size_t k : recall_ks) {
    const double filtered = recall_at_k(questions, k);
    r.recall_at[k] = filtered;
    r.recall_at_unfiltered[k] =
        r.question_count == 0
            ? 0.0
            : filtered * static_cast<double>(included) / static_cast<double>(r.question_count);
  }
  return r;
}

void write_report_json(const MetricReport& r, const std::filesystem::path& path) {
  nlohmann::json j;
  j["question_count"] = r.question_count;
  j["excluded_no_positive"] = r.excluded_count;
  j["coverage"] = r.coverage;
  j["mrr"] = r.mrr;
  for (const auto& [k, v] : r.recall_at) j["recall_at"][std::to_string(k)] = v;
  for (const auto& [k, v] : r.recall_at_unfiltered) j["recall_at_unfiltered"][std::to_string(k)] = v;
  if (r.has_answer_metrics) {
    j["answer"]["hits"] = r.answer.hits;
    j["answer"]["precision"] = r.answer.precision;
    j["answer"]["recall"] = r.answer.recall;
    j["answer"]["f1"] = r.answer.f1;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("report: cannot open " + path.string());
  os << j.dump(2) << '\n';
}

void write_report_text(const MetricReport& r, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("report: cannot open " + path.string());
  os << "questions:            " << r.question_count << '\n';
  os << "excluded (no positive): " << r.excluded_count << '\n';
  os << "coverage:             " << fmt(r.coverage) << '\n';
  os << "MRR:                  " << fmt(r.mrr) << '\n';
  for (const auto& [k, v] : r.recall_at)
    os << "Recall@" << k << ":             " << fmt(v) << "  (unfiltered " << fmt(r.recall_at_unfiltered.at(k))
       << ")\n";
  if (r.has_answer_metrics) {
    os << "Hits:                 " << fmt(r.answer.hits) << '\n';
    os << "Precision:            " << fmt(r.answer.precision) << '\n';
    os << "Recall:               " << fmt(r.answer.recall) << '\n';
    os << "F1:                   " << fmt(r.answer.f1) << '\n';
  }
}

void write_recall_curve_csv(const MetricReport& r, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("report: cannot open " + path.string());
  os << "k,recall\n";
  for (const auto& [k, v] : r.recall_at) os << k << ',' << fmt(v) << '\n';
}

}  // namespace ksgrank

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace ksgrank {

// Relevance labels of one question's candidates in rank order.
struct RankedLabels {
  std::string question_id;
  std::vector<int> labels;
};

// Fraction of questions whose top-K holds a positive. Questions without
// any positive candidate are excluded from the denominator first.
double recall_at_k(std::span<const RankedLabels> questions, std::size_t k);

enum class MrrMode {
  first_relevant,  // 1 / rank of the first positive
  all_relevant,    // mean of 1 / rank over every positive
};

// Mean reciprocal rank over questions with at least one positive.
double mrr(std::span<const RankedLabels> questions, MrrMode mode = MrrMode::first_relevant);

// Answer-selection outcome for one question.
struct AnswerOutcome {
  std::string question_id;
  std::string top1;
  std::set<std::string> predicted;
  std::set<std::string> gold;
};

struct HitsPrf {
  double hits = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Hits = fraction with top1 in gold; P/R/F1 macro-averaged over questions,
// with empty predicted sets scoring precision 0.
HitsPrf hits_precision_recall_f1(std::span<const AnswerOutcome> outcomes);

struct MetricReport {
  std::size_t question_count = 0;
  std::size_t excluded_count = 0;  // no positive candidate (unfiltered denominators add these back)
  double coverage = 0.0;
  double mrr = 0.0;
  std::map<std::size_t, double> recall_at;             // filtered denominator
  std::map<std::size_t, double> recall_at_unfiltered;  // excluded questions count as misses
  bool has_answer_metrics = false;
  HitsPrf answer;
};

MetricReport build_ranking_report(std::span<const RankedLabels> questions,
                                  std::span<const std::size_t> recall_ks, MrrMode mode);

void write_report_json(const MetricReport& r, const std::filesystem::path& path);
void write_report_text(const MetricReport& r, const std::filesystem::path& path);
void write_recall_curve_csv(const MetricReport& r, const std::filesystem::path& path);

}  // namespace ksgrank

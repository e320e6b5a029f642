#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "punc/corpus_io.hpp"

namespace punc {

/// The three scored classes, in report order.
inline constexpr std::array<PunctLabel, 3> kScoredLabels = {PunctLabel::COMMA, PunctLabel::PERIOD,
                                                            PunctLabel::QUESTION};

struct ClassCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  bool operator==(const ClassCounts&) const = default;
};

/// tp/fp/fn per scored class, only over positions with mask = 1.
struct ConfusionCounts {
  std::array<ClassCounts, 3> per_class{};  // COMMA, PERIOD, QUESTION
  std::uint64_t evaluated = 0;             // masked-in positions
  std::uint64_t correct = 0;               // masked-in positions with pred == gold (O included)

  ClassCounts& operator[](PunctLabel l);
  const ClassCounts& operator[](PunctLabel l) const;
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion_counts(std::span<const PunctLabel> pred, std::span<const PunctLabel> gold,
                                 std::span<const std::uint8_t> mask);

/// Values in percent.
struct Prf {
  double precision = 0, recall = 0, f1 = 0;
};

/// P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R); 0 on a zero denominator.
Prf prf(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn);

/// Pooled over COMMA, PERIOD and QUESTION.
Prf micro_prf(const ConfusionCounts& counts);
double micro_f1(const ConfusionCounts& counts);
double mean_f1(double f1_comma, double f1_period, double f1_question);

struct EvalReport {
  std::array<Prf, 3> per_class{};
  double overall_precision = 0, overall_recall = 0;
  double micro_f1 = 0, mean_f1 = 0;
  double accuracy = 0;  // debug only: O-inclusive token accuracy
  ConfusionCounts counts;
};

EvalReport make_report(const ConfusionCounts& counts);

/// One decimal, half away from zero.
std::string format_percent(double v);

/// Tab-separated table: header row, then one row of per-class P/R/F1 and
/// overall P, R, Micro F1, Mean F1.
std::string render_report(const EvalReport& report);
/// key=value lines, full precision.
std::string render_report_kv(const EvalReport& report);

struct Predictions {
  std::vector<PunctLabel> gold, pred;
  std::vector<std::uint8_t> mask;
};

/// `gold<TAB>pred<TAB>mask_bit` lines.
Predictions parse_prediction_file(std::istream& in);
void write_prediction_file(std::ostream& out, const Predictions& p);

}  // namespace punc

#include "punc/eval.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "punc/tokenizer.hpp"

namespace punc {

namespace {
std::size_t scored_index(PunctLabel l) {
  switch (l) {
    case PunctLabel::COMMA: return 0;
    case PunctLabel::PERIOD: return 1;
    case PunctLabel::QUESTION: return 2;
    default: throw std::invalid_argument("label O has no confusion counts");
  }
}
}  // namespace

ClassCounts& ConfusionCounts::operator[](PunctLabel l) { return per_class[scored_index(l)]; }
const ClassCounts& ConfusionCounts::operator[](PunctLabel l) const { return per_class[scored_index(l)]; }

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    per_class[c].tp += o.per_class[c].tp;
    per_class[c].fp += o.per_class[c].fp;
    per_class[c].fn += o.per_class[c].fn;
  }
  evaluated += o.evaluated;
  correct += o.correct;
  return *this;
}

ConfusionCounts confusion_counts(std::span<const PunctLabel> pred, std::span<const PunctLabel> gold,
                                 std::span<const std::uint8_t> mask) {
  if (pred.size() != gold.size() || pred.size() != mask.size())
    throw LengthMismatch("confusion_counts: " + std::to_string(pred.size()) + " predictions, " +
                         std::to_string(gold.size()) + " gold labels, " + std::to_string(mask.size()) +
                         " mask bits");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    ++c.evaluated;
    if (pred[i] == gold[i]) {
      ++c.correct;
      if (gold[i] != PunctLabel::O) ++c[gold[i]].tp;
      continue;
    }
    if (pred[i] != PunctLabel::O) ++c[pred[i]].fp;
    if (gold[i] != PunctLabel::O) ++c[gold[i]].fn;
  }
  return c;
}

Prf prf(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  Prf r;
  if (tp + fp > 0) r.precision = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) r.recall = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (r.precision + r.recall > 0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

Prf micro_prf(const ConfusionCounts& counts) {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (const auto& c : counts.per_class) {
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
  }
  return prf(tp, fp, fn);
}

double micro_f1(const ConfusionCounts& counts) { return micro_prf(counts).f1; }

double mean_f1(double f1_comma, double f1_period, double f1_question) {
  return (f1_comma + f1_period + f1_question) / 3.0;
}

EvalReport make_report(const ConfusionCounts& counts) {
  EvalReport r;
  r.counts = counts;
  for (std::size_t c = 0; c < 3; ++c)
    r.per_class[c] = prf(counts.per_class[c].tp, counts.per_class[c].fp, counts.per_class[c].fn);
  const Prf pooled = micro_prf(counts);
  r.overall_precision = pooled.precision;
  r.overall_recall = pooled.recall;
  r.micro_f1 = pooled.f1;
  r.mean_f1 = mean_f1(r.per_class[0].f1, r.per_class[1].f1, r.per_class[2].f1);
  r.accuracy = counts.evaluated == 0
                   ? 0.0
                   : 100.0 * static_cast<double>(counts.correct) / static_cast<double>(counts.evaluated);
  return r;
}

std::string format_percent(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10f", v);
  const double tenths = std::round(std::strtod(buf, nullptr) * 10.0);
  std::snprintf(buf, sizeof buf, "%.1f", tenths / 10.0);
  std::string s(buf);
  if (s == "-0.0") s = "0.0";
  return s;
}

std::string render_report(const EvalReport& r) {
  std::ostringstream out;
  out << "COMMA.P\tCOMMA.R\tCOMMA.F1\tPERIOD.P\tPERIOD.R\tPERIOD.F1\tQUESTION.P\tQUESTION.R\tQUESTION.F1"
         "\tOverall.P\tOverall.R\tMicro.F1\tMean.F1\n";
  for (const auto& c : r.per_class)
    out << format_percent(c.precision) << '\t' << format_percent(c.recall) << '\t' << format_percent(c.f1)
        << '\t';
  out << format_percent(r.overall_precision) << '\t' << format_percent(r.overall_recall) << '\t'
      << format_percent(r.micro_f1) << '\t' << format_percent(r.mean_f1) << '\n';
  return out.str();
}

std::string render_report_kv(const EvalReport& r) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t c = 0; c < 3; ++c) {
    const std::string name(label_name(kScoredLabels[c]));
    out << name << ".precision=" << r.per_class[c].precision << '\n'
        << name << ".recall=" << r.per_class[c].recall << '\n'
        << name << ".f1=" << r.per_class[c].f1 << '\n'
        << name << ".tp=" << r.counts.per_class[c].tp << '\n'
        << name << ".fp=" << r.counts.per_class[c].fp << '\n'
        << name << ".fn=" << r.counts.per_class[c].fn << '\n';
  }
  out << "overall.precision=" << r.overall_precision << '\n'
      << "overall.recall=" << r.overall_recall << '\n'
      << "micro_f1=" << r.micro_f1 << '\n'
      << "mean_f1=" << r.mean_f1 << '\n'
      << "evaluated=" << r.counts.evaluated << '\n'
      << "debug.accuracy=" << r.accuracy << '\n';
  return out.str();
}

Predictions parse_prediction_file(std::istream& in) {
  Predictions p;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) throw MalformedLine(line_no, "expected gold<TAB>pred<TAB>mask");
    const auto gold = parse_label(fields[0]);
    const auto pred = parse_label(fields[1]);
    if (!gold || !pred) throw MalformedLine(line_no, "unknown label");
    if (fields[2] != "0" && fields[2] != "1") throw MalformedLine(line_no, "mask bit must be 0 or 1");
    p.gold.push_back(*gold);
    p.pred.push_back(*pred);
    p.mask.push_back(fields[2] == "1" ? 1 : 0);
  }
  return p;
}

void write_prediction_file(std::ostream& out, const Predictions& p) {
  for (std::size_t i = 0; i < p.gold.size(); ++i)
    out << label_name(p.gold[i]) << '\t' << label_name(p.pred[i]) << '\t' << int(p.mask[i]) << '\n';
}

}  // namespace punc

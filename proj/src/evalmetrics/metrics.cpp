#include "cxr/evalmetrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "cxr/error.hpp"

namespace cxr::eval {
namespace {

double ratio(std::int64_t num, std::int64_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::int64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }

std::int64_t ConfusionMatrix::row_sum(int truth) const {
  std::int64_t s = 0;
  for (int p = 0; p < classes; ++p) s += at(truth, p);
  return s;
}

std::int64_t ConfusionMatrix::col_sum(int pred) const {
  std::int64_t s = 0;
  for (int t = 0; t < classes; ++t) s += at(t, pred);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> labels, int classes) {
  if (preds.size() != labels.size()) {
    throw IndexError("confusion_matrix: " + std::to_string(preds.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (classes < 1) throw IndexError("confusion_matrix: class count must be positive");
  ConfusionMatrix cm{classes, std::vector<std::int64_t>(static_cast<std::size_t>(classes) * classes, 0)};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int t = labels[i];
    const int p = preds[i];
    if (t < 0 || t >= classes || p < 0 || p >= classes) {
      throw IndexError("confusion_matrix: sample " + std::to_string(i) + " has a class index outside [0, " +
                       std::to_string(classes) + ")");
    }
    ++cm.counts[static_cast<std::size_t>(t) * classes + p];
  }
  return cm;
}

ClassMetrics per_class_metrics(const ConfusionMatrix& cm, int cls) {
  if (cls < 0 || cls >= cm.classes) throw IndexError("per_class_metrics: class " + std::to_string(cls));
  ClassMetrics m;
  m.tp = cm.at(cls, cls);
  m.fn = cm.row_sum(cls) - m.tp;
  m.fp = cm.col_sum(cls) - m.tp;
  m.tn = cm.total() - m.tp - m.fn - m.fp;
  if (m.tp + m.fn == 0 && m.tp + m.fp == 0) {
    // Absent from both truth and predictions: nothing to measure.
    m.degenerate = true;
    return m;
  }
  m.recall = ratio(m.tp, m.tp + m.fn, m.degenerate);
  m.precision = ratio(m.tp, m.tp + m.fp, m.degenerate);
  m.accuracy = ratio(m.tp + m.tn, m.tp + m.tn + m.fp + m.fn, m.degenerate);
  m.f1 = ratio(2 * m.tp, 2 * m.tp + m.fp + m.fn, m.degenerate);
  return m;
}

AucFraction binary_auc_exact(const BinaryScoreSet& s) {
  if (s.scores.size() != s.labels.size()) throw IndexError("binary_auc: scores and labels differ in length");
  std::int64_t pos = 0;
  for (bool l : s.labels) pos += l ? 1 : 0;
  const std::int64_t neg = static_cast<std::int64_t>(s.labels.size()) - pos;
  if (pos == 0 || neg == 0) throw DegenerateSet("binary_auc needs at least one positive and one negative");
  for (double v : s.scores) {
    if (!std::isfinite(v)) throw ProbabilityError("binary_auc: non-finite score");
  }

  std::vector<std::size_t> order(s.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  // Twice the rank sum of positives; a tie block spanning ranks lo..hi gives
  // each member the midrank (lo + hi) / 2, i.e. lo + hi when doubled.
  std::int64_t twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && s.scores[order[j + 1]] == s.scores[order[i]]) ++j;
    const auto lo = static_cast<std::int64_t>(i + 1);
    const auto hi = static_cast<std::int64_t>(j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (s.labels[order[k]]) twice_rank_sum += lo + hi;
    }
    i = j + 1;
  }
  AucFraction f;
  f.numerator = twice_rank_sum - pos * (pos + 1);
  f.denominator = 2 * pos * neg;
  const std::int64_t g = std::gcd(f.numerator, f.denominator);
  if (g > 1) {
    f.numerator /= g;
    f.denominator /= g;
  }
  return f;
}

double binary_auc(const BinaryScoreSet& s) { return binary_auc_exact(s).value(); }

int argmax(std::span<const double> row) {
  if (row.empty()) throw IndexError("argmax of an empty row");
  int best = 0;
  for (int i = 1; i < static_cast<int>(row.size()); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

EvalReport macro_metrics(const std::vector<std::vector<double>>& probabilities, std::span<const int> labels,
                         const std::vector<std::string>& class_labels) {
  const int classes = static_cast<int>(class_labels.size());
  if (classes < 1) throw IndexError("macro_metrics: no classes");
  if (probabilities.size() != labels.size()) {
    throw IndexError("macro_metrics: " + std::to_string(probabilities.size()) + " probability rows for " +
                     std::to_string(labels.size()) + " labels");
  }
  std::vector<int> preds;
  preds.reserve(labels.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const auto& row = probabilities[i];
    if (static_cast<int>(row.size()) != classes) {
      throw ProbabilityError("row " + std::to_string(i) + " has " + std::to_string(row.size()) + " values for " +
                             std::to_string(classes) + " classes");
    }
    double sum = 0.0;
    for (double v : row) {
      if (!std::isfinite(v)) throw ProbabilityError("row " + std::to_string(i) + " has a non-finite probability");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-4) {
      throw ProbabilityError("row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
    preds.push_back(argmax(row));
  }

  EvalReport r;
  r.class_labels = class_labels;
  r.samples = static_cast<std::int64_t>(labels.size());
  r.confusion = confusion_matrix(preds, labels, classes);
  std::int64_t correct = 0;
  for (int c = 0; c < classes; ++c) correct += r.confusion.at(c, c);
  r.top1_accuracy = r.samples > 0 ? static_cast<double>(correct) / static_cast<double>(r.samples) : 0.0;

  for (int c = 0; c < classes; ++c) {
    ClassReport cr;
    cr.label = class_labels[c];
    cr.support = r.confusion.row_sum(c);
    cr.metrics = per_class_metrics(r.confusion, c);
    BinaryScoreSet set;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      set.scores.push_back(probabilities[i][c]);
      set.labels.push_back(labels[i] == c);
    }
    if (cr.support == 0 || cr.support == r.samples) {
      cr.auc_degenerate = true;
    } else {
      cr.auc = binary_auc(set);
    }
    r.macro.accuracy += cr.metrics.accuracy;
    r.macro.recall += cr.metrics.recall;
    r.macro.precision += cr.metrics.precision;
    r.macro.auc += cr.auc;
    r.macro.f1 += cr.metrics.f1;
    r.per_class.push_back(std::move(cr));
  }
  r.macro.accuracy /= classes;
  r.macro.recall /= classes;
  r.macro.precision /= classes;
  r.macro.auc /= classes;
  r.macro.f1 /= classes;
  return r;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["samples"] = r.samples;
  j["class_labels"] = r.class_labels;
  j["top1_accuracy"] = r.top1_accuracy;
  j["macro"] = ordered_json{{"accuracy", r.macro.accuracy},
                            {"recall", r.macro.recall},
                            {"precision", r.macro.precision},
                            {"auc", r.macro.auc},
                            {"f1", r.macro.f1}};
  j["per_class"] = ordered_json::array();
  for (const auto& c : r.per_class) {
    ordered_json e;
    e["label"] = c.label;
    e["support"] = c.support;
    e["accuracy"] = c.metrics.accuracy;
    e["recall"] = c.metrics.recall;
    e["precision"] = c.metrics.precision;
    e["auc"] = c.auc;
    e["f1"] = c.metrics.f1;
    e["tp"] = c.metrics.tp;
    e["fp"] = c.metrics.fp;
    e["fn"] = c.metrics.fn;
    e["tn"] = c.metrics.tn;
    e["degenerate"] = c.metrics.degenerate;
    e["auc_degenerate"] = c.auc_degenerate;
    j["per_class"].push_back(std::move(e));
  }
  j["confusion_matrix"] = ordered_json::array();
  for (int t = 0; t < r.confusion.classes; ++t) {
    ordered_json row = ordered_json::array();
    for (int p = 0; p < r.confusion.classes; ++p) row.push_back(r.confusion.at(t, p));
    j["confusion_matrix"].push_back(std::move(row));
  }
  return j;
}

std::string format_table(const EvalReport& r) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %8s %8s %9s %8s %8s\n", "Class", "Acc.", "Recall", "Precision", "Auc",
                "F1 score");
  out << line;
  for (const auto& c : r.per_class) {
    std::snprintf(line, sizeof line, "%-12s %8.4f %8.4f %9.4f %8.4f %8.4f%s\n", c.label.c_str(), c.metrics.accuracy,
                  c.metrics.recall, c.metrics.precision, c.auc, c.metrics.f1,
                  (c.metrics.degenerate || c.auc_degenerate) ? "  *" : "");
    out << line;
  }
  std::snprintf(line, sizeof line, "%-12s %8.4f %8.4f %9.4f %8.4f %8.4f\n", "macro", r.macro.accuracy, r.macro.recall,
                r.macro.precision, r.macro.auc, r.macro.f1);
  out << line;
  std::snprintf(line, sizeof line, "top-1 accuracy %.4f over %lld samples\n", r.top1_accuracy,
                static_cast<long long>(r.samples));
  out << line;
  bool flagged = false;
  for (const auto& c : r.per_class) flagged = flagged || c.metrics.degenerate || c.auc_degenerate;
  if (flagged) out << "* some metric had an empty denominator and is reported as 0\n";

  out << "\nconfusion (rows = true, columns = predicted)\n";
  std::snprintf(line, sizeof line, "%-12s", "");
  out << line;
  for (const auto& l : r.class_labels) {
    std::snprintf(line, sizeof line, " %10s", l.c_str());
    out << line;
  }
  out << '\n';
  for (int t = 0; t < r.confusion.classes; ++t) {
    std::snprintf(line, sizeof line, "%-12s", r.class_labels[t].c_str());
    out << line;
    for (int p = 0; p < r.confusion.classes; ++p) {
      std::snprintf(line, sizeof line, " %10lld", static_cast<long long>(r.confusion.at(t, p)));
      out << line;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace cxr::eval

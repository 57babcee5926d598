#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace cxr::eval {

/// counts(t, p): samples of true class t predicted as p.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::int64_t> counts;  // classes x classes, row-major

  std::int64_t at(int truth, int pred) const { return counts[static_cast<std::size_t>(truth) * classes + pred]; }
  std::int64_t total() const;
  std::int64_t row_sum(int truth) const;
  std::int64_t col_sum(int pred) const;
};

/// Throws IndexError on length mismatch or an index outside [0, classes).
ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> labels, int classes = 4);

/// One-vs-rest reduction of a confusion matrix for one class.
struct ClassMetrics {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
  double recall = 0.0;
  double precision = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some metric had a zero denominator and was set to 0
};

ClassMetrics per_class_metrics(const ConfusionMatrix& cm, int cls);

struct BinaryScoreSet {
  std::vector<double> scores;
  std::vector<bool> labels;  // true = positive
};

/// AUC as an exact fraction: numerator / denominator.
struct AucFraction {
  std::int64_t numerator = 0;
  std::int64_t denominator = 1;
  double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
};

/// Rank formula with midranks for ties, (sum of positive ranks - P(P+1)/2) / (P N),
/// kept in integers by doubling the ranks. Throws DegenerateSet without both
/// classes and ProbabilityError for non-finite scores.
AucFraction binary_auc_exact(const BinaryScoreSet& s);
double binary_auc(const BinaryScoreSet& s);

/// Index of the largest value, ties to the lowest index.
int argmax(std::span<const double> row);

struct ClassReport {
  std::string label;
  std::int64_t support = 0;  // true samples of this class
  ClassMetrics metrics;
  double auc = 0.0;
  bool auc_degenerate = false;  // no positives or no negatives; auc reported as 0
};

struct MacroAverages {
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::vector<std::string> class_labels;
  std::int64_t samples = 0;
  ConfusionMatrix confusion;
  std::vector<ClassReport> per_class;
  MacroAverages macro;           // unweighted means over classes
  double top1_accuracy = 0.0;    // fraction of samples whose argmax equals the label
};

/// Argmax predictions, one-vs-rest metrics and AUC per class, macro means.
/// Rows must have one value per label and sum to 1 within 1e-4
/// (ProbabilityError); labels index class_labels (IndexError).
EvalReport macro_metrics(const std::vector<std::vector<double>>& probabilities, std::span<const int> labels,
                         const std::vector<std::string>& class_labels);

/// Fixed key order: samples, class_labels, top1_accuracy, macro, per_class,
/// confusion_matrix. Metric keys follow the table columns.
nlohmann::ordered_json to_json(const EvalReport& r);

/// Text table with columns Acc. / Recall / Precision / Auc / F1 score, one row
/// per class plus the macro row, then the confusion matrix.
std::string format_table(const EvalReport& r);

}  // namespace cxr::eval

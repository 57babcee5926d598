#include <gtest/gtest.h>

#include <cmath>

#include "cxr/error.hpp"
#include "cxr/evalmetrics/metrics.hpp"
#include "suites.hpp"

using namespace cxr;
using namespace cxr::eval;

namespace {

const std::vector<std::string> kLabels{"normal", "bacteria", "virus", "mycoplasma"};

BinaryScoreSet set(std::vector<double> scores, std::vector<bool> labels) { return {std::move(scores), std::move(labels)}; }

}  // namespace

TEST(Confusion, Basic) {
  const std::vector<int> labels{0, 1, 2, 3};
  const auto perfect = confusion_matrix(labels, labels);
  for (int t = 0; t < 4; ++t)
    for (int p = 0; p < 4; ++p) EXPECT_EQ(perfect.at(t, p), t == p ? 1 : 0);

  const auto one = confusion_matrix(std::vector<int>{2}, std::vector<int>{0});
  EXPECT_EQ(one.at(0, 2), 1);
  EXPECT_EQ(one.total(), 1);

  const auto cm = confusion_matrix(std::vector<int>{0, 1, 1, 3}, labels);
  EXPECT_EQ(cm.at(0, 0), 1);
  EXPECT_EQ(cm.at(1, 1), 1);
  EXPECT_EQ(cm.at(2, 2), 0);
  EXPECT_EQ(cm.at(3, 3), 1);
  EXPECT_EQ(cm.at(2, 1), 1);
  EXPECT_EQ(cm.total(), 4);
  EXPECT_EQ(cm.col_sum(1), 2);
  EXPECT_EQ(cm.row_sum(2), 1);
}

TEST(Confusion, Errors) {
  EXPECT_THROW(confusion_matrix(std::vector<int>{0, 1}, std::vector<int>{0}), IndexError);
  EXPECT_THROW(confusion_matrix(std::vector<int>{4}, std::vector<int>{0}), IndexError);
  EXPECT_THROW(confusion_matrix(std::vector<int>{0}, std::vector<int>{-1}), IndexError);
}

TEST(PerClass, HandEvaluated) {
  // class 0: TP 2, FN 1 (true 0 -> 1), FP 1 (true 1 -> 0)
  const auto cm = confusion_matrix(std::vector<int>{0, 0, 1, 0}, std::vector<int>{0, 0, 0, 1});
  const auto m = per_class_metrics(cm, 0);
  EXPECT_EQ(m.tp, 2);
  EXPECT_EQ(m.fp, 1);
  EXPECT_EQ(m.fn, 1);
  EXPECT_EQ(m.tn, 0);
  EXPECT_DOUBLE_EQ(m.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_FALSE(m.degenerate);
}

TEST(PerClass, DiagonalIsPerfect) {
  const auto cm = confusion_matrix(std::vector<int>{0, 1, 2, 3, 3}, std::vector<int>{0, 1, 2, 3, 3});
  for (int c = 0; c < 4; ++c) {
    const auto m = per_class_metrics(cm, c);
    EXPECT_EQ(m.recall, 1.0);
    EXPECT_EQ(m.precision, 1.0);
    EXPECT_EQ(m.f1, 1.0);
    EXPECT_EQ(m.accuracy, 1.0);
  }
}

TEST(PerClass, AbsentClassIsDegenerate) {
  const auto cm = confusion_matrix(std::vector<int>{0, 1}, std::vector<int>{0, 1});
  const auto m = per_class_metrics(cm, 3);
  EXPECT_TRUE(m.degenerate);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_TRUE(std::isfinite(m.accuracy));
}

TEST(PerClass, F1DualForm) {
  const auto o = suites::f1_dual_form(300, 301);
  EXPECT_TRUE(o.pass) << o.detail;
}

TEST(Auc, Examples) {
  EXPECT_EQ(binary_auc(set({0.9, 0.8, 0.3, 0.2}, {true, true, false, false})), 1.0);
  EXPECT_EQ(binary_auc(set({0.5, 0.5}, {true, false})), 0.5);
  EXPECT_EQ(binary_auc(set({0.8, 0.4, 0.6, 0.2}, {true, false, false, true})), 0.5);
  EXPECT_EQ(binary_auc(set({0.1, 0.9}, {true, false})), 0.0);
}

TEST(Auc, ExactFraction) {
  const auto f = binary_auc_exact(set({0.1, 0.4, 0.4, 0.8}, {false, true, false, true}));
  // pairs: (0.4 vs 0.1) 1, (0.4 vs 0.4) half, (0.8 vs both) 2 -> 3.5 / 4
  EXPECT_EQ(static_cast<double>(f.numerator) / static_cast<double>(f.denominator), 3.5 / 4.0);
  EXPECT_DOUBLE_EQ(f.value(), 0.875);
}

TEST(Auc, Errors) {
  EXPECT_THROW(binary_auc(set({0.1, 0.2}, {true, true})), DegenerateSet);
  EXPECT_THROW(binary_auc(set({}, {})), DegenerateSet);
  EXPECT_THROW(binary_auc(set({NAN, 0.2}, {true, false})), ProbabilityError);
  EXPECT_THROW(binary_auc(set({0.1}, {true, false})), IndexError);
}

TEST(Auc, MatchesPairCounting) {
  const auto o = suites::auc_pairwise(1000, 302);
  EXPECT_TRUE(o.pass) << o.detail;
}

TEST(Auc, MonotoneInvariance) {
  const auto o = suites::auc_monotone_invariance(200, 303);
  EXPECT_TRUE(o.pass) << o.detail;
}

TEST(Argmax, TiesToLowest) {
  EXPECT_EQ(argmax(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 0);
  EXPECT_EQ(argmax(std::vector<double>{0.1, 0.4, 0.1, 0.4}), 1);
  EXPECT_THROW(argmax(std::vector<double>{}), IndexError);
}

TEST(Macro, OneHotIsPerfect) {
  std::vector<std::vector<double>> p;
  std::vector<int> labels;
  for (int i = 0; i < 12; ++i) {
    std::vector<double> row(4, 0.0);
    row[i % 4] = 1.0;
    p.push_back(row);
    labels.push_back(i % 4);
  }
  const auto r = macro_metrics(p, labels, kLabels);
  EXPECT_EQ(r.macro.accuracy, 1.0);
  EXPECT_EQ(r.macro.recall, 1.0);
  EXPECT_EQ(r.macro.precision, 1.0);
  EXPECT_EQ(r.macro.auc, 1.0);
  EXPECT_EQ(r.macro.f1, 1.0);
  EXPECT_EQ(r.top1_accuracy, 1.0);
}

TEST(Macro, UniformProbabilities) {
  const std::vector<std::vector<double>> p(8, std::vector<double>(4, 0.25));
  const std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3};
  const auto r = macro_metrics(p, labels, kLabels);
  EXPECT_EQ(r.confusion.col_sum(0), 8);
  for (const auto& c : r.per_class) EXPECT_EQ(c.auc, 0.5);
}

// Eight samples, two per class. Hand computation:
//   predictions (argmax, ties low): 0 1 1 2 2 3 3 0  vs labels 0 0 1 1 2 2 3 3
//   every class: TP 1, FN 1, FP 1, TN 5 -> recall 1/2, precision 1/2, F1 1/2, accuracy 6/8
//   AUC, counting positive/negative pairs (ties half) out of 2 x 6:
//     normal     0.7 beats 6; 0.2 beats the four 0.1s                      -> 10/12
//     bacteria   0.6 beats 6; 0.3 beats five 0.1s, loses to 0.5            -> 11/12
//     virus      0.7 beats 6; 0.2 beats three 0.1s, ties two 0.2s          -> 10/12
//     mycoplasma 0.7 beats 6; 0.4 beats 0.1 x4 and 0.2, ties 0.4           -> 11.5/12
//   macro AUC = 42.5 / 48; top-1 accuracy 4/8
TEST(Macro, EightSampleFixture) {
  const std::vector<std::vector<double>> p{
      {0.7, 0.1, 0.1, 0.1}, {0.2, 0.5, 0.2, 0.1}, {0.1, 0.6, 0.2, 0.1}, {0.1, 0.3, 0.4, 0.2},
      {0.1, 0.1, 0.7, 0.1}, {0.3, 0.1, 0.2, 0.4}, {0.1, 0.1, 0.1, 0.7}, {0.4, 0.1, 0.1, 0.4},
  };
  const std::vector<int> labels{0, 0, 1, 1, 2, 2, 3, 3};
  const auto r = macro_metrics(p, labels, kLabels);
  EXPECT_EQ(r.samples, 8);
  EXPECT_DOUBLE_EQ(r.top1_accuracy, 0.5);
  const double auc[] = {10.0 / 12, 11.0 / 12, 10.0 / 12, 11.5 / 12};
  for (int c = 0; c < 4; ++c) {
    const auto& pc = r.per_class[c];
    EXPECT_EQ(pc.label, kLabels[c]);
    EXPECT_EQ(pc.support, 2);
    EXPECT_EQ(pc.metrics.tp, 1);
    EXPECT_EQ(pc.metrics.fn, 1);
    EXPECT_EQ(pc.metrics.fp, 1);
    EXPECT_EQ(pc.metrics.tn, 5);
    EXPECT_DOUBLE_EQ(pc.metrics.recall, 0.5);
    EXPECT_DOUBLE_EQ(pc.metrics.precision, 0.5);
    EXPECT_DOUBLE_EQ(pc.metrics.f1, 0.5);
    EXPECT_DOUBLE_EQ(pc.metrics.accuracy, 0.75);
    EXPECT_NEAR(pc.auc, auc[c], 1e-12) << kLabels[c];
  }
  EXPECT_EQ(r.confusion.at(3, 0), 1);
  EXPECT_NEAR(r.macro.auc, 42.5 / 48, 1e-12);
  EXPECT_DOUBLE_EQ(r.macro.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.macro.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.macro.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.macro.f1, 0.5);
}

TEST(Macro, MeanOfPerClass) {
  const std::vector<std::vector<double>> p{
      {0.4, 0.3, 0.2, 0.1}, {0.1, 0.2, 0.3, 0.4}, {0.3, 0.3, 0.2, 0.2}, {0.05, 0.8, 0.1, 0.05}, {0.1, 0.1, 0.1, 0.7},
  };
  const std::vector<int> labels{0, 2, 1, 1, 3};
  const auto r = macro_metrics(p, labels, kLabels);
  double recall = 0, f1 = 0, acc = 0;
  for (const auto& c : r.per_class) {
    recall += c.metrics.recall / 4;
    f1 += c.metrics.f1 / 4;
    acc += c.metrics.accuracy / 4;
  }
  EXPECT_DOUBLE_EQ(r.macro.recall, recall);
  EXPECT_DOUBLE_EQ(r.macro.f1, f1);
  EXPECT_DOUBLE_EQ(r.macro.accuracy, acc);
}

TEST(Macro, AbsentClassAucIsDegenerate) {
  const std::vector<std::vector<double>> p{{0.6, 0.4, 0, 0}, {0.3, 0.7, 0, 0}};
  const auto r = macro_metrics(p, std::vector<int>{0, 1}, kLabels);
  EXPECT_TRUE(r.per_class[2].auc_degenerate);
  EXPECT_EQ(r.per_class[2].auc, 0.0);
  EXPECT_FALSE(r.per_class[0].auc_degenerate);
}

TEST(Macro, RejectsBadRows) {
  EXPECT_THROW(macro_metrics({{0.5, 0.4, 0.0, 0.0}}, std::vector<int>{0}, kLabels), ProbabilityError);
  EXPECT_THROW(macro_metrics({{0.5, 0.5}}, std::vector<int>{0}, kLabels), ProbabilityError);
  EXPECT_THROW(macro_metrics({{1, 0, 0, 0}}, std::vector<int>{4}, kLabels), IndexError);
  EXPECT_THROW(macro_metrics({{1, 0, 0, 0}}, std::vector<int>{0, 1}, kLabels), IndexError);
}

TEST(Report, JsonKeyOrderAndTable) {
  const std::vector<std::vector<double>> p{{0.7, 0.1, 0.1, 0.1}, {0.1, 0.7, 0.1, 0.1}};
  const auto r = macro_metrics(p, std::vector<int>{0, 1}, kLabels);
  const auto j = to_json(r);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"samples", "class_labels", "top1_accuracy", "macro", "per_class",
                                            "confusion_matrix"}));
  std::vector<std::string> macro_keys;
  for (const auto& [k, v] : j["macro"].items()) macro_keys.push_back(k);
  EXPECT_EQ(macro_keys, (std::vector<std::string>{"accuracy", "recall", "precision", "auc", "f1"}));
  const auto table = format_table(r);
  for (const char* col : {"Acc.", "Recall", "Precision", "Auc", "F1 score", "mycoplasma"}) {
    EXPECT_NE(table.find(col), std::string::npos) << col;
  }
}

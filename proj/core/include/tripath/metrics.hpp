#pragma once

#include <cstddef>
#include <span>

namespace tripath {

/// Area under the ROC curve via the Mann-Whitney rank statistic, with tied
/// scores receiving average ranks (a positive/negative tie counts 1/2).
/// Throws LengthMismatch or SingleClass.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct ThresholdMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Predicts class 1 when score >= threshold. Undefined ratios report 0.
ThresholdMetrics threshold_metrics(std::span<const double> scores, std::span<const int> labels,
                                   double threshold = 0.5);

}  // namespace tripath

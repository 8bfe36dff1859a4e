#pragma once

#include "divfuse/common.hpp"

#include <vector>

namespace divfuse {

struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long tn = 0;
    long fn = 0;
    long total() const { return tp + fp + tn + fn; }
};

ConfusionCounts confusion(const std::vector<int>& preds, const std::vector<int>& labels);

// Unweighted mean of the per-class F1 scores. A class with no instances and no
// predictions (zero F1 denominator) is dropped from the average; in the binary
// case that leaves the other class's F1, which is then necessarily 1.
double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels);

struct EvalResult {
    double macro_f1 = 0.0;
    ConfusionCounts counts;
};

// Threshold sigmoid(logit) >= threshold => predict 1.
EvalResult evaluate_scores(const std::vector<double>& logits, const std::vector<int>& labels,
                           double threshold = 0.5);

}  // namespace divfuse

#include "divfuse/metrics.hpp"

namespace divfuse {

ConfusionCounts confusion(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size()) {
        throw ShapeError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                         std::to_string(labels.size()) + " labels");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool p = preds[i] != 0;
        const bool y = labels[i] != 0;
        if (p && y) ++c.tp;
        else if (p && !y) ++c.fp;
        else if (!p && y) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.empty()) throw ShapeError("macro_f1: empty input");
    const ConfusionCounts c = confusion(preds, labels);

    // F1 = 2tp / (2tp + fp + fn) per class; the negative class mirrors the counts.
    double sum = 0.0;
    int classes = 0;
    const long denom_pos = 2 * c.tp + c.fp + c.fn;
    if (denom_pos > 0) {
        sum += 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom_pos);
        ++classes;
    }
    const long denom_neg = 2 * c.tn + c.fn + c.fp;
    if (denom_neg > 0) {
        sum += 2.0 * static_cast<double>(c.tn) / static_cast<double>(denom_neg);
        ++classes;
    }
    return classes > 0 ? sum / classes : 0.0;
}

EvalResult evaluate_scores(const std::vector<double>& logits, const std::vector<int>& labels,
                           double threshold) {
    if (logits.size() != labels.size()) {
        throw ShapeError("evaluate_scores: size mismatch");
    }
    std::vector<int> preds(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        preds[i] = sigmoid(logits[i]) >= threshold ? 1 : 0;
    }
    EvalResult r;
    r.counts = confusion(preds, labels);
    r.macro_f1 = macro_f1(preds, labels);
    return r;
}

}  // namespace divfuse

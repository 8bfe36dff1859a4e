#pragma once

#include "divfuse/data_model.hpp"
#include "divfuse/metrics.hpp"
#include "divfuse/model.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace divfuse {

enum class PosWeightMode { auto_from_labels, fixed };

struct TrainConfig {
    int epochs = 30;
    int batch_size = 16;
    double base_lr = 5e-4;      // lr group 0: everything in this setup
    double backbone_lr = 5e-5;  // lr group 1: slot for a fine-tuned text backbone (unused here)
    double min_lr = 0.0;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0;
    int patience = 8;
    std::uint64_t seed = 0;
    PosWeightMode pos_weight_mode = PosWeightMode::auto_from_labels;
    double pos_weight = 1.0;  // used when mode == fixed
    double threshold = 0.5;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double lr = 0.0;
    double train_loss = 0.0;  // mean over the epoch's samples
    double val_macro_f1 = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;  // 1-based; first epoch attaining the max val F1
    double best_val_f1 = 0.0;
    bool stopped_early = false;

    // Full-precision table plus '#'-prefixed summary footer; identical runs
    // produce identical text.
    std::string csv() const;
};

// Stable elementwise form: (1-y)z + (1 + (w-1)y) * softplus(-z).
double bce_with_logits(double logit, double label, double pos_weight = 1.0);

// N_negative / N_positive over the given labels; ConfigError if single-class.
double auto_pos_weight(const std::vector<int>& labels);

// lr(e) = min_lr + (base_lr - min_lr)/2 * (1 + cos(pi*e/total)), e 0-based.
double cosine_lr(int epoch, int total_epochs, double base_lr, double min_lr);

// Scales all gradients so the global L2 norm is at most max_norm; returns the
// pre-clip norm.
double clip_global_norm(GradStore& grads, double max_norm);

struct AdamWState {
    GradStore m, v;
    long step = 0;
};
AdamWState make_adamw_state(const ParamStore& params);

// One Adam step with decoupled weight decay; group_lr[g] is the learning rate
// applied to parameter group g this step.
void adamw_step(ParamStore& params, const GradStore& grads, AdamWState& state,
                const std::vector<double>& group_lr, double weight_decay, double beta1,
                double beta2, double eps);

// Strict-improvement early stopping. update() returns true once the metric
// has failed to improve for `patience` consecutive epochs.
class EarlyStopper {
  public:
    explicit EarlyStopper(int patience) : patience_(patience) {}
    bool update(double metric);
    bool improved_last() const { return improved_last_; }
    double best() const { return best_; }
    int best_epoch() const { return best_epoch_; }

  private:
    int patience_;
    double best_ = -std::numeric_limits<double>::infinity();
    int best_epoch_ = 0;
    int stale_ = 0;
    int epoch_ = 0;
    bool improved_last_ = false;
};

EvalResult evaluate_split(const ModelParams& params, const Dataset& data, Split split,
                          double threshold = 0.5);

struct TrainResult {
    ModelParams params;  // restored to the best-val-F1 epoch
    TrainHistory history;
};

TrainResult train(const Dataset& data, const ModelConfig& mcfg, const TrainConfig& tcfg);

}  // namespace divfuse

#include "divfuse/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace divfuse {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(base_lr > 0.0) || !(backbone_lr > 0.0)) throw ConfigError("learning rates must be > 0");
    if (min_lr < 0.0 || min_lr > base_lr) throw ConfigError("min_lr must be in [0, base_lr]");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("betas must be in [0,1)");
    }
    if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
    if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (pos_weight_mode == PosWeightMode::fixed && !(pos_weight > 0.0)) {
        throw ConfigError("fixed pos_weight must be > 0");
    }
}

std::string TrainHistory::csv() const {
    std::ostringstream out;
    out << "epoch,lr,train_loss,val_macro_f1\n";
    for (const EpochRecord& e : epochs) {
        out << e.epoch << ',' << format_double(e.lr) << ',' << format_double(e.train_loss) << ','
            << format_double(e.val_macro_f1) << '\n';
    }
    out << "#best_epoch," << best_epoch << '\n';
    out << "#best_val_f1," << format_double(best_val_f1) << '\n';
    out << "#stopped_early," << (stopped_early ? 1 : 0) << '\n';
    return out.str();
}

double bce_with_logits(double logit, double label, double pos_weight) {
    if (!(pos_weight > 0.0)) throw ConfigError("pos_weight must be > 0");
    return (1.0 - label) * logit + (1.0 + (pos_weight - 1.0) * label) * softplus(-logit);
}

double auto_pos_weight(const std::vector<int>& labels) {
    long pos = 0, neg = 0;
    for (int y : labels) (y == 1 ? pos : neg) += 1;
    if (pos == 0 || neg == 0) {
        throw ConfigError("class weighting needs both classes in the training labels (got " +
                          std::to_string(pos) + " positive, " + std::to_string(neg) +
                          " negative)");
    }
    return static_cast<double>(neg) / static_cast<double>(pos);
}

double cosine_lr(int epoch, int total_epochs, double base_lr, double min_lr) {
    if (total_epochs < 1) throw ConfigError("cosine_lr: total_epochs must be >= 1");
    if (epoch < 0 || epoch > total_epochs) throw ConfigError("cosine_lr: epoch out of [0, total]");
    if (epoch == 0) return base_lr;  // exact endpoints, no trig round-off
    if (epoch == total_epochs) return min_lr;
    const double pi = std::acos(-1.0);
    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + std::cos(pi * epoch / total_epochs));
}

double clip_global_norm(GradStore& grads, double max_norm) {
    double sq = 0.0;
    for (const Matrix& g : grads) sq += g.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (Matrix& g : grads) g *= scale;
    }
    return norm;
}

AdamWState make_adamw_state(const ParamStore& params) {
    AdamWState s;
    s.m = zero_grads_like(params);
    s.v = zero_grads_like(params);
    return s;
}

void adamw_step(ParamStore& params, const GradStore& grads, AdamWState& state,
                const std::vector<double>& group_lr, double weight_decay, double beta1,
                double beta2, double eps) {
    if (grads.size() != params.values.size() || state.m.size() != params.values.size()) {
        throw ShapeError("adamw_step: gradient/state size mismatch");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.values.size(); ++i) {
        const int g = params.group[i];
        if (g < 0 || static_cast<std::size_t>(g) >= group_lr.size()) {
            throw ConfigError("adamw_step: no learning rate for parameter group " +
                              std::to_string(g));
        }
        const double lr = group_lr[static_cast<std::size_t>(g)];
        Matrix& m = state.m[i];
        Matrix& v = state.v[i];
        const Matrix& grad = grads[i];
        m = beta1 * m + (1.0 - beta1) * grad;
        v.array() = beta2 * v.array() + (1.0 - beta2) * grad.array().square();
        Matrix& theta = params.values[i];
        theta.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
        theta -= (lr * weight_decay) * theta;
    }
}

bool EarlyStopper::update(double metric) {
    ++epoch_;
    if (metric > best_) {
        best_ = metric;
        best_epoch_ = epoch_;
        stale_ = 0;
        improved_last_ = true;
        return false;
    }
    improved_last_ = false;
    ++stale_;
    return stale_ >= patience_;
}

EvalResult evaluate_split(const ModelParams& params, const Dataset& data, Split split,
                          double threshold) {
    std::vector<double> logits;
    std::vector<int> labels;
    for (int idx : data.split_indices(split)) {
        const VideoSample& s = data.samples[static_cast<std::size_t>(idx)];
        logits.push_back(forward_logit(s, params));
        labels.push_back(s.label);
    }
    if (labels.empty()) {
        throw ConfigError(std::string("split '") + split_name(split) + "' is empty");
    }
    return evaluate_scores(logits, labels, threshold);
}

namespace {

double param_norm(const ParamStore& store) {
    double sq = 0.0;
    for (const Matrix& m : store.values) sq += m.squaredNorm();
    return std::sqrt(sq);
}

}  // namespace

TrainResult train(const Dataset& data, const ModelConfig& mcfg, const TrainConfig& tcfg) {
    mcfg.validate();
    tcfg.validate();
    const std::vector<int> train_base = data.split_indices(Split::train);
    if (train_base.empty()) throw ConfigError("training split is empty");
    if (data.split_indices(Split::val).empty()) throw ConfigError("validation split is empty");

    const double pos_weight = tcfg.pos_weight_mode == PosWeightMode::fixed
                                  ? tcfg.pos_weight
                                  : auto_pos_weight(data.labels_of(Split::train));

    TrainResult result;
    result.params = init_params(mcfg, tcfg.seed);
    ModelParams& params = result.params;
    AdamWState opt = make_adamw_state(params.store);
    std::vector<Matrix> best_values = params.store.values;

    EarlyStopper stopper(tcfg.patience);
    TrainHistory& hist = result.history;
    std::uint64_t sample_counter = 0;

    for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        const std::vector<double> group_lr = {
            cosine_lr(epoch - 1, tcfg.epochs, tcfg.base_lr, tcfg.min_lr),
            cosine_lr(epoch - 1, tcfg.epochs, tcfg.backbone_lr, tcfg.min_lr)};

        std::vector<int> order = train_base;
        Rng shuffle_rng(Rng::mix(tcfg.seed, 0x65706f6368ULL + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        int batch_index = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(tcfg.batch_size)) {
            ++batch_index;
            const std::size_t end =
                std::min(start + static_cast<std::size_t>(tcfg.batch_size), order.size());
            const double batch_n = static_cast<double>(end - start);

            GradStore grads = zero_grads_like(params.store);
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const VideoSample& s = data.samples[static_cast<std::size_t>(order[k])];
                ForwardOptions fwd;
                fwd.train = true;
                fwd.dropout_seed = Rng::mix(tcfg.seed, 0x64726f70ULL + sample_counter);
                ++sample_counter;
                Tape tape(&params.store);
                const int logit = build_forward(tape, s, params, fwd);
                const int loss =
                    tape.bce_with_logits(logit, static_cast<double>(s.label), pos_weight);
                batch_loss += tape.value(loss)(0, 0);
                tape.backward(loss);
                tape.add_param_grads(grads);
            }
            batch_loss /= batch_n;
            if (!std::isfinite(batch_loss)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch_index) +
                                   " (parameter norm " + format_double(param_norm(params.store)) +
                                   ")");
            }
            for (Matrix& g : grads) g /= batch_n;
            clip_global_norm(grads, tcfg.clip_norm);
            adamw_step(params.store, grads, opt, group_lr, tcfg.weight_decay, tcfg.beta1,
                       tcfg.beta2, tcfg.eps);
            loss_sum += batch_loss * batch_n;
        }

        const EvalResult val = evaluate_split(params, data, Split::val, tcfg.threshold);
        hist.epochs.push_back({epoch, group_lr[0], loss_sum / static_cast<double>(order.size()),
                               val.macro_f1});

        const bool stop = stopper.update(val.macro_f1);
        if (stopper.improved_last()) best_values = params.store.values;
        if (stop) {
            hist.stopped_early = true;
            break;
        }
    }

    hist.best_epoch = stopper.best_epoch();
    hist.best_val_f1 = stopper.best();
    params.store.values = std::move(best_values);
    return result;
}

}  // namespace divfuse

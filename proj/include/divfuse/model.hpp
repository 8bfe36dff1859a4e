#pragma once

#include "divfuse/autodiff.hpp"
#include "divfuse/common.hpp"
#include "divfuse/data_model.hpp"
#include "divfuse/windowing.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace divfuse {

enum class Fusion { A, B, C };
enum class VisualMode { raw, windowed };
enum class Modalities { all, visual_only, audio_only, text_only };

const char* fusion_name(Fusion f);
Fusion fusion_from_string(const std::string& s);
const char* visual_mode_name(VisualMode m);
VisualMode visual_mode_from_string(const std::string& s);
const char* modalities_name(Modalities m);
Modalities modalities_from_string(const std::string& s);

struct ModelConfig {
    int visual_dim = kVisualDim;
    int audio_dim = kAudioDim;
    int text_dim = kTextDim;
    VisualMode visual_mode = VisualMode::raw;
    WindowConfig window{};  // used when visual_mode == windowed
    int lstm_hidden = 64;
    int lstm_layers = 2;
    int proj_dim = 128;
    Fusion fusion = Fusion::B;
    Modalities modalities = Modalities::all;
    std::vector<int> mlp_hidden{128, 64};
    double dropout_p = 0.3;

    void validate() const;
    // BiLSTM input width for the visual stream: raw channels, or 4 stats per
    // channel after windowing.
    int visual_input_dim() const {
        return visual_mode == VisualMode::windowed ? kWindowStats * visual_dim : visual_dim;
    }
    int fused_dim() const;
};

// Report label, e.g. "Fusion B (divergence)" or "Visual only (unimodal)".
std::string variant_label(const ModelConfig& cfg);

// Parameter ids into ModelParams::store.
struct LstmDirection {
    int w_ih = -1;  // 4H x in, gates packed [input, forget, cell, output]
    int w_hh = -1;  // 4H x H
    int b = -1;     // 4H x 1
};
struct LstmLayer {
    LstmDirection fwd, bwd;
};
struct EncoderIds {
    std::vector<LstmLayer> layers;
    int attn_w = -1;  // 2H x 2H
    int attn_v = -1;  // 2H x 1
    int proj_w = -1;  // D x 2H
    int proj_b = -1;  // D x 1
    bool valid() const { return !layers.empty(); }
};

struct ModelParams {
    ModelConfig config;
    ParamStore store;
    EncoderIds visual, audio;
    int text_w = -1;  // D x text_dim
    int text_b = -1;  // D x 1
    std::vector<int> head_w, head_b;
};

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

struct ForwardOptions {
    bool train = false;  // enables dropout
    std::uint64_t dropout_seed = 0;
};

// Tape builders. The plain entry points below run these on a scratch tape, so
// there is a single implementation of the forward pass.
int build_bilstm(Tape& tape, int seq, const ModelParams& params, const EncoderIds& enc);
int build_attention_pool(Tape& tape, int states, const ModelParams& params, const EncoderIds& enc);
int build_projection(Tape& tape, int x, int w, int b, bool apply_tanh = true);
int build_fuse(Tape& tape, int h_v, int h_a, int h_t, Fusion f);
int build_forward(Tape& tape, const VideoSample& sample, const ModelParams& params,
                  const ForwardOptions& opt);

// Evaluation-mode operations on plain matrices.
Matrix bilstm_encode(const Eigen::Ref<const Matrix>& seq, const ModelParams& params,
                     const EncoderIds& enc);
Vector attention_pool(const Eigen::Ref<const Matrix>& states, const ModelParams& params,
                      const EncoderIds& enc);
Vector encode_text(const Eigen::Ref<const Vector>& text, const ModelParams& params,
                   bool apply_tanh = true);
Vector fuse(const Vector& h_v, const Vector& h_a, const Vector& h_t, Fusion f);
double forward_logit(const VideoSample& sample, const ModelParams& params,
                     const ForwardOptions& opt = {});

// Central-difference check of every parameter at the given perturbation;
// returns max over parameters of |analytic - numeric| / max(|a|, |n|, 1e-6).
double gradient_check(const VideoSample& sample, ModelParams& params, double label,
                      double pos_weight, double eps);

// Versioned binary checkpoint: config header plus named tensors, bit-exact
// round trip.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace divfuse

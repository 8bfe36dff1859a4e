#pragma once

#include "divfuse/data_model.hpp"

#include <cstdint>
#include <string>

namespace divfuse {

// divergence_label: label 1 renders audio from a conflicting latent, so no
// single modality carries the label — only cross-modal disagreement does.
// congruent_label: the label shifts the shared latent; every modality agrees.
// null_mode: labels are independent of all features.
enum class SynthMode { divergence_label, congruent_label, null_mode };

const char* synth_mode_name(SynthMode m);
SynthMode synth_mode_from_string(const std::string& s);

struct SynthConfig {
    int n_train = 400;
    int n_val = 100;
    int n_test = 100;
    std::uint64_t seed = 0;
    int t_visual_min = 24;
    int t_visual_max = 48;
    int t_audio_min = 12;
    int t_audio_max = 24;
    double kappa = 1.0;  // conflict strength in [0,1]
    SynthMode mode = SynthMode::divergence_label;
    double noise_sigma = 0.05;
    int latent_dim = 16;

    int total() const { return n_train + n_val + n_test; }
    void validate() const;
};

// Deterministic in cfg.seed; per-sample derived sub-streams make the output
// independent of generation order. Labels alternate, so every split is
// balanced to within one sample.
Dataset generate(const SynthConfig& cfg);

}  // namespace divfuse

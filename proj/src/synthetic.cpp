#include "divfuse/synthetic.hpp"

#include <cmath>
#include <cstdio>

namespace divfuse {

const char* synth_mode_name(SynthMode m) {
    switch (m) {
        case SynthMode::divergence_label: return "divergence-label";
        case SynthMode::congruent_label: return "congruent-label";
        case SynthMode::null_mode: return "null";
    }
    return "?";
}

SynthMode synth_mode_from_string(const std::string& s) {
    if (s == "divergence-label") return SynthMode::divergence_label;
    if (s == "congruent-label") return SynthMode::congruent_label;
    if (s == "null") return SynthMode::null_mode;
    throw ConfigError("unknown synthetic mode '" + s +
                      "' (expected divergence-label|congruent-label|null)");
}

void SynthConfig::validate() const {
    if (n_train < 0 || n_val < 0 || n_test < 0) throw ConfigError("split sizes must be >= 0");
    if (total() < 2) throw ConfigError("need at least 2 samples in total");
    if (t_visual_min < 1 || t_visual_max < t_visual_min) {
        throw ConfigError("bad visual length range");
    }
    if (t_audio_min < 1 || t_audio_max < t_audio_min) throw ConfigError("bad audio length range");
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("kappa must be in [0,1]");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
    if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
}

namespace {

// Rows are independent uniformly-random unit vectors: directions only, so the
// latent geometry survives the rendering.
Matrix unit_rows(Rng& rng, int rows, int cols) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = rng.normal();
        const double norm = m.row(r).norm();
        if (norm > 0.0) {
            m.row(r) /= norm;
        } else {
            m(r, 0) = 1.0;
        }
    }
    return m;
}

Vector normal_vector(Rng& rng, int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.normal();
    return v;
}

constexpr double kWalkRho = 0.9;  // AR(1) smoothing of the latent walk

// T x out_dim sequence: each frame renders z plus a smoothed random walk, so
// per-frame values wander around the content rendering and windowed std is
// non-degenerate.
Matrix render_walk(Rng& rng, const Matrix& map, const Vector& z, int t_len, double sigma,
                   bool nonneg) {
    Matrix out(t_len, map.rows());
    Vector drift = Vector::Zero(z.size());
    for (int t = 0; t < t_len; ++t) {
        drift = kWalkRho * drift + sigma * normal_vector(rng, static_cast<int>(z.size()));
        Vector frame = map * (z + drift);
        if (nonneg) {
            for (Eigen::Index i = 0; i < frame.size(); ++i) frame(i) = softplus(frame(i));
        }
        out.row(t) = frame.transpose();
    }
    return out;
}

}  // namespace

Dataset generate(const SynthConfig& cfg) {
    cfg.validate();

    // Fixed per-seed rendering maps shared by all samples.
    Rng map_rng(Rng::mix(cfg.seed, 0x72656e646572ULL));
    const Matrix map_v = unit_rows(map_rng, kVisualDim, cfg.latent_dim);
    const Matrix map_a = unit_rows(map_rng, kAudioDim, cfg.latent_dim);
    const Matrix map_t = unit_rows(map_rng, kTextDim, cfg.latent_dim);
    const Vector shift_dir = unit_rows(map_rng, 1, cfg.latent_dim).row(0).transpose();

    Dataset ds;
    const int total = cfg.total();
    ds.samples.reserve(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) {
        Rng rng(Rng::mix(cfg.seed, 0x73616d706c65ULL + static_cast<std::uint64_t>(i)));
        VideoSample s;
        char id[32];
        std::snprintf(id, sizeof(id), "synth-%05d", i);
        s.id = id;
        s.split = i < cfg.n_train ? Split::train
                                  : (i < cfg.n_train + cfg.n_val ? Split::val : Split::test);
        s.label = i % 2;

        Vector z = normal_vector(rng, cfg.latent_dim);
        if (cfg.mode == SynthMode::congruent_label && s.label == 1) {
            z += 2.0 * cfg.kappa * shift_dir;
        }
        Vector z_audio = z;
        if (cfg.mode == SynthMode::divergence_label && s.label == 1) {
            // Interpolate through the origin: kappa=1 mirrors the latent, which
            // leaves the audio marginal unchanged (z is symmetric) but makes it
            // disagree with what the other modalities render.
            z_audio = (1.0 - 2.0 * cfg.kappa) * z;
        }

        const int t_v = rng.uniform_int(cfg.t_visual_min, cfg.t_visual_max);
        const int t_a = rng.uniform_int(cfg.t_audio_min, cfg.t_audio_max);
        s.visual = render_walk(rng, map_v, z, t_v, cfg.noise_sigma, /*nonneg=*/true);
        s.audio = render_walk(rng, map_a, z_audio, t_a, cfg.noise_sigma, /*nonneg=*/false);
        s.text = map_t * z + cfg.noise_sigma * normal_vector(rng, kTextDim);

        validate_sample(s);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace divfuse

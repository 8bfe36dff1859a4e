#include "divfuse/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace divfuse {

const char* fusion_name(Fusion f) {
    switch (f) {
        case Fusion::A: return "A";
        case Fusion::B: return "B";
        case Fusion::C: return "C";
    }
    return "?";
}

Fusion fusion_from_string(const std::string& s) {
    if (s == "A" || s == "a") return Fusion::A;
    if (s == "B" || s == "b") return Fusion::B;
    if (s == "C" || s == "c") return Fusion::C;
    throw ConfigError("unknown fusion variant '" + s + "' (expected A|B|C)");
}

const char* visual_mode_name(VisualMode m) {
    return m == VisualMode::raw ? "raw" : "windowed";
}

VisualMode visual_mode_from_string(const std::string& s) {
    if (s == "raw") return VisualMode::raw;
    if (s == "windowed") return VisualMode::windowed;
    throw ConfigError("unknown visual mode '" + s + "' (expected raw|windowed)");
}

const char* modalities_name(Modalities m) {
    switch (m) {
        case Modalities::all: return "all";
        case Modalities::visual_only: return "visual";
        case Modalities::audio_only: return "audio";
        case Modalities::text_only: return "text";
    }
    return "?";
}

Modalities modalities_from_string(const std::string& s) {
    if (s == "all") return Modalities::all;
    if (s == "visual") return Modalities::visual_only;
    if (s == "audio") return Modalities::audio_only;
    if (s == "text") return Modalities::text_only;
    throw ConfigError("unknown modalities '" + s + "' (expected all|visual|audio|text)");
}

void ModelConfig::validate() const {
    if (visual_dim < 1 || audio_dim < 1 || text_dim < 1) throw ConfigError("input dims must be >= 1");
    if (lstm_hidden < 1) throw ConfigError("lstm_hidden must be >= 1");
    if (lstm_layers < 1) throw ConfigError("lstm_layers must be >= 1");
    if (proj_dim < 1) throw ConfigError("proj_dim must be >= 1");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout_p must be in [0,1)");
    if (mlp_hidden.size() != 2) throw ConfigError("the classifier head takes exactly 2 hidden sizes");
    for (int h : mlp_hidden) {
        if (h < 1) throw ConfigError("mlp hidden sizes must be >= 1");
    }
    if (visual_mode == VisualMode::windowed) window.validate();
}

int ModelConfig::fused_dim() const {
    if (modalities != Modalities::all) return proj_dim;
    switch (fusion) {
        case Fusion::A:
        case Fusion::B: return 3 * proj_dim;
        case Fusion::C: return 6 * proj_dim;
    }
    return 0;
}

std::string variant_label(const ModelConfig& cfg) {
    switch (cfg.modalities) {
        case Modalities::visual_only: return "Visual only (unimodal)";
        case Modalities::audio_only: return "Audio only (unimodal)";
        case Modalities::text_only: return "Text only (unimodal)";
        case Modalities::all: break;
    }
    switch (cfg.fusion) {
        case Fusion::A: return "Fusion A (implicit)";
        case Fusion::B: return "Fusion B (divergence)";
        case Fusion::C: return "Fusion C (combined)";
    }
    return "?";
}

namespace {

Matrix uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double bound) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
    }
    return m;
}

EncoderIds init_encoder(ParamStore& store, Rng& rng, const std::string& name, int input_dim,
                        int hidden, int layers, int proj_dim) {
    EncoderIds enc;
    const double k_lstm = 1.0 / std::sqrt(static_cast<double>(hidden));
    int in = input_dim;
    for (int l = 0; l < layers; ++l) {
        LstmLayer layer;
        for (int d = 0; d < 2; ++d) {
            const std::string prefix =
                name + ".lstm" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
            LstmDirection dir;
            dir.w_ih = store.add(prefix + ".w_ih", uniform_matrix(rng, 4 * hidden, in, k_lstm));
            dir.w_hh = store.add(prefix + ".w_hh", uniform_matrix(rng, 4 * hidden, hidden, k_lstm));
            Matrix bias = uniform_matrix(rng, 4 * hidden, 1, k_lstm);
            bias.block(hidden, 0, hidden, 1).array() += 1.0;  // forget-gate bias
            dir.b = store.add(prefix + ".b", std::move(bias));
            (d == 0 ? layer.fwd : layer.bwd) = dir;
        }
        enc.layers.push_back(layer);
        in = 2 * hidden;
    }
    const int width = 2 * hidden;
    const double k_attn = 1.0 / std::sqrt(static_cast<double>(width));
    enc.attn_w = store.add(name + ".attn_w", uniform_matrix(rng, width, width, k_attn));
    enc.attn_v = store.add(name + ".attn_v", uniform_matrix(rng, width, 1, k_attn));
    enc.proj_w = store.add(name + ".proj_w", uniform_matrix(rng, proj_dim, width, k_attn));
    enc.proj_b = store.add(name + ".proj_b", uniform_matrix(rng, proj_dim, 1, k_attn));
    return enc;
}

bool uses_visual(const ModelConfig& c) {
    return c.modalities == Modalities::all || c.modalities == Modalities::visual_only;
}
bool uses_audio(const ModelConfig& c) {
    return c.modalities == Modalities::all || c.modalities == Modalities::audio_only;
}
bool uses_text(const ModelConfig& c) {
    return c.modalities == Modalities::all || c.modalities == Modalities::text_only;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    Rng rng(Rng::mix(seed, 0x6d6f64656cULL));

    if (uses_visual(cfg)) {
        p.visual = init_encoder(p.store, rng, "visual", cfg.visual_input_dim(), cfg.lstm_hidden,
                                cfg.lstm_layers, cfg.proj_dim);
    }
    if (uses_audio(cfg)) {
        p.audio = init_encoder(p.store, rng, "audio", cfg.audio_dim, cfg.lstm_hidden,
                               cfg.lstm_layers, cfg.proj_dim);
    }
    if (uses_text(cfg)) {
        const double k = 1.0 / std::sqrt(static_cast<double>(cfg.text_dim));
        p.text_w = p.store.add("text.proj_w", uniform_matrix(rng, cfg.proj_dim, cfg.text_dim, k));
        p.text_b = p.store.add("text.proj_b", uniform_matrix(rng, cfg.proj_dim, 1, k));
    }

    int in = cfg.fused_dim();
    const std::vector<int> sizes = {cfg.mlp_hidden[0], cfg.mlp_hidden[1], 1};
    for (std::size_t l = 0; l < sizes.size(); ++l) {
        const double k = 1.0 / std::sqrt(static_cast<double>(in));
        p.head_w.push_back(p.store.add("head." + std::to_string(l) + ".w",
                                       uniform_matrix(rng, sizes[l], in, k)));
        p.head_b.push_back(p.store.add("head." + std::to_string(l) + ".b",
                                       uniform_matrix(rng, sizes[l], 1, k)));
        in = sizes[l];
    }
    return p;
}

int build_bilstm(Tape& tape, int seq, const ModelParams& params, const EncoderIds& enc) {
    const int hidden = params.config.lstm_hidden;
    int input = seq;
    for (const auto& layer : enc.layers) {
        const int t_steps = static_cast<int>(tape.value(input).rows());
        std::vector<int> fwd_h(static_cast<std::size_t>(t_steps));
        std::vector<int> bwd_h(static_cast<std::size_t>(t_steps));
        for (int d = 0; d < 2; ++d) {
            const LstmDirection& dir = d == 0 ? layer.fwd : layer.bwd;
            auto& out = d == 0 ? fwd_h : bwd_h;
            // One GEMM for all input-to-hidden preactivations of this pass.
            const int gates_all = tape.matmul(input, tape.param(dir.w_ih), false, true);
            const int w_hh = tape.param(dir.w_hh);
            const int bias = tape.param(dir.b);
            int h_prev = tape.constant(Matrix::Zero(hidden, 1));
            int c_prev = tape.constant(Matrix::Zero(hidden, 1));
            for (int k = 0; k < t_steps; ++k) {
                const int t = d == 0 ? k : t_steps - 1 - k;
                const int pre =
                    tape.add(tape.add(tape.row(gates_all, t), tape.matmul(w_hh, h_prev)), bias);
                const int gate_i = tape.sigmoid(tape.segment(pre, 0, hidden));
                const int gate_f = tape.sigmoid(tape.segment(pre, hidden, hidden));
                const int gate_g = tape.tanh(tape.segment(pre, 2 * hidden, hidden));
                const int gate_o = tape.sigmoid(tape.segment(pre, 3 * hidden, hidden));
                const int cell =
                    tape.add(tape.hadamard(gate_f, c_prev), tape.hadamard(gate_i, gate_g));
                const int h = tape.hadamard(gate_o, tape.tanh(cell));
                out[static_cast<std::size_t>(t)] = h;
                h_prev = h;
                c_prev = cell;
            }
        }
        std::vector<int> rows(static_cast<std::size_t>(t_steps));
        for (int t = 0; t < t_steps; ++t) {
            rows[static_cast<std::size_t>(t)] = tape.concat(
                {fwd_h[static_cast<std::size_t>(t)], bwd_h[static_cast<std::size_t>(t)]});
        }
        input = tape.stack_rows(rows);
    }
    return input;
}

int build_attention_pool(Tape& tape, int states, const ModelParams& params, const EncoderIds& enc) {
    (void)params;
    const int scores_hidden = tape.tanh(tape.matmul(states, tape.param(enc.attn_w), false, true));
    const int scores = tape.matmul(scores_hidden, tape.param(enc.attn_v));
    const int weights = tape.softmax(scores);
    return tape.matmul(states, weights, true, false);
}

int build_projection(Tape& tape, int x, int w, int b, bool apply_tanh) {
    const int affine = tape.add(tape.matmul(tape.param(w), x), tape.param(b));
    return apply_tanh ? tape.tanh(affine) : affine;
}

int build_fuse(Tape& tape, int h_v, int h_a, int h_t, Fusion f) {
    switch (f) {
        case Fusion::A:
            return tape.concat({h_v, h_a, h_t});
        case Fusion::B:
            return tape.concat({tape.abs(tape.sub(h_v, h_a)), tape.abs(tape.sub(h_v, h_t)),
                                tape.abs(tape.sub(h_a, h_t))});
        case Fusion::C:
            return tape.concat(
                {build_fuse(tape, h_v, h_a, h_t, Fusion::A), build_fuse(tape, h_v, h_a, h_t, Fusion::B)});
    }
    throw ConfigError("invalid fusion variant");
}

namespace {

int build_encoder(Tape& tape, const Matrix& sequence, const ModelParams& params,
                  const EncoderIds& enc) {
    const int seq = tape.constant(sequence);
    const int states = build_bilstm(tape, seq, params, enc);
    const int pooled = build_attention_pool(tape, states, params, enc);
    return build_projection(tape, pooled, enc.proj_w, enc.proj_b);
}

}  // namespace

int build_forward(Tape& tape, const VideoSample& sample, const ModelParams& params,
                  const ForwardOptions& opt) {
    const ModelConfig& cfg = params.config;

    int h_v = -1, h_a = -1, h_t = -1;
    if (uses_visual(cfg)) {
        if (sample.visual.cols() != cfg.visual_dim) {
            throw ShapeError("forward: visual has " + std::to_string(sample.visual.cols()) +
                             " channels, model expects " + std::to_string(cfg.visual_dim));
        }
        const Matrix input = cfg.visual_mode == VisualMode::windowed
                                 ? window_stats(sample.visual, cfg.window).descriptors
                                 : sample.visual;
        h_v = build_encoder(tape, input, params, params.visual);
    }
    if (uses_audio(cfg)) {
        if (sample.audio.cols() != cfg.audio_dim) {
            throw ShapeError("forward: audio has " + std::to_string(sample.audio.cols()) +
                             " channels, model expects " + std::to_string(cfg.audio_dim));
        }
        h_a = build_encoder(tape, sample.audio, params, params.audio);
    }
    if (uses_text(cfg)) {
        if (sample.text.size() != cfg.text_dim) {
            throw ShapeError("forward: text has " + std::to_string(sample.text.size()) +
                             " entries, model expects " + std::to_string(cfg.text_dim));
        }
        const int text = tape.constant(sample.text);
        h_t = build_projection(tape, text, params.text_w, params.text_b);
    }

    int fused = -1;
    switch (cfg.modalities) {
        case Modalities::all: fused = build_fuse(tape, h_v, h_a, h_t, cfg.fusion); break;
        case Modalities::visual_only: fused = h_v; break;
        case Modalities::audio_only: fused = h_a; break;
        case Modalities::text_only: fused = h_t; break;
    }

    Rng dropout_rng(Rng::mix(opt.dropout_seed, 0x64726f70ULL));
    int x = fused;
    for (std::size_t l = 0; l + 1 < params.head_w.size(); ++l) {
        x = tape.tanh(tape.add(tape.matmul(tape.param(params.head_w[l]), x),
                               tape.param(params.head_b[l])));
        if (opt.train && cfg.dropout_p > 0.0) {
            const auto dim = tape.value(x).rows();
            Matrix mask(dim, 1);
            const double keep_scale = 1.0 / (1.0 - cfg.dropout_p);
            for (Eigen::Index i = 0; i < dim; ++i) {
                mask(i, 0) = dropout_rng.uniform() < cfg.dropout_p ? 0.0 : keep_scale;
            }
            x = tape.hadamard(x, tape.constant(std::move(mask)));
        }
    }
    return tape.add(tape.matmul(tape.param(params.head_w.back()), x),
                    tape.param(params.head_b.back()));
}

Matrix bilstm_encode(const Eigen::Ref<const Matrix>& seq, const ModelParams& params,
                     const EncoderIds& enc) {
    Tape tape(&params.store);
    const int out = build_bilstm(tape, tape.constant(seq), params, enc);
    return tape.value(out);
}

Vector attention_pool(const Eigen::Ref<const Matrix>& states, const ModelParams& params,
                      const EncoderIds& enc) {
    Tape tape(&params.store);
    const int out = build_attention_pool(tape, tape.constant(states), params, enc);
    return tape.value(out);
}

Vector encode_text(const Eigen::Ref<const Vector>& text, const ModelParams& params,
                   bool apply_tanh) {
    Tape tape(&params.store);
    const int out = build_projection(tape, tape.constant(text), params.text_w, params.text_b,
                                     apply_tanh);
    return tape.value(out);
}

Vector fuse(const Vector& h_v, const Vector& h_a, const Vector& h_t, Fusion f) {
    if (h_v.size() != h_a.size() || h_v.size() != h_t.size()) {
        throw ShapeError("fuse: embedding lengths differ");
    }
    Tape tape;
    const int out =
        build_fuse(tape, tape.constant(h_v), tape.constant(h_a), tape.constant(h_t), f);
    return tape.value(out);
}

double forward_logit(const VideoSample& sample, const ModelParams& params,
                     const ForwardOptions& opt) {
    Tape tape(&params.store);
    const int logit = build_forward(tape, sample, params, opt);
    return tape.value(logit)(0, 0);
}

double gradient_check(const VideoSample& sample, ModelParams& params, double label,
                      double pos_weight, double eps) {
    const ForwardOptions opt;  // eval mode: no dropout
    auto loss_value = [&]() {
        Tape tape(&params.store);
        const int logit = build_forward(tape, sample, params, opt);
        const int loss = tape.bce_with_logits(logit, label, pos_weight);
        return tape.value(loss)(0, 0);
    };

    GradStore grads = zero_grads_like(params.store);
    {
        Tape tape(&params.store);
        const int logit = build_forward(tape, sample, params, opt);
        const int loss = tape.bce_with_logits(logit, label, pos_weight);
        tape.backward(loss);
        tape.add_param_grads(grads);
    }

    double max_rel = 0.0;
    for (std::size_t id = 0; id < params.store.values.size(); ++id) {
        Matrix& theta = params.store.values[id];
        for (Eigen::Index r = 0; r < theta.rows(); ++r) {
            for (Eigen::Index c = 0; c < theta.cols(); ++c) {
                const double original = theta(r, c);
                theta(r, c) = original + eps;
                const double loss_plus = loss_value();
                theta(r, c) = original - eps;
                const double loss_minus = loss_value();
                theta(r, c) = original;
                const double numeric = (loss_plus - loss_minus) / (2.0 * eps);
                const double analytic = grads[id](r, c);
                // The 1e-6 floor keeps central-difference roundoff (about
                // |loss| * eps_machine / eps, i.e. ~1e-11 here) from reading
                // as relative error on near-zero gradients.
                const double rel = std::abs(analytic - numeric) /
                                   std::max({std::abs(analytic), std::abs(numeric), 1e-6});
                max_rel = std::max(max_rel, rel);
            }
        }
    }
    return max_rel;
}

namespace {

nlohmann::json config_to_json(const ModelConfig& c) {
    return nlohmann::json{{"visual_dim", c.visual_dim},
                          {"audio_dim", c.audio_dim},
                          {"text_dim", c.text_dim},
                          {"visual_mode", visual_mode_name(c.visual_mode)},
                          {"window_length", c.window.length},
                          {"window_step", c.window.step},
                          {"lstm_hidden", c.lstm_hidden},
                          {"lstm_layers", c.lstm_layers},
                          {"proj_dim", c.proj_dim},
                          {"fusion", fusion_name(c.fusion)},
                          {"modalities", modalities_name(c.modalities)},
                          {"mlp_hidden", c.mlp_hidden},
                          {"dropout_p", c.dropout_p}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.visual_dim = j.at("visual_dim").get<int>();
    c.audio_dim = j.at("audio_dim").get<int>();
    c.text_dim = j.at("text_dim").get<int>();
    c.visual_mode = visual_mode_from_string(j.at("visual_mode").get<std::string>());
    c.window.length = j.at("window_length").get<int>();
    c.window.step = j.at("window_step").get<int>();
    c.lstm_hidden = j.at("lstm_hidden").get<int>();
    c.lstm_layers = j.at("lstm_layers").get<int>();
    c.proj_dim = j.at("proj_dim").get<int>();
    c.fusion = fusion_from_string(j.at("fusion").get<std::string>());
    c.modalities = modalities_from_string(j.at("modalities").get<std::string>());
    c.mlp_hidden = j.at("mlp_hidden").get<std::vector<int>>();
    c.dropout_p = j.at("dropout_p").get<double>();
    return c;
}

constexpr char kCheckpointMagic[8] = {'D', 'V', 'F', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ParseError("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IngestError("cannot write checkpoint '" + path + "'");
        out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
        const std::string config = config_to_json(params.config).dump();
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(config.size()));
        out.write(config.data(), static_cast<std::streamsize>(config.size()));
        write_pod<std::uint64_t>(out, params.store.values.size());
        for (std::size_t i = 0; i < params.store.values.size(); ++i) {
            const std::string& name = params.store.names[i];
            const Matrix& m = params.store.values[i];
            write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
            write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
            out.write(reinterpret_cast<const char*>(m.data()),
                      static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
        }
        if (!out.good()) throw IngestError("write failed for checkpoint '" + path + "'");
    }
    fs::rename(tmp, target);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open checkpoint '" + path + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw ParseError("'" + path + "' is not a checkpoint file");
    }
    const auto config_len = read_pod<std::uint32_t>(in);
    std::string config_text(config_len, '\0');
    in.read(config_text.data(), config_len);
    if (!in) throw ParseError("checkpoint: truncated config");
    ModelConfig cfg;
    try {
        cfg = config_from_json(nlohmann::json::parse(config_text));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: bad config block: ") + e.what());
    }

    // Rebuild the parameter layout, then overwrite every tensor by name.
    ModelParams params = init_params(cfg, 0);
    const auto count = read_pod<std::uint64_t>(in);
    if (count != params.store.values.size()) {
        throw ParseError("checkpoint: tensor count " + std::to_string(count) + " != expected " +
                         std::to_string(params.store.values.size()));
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rows = read_pod<std::uint64_t>(in);
        const auto cols = read_pod<std::uint64_t>(in);
        const int id = params.store.find(name);
        if (id < 0) throw ParseError("checkpoint: unknown tensor '" + name + "'");
        Matrix& m = params.store.values[static_cast<std::size_t>(id)];
        if (static_cast<std::uint64_t>(m.rows()) != rows ||
            static_cast<std::uint64_t>(m.cols()) != cols) {
            throw ParseError("checkpoint: tensor '" + name + "' has shape " + std::to_string(rows) +
                             "x" + std::to_string(cols) + ", expected " + std::to_string(m.rows()) +
                             "x" + std::to_string(m.cols()));
        }
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * rows * cols));
        if (!in) throw ParseError("checkpoint: truncated tensor '" + name + "'");
    }
    return params;
}

}  // namespace divfuse

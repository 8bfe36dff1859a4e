#include "divfuse/cli.hpp"

#include "divfuse/data_model.hpp"
#include "divfuse/metrics.hpp"
#include "divfuse/model.hpp"
#include "divfuse/stats.hpp"
#include "divfuse/synthetic.hpp"
#include "divfuse/training.hpp"
#include "divfuse/windowing.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace divfuse {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Every run echoes its resolved configuration; wall time is stdout-only
// metadata so that file outputs stay byte-identical across reruns.
void finish_report(Clock::time_point start) {
    std::printf("wall_time_s: %.2f (metadata only, not part of any output file)\n",
                seconds_since(start));
}

struct GenSynthArgs {
    SynthConfig cfg;
    std::string out_dir;
    std::string mode = "divergence-label";
};

void run_gen_synth(GenSynthArgs& a) {
    const auto start = Clock::now();
    a.cfg.mode = synth_mode_from_string(a.mode);
    const Dataset ds = generate(a.cfg);
    const std::string manifest = write_dataset(ds, a.out_dir);
    std::cout << "command: gen-synth\n"
              << "seed: " << a.cfg.seed << "\n"
              << "mode: " << synth_mode_name(a.cfg.mode) << "\n"
              << "kappa: " << format_double(a.cfg.kappa) << "\n"
              << "noise_sigma: " << format_double(a.cfg.noise_sigma) << "\n"
              << "latent_dim: " << a.cfg.latent_dim << "\n"
              << "splits: " << a.cfg.n_train << "/" << a.cfg.n_val << "/" << a.cfg.n_test << "\n"
              << "t_visual: [" << a.cfg.t_visual_min << ", " << a.cfg.t_visual_max << "]\n"
              << "t_audio: [" << a.cfg.t_audio_min << ", " << a.cfg.t_audio_max << "]\n"
              << "manifest: " << manifest << "\n";
    finish_report(start);
}

struct WindowArgs {
    std::string input;
    std::string out;
    WindowConfig cfg;
};

void run_window(WindowArgs& a) {
    const auto start = Clock::now();
    a.cfg.validate();
    const Matrix sequence = parse_feature_matrix(a.input, kVisualDim);
    const WindowedSequence windows = window_stats(sequence, a.cfg);

    std::ostringstream out;
    const int channels = static_cast<int>(sequence.cols());
    for (int c = 0; c < channels; ++c) {
        for (int s = 0; s < kWindowStats; ++s) {
            if (c != 0 || s != 0) out << ',';
            out << descriptor_column_name(c, channels, static_cast<WindowStat>(s));
        }
    }
    out << '\n';
    for (Eigen::Index r = 0; r < windows.descriptors.rows(); ++r) {
        for (Eigen::Index c = 0; c < windows.descriptors.cols(); ++c) {
            if (c != 0) out << ',';
            out << format_double(windows.descriptors(r, c));
        }
        out << '\n';
    }
    write_text_atomic(a.out, out.str());

    std::cout << "command: window\n"
              << "input: " << a.input << "\n"
              << "window_length: " << a.cfg.length << "\n"
              << "window_step: " << a.cfg.step << "\n"
              << "windows: " << windows.descriptors.rows() << "\n"
              << "descriptor_dim: " << windows.descriptors.cols() << "\n"
              << "out: " << a.out << "\n";
    finish_report(start);
}

struct TrainArgs {
    std::string manifest;
    std::string fusion = "B";
    std::string visual = "windowed";
    std::string modalities = "all";
    std::string out = "checkpoint.bin";
    std::string history;
    ModelConfig model;
    TrainConfig cfg;
    double pos_weight = 0.0;  // 0 = derive from training labels
};

ModelConfig resolve_model_config(const TrainArgs& a, Fusion fusion) {
    ModelConfig m = a.model;
    m.visual_mode = visual_mode_from_string(a.visual);
    m.modalities = modalities_from_string(a.modalities);
    m.fusion = fusion;
    return m;
}

void echo_train_config(const TrainArgs& a, const ModelConfig& m) {
    std::cout << "command: train\n"
              << "manifest: " << a.manifest << "\n"
              << "fusion: " << a.fusion << "\n"
              << "visual: " << visual_mode_name(m.visual_mode) << "\n"
              << "modalities: " << modalities_name(m.modalities) << "\n"
              << "seed: " << a.cfg.seed << "\n"
              << "epochs: " << a.cfg.epochs << "\n"
              << "batch_size: " << a.cfg.batch_size << "\n"
              << "base_lr: " << format_double(a.cfg.base_lr) << "\n"
              << "weight_decay: " << format_double(a.cfg.weight_decay) << "\n"
              << "clip_norm: " << format_double(a.cfg.clip_norm) << "\n"
              << "patience: " << a.cfg.patience << "\n"
              << "lstm_hidden: " << m.lstm_hidden << "\n"
              << "lstm_layers: " << m.lstm_layers << "\n"
              << "proj_dim: " << m.proj_dim << "\n"
              << "dropout: " << format_double(m.dropout_p) << "\n"
              << "threshold: " << format_double(a.cfg.threshold) << "\n";
}

std::string f1_4dp(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

void run_train(TrainArgs& a) {
    const auto start = Clock::now();
    if (a.pos_weight > 0.0) {
        a.cfg.pos_weight_mode = PosWeightMode::fixed;
        a.cfg.pos_weight = a.pos_weight;
    }
    const Dataset ds = load_manifest(a.manifest);

    if (a.fusion != "all") {
        const ModelConfig m = resolve_model_config(a, fusion_from_string(a.fusion));
        echo_train_config(a, m);
        const TrainResult result = train(ds, m, a.cfg);
        save_checkpoint(a.out, result.params);
        std::cout << "checkpoint: " << a.out << "\n";
        if (!a.history.empty()) {
            write_text_atomic(a.history, result.history.csv());
            std::cout << "history: " << a.history << "\n";
        }
        std::cout << "epochs_run: " << result.history.epochs.size() << "\n"
                  << "best_epoch: " << result.history.best_epoch << "\n"
                  << "best_val_f1: " << format_double(result.history.best_val_f1) << "\n"
                  << "stopped_early: " << (result.history.stopped_early ? 1 : 0) << "\n";
        finish_report(start);
        return;
    }

    // Ablation over the three fusion variants with a shared seed; --out names
    // a directory receiving per-variant checkpoints, histories, and the
    // comparison table.
    echo_train_config(a, resolve_model_config(a, Fusion::B));
    fs::create_directories(a.out);
    const Split report_split = ds.split_indices(Split::test).empty() ? Split::val : Split::test;
    std::ostringstream comparison;
    comparison << "variant,macro_f1\n";
    for (Fusion fusion : {Fusion::A, Fusion::B, Fusion::C}) {
        const ModelConfig m = resolve_model_config(a, fusion);
        const TrainResult result = train(ds, m, a.cfg);
        const std::string tag = std::string("fusion-") + fusion_name(fusion);
        const std::string ckpt = (fs::path(a.out) / (tag + ".ckpt")).string();
        save_checkpoint(ckpt, result.params);
        write_text_atomic((fs::path(a.out) / (tag + "-history.csv")).string(),
                          result.history.csv());
        const EvalResult ev = evaluate_split(result.params, ds, report_split, a.cfg.threshold);
        comparison << variant_label(m) << ',' << f1_4dp(ev.macro_f1) << '\n';
        std::cout << "checkpoint: " << ckpt << "\n"
                  << "variant: " << variant_label(m) << "\n"
                  << "best_val_f1: " << format_double(result.history.best_val_f1) << "\n"
                  << split_name(report_split) << "_macro_f1: " << f1_4dp(ev.macro_f1) << "\n";
    }
    const std::string cmp_path = (fs::path(a.out) / "comparison.csv").string();
    write_text_atomic(cmp_path, comparison.str());
    std::cout << "comparison: " << cmp_path << "\n" << comparison.str();
    finish_report(start);
}

struct EvalArgs {
    std::string checkpoint;
    std::string manifest;
    std::string split = "test";
    std::string out;
    double threshold = 0.5;
};

void run_eval(EvalArgs& a) {
    const auto start = Clock::now();
    const ModelParams params = load_checkpoint(a.checkpoint);
    const Dataset ds = load_manifest(a.manifest);
    const Split split = split_from_string(a.split);
    const EvalResult ev = evaluate_split(params, ds, split, a.threshold);

    std::ostringstream csv;
    csv << "variant,split,macro_f1,tp,fp,tn,fn\n"
        << variant_label(params.config) << ',' << split_name(split) << ','
        << format_double(ev.macro_f1) << ',' << ev.counts.tp << ',' << ev.counts.fp << ','
        << ev.counts.tn << ',' << ev.counts.fn << '\n';
    if (!a.out.empty()) write_text_atomic(a.out, csv.str());

    std::cout << "command: eval\n"
              << "checkpoint: " << a.checkpoint << "\n"
              << "manifest: " << a.manifest << "\n"
              << "threshold: " << format_double(a.threshold) << "\n";
    if (!a.out.empty()) std::cout << "out: " << a.out << "\n";
    std::cout << csv.str();
    finish_report(start);
}

struct AnalyzeArgs {
    std::string manifest;
    std::string out;
    double alpha = 0.05;
};

void run_analyze(AnalyzeArgs& a) {
    const auto start = Clock::now();
    const Dataset ds = load_manifest(a.manifest);
    const std::vector<StatResult> results = rank_features(ds, a.alpha);
    const std::string csv = stat_report_csv(results);
    if (!a.out.empty()) write_text_atomic(a.out, csv);

    long significant = 0;
    for (const StatResult& r : results) significant += r.significant ? 1 : 0;
    std::cout << "command: analyze\n"
              << "manifest: " << a.manifest << "\n"
              << "alpha: " << format_double(a.alpha) << "\n"
              << "features: " << results.size() << "\n"
              << "significant: " << significant << "\n";
    if (!a.out.empty()) {
        std::cout << "out: " << a.out << "\n";
    } else {
        std::cout << csv;
    }
    finish_report(start);
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"divergence-based multimodal fusion pipeline"};
    app.require_subcommand(1);

    GenSynthArgs gen;
    CLI::App* gen_cmd =
        app.add_subcommand("gen-synth", "generate a seeded synthetic multimodal dataset");
    gen_cmd->add_option("--out", gen.out_dir, "output directory (manifest.csv + features/)")
        ->required();
    gen_cmd->add_option("--seed", gen.cfg.seed, "RNG seed")->envname("DIVFUSE_SEED");
    gen_cmd->add_option("--n-train", gen.cfg.n_train, "training samples");
    gen_cmd->add_option("--n-val", gen.cfg.n_val, "validation samples");
    gen_cmd->add_option("--n-test", gen.cfg.n_test, "test samples");
    gen_cmd->add_option("--mode", gen.mode, "divergence-label|congruent-label|null");
    gen_cmd->add_option("--kappa", gen.cfg.kappa, "conflict strength in [0,1]");
    gen_cmd->add_option("--noise-sigma", gen.cfg.noise_sigma, "latent walk noise scale");
    gen_cmd->add_option("--latent-dim", gen.cfg.latent_dim, "latent content dimension");
    gen_cmd->add_option("--t-visual-min", gen.cfg.t_visual_min, "min visual frames");
    gen_cmd->add_option("--t-visual-max", gen.cfg.t_visual_max, "max visual frames");
    gen_cmd->add_option("--t-audio-min", gen.cfg.t_audio_min, "min audio frames");
    gen_cmd->add_option("--t-audio-max", gen.cfg.t_audio_max, "max audio frames");

    WindowArgs win;
    CLI::App* win_cmd =
        app.add_subcommand("window", "sliding-window descriptors from a feature CSV");
    win_cmd->add_option("--input", win.input, "input feature CSV (one frame per row)")
        ->required();
    win_cmd->add_option("--out", win.out, "output descriptor CSV")->required();
    win_cmd->add_option("--length", win.cfg.length, "window length in frames");
    win_cmd->add_option("--step", win.cfg.step, "window step in frames");

    TrainArgs tr;
    CLI::App* tr_cmd = app.add_subcommand("train", "train a fusion model on a manifest");
    tr_cmd->add_option("--manifest", tr.manifest, "dataset manifest CSV")->required();
    tr_cmd->add_option("--fusion", tr.fusion, "A|B|C|all (all = ablation + comparison table)");
    tr_cmd->add_option("--visual", tr.visual, "raw|windowed visual input");
    tr_cmd->add_option("--modalities", tr.modalities, "all|visual|audio|text");
    tr_cmd->add_option("--seed", tr.cfg.seed, "RNG seed")->envname("DIVFUSE_SEED");
    tr_cmd->add_option("--out", tr.out, "checkpoint path (directory when --fusion all)");
    tr_cmd->add_option("--history", tr.history, "per-epoch history CSV path");
    tr_cmd->add_option("--epochs", tr.cfg.epochs, "max epochs");
    tr_cmd->add_option("--batch-size", tr.cfg.batch_size, "minibatch size");
    tr_cmd->add_option("--patience", tr.cfg.patience, "early-stop patience");
    tr_cmd->add_option("--base-lr", tr.cfg.base_lr, "peak learning rate");
    tr_cmd->add_option("--weight-decay", tr.cfg.weight_decay, "decoupled weight decay");
    tr_cmd->add_option("--clip-norm", tr.cfg.clip_norm, "global gradient-norm clip");
    tr_cmd->add_option("--threshold", tr.cfg.threshold, "decision threshold on sigmoid(logit)");
    tr_cmd->add_option("--pos-weight", tr.pos_weight,
                       "positive-class loss weight (0 = negatives/positives ratio)");
    tr_cmd->add_option("--lstm-hidden", tr.model.lstm_hidden, "BiLSTM hidden size per direction");
    tr_cmd->add_option("--lstm-layers", tr.model.lstm_layers, "BiLSTM layers");
    tr_cmd->add_option("--proj-dim", tr.model.proj_dim, "shared embedding dimension");
    tr_cmd->add_option("--dropout", tr.model.dropout_p, "head dropout probability");
    tr_cmd->add_option("--window-length", tr.model.window.length, "visual window length");
    tr_cmd->add_option("--window-step", tr.model.window.step, "visual window step");

    EvalArgs ev;
    CLI::App* ev_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a manifest split");
    ev_cmd->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
    ev_cmd->add_option("--manifest", ev.manifest, "dataset manifest CSV")->required();
    ev_cmd->add_option("--split", ev.split, "train|val|test");
    ev_cmd->add_option("--threshold", ev.threshold, "decision threshold on sigmoid(logit)");
    ev_cmd->add_option("--out", ev.out, "write the CSV row here as well as stdout");

    AnalyzeArgs an;
    CLI::App* an_cmd =
        app.add_subcommand("analyze", "rank summary features by group separation");
    an_cmd->add_option("--manifest", an.manifest, "dataset manifest CSV")->required();
    an_cmd->add_option("--alpha", an.alpha, "family-wise significance level");
    an_cmd->add_option("--out", an.out, "report CSV path (default: stdout)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (gen_cmd->parsed()) run_gen_synth(gen);
        if (win_cmd->parsed()) run_window(win);
        if (tr_cmd->parsed()) run_train(tr);
        if (ev_cmd->parsed()) run_eval(ev);
        if (an_cmd->parsed()) run_analyze(an);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace divfuse

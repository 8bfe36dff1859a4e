#include "divfuse/windowing.hpp"

#include <cmath>
#include <cstdio>

namespace divfuse {

const std::array<std::string, kNumAus>& au_codes() {
    static const std::array<std::string, kNumAus> codes = {
        "AU01", "AU02", "AU04", "AU05", "AU06", "AU07", "AU09", "AU10", "AU11", "AU12",
        "AU14", "AU15", "AU17", "AU20", "AU23", "AU24", "AU25", "AU26", "AU28", "AU43"};
    return codes;
}

const std::array<std::string, kNumAus>& au_labels() {
    static const std::array<std::string, kNumAus> labels = {
        "inner brow raiser", "outer brow", "brow lowerer",  "upper lid raiser", "cheek raiser",
        "lid tightener",     "nose wrinkler", "upper lip raiser", "nasolabial deepener", "smile",
        "dimpler",           "lip corner depressor", "chin raiser", "lip stretcher", "lip tightener",
        "lip pressor",       "lips part",     "jaw drop",     "lip suck",         "eyes closed"};
    return labels;
}

const char* stat_name(SummaryStat s) {
    switch (s) {
        case SummaryStat::mean: return "mean";
        case SummaryStat::std: return "std";
        case SummaryStat::slope: return "slope";
        case SummaryStat::range: return "range";
        case SummaryStat::zcr: return "zcr";
    }
    return "?";
}

void WindowConfig::validate() const {
    if (length < 2) throw ConfigError("window length must be >= 2, got " + std::to_string(length));
    if (step < 1 || step > length) {
        throw ConfigError("window step must satisfy 1 <= step <= length, got " + std::to_string(step));
    }
}

int window_count(int frames, const WindowConfig& cfg) {
    cfg.validate();
    if (frames < 1) throw ValidationError("sequence must have at least 1 frame");
    if (frames < cfg.length) return 1;
    return (frames - cfg.length) / cfg.step + 1;
}

double ls_slope(const Eigen::Ref<const Vector>& values) {
    const auto n = values.size();
    if (n < 2) throw ValidationError("ls_slope needs at least 2 values");
    const double x_mean = 0.5 * static_cast<double>(n - 1);
    const double y_mean = values.mean();
    double sxy = 0.0;
    double sxx = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i) - x_mean;
        sxy += dx * (values[i] - y_mean);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

double zero_crossing_rate(const Eigen::Ref<const Vector>& values, double center) {
    const auto n = values.size();
    if (n < 2) throw ValidationError("zero_crossing_rate needs at least 2 values");
    int crossings = 0;
    int prev_sign = 0;  // 0 until the signal first leaves the center
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = values[i] - center;
        int sign = d > 0.0 ? 1 : (d < 0.0 ? -1 : prev_sign);
        if (prev_sign != 0 && sign != 0 && sign != prev_sign) ++crossings;
        prev_sign = sign;
    }
    return static_cast<double>(crossings) / static_cast<double>(n - 1);
}

namespace {

// The four window statistics for one channel slice. Population std; slope over
// frame indices 0..len-1; slope of a single frame is 0 by convention.
void window_stats_for(const Eigen::Ref<const Vector>& w, double* out) {
    const auto len = w.size();
    const double mean = w.mean();
    out[0] = mean;
    out[1] = std::sqrt((w.array() - mean).square().sum() / static_cast<double>(len));
    out[2] = len >= 2 ? ls_slope(w) : 0.0;
    out[3] = w.maxCoeff() - w.minCoeff();
}

}  // namespace

WindowedSequence window_stats(const Eigen::Ref<const Matrix>& sequence, const WindowConfig& cfg) {
    const int frames = static_cast<int>(sequence.rows());
    const int channels = static_cast<int>(sequence.cols());
    if (channels < 1) throw ValidationError("window_stats: sequence has no channels");
    if (!sequence.allFinite()) throw ValidationError("window_stats: sequence has non-finite entries");
    const int n = window_count(frames, cfg);
    const int width = frames < cfg.length ? frames : cfg.length;

    WindowedSequence out;
    out.descriptors.resize(n, kWindowStats * channels);
    for (int i = 0; i < n; ++i) {
        const int offset = i * cfg.step;
        for (int c = 0; c < channels; ++c) {
            double stats[kWindowStats];
            window_stats_for(sequence.block(offset, c, width, 1), stats);
            for (int s = 0; s < kWindowStats; ++s) {
                out.descriptors(i, c * kWindowStats + s) = stats[s];
            }
        }
    }
    return out;
}

VideoSummary video_summary(const Eigen::Ref<const Matrix>& sequence) {
    const int frames = static_cast<int>(sequence.rows());
    const int channels = static_cast<int>(sequence.cols());
    if (frames < 2) throw ValidationError("video_summary needs at least 2 frames");
    if (!sequence.allFinite()) throw ValidationError("video_summary: sequence has non-finite entries");

    VideoSummary out;
    out.stats.resize(channels, kSummaryStats);
    for (int c = 0; c < channels; ++c) {
        double stats[kWindowStats];
        window_stats_for(sequence.col(c), stats);
        for (int s = 0; s < kWindowStats; ++s) out.stats(c, s) = stats[s];
        out.stats(c, static_cast<int>(SummaryStat::zcr)) =
            zero_crossing_rate(sequence.col(c), stats[0]);
    }
    return out;
}

std::string descriptor_column_name(int channel, int channels, WindowStat stat) {
    std::string base;
    if (channels == kNumAus) {
        base = au_codes()[static_cast<std::size_t>(channel)];
    } else {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "c%02d", channel);
        base = buf;
    }
    return base + "_" + stat_name(static_cast<SummaryStat>(stat));
}

}  // namespace divfuse

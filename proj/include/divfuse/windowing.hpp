#pragma once

#include "divfuse/common.hpp"

#include <array>
#include <string>

namespace divfuse {

// The 20 detector outputs used for the visual channel, in column order.
constexpr int kNumAus = 20;
const std::array<std::string, kNumAus>& au_codes();   // "AU01", "AU02", ...
const std::array<std::string, kNumAus>& au_labels();  // "inner brow raiser", ...

enum class WindowStat { mean = 0, std = 1, slope = 2, range = 3 };
enum class SummaryStat { mean = 0, std = 1, slope = 2, range = 3, zcr = 4 };
constexpr int kWindowStats = 4;
constexpr int kSummaryStats = 5;
const char* stat_name(SummaryStat s);

struct WindowConfig {
    int length = 16;
    int step = 8;
    void validate() const;  // length >= 2, 1 <= step <= length
};

// Per-window descriptors: one row per window, columns laid out channel-major,
// stat-minor: [c0.mean c0.std c0.slope c0.range c1.mean ...].
struct WindowedSequence {
    Matrix descriptors;  // N x (4 * channels)
};

// Whole-video statistics per channel, rows = channels, cols = SummaryStat.
struct VideoSummary {
    Matrix stats;  // channels x 5
};

// Number of full windows: floor((T - W)/S) + 1 for T >= W; a sequence shorter
// than the window yields a single window spanning all of it.
int window_count(int frames, const WindowConfig& cfg);

// Ordinary least-squares slope of values against indices 0..n-1. n >= 2.
double ls_slope(const Eigen::Ref<const Vector>& values);

// Fraction of consecutive pairs whose centered values have strictly opposite
// signs, over n-1 pairs. Values equal to the center carry the previous sign.
double zero_crossing_rate(const Eigen::Ref<const Vector>& values, double center);

WindowedSequence window_stats(const Eigen::Ref<const Matrix>& sequence, const WindowConfig& cfg);

// mean/std/slope/range/zcr per channel over the full sequence; zcr is centered
// at the channel's own mean. Requires T >= 2.
VideoSummary video_summary(const Eigen::Ref<const Matrix>& sequence);

// Column header for window descriptor CSVs, e.g. "AU06_std" for 20-channel
// input, "c03_slope" otherwise.
std::string descriptor_column_name(int channel, int channels, WindowStat stat);

}  // namespace divfuse

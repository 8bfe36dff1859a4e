#pragma once

#include "divfuse/common.hpp"

#include <string>
#include <vector>

namespace divfuse {

constexpr int kVisualDim = 20;
constexpr int kAudioDim = 768;
constexpr int kTextDim = 768;

enum class Split { train, val, test };
const char* split_name(Split s);
Split split_from_string(const std::string& s);

struct VideoSample {
    std::string id;
    int label = 0;  // 0 = no A/H, 1 = A/H
    Matrix visual;  // T_v x 20, entries >= 0
    Matrix audio;   // T_a x 768
    Vector text;    // 768
    Split split = Split::train;
};

// Throws ValidationError naming the sample id and the offending axis.
void validate_sample(const VideoSample& s);

struct Dataset {
    std::vector<VideoSample> samples;
    std::string manifest_path;

    std::vector<int> split_indices(Split s) const;
    std::vector<int> labels_of(Split s) const;
};

// Delimited numeric table, one timestep per row, '.' decimal, comma separated.
// Throws ParseError with row/column coordinates for non-numeric or non-finite
// cells, ValidationError on a column-count mismatch.
Matrix parse_feature_matrix(const std::string& path, int expected_cols);

// Full-precision writer; re-parsing yields bitwise-equal values. Atomic
// (temp file + rename).
void write_feature_matrix(const std::string& path, const Eigen::Ref<const Matrix>& m);

// Manifest: header line "id,label,split,visual_path,audio_path,text_path"
// followed by one record per line. Relative feature paths are resolved
// against the manifest's directory. The load is atomic: any bad record
// aborts with an error and no partial Dataset is returned.
Dataset load_manifest(const std::string& path);

// Writes feature files under dir/features/ and a manifest at dir/<name>.
std::string write_dataset(const Dataset& ds, const std::string& dir,
                          const std::string& manifest_name = "manifest.csv");

// Shared atomic text-file writer.
void write_text_atomic(const std::string& path, const std::string& contents);

// Shortest decimal form that round-trips the exact double ("%.17g").
std::string format_double(double v);

}  // namespace divfuse

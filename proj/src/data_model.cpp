#include "divfuse/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace fs = std::filesystem;

namespace divfuse {

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ManifestError("unknown split '" + s + "' (expected train|val|test)");
}

void validate_sample(const VideoSample& s) {
    auto fail = [&](const std::string& what) {
        throw ValidationError("sample '" + s.id + "': " + what);
    };
    if (s.label != 0 && s.label != 1) fail("label " + std::to_string(s.label) + " not in {0,1}");
    if (s.visual.cols() != kVisualDim) {
        fail("visual dim " + std::to_string(s.visual.cols()) + " != " + std::to_string(kVisualDim));
    }
    if (s.audio.cols() != kAudioDim) {
        fail("audio dim " + std::to_string(s.audio.cols()) + " != " + std::to_string(kAudioDim));
    }
    if (s.text.size() != kTextDim) {
        fail("text dim " + std::to_string(s.text.size()) + " != " + std::to_string(kTextDim));
    }
    if (s.visual.rows() < 1) fail("visual sequence is empty");
    if (s.audio.rows() < 1) fail("audio sequence is empty");
    if (!s.visual.allFinite()) fail("visual has non-finite entries");
    if (!s.audio.allFinite()) fail("audio has non-finite entries");
    if (!s.text.allFinite()) fail("text has non-finite entries");
    if ((s.visual.array() < 0.0).any()) fail("visual activations must be >= 0");
}

std::vector<int> Dataset::split_indices(Split s) const {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
        if (samples[i].split == s) idx.push_back(i);
    }
    return idx;
}

std::vector<int> Dataset::labels_of(Split s) const {
    std::vector<int> labels;
    for (const auto& sample : samples) {
        if (sample.split == s) labels.push_back(sample.label);
    }
    return labels;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim = ',') {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_cell(const std::string& cell, const std::string& path, int row, int col) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || first == last) {
        throw ParseError(path + ": non-numeric cell at row " + std::to_string(row + 1) +
                         ", column " + std::to_string(col + 1) + " ('" + cell + "')");
    }
    if (!std::isfinite(value)) {
        throw ParseError(path + ": non-finite value at row " + std::to_string(row + 1) +
                         ", column " + std::to_string(col + 1));
    }
    return value;
}

}  // namespace

Matrix parse_feature_matrix(const std::string& path, int expected_cols) {
    if (expected_cols < 1) throw ConfigError("expected_cols must be positive");
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open feature file '" + path + "'");

    std::vector<double> values;
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_line(line);
        if (static_cast<int>(cells.size()) != expected_cols) {
            throw ValidationError(path + ": row " + std::to_string(rows + 1) + " has " +
                                  std::to_string(cells.size()) + " columns, expected " +
                                  std::to_string(expected_cols));
        }
        for (int c = 0; c < expected_cols; ++c) {
            values.push_back(parse_cell(cells[static_cast<std::size_t>(c)], path, rows, c));
        }
        ++rows;
    }
    if (rows == 0) throw ValidationError(path + ": feature file has no rows");

    Matrix m(rows, expected_cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < expected_cols; ++c) {
            m(r, c) = values[static_cast<std::size_t>(r) * expected_cols + c];
        }
    }
    return m;
}

std::string format_double(double v) {
    char buf[40];
    // Shortest %g form whose parse is bit-identical; 17 digits always is.
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        const double back = std::strtod(buf, nullptr);
        if (back == v || (std::isnan(back) && std::isnan(v))) break;
    }
    return buf;
}

void write_text_atomic(const std::string& path, const std::string& contents) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IngestError("cannot write '" + tmp.string() + "'");
        out << contents;
        if (!out.good()) throw IngestError("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

void write_feature_matrix(const std::string& path, const Eigen::Ref<const Matrix>& m) {
    std::string body;
    body.reserve(static_cast<std::size_t>(m.size()) * 12);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c > 0) body.push_back(',');
            body += format_double(m(r, c));
        }
        body.push_back('\n');
    }
    write_text_atomic(path, body);
}

Dataset load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open manifest '" + path + "'");
    const fs::path base = fs::path(path).parent_path();

    std::string header;
    if (!std::getline(in, header)) throw ManifestError(path + ": empty manifest");
    const auto header_fields = split_line(header);
    const std::vector<std::string> expected = {"id",          "label",      "split",
                                               "visual_path", "audio_path", "text_path"};
    if (header_fields != expected) {
        throw ManifestError(path + ": bad header, expected 'id,label,split,visual_path,audio_path,text_path'");
    }

    auto resolve = [&](const std::string& p) {
        fs::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };

    Dataset ds;
    ds.manifest_path = path;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_line(line);
        if (fields.size() != 6) {
            throw ManifestError(path + ": line " + std::to_string(line_no) + " has " +
                                std::to_string(fields.size()) + " fields, expected 6");
        }
        VideoSample s;
        s.id = fields[0];
        if (s.id.empty()) throw ManifestError(path + ": line " + std::to_string(line_no) + " has empty id");
        if (!seen_ids.insert(s.id).second) {
            throw ManifestError(path + ": duplicate id '" + s.id + "'");
        }
        if (fields[1] == "0") {
            s.label = 0;
        } else if (fields[1] == "1") {
            s.label = 1;
        } else {
            throw ManifestError(path + ": sample '" + s.id + "' has label '" + fields[1] +
                                "', expected 0 or 1");
        }
        s.split = split_from_string(fields[2]);
        try {
            s.visual = parse_feature_matrix(resolve(fields[3]), kVisualDim);
            s.audio = parse_feature_matrix(resolve(fields[4]), kAudioDim);
            const Matrix text_row = parse_feature_matrix(resolve(fields[5]), kTextDim);
            if (text_row.rows() != 1) {
                throw ValidationError(resolve(fields[5]) + ": text file must have exactly 1 row, has " +
                                      std::to_string(text_row.rows()));
            }
            s.text = text_row.row(0).transpose();
        } catch (const IngestError& e) {
            throw IngestError("sample '" + s.id + "': " + e.what());
        } catch (const ParseError& e) {
            throw ParseError("sample '" + s.id + "': " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError("sample '" + s.id + "': " + e.what());
        }
        validate_sample(s);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

std::string write_dataset(const Dataset& ds, const std::string& dir, const std::string& manifest_name) {
    const fs::path root(dir);
    fs::create_directories(root / "features");

    std::string manifest = "id,label,split,visual_path,audio_path,text_path\n";
    for (const auto& s : ds.samples) {
        validate_sample(s);
        const std::string vis = "features/" + s.id + "_visual.csv";
        const std::string aud = "features/" + s.id + "_audio.csv";
        const std::string txt = "features/" + s.id + "_text.csv";
        write_feature_matrix((root / vis).string(), s.visual);
        write_feature_matrix((root / aud).string(), s.audio);
        write_feature_matrix((root / txt).string(), s.text.transpose());
        manifest += s.id + "," + std::to_string(s.label) + "," + split_name(s.split) + "," + vis +
                    "," + aud + "," + txt + "\n";
    }
    const std::string manifest_path = (root / manifest_name).string();
    write_text_atomic(manifest_path, manifest);
    return manifest_path;
}

}  // namespace divfuse

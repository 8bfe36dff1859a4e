#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace divfuse {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error taxonomy. The CLI maps these onto exit codes: config/usage -> 2,
// data (ingest/parse/manifest/validation) -> 3, numeric -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IngestError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct ManifestError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

// Numerically stable scalar primitives shared by the loss and the autodiff op.
double sigmoid(double x);
double softplus(double x);  // log(1 + e^x) without overflow

// Deterministic RNG. SplitMix64 core with explicit uniform/normal/int draws so
// streams are identical across standard libraries and platforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal();

    // inclusive bounds, rejection-sampled for exact uniformity
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derives an independent sub-stream seed, used for per-sample generation.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

  private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace divfuse

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace koop {

// ---------------------------------------------------------------------------
// Error taxonomy. The CLI maps these onto exit codes (config 2, numeric 3,
// I/O 4), so every failure raised below library level derives from one of
// the three branches.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct ParseError : IoError {
    ParseError(const std::string& msg, int line_number)
        : IoError(msg + " (line " + std::to_string(line_number) + ")"), line(line_number) {}
    int line;
};

struct NumericError : Error {
    using Error::Error;
};

struct IntegrationError : NumericError {
    IntegrationError(const std::string& msg, const std::string& term_name)
        : NumericError(msg + " [term: " + term_name + "]"), term(term_name) {}
    std::string term;
};

struct TrajectoryDiverged : NumericError {
    TrajectoryDiverged(const std::string& msg, int step_index)
        : NumericError(msg + " (step " + std::to_string(step_index) + ")"), step(step_index) {}
    int step;
};

struct FitError : NumericError {
    using NumericError::NumericError;
};

struct TrainingDiverged : NumericError {
    TrainingDiverged(const std::string& msg, int epoch_index)
        : NumericError(msg + " (epoch " + std::to_string(epoch_index) + ")"), epoch(epoch_index) {}
    int epoch;
};

// ---------------------------------------------------------------------------
// Deterministic RNG. All randomness in the project flows through RngStream so
// that sequences are reproducible bit-for-bit across runs and platforms
// (std::*_distribution is implementation-defined, so we do not use it).
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256** with splitmix64 seeding; uniform/normal draws are hand-rolled
/// so the byte stream depends only on the seed.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    /// Derive an independent stream for a sub-task (trajectory index, model
    /// index, ...); serial and parallel runs agree because each index owns
    /// its own stream.
    static RngStream derive(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t sm = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
        return RngStream(splitmix64(sm));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Marsaglia polar method (deterministic, no libm
    /// variation beyond sqrt/log).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, q;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            q = u * u + v * v;
        } while (q >= 1.0 || q == 0.0);
        const double f = std::sqrt(-2.0 * std::log(q) / q);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    /// Uniform integer in [0, n).
    std::size_t bounded(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

    /// Deterministic Fisher-Yates shuffle of an index vector.
    void shuffle(std::vector<int>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[bounded(i)]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Misc helpers
// ---------------------------------------------------------------------------

/// FNV-1a over a byte string, used for config fingerprints in manifests.
inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// Formats a double with enough digits to round-trip exactly ("%.17g").
std::string format_double(double v);

/// Runs fn(i) for i in [0, n). Work items are distributed over a small thread
/// pool; each index writes only its own slot, so results are identical to a
/// serial loop. The first exception thrown by any item is rethrown.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace koop

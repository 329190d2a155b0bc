#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sclab {

inline constexpr const char* kVersion = "0.1.0";

// Error hierarchy. DataError maps to CLI exit code 2, NumericError to 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

struct BadMagic : DataError { using DataError::DataError; };
struct TruncatedFile : DataError { using DataError::DataError; };
struct TruncatedRecord : DataError { using DataError::DataError; };
struct LengthMismatch : DataError { using DataError::DataError; };
struct LabelOutOfRange : DataError { using DataError::DataError; };
struct InsufficientSamples : DataError { using DataError::DataError; };
struct TooManyClasses : DataError { using DataError::DataError; };
struct AnchorOutOfBounds : DataError { using DataError::DataError; };
struct UnknownClass : DataError { using DataError::DataError; };
struct ShapeMismatch : DataError { using DataError::DataError; };
struct SplitMismatch : DataError { using DataError::DataError; };
struct InvalidConfig : DataError { using DataError::DataError; };
struct EmptyGroup : DataError { using DataError::DataError; };
struct BadCheckpoint : DataError { using DataError::DataError; };
struct Divergence : NumericError { using NumericError::NumericError; };

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Deterministic stream for a (seed, stream-id) pair, e.g. per training epoch.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream + 1));
}

// Deterministic RNG. Draws are explicit transforms of xorshift-style output so
// results do not depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0xD1B54A32D192ED03ULL)) {
        if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
    }

    uint64_t next_u64() {
        // xorshift64*
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545F4914F6CDD1DULL;
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // unbiased integer in [0, n)
    uint64_t below(uint64_t n) {
        if (n == 0) return 0;
        uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace sclab

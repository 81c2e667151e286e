#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace treedirac {

using cd = std::complex<double>;

/// Error carrying the pipeline stage that failed.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// Deterministic RNG independent of libstdc++ distribution details
/// (splitmix64 core), so seeded artifacts are byte-identical everywhere.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    /// uniform in [0,1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
    /// uniform in [lo,hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// uniform integer in [lo,hi] inclusive
    int uniform_int(int lo, int hi) {
        return lo + int(next_u64() % std::uint64_t(hi - lo + 1));
    }
};

inline bool near_integer(double x, double tol) {
    return std::abs(x - std::round(x)) <= tol;
}

}  // namespace treedirac

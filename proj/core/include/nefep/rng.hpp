#pragma once

#include <cstdint>
#include <random>

namespace nefep {

// splitmix64: the standard 64-bit finalizing mixer, used to derive
// per-trajectory substream seeds from (seed, run, index).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Per-trajectory Gaussian noise stream. The substream seed is a pure
// function of (seed, run, trajectory index), so the increment sequence is
// reproducible regardless of scheduling or thread count. Normal variates
// come from a Marsaglia-Tsang ziggurat over mt19937_64; the tables are
// built once at startup and the algorithm is fully specified here, so the
// stream is identical across standard libraries (std::normal_distribution
// is implementation-defined and would not be).
class NoiseStream {
  public:
    NoiseStream(std::uint64_t seed, std::uint64_t run, std::uint64_t index) {
        std::uint64_t s = seed;
        (void)splitmix64(s);
        s ^= 0x632be59bd9b4e019ULL * (run + 1);
        (void)splitmix64(s);
        s ^= 0x9e6c63d0876a9a47ULL * (index + 1);
        engine_.seed(splitmix64(s));
    }

    // uniform on (0,1], never 0 (safe under log)
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    }

    // uniform on (-1,1)
    double uniform_sym() {
        return static_cast<double>(static_cast<std::int64_t>(engine_())) * 0x1.0p-63;
    }

    double normal();

  private:
    double normal_tail(double x1, bool negative);

    std::mt19937_64 engine_;
};

}  // namespace nefep

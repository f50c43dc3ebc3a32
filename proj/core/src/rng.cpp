#include "nefep/rng.hpp"

#include <cmath>

namespace nefep {

namespace {

// Ziggurat layer tables (Doornik's ZIGNOR construction, 128 layers).
constexpr int kLayers = 128;
constexpr double kR = 3.442619855899;
constexpr double kV = 9.91256303526217e-3;

struct ZigTables {
    double x[kLayers + 1];
    double ratio[kLayers];
    ZigTables() {
        double f = std::exp(-0.5 * kR * kR);
        x[0] = kV / f;
        x[1] = kR;
        x[kLayers] = 0.0;
        for (int i = 2; i < kLayers; ++i) {
            x[i] = std::sqrt(-2.0 * std::log(kV / x[i - 1] + f));
            f = std::exp(-0.5 * x[i] * x[i]);
        }
        for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
    }
};

const ZigTables& tables() {
    static const ZigTables t;
    return t;
}

}  // namespace

double NoiseStream::normal_tail(double x1, bool negative) {
    double x, y;
    do {
        x = std::log(uniform()) / kR;
        y = std::log(uniform());
    } while (-2.0 * y < x * x);
    (void)x1;
    return negative ? x - kR : kR - x;
}

double NoiseStream::normal() {
    const ZigTables& t = tables();
    for (;;) {
        const std::uint64_t j = engine_();
        const int i = static_cast<int>(j & 0x7F);
        const double u = static_cast<double>(static_cast<std::int64_t>(j)) * 0x1.0p-63;
        if (std::abs(u) < t.ratio[i]) return u * t.x[i];
        if (i == 0) return normal_tail(kR, u < 0.0);
        const double x = u * t.x[i];
        const double f0 = std::exp(-0.5 * (t.x[i] * t.x[i] - x * x));
        const double f1 = std::exp(-0.5 * (t.x[i + 1] * t.x[i + 1] - x * x));
        if (f1 + uniform() * (f0 - f1) < 1.0) return x;
    }
}

}  // namespace nefep

#pragma once

// Reproducible substreams: stream i of a run is keyed by (seed, i) through a
// splitmix64 mix, so ensembles replay bit-identically and members are
// independent of evaluation order.  Normals come from an explicit Box-Muller
// transform (fixed consumption of two uniforms per pair) rather than
// std::normal_distribution, whose draw pattern is implementation-defined.

#include <cmath>
#include <cstdint>
#include <random>

namespace fracsource {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed;
        std::uint64_t a = splitmix64(s);
        s ^= 0x1234567f0e1d2c3bULL + stream * 0x9e3779b97f4a7c15ULL;
        std::uint64_t b = splitmix64(s);
        eng_.seed(a ^ (b << 1));
    }

    double uniform01() {
        // uniform in (0, 1]; never 0 so log() below is safe
        return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1p-53;
    }

    /// standard normal draw
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        double rad = std::sqrt(-2.0 * std::log(u1));
        double ang = 2.0 * M_PI * u2;
        spare_ = rad * std::sin(ang);
        have_spare_ = true;
        return rad * std::cos(ang);
    }

    /// uniform on [-1, 1]
    double symmetric_uniform() { return 2.0 * uniform01() - 1.0; }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace fracsource

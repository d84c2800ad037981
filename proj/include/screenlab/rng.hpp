#pragma once

#include <cmath>
#include <cstdint>

#include "screenlab/grid.hpp"

namespace screenlab {

// Counter-based generator: every record gets its own stream derived from
// (seed, record index), so datasets are reproducible and independent of
// generation order.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        state_ = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
        // warm up so nearby streams decorrelate
        splitmix64(state_);
        splitmix64(state_);
    }

    double uniform() {  // in (0,1)
        std::uint64_t r = splitmix64(state_);
        return (static_cast<double>(r >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Poisson by inversion of the CDF; fine at desk-scale means
    int poisson(double mean) {
        double u = uniform();
        double p = std::exp(-mean), c = p;
        int j = 0;
        while (u > c && j < 400) {
            ++j;
            p *= mean / j;
            c += p;
        }
        return j;
    }

    double sample(const GridDistribution& dist) { return dist.quantile(uniform()); }

  private:
    std::uint64_t state_;
};

}  // namespace screenlab

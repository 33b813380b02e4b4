#pragma once

// Small hand-rolled generators for property tests. Deterministic per seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace gen {

class Rng
{
  public:
    explicit Rng(std::uint64_t seed) : s_(seed ^ 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next()
    {
        std::uint64_t z = (s_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double uniform() { return (next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }
    double normal()
    {
        double u1 = uniform(), u2 = uniform();
        return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::vector<double> vector(std::size_t n, double lo = -1.0, double hi = 1.0)
    {
        std::vector<double> v(n);
        for (auto& x : v)
            x = uniform(lo, hi);
        return v;
    }

    // strictly increasing points inside (lo, hi), endpoints included
    std::vector<double> partition(double lo, double hi, std::size_t inner)
    {
        std::vector<double> v{lo, hi};
        for (std::size_t i = 0; i < inner; ++i)
            v.push_back(uniform(lo, hi));
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    }

  private:
    std::uint64_t s_;
};

} // namespace gen

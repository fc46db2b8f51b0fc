#pragma once

#include <cstdint>
#include <random>

namespace iffsm {

// One generator per sampler instance. Distributions are implemented here
// rather than taken from <random> so that a fixed seed reproduces the same
// draw sequence on every standard library.
//
// Stream splitting: Rng::stream(base, id) seeds an independent generator with
// splitmix64 applied to (base, id); experiment workers use id = seed index so
// results do not depend on how seeds are distributed over threads.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    static Rng stream(std::uint64_t base, std::uint64_t stream_id) {
        return Rng(splitmix64(splitmix64(base) ^ splitmix64(stream_id * 0xda942042e4dd58b5ull + 1)));
    }

    std::uint64_t bits() { return eng_(); }

    // strictly inside (0,1)
    double u01() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1p-53; }

    double uniform(double a, double b) { return a + (b - a) * u01(); }

    // [0, n), n >= 1, unbiased by rejection
    std::uint64_t uniform_int(std::uint64_t n);

    bool bernoulli(double p) { return u01() < p; }

    double normal();

    // shape-scale parameterization, mean = shape*scale
    double gamma(double shape, double scale);

    double beta(double a, double b);

    // density ~ x^-(shape+1) exp(-scale/x), mean = scale/(shape-1)
    double invgamma(double shape, double scale) { return scale / gamma(shape, 1.0); }

private:
    std::mt19937_64 eng_;
    double normal_cache_ = 0.0;
    bool have_cache_ = false;
};

} // namespace iffsm

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tripost {

// Portable draws on top of mt19937_64. The standard distributions are
// implementation-defined, so seeded streams would differ between stdlibs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform();                                  // [0, 1)
    std::uint64_t below(std::uint64_t n);              // [0, n)
    int between(int lo, int hi);                       // [lo, hi]
    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

std::uint64_t fnv1a(std::string_view s);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

// Selection sampling: k of n indices, ascending, uniform.
std::vector<std::size_t> sample_indices(Rng& rng, std::size_t n, std::size_t k);

}  // namespace tripost

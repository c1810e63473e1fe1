#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace idminer::num {

// xoshiro256** seeded through splitmix64. Fixed algorithm, no platform or
// standard-library dependence, so equal seeds give equal streams everywhere.
// Every stochastic choice in the pipeline draws from an instance of this
// generator whose seed is derived from the run seed and a purpose tag; that
// convention is what lets checkpoints omit generator state entirely.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform on [0, 1), 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi);

    // Unbiased integer on [0, n). n must be positive.
    std::uint64_t next_below(std::uint64_t n);

    // Standard normal via the polar method; second draw of each pair cached.
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        if (items.size() < 2) return;
        for (std::size_t i = items.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i + 1));
            std::swap(items[i], items[j]);
        }
    }

    // Sample k distinct indices from [0, n), in selection order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::uint64_t state_[4];
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

// FNV-1a over the tag bytes mixed into the base seed. Used to derive
// independent named substreams: derive_seed(run_seed, "batch", step), etc.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index);

}  // namespace idminer::num

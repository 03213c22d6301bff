#pragma once

#include <cstdint>
#include <vector>

namespace wtal {

// Counter-based deterministic RNG. A draw is a pure function of
// (seed, stream, counter), so independent streams can be carved off a single
// seed and replayed on any platform without shared state.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64();
    double uniform();                        // [0, 1)
    double normal();                         // standard normal, Box-Muller
    std::uint64_t uniform_int(std::uint64_t n);  // [0, n)

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace wtal

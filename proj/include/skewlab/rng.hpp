#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace skewlab {

// Philox4x32-10 counter-based generator. The 128-bit counter is (block index, stream),
// the 64-bit key is the seed, so every (seed, stream) pair is an independent sequence.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;
    using result_type = std::uint32_t;

    static Counter block(Counter ctr, Key key);

    explicit Philox4x32(std::uint64_t seed, std::uint64_t stream = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

    std::uint64_t next_u64();
    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    // Uniform integer in [0, n) by rejection.
    std::uint32_t below(std::uint32_t n);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t seed_, stream_;
    std::uint64_t index_ = 0;
    Counter buf_{};
    int used_ = 4;
};

}  // namespace skewlab

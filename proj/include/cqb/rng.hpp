#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace cqb {

// Philox4x32-10 counter-based generator. The 64-bit seed is the key; the 64-bit
// stream id occupies the upper counter words, so (seed, stream) pairs give
// independent sequences without any shared state.
class Philox4x32 {
   public:
    using result_type = std::uint32_t;
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit Philox4x32(std::uint64_t seed, std::uint64_t stream = 0);

    static Counter block(Counter counter, Key key);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

    // Uniform on the open interval (0, 1) with 53 random bits.
    double uniform();
    // Standard normal via Box-Muller; bit-identical on every platform with IEEE doubles
    // and a correctly rounded libm for log/sqrt/sin/cos.
    double normal();

   private:
    Key key_;
    Counter counter_;
    Counter buffer_{};
    unsigned used_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cqb

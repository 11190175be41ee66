#pragma once

// Counter-based random streams for reproducible problem generation.
//
// The generator is Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy
// as 1, 2, 3", SC'11) with the standard round constants. A stream is identified by
// (seed, stream id); the 64-bit seed is the 2x32 key, the stream id occupies the
// upper half of the 4x32 counter and a per-stream block index the lower half.
// Every stream is therefore independent of how many other streams exist or the
// order in which they are consumed.
//
// Derived variates:
//   uniform()  : top 53 bits of a 64-bit word, scaled to [0, 1)
//   normal()   : Box-Muller on (u1, u2) with u1 taken from (0, 1] so log(u1) is
//                finite; both outputs of a pair are used (cos first, then sin).
//                No draws are ever discarded.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace fedsplit
{

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds.
inline Philox4x32Counter philox4x32_10(Philox4x32Counter ctr, Philox4x32Key key)
{
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

/// Stream identifiers. Client-level streams are keyed by (purpose, client index)
/// so client j's data does not depend on m.
namespace stream
{
enum class Purpose : std::uint32_t
{
    Global = 0,
    Design = 1,
    Noise = 2,
    HaarLeft = 3,
    HaarRight = 4,
    Labels = 5,
    Test = 0xFFFF,
};

constexpr std::uint64_t id(Purpose purpose, std::uint32_t index = 0)
{
    return (std::uint64_t{static_cast<std::uint32_t>(purpose)} << 32) | index;
}
} // namespace stream

class RandomStream
{
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream_id)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream_id)
    {
    }

    std::uint64_t next_u64()
    {
        if (lane_ == 4) {
            refill();
        }
        const std::uint64_t lo = buffer_[lane_];
        const std::uint64_t hi = buffer_[lane_ + 1];
        lane_ += 2;
        return (hi << 32) | lo;
    }

    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_open_zero()
    {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open_zero();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    std::uint64_t blocks_consumed() const noexcept { return block_; }

private:
    void refill()
    {
        const Philox4x32Counter ctr{static_cast<std::uint32_t>(block_),
                                    static_cast<std::uint32_t>(block_ >> 32),
                                    static_cast<std::uint32_t>(stream_),
                                    static_cast<std::uint32_t>(stream_ >> 32)};
        buffer_ = philox4x32_10(ctr, key_);
        ++block_;
        lane_ = 0;
    }

    Philox4x32Key key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    Philox4x32Counter buffer_{};
    int lane_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace fedsplit

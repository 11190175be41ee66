#include <gtest/gtest.h>

#include <set>

#include "fedsplit/rng.hpp"

using namespace fedsplit;

TEST(Philox, KnownAnswerZero)
{
    const auto out = philox4x32_10({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out, (Philox4x32Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerOnes)
{
    const auto out = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                   {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out, (Philox4x32Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi)
{
    const auto out = philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                   {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out, (Philox4x32Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(RandomStream, FirstWordIsFirstTwoLanes)
{
    RandomStream rng(0, 0);
    EXPECT_EQ(rng.next_u64(), (std::uint64_t{0xe169c58du} << 32) | 0x6627e8d5u);
    EXPECT_EQ(rng.next_u64(), (std::uint64_t{0x9b00dbd8u} << 32) | 0xbc57ac4cu);
    EXPECT_EQ(rng.blocks_consumed(), 1u);
}

TEST(RandomStream, ReproducibleAndStreamSeparated)
{
    RandomStream a(42, stream::id(stream::Purpose::Design, 3));
    RandomStream b(42, stream::id(stream::Purpose::Design, 3));
    RandomStream c(42, stream::id(stream::Purpose::Design, 4));
    RandomStream d(43, stream::id(stream::Purpose::Design, 3));
    int same_c = 0;
    int same_d = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        same_c += x == c.next_u64();
        same_d += x == d.next_u64();
    }
    EXPECT_EQ(same_c, 0);
    EXPECT_EQ(same_d, 0);
}

TEST(RandomStream, StreamIdPacksPurposeAndIndex)
{
    EXPECT_EQ(stream::id(stream::Purpose::Noise, 5), (std::uint64_t{2} << 32) | 5u);
    EXPECT_EQ(stream::id(stream::Purpose::Global), 0u);
}

TEST(RandomStream, UniformRangeAndMoments)
{
    RandomStream rng(7, stream::id(stream::Purpose::Test));
    const int n = 200000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        sq += u * u;
    }
    EXPECT_NEAR(sum / n, 0.5, 5e-3);
    EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 2e-3);
}

TEST(RandomStream, OpenZeroUniformNeverZero)
{
    RandomStream rng(9, 0);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform_open_zero();
        ASSERT_GT(u, 0.0);
        ASSERT_LE(u, 1.0);
    }
}

TEST(RandomStream, NormalMoments)
{
    RandomStream rng(11, stream::id(stream::Purpose::Test, 1));
    const int n = 200000;
    double m1 = 0.0;
    double m2 = 0.0;
    double m4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        m1 += z;
        m2 += z * z;
        m4 += z * z * z * z;
    }
    EXPECT_NEAR(m1 / n, 0.0, 1e-2);
    EXPECT_NEAR(m2 / n, 1.0, 1.5e-2);
    EXPECT_NEAR(m4 / n, 3.0, 0.1);
}

TEST(RandomStream, NormalPairUsesCosThenSin)
{
    RandomStream words(5, 1);
    const double u1 = static_cast<double>((words.next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(words.next_u64() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    RandomStream rng(5, 1);
    EXPECT_DOUBLE_EQ(rng.normal(), r * std::cos(2.0 * std::numbers::pi * u2));
    EXPECT_DOUBLE_EQ(rng.normal(), r * std::sin(2.0 * std::numbers::pi * u2));
}

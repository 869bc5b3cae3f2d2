#include "support.hpp"

#include "solvaudit/numeric.hpp"
#include "solvaudit/testkit.hpp"

using namespace solvaudit;

TEST(Decimal, ParsePrintKeepsScale)
{
    EXPECT_EQ(Decimal::parse("12.50").to_string(), "12.50");
    EXPECT_EQ(Decimal::parse("-0.001").to_string(), "-0.001");
    EXPECT_EQ(Decimal::parse("7").to_string(), "7");
    EXPECT_EQ(Decimal::parse("0.000").to_string(), "0.000");
}

TEST(Decimal, RejectsJunk)
{
    Decimal d;
    for (const char *bad : {"", ".", "1e5", "1,000", " 1", "1.", "+-1", "abc", "1.2.3"})
        EXPECT_FALSE(Decimal::try_parse(bad, d)) << bad;
    EXPECT_ERRC(Decimal::parse("x"), Errc::MalformedRow);
}

TEST(Decimal, ValueComparisonIgnoresScale)
{
    EXPECT_EQ(Decimal::parse("1.50"), Decimal::parse("1.5"));
    EXPECT_LT(Decimal::parse("-2"), Decimal::parse("-1.99"));
}

TEST(Decimal, HalfEvenRounding)
{
    EXPECT_EQ(Decimal::parse("0.125").round_half_even(2).to_string(), "0.12");
    EXPECT_EQ(Decimal::parse("0.135").round_half_even(2).to_string(), "0.14");
    EXPECT_EQ(Decimal::parse("0.1251").round_half_even(2).to_string(), "0.13");
    EXPECT_EQ(Decimal::parse("-0.125").round_half_even(2).to_string(), "-0.12");
    EXPECT_EQ(Decimal::parse("2.5").round_half_even(0).to_string(), "2");
    EXPECT_EQ(Decimal::parse("3.5").round_half_even(0).to_string(), "4");
}

TEST(Decimal, Divide)
{
    EXPECT_EQ(Decimal::divide(Decimal::parse("7559"), Decimal::parse("10000"), 4).to_string(), "0.7559");
    EXPECT_EQ(Decimal::divide(Decimal::parse("1"), Decimal::parse("3"), 4).to_string(), "0.3333");
    EXPECT_EQ(Decimal::divide(Decimal::parse("2"), Decimal::parse("3"), 4).to_string(), "0.6667");
    // 0.00005 exactly on the boundary rounds to even.
    EXPECT_EQ(Decimal::divide(Decimal::parse("1"), Decimal::parse("20000"), 4).to_string(), "0.0000");
    EXPECT_EQ(Decimal::divide(Decimal::parse("3"), Decimal::parse("20000"), 4).to_string(), "0.0002");
    EXPECT_EQ(Decimal::divide(Decimal::parse("-1"), Decimal::parse("3"), 2).to_string(), "-0.33");
}

TEST(Decimal, RandomArithmeticMatchesIntegers)
{
    testkit::SplitMix64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        const auto a = static_cast<std::int64_t>(rng.below(2'000'000)) - 1'000'000;
        const auto b = static_cast<std::int64_t>(rng.below(2'000'000)) - 1'000'000;
        const unsigned sa = static_cast<unsigned>(rng.below(5));
        const unsigned sb = static_cast<unsigned>(rng.below(5));
        const Decimal da(a, sa), db(b, sb);
        // Compare at a common scale of 8 digits.
        const BigInt ua = BigInt(a) * pow10(8 - sa), ub = BigInt(b) * pow10(8 - sb);
        EXPECT_EQ((da + db).rescaled(8).units(), ua + ub);
        EXPECT_EQ((da - db).rescaled(8).units(), ua - ub);
        EXPECT_EQ((da * db).units(), BigInt(a) * b);
        EXPECT_EQ((da * db).scale(), sa + sb);
        EXPECT_EQ(Decimal::parse(da.to_string()), da);
    }
}

TEST(BigIntText, ParseUnsigned)
{
    BigInt v;
    EXPECT_TRUE(parse_unsigned("0", v));
    EXPECT_EQ(v, 0);
    EXPECT_TRUE(parse_unsigned("1361129467683753853853498429727072845824", v));
    EXPECT_EQ(v, BigInt(1) << 130);
    EXPECT_FALSE(parse_unsigned("-5", v));
    EXPECT_FALSE(parse_unsigned("", v));
    EXPECT_FALSE(parse_unsigned("1 ", v));
    EXPECT_EQ(max_uint256(), (BigInt(1) << 256) - 1);
    EXPECT_EQ(to_string(BigInt(1) << 130), "1361129467683753853853498429727072845824");
}

TEST(Dates, ParseFormatAndDayBounds)
{
    const Date d = parse_date("2021-12-31");
    EXPECT_EQ(format_date(d), "2021-12-31");
    EXPECT_EQ(day_start(d), 1640908800);
    EXPECT_EQ(day_end(d), 1640995199);
    EXPECT_EQ(date_of(1640995199), d);
    EXPECT_EQ(date_of(1640995200), d + std::chrono::days{1});
    Date out;
    for (const char *bad : {"2021-13-01", "2021-02-30", "21-01-01", "2021/01/01", "2021-1-1", ""})
        EXPECT_FALSE(try_parse_date(bad, out)) << bad;
    EXPECT_TRUE(try_parse_date("2020-02-29", out));
}

TEST(SplitMix, ReferenceOutputs)
{
    // First outputs for seed 0 of the published SplitMix64 reference.
    testkit::SplitMix64 rng(0);
    EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
    EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ULL);
    EXPECT_EQ(rng.next(), 0x06C45D188009454FULL);
}

TEST(SplitMix, BelowStaysInRange)
{
    testkit::SplitMix64 rng(3);
    std::array<int, 7> hits{};
    for (int i = 0; i < 7000; ++i)
        ++hits[rng.below(7)];
    for (int h : hits)
        EXPECT_GT(h, 800);
    for (int i = 0; i < 1000; ++i) {
        const auto v = rng.between(5, 9);
        EXPECT_GE(v, 5u);
        EXPECT_LE(v, 9u);
    }
}

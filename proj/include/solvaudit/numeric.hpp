#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace solvaudit {

// Signed arbitrary-precision integer used for every base-unit amount.
using BigInt = boost::multiprecision::cpp_int;

// 2^256 - 1, the largest transfer value accepted on input.
const BigInt &max_uint256();

// Parses a plain unsigned decimal string ("0", "123"); no sign, no
// whitespace, no grouping. Returns false on any other input.
bool parse_unsigned(std::string_view text, BigInt &out);

BigInt pow10(unsigned exponent);

// Exact fixed-point decimal: value = units / 10^scale.
//
// Arithmetic never rounds. Rounding happens only through round_half_even()
// or divide(), both of which use banker's rounding.
class Decimal {
public:
    Decimal() = default;
    Decimal(BigInt units, unsigned scale);
    static Decimal from_integer(const BigInt &value) { return Decimal(value, 0); }

    // Accepts "-12", "12.5", "0.000"; rejects exponents, grouping and a bare ".".
    static Decimal parse(std::string_view text);
    static bool try_parse(std::string_view text, Decimal &out);

    const BigInt &units() const noexcept { return units_; }
    unsigned scale() const noexcept { return scale_; }
    int sign() const noexcept { return units_.sign(); }

    // Exact when target >= scale(); otherwise rounds half-even.
    Decimal rescaled(unsigned target) const;
    Decimal round_half_even(unsigned target) const { return rescaled(target); }

    // num / den rounded half-even to `scale` fractional digits. den != 0.
    static Decimal divide(const Decimal &num, const Decimal &den, unsigned scale);

    // Always prints exactly scale() fractional digits.
    std::string to_string() const;
    double to_double() const;

    friend Decimal operator+(const Decimal &a, const Decimal &b);
    friend Decimal operator-(const Decimal &a, const Decimal &b);
    friend Decimal operator*(const Decimal &a, const Decimal &b);
    Decimal operator-() const { return Decimal(-units_, scale_); }
    Decimal &operator+=(const Decimal &other) { return *this = *this + other; }

    // Value comparison: 1.50 == 1.5.
    friend std::strong_ordering operator<=>(const Decimal &a, const Decimal &b);
    friend bool operator==(const Decimal &a, const Decimal &b) { return (a <=> b) == 0; }

private:
    BigInt units_{0};
    unsigned scale_{0};
};

// Calendar day in UTC.
using Date = std::chrono::sys_days;

// Strict "YYYY-MM-DD".
bool try_parse_date(std::string_view text, Date &out);
Date parse_date(std::string_view text);
std::string format_date(Date day);

Date date_of(std::uint64_t unix_seconds);
std::int64_t day_start(Date day);
// Last second belonging to `day`.
std::int64_t day_end(Date day);

std::string to_string(const BigInt &value);

} // namespace solvaudit

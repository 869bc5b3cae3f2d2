#include "solvaudit/numeric.hpp"

#include <algorithm>
#include <charconv>
#include <vector>

#include <fmt/format.h>

#include "solvaudit/error.hpp"

namespace solvaudit {

namespace {

bool all_digits(std::string_view text)
{
    return !text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Divides a by b (b > 0) rounding half-even.
BigInt div_half_even(const BigInt &a, const BigInt &b)
{
    BigInt q = a / b;
    BigInt r = a % b;
    if (r == 0)
        return q;
    BigInt twice = abs(r) * 2;
    const int away = a.sign() < 0 ? -1 : 1;
    if (twice > b || (twice == b && (q & 1) != 0))
        q += away;
    return q;
}

} // namespace

const BigInt &max_uint256()
{
    static const BigInt value = (BigInt(1) << 256) - 1;
    return value;
}

bool parse_unsigned(std::string_view text, BigInt &out)
{
    if (!all_digits(text))
        return false;
    // 18-digit chunks always fit in a uint64_t.
    BigInt acc = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t len = std::min<std::size_t>(18, text.size() - pos);
        std::uint64_t chunk = 0;
        std::from_chars(text.data() + pos, text.data() + pos + len, chunk);
        acc = acc * pow10(static_cast<unsigned>(len)) + chunk;
        pos += len;
    }
    out = std::move(acc);
    return true;
}

BigInt pow10(unsigned exponent)
{
    static const std::vector<BigInt> table = [] {
        std::vector<BigInt> t(80);
        t[0] = 1;
        for (std::size_t i = 1; i < t.size(); ++i)
            t[i] = t[i - 1] * 10;
        return t;
    }();
    if (exponent < table.size())
        return table[exponent];
    return boost::multiprecision::pow(BigInt(10), exponent);
}

Decimal::Decimal(BigInt units, unsigned scale) : units_(std::move(units)), scale_(scale) {}

bool Decimal::try_parse(std::string_view text, Decimal &out)
{
    bool negative = false;
    if (!text.empty() && text.front() == '-') {
        negative = true;
        text.remove_prefix(1);
    }
    const auto dot = text.find('.');
    std::string_view whole = text.substr(0, dot);
    std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
    if (!all_digits(whole))
        return false;
    if (dot != std::string_view::npos && !all_digits(frac))
        return false;
    BigInt w, f;
    parse_unsigned(whole, w);
    if (!frac.empty())
        parse_unsigned(frac, f);
    const auto scale = static_cast<unsigned>(frac.size());
    BigInt units = w * pow10(scale) + f;
    if (negative)
        units = -units;
    out = Decimal(std::move(units), scale);
    return true;
}

Decimal Decimal::parse(std::string_view text)
{
    Decimal d;
    if (!try_parse(text, d))
        throw Error(Errc::MalformedRow, fmt::format("not a decimal number: '{}'", text));
    return d;
}

Decimal Decimal::rescaled(unsigned target) const
{
    if (target >= scale_)
        return Decimal(units_ * pow10(target - scale_), target);
    return Decimal(div_half_even(units_, pow10(scale_ - target)), target);
}

Decimal Decimal::divide(const Decimal &num, const Decimal &den, unsigned scale)
{
    // num/den = (n / 10^sn) / (d / 10^sd); scaled by 10^scale:
    // n * 10^(scale + sd) / (d * 10^sn)
    BigInt n = num.units_ * pow10(scale + den.scale_);
    BigInt d = den.units_ * pow10(num.scale_);
    if (d.sign() < 0) {
        n = -n;
        d = -d;
    }
    return Decimal(div_half_even(n, d), scale);
}

std::string Decimal::to_string() const
{
    std::string digits = BigInt(abs(units_)).str();
    if (digits.size() <= scale_)
        digits.insert(0, scale_ + 1 - digits.size(), '0');
    if (scale_ > 0)
        digits.insert(digits.size() - scale_, 1, '.');
    if (units_.sign() < 0)
        digits.insert(0, 1, '-');
    return digits;
}

double Decimal::to_double() const
{
    return units_.convert_to<double>() / pow10(scale_).convert_to<double>();
}

Decimal operator+(const Decimal &a, const Decimal &b)
{
    const unsigned s = std::max(a.scale_, b.scale_);
    return Decimal(a.rescaled(s).units_ + b.rescaled(s).units_, s);
}

Decimal operator-(const Decimal &a, const Decimal &b)
{
    return a + (-b);
}

Decimal operator*(const Decimal &a, const Decimal &b)
{
    return Decimal(a.units_ * b.units_, a.scale_ + b.scale_);
}

std::strong_ordering operator<=>(const Decimal &a, const Decimal &b)
{
    const unsigned s = std::max(a.scale_, b.scale_);
    const BigInt lhs = a.rescaled(s).units_;
    const BigInt rhs = b.rescaled(s).units_;
    if (lhs < rhs)
        return std::strong_ordering::less;
    if (lhs > rhs)
        return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

bool try_parse_date(std::string_view text, Date &out)
{
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        return false;
    int y = 0;
    unsigned m = 0, d = 0;
    auto digits = [](std::string_view s, auto &v) {
        if (!all_digits(s))
            return false;
        return std::from_chars(s.data(), s.data() + s.size(), v).ec == std::errc{};
    };
    if (!digits(text.substr(0, 4), y) || !digits(text.substr(5, 2), m) || !digits(text.substr(8, 2), d))
        return false;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok())
        return false;
    out = Date(ymd);
    return true;
}

Date parse_date(std::string_view text)
{
    Date d;
    if (!try_parse_date(text, d))
        throw Error(Errc::MalformedRow, fmt::format("not an ISO-8601 day: '{}'", text));
    return d;
}

std::string format_date(Date day)
{
    const std::chrono::year_month_day ymd{day};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                       static_cast<unsigned>(ymd.day()));
}

Date date_of(std::uint64_t unix_seconds)
{
    return std::chrono::floor<std::chrono::days>(std::chrono::sys_seconds{std::chrono::seconds{unix_seconds}});
}

std::int64_t day_start(Date day)
{
    return std::chrono::duration_cast<std::chrono::seconds>(day.time_since_epoch()).count();
}

std::int64_t day_end(Date day)
{
    return day_start(day) + 86400 - 1;
}

std::string to_string(const BigInt &value)
{
    return value.str();
}

} // namespace solvaudit

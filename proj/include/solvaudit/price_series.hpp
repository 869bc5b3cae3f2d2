#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "solvaudit/numeric.hpp"

namespace solvaudit {

struct PriceQuote {
    Date date;
    Decimal eur_per_unit;
};

// Daily EUR prices per asset symbol.
class PriceSeries {
public:
    using Points = std::map<Date, Decimal>;

    // Returns false if (asset, date) is already present.
    bool insert(const std::string &asset, Date date, Decimal eur_per_unit);

    std::optional<Decimal> exact(std::string_view asset, Date date) const;
    // Latest quote on or before `date` and no older than `window_days`.
    std::optional<PriceQuote> latest(std::string_view asset, Date date, int window_days) const;
    // Like latest() but throws StalePrice.
    PriceQuote require(std::string_view asset, Date date, int window_days) const;

    const std::map<std::string, Points, std::less<>> &assets() const noexcept { return series_; }
    bool empty() const noexcept { return series_.empty(); }

private:
    std::map<std::string, Points, std::less<>> series_;
};

} // namespace solvaudit

#pragma once

// Coverage of declared balance-sheet crypto assets by on-chain holdings.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "solvaudit/holdings.hpp"
#include "solvaudit/ingest.hpp"

namespace solvaudit {

// on-chain / declared, rounded half-even to four places. Declared zero maps
// to 1 (nothing held, nothing declared) or to a signed infinity.
class CoverageRatio {
public:
    enum class Kind { Finite, PositiveInfinity, NegativeInfinity };

    static CoverageRatio finite(Decimal value) { return CoverageRatio(Kind::Finite, std::move(value)); }
    static CoverageRatio infinity(bool negative)
    {
        return CoverageRatio(negative ? Kind::NegativeInfinity : Kind::PositiveInfinity, Decimal());
    }
    // "0.7559", "inf" or "-inf".
    static CoverageRatio parse(std::string_view text);

    Kind kind() const noexcept { return kind_; }
    bool is_finite() const noexcept { return kind_ == Kind::Finite; }
    const Decimal &value() const noexcept { return value_; }
    std::string to_string() const;

    friend bool operator==(const CoverageRatio &, const CoverageRatio &) = default;

private:
    CoverageRatio(Kind kind, Decimal value) : kind_(kind), value_(std::move(value)) {}
    Kind kind_;
    Decimal value_;
};

inline constexpr unsigned kRatioScale = 4;

// Throws NegativeInput when declared < 0.
CoverageRatio coverage_ratio(const Decimal &onchain_eur, const Decimal &declared_eur);

enum class Verdict { Covered, CoveredExcess, Shortfall, InsufficientData };

std::string_view to_string(Verdict verdict) noexcept;
Verdict parse_verdict(std::string_view text);

struct Thresholds {
    Decimal theta_low{4, 1};
    int lookback_days = 30;
    int price_window_days = kDefaultPriceWindowDays;
};

// SHORTFALL below theta_low, COVERED up to 1, COVERED_EXCESS above.
Verdict classify(const CoverageRatio &ratio, const Decimal &theta_low);

struct CoverageEntry {
    std::string entity;
    Date report_date;
    std::optional<Decimal> onchain_eur;
    std::optional<Decimal> declared_eur;
    std::optional<CoverageRatio> ratio;
    bool is_proxy = false;
    Verdict verdict = Verdict::InsufficientData;

    friend bool operator==(const CoverageEntry &, const CoverageEntry &) = default;
};

struct ReconciliationReport {
    Thresholds config;
    // Extra key/value pairs echoed into the report's config block.
    std::vector<std::pair<std::string, std::string>> config_extra;
    std::vector<CoverageEntry> entries;
    std::vector<std::string> warnings;

    // Appends another report's entries and warnings.
    void merge(ReconciliationReport other);
    bool has_shortfall() const;
};

// One entry per balance-sheet record of `entity`, plus INSUFFICIENT_DATA
// entries for `audit_dates` that have no record.
ReconciliationReport assess(const std::string &entity, const std::map<std::string, BalanceSeries> &series,
                            const AssetRegistry &registry, const PriceSeries &prices,
                            std::span<const BalanceSheetRecord> balance_sheets, const Thresholds &thresholds = {},
                            std::span<const Date> audit_dates = {});

// Entity is consistent when it has assessed entries and none is SHORTFALL.
std::map<std::string, bool> entity_consistency(const ReconciliationReport &report);

enum class ReportFormat { Json, Csv };

// Throws UnsupportedFormat.
ReportFormat parse_report_format(std::string_view name);

// Entries sorted by (entity, report_date); stable key order.
std::string emit_report(const ReconciliationReport &report, ReportFormat format);
std::string emit_report(const ReconciliationReport &report, std::string_view format);

ReconciliationReport parse_report_json(std::string_view text);

} // namespace solvaudit

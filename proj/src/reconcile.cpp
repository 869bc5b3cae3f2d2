#include "solvaudit/reconcile.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace solvaudit {

using ojson = nlohmann::ordered_json;

CoverageRatio CoverageRatio::parse(std::string_view text)
{
    if (text == "inf")
        return infinity(false);
    if (text == "-inf")
        return infinity(true);
    return finite(Decimal::parse(text));
}

std::string CoverageRatio::to_string() const
{
    switch (kind_) {
    case Kind::PositiveInfinity: return "inf";
    case Kind::NegativeInfinity: return "-inf";
    case Kind::Finite: break;
    }
    return value_.to_string();
}

CoverageRatio coverage_ratio(const Decimal &onchain_eur, const Decimal &declared_eur)
{
    if (declared_eur.sign() < 0)
        throw Error(Errc::NegativeInput, "declared EUR must not be negative: " + declared_eur.to_string());
    if (declared_eur.sign() == 0) {
        if (onchain_eur.sign() == 0)
            return CoverageRatio::finite(Decimal(pow10(kRatioScale), kRatioScale));
        return CoverageRatio::infinity(onchain_eur.sign() < 0);
    }
    return CoverageRatio::finite(Decimal::divide(onchain_eur, declared_eur, kRatioScale));
}

std::string_view to_string(Verdict verdict) noexcept
{
    switch (verdict) {
    case Verdict::Covered: return "COVERED";
    case Verdict::CoveredExcess: return "COVERED_EXCESS";
    case Verdict::Shortfall: return "SHORTFALL";
    case Verdict::InsufficientData: return "INSUFFICIENT_DATA";
    }
    return "INSUFFICIENT_DATA";
}

Verdict parse_verdict(std::string_view text)
{
    for (Verdict v : {Verdict::Covered, Verdict::CoveredExcess, Verdict::Shortfall, Verdict::InsufficientData})
        if (to_string(v) == text)
            return v;
    throw Error(Errc::MalformedLine, fmt::format("unknown verdict '{}'", text));
}

Verdict classify(const CoverageRatio &ratio, const Decimal &theta_low)
{
    switch (ratio.kind()) {
    case CoverageRatio::Kind::PositiveInfinity: return Verdict::CoveredExcess;
    case CoverageRatio::Kind::NegativeInfinity: return Verdict::Shortfall;
    case CoverageRatio::Kind::Finite: break;
    }
    if (ratio.value() < theta_low)
        return Verdict::Shortfall;
    if (ratio.value() <= Decimal(1, 0))
        return Verdict::Covered;
    return Verdict::CoveredExcess;
}

void ReconciliationReport::merge(ReconciliationReport other)
{
    for (auto &e : other.entries)
        entries.push_back(std::move(e));
    for (auto &w : other.warnings)
        warnings.push_back(std::move(w));
}

bool ReconciliationReport::has_shortfall() const
{
    return std::any_of(entries.begin(), entries.end(),
                       [](const CoverageEntry &e) { return e.verdict == Verdict::Shortfall; });
}

ReconciliationReport assess(const std::string &entity, const std::map<std::string, BalanceSeries> &series,
                            const AssetRegistry &registry, const PriceSeries &prices,
                            std::span<const BalanceSheetRecord> balance_sheets, const Thresholds &thresholds,
                            std::span<const Date> audit_dates)
{
    ReconciliationReport report;
    report.config = thresholds;

    std::map<Date, const BalanceSheetRecord *> records;
    for (const auto &r : balance_sheets)
        if (r.entity == entity)
            records.emplace(r.report_date, &r);
    std::set<Date> dates;
    for (const auto &[d, r] : records)
        dates.insert(d);
    dates.insert(audit_dates.begin(), audit_dates.end());

    for (const auto &[asset, s] : series)
        if (s.data_gap)
            report.warnings.push_back(s.data_gap->message);

    for (Date date : dates) {
        CoverageEntry entry;
        entry.entity = entity;
        entry.report_date = date;
        auto rec = records.find(date);
        if (rec != records.end()) {
            entry.declared_eur = rec->second->crypto_assets_eur;
            entry.is_proxy = rec->second->is_proxy;
        }
        auto insufficient = [&](std::string why) {
            report.warnings.push_back(fmt::format("{} {}: {}", entity, format_date(date), why));
            entry.verdict = Verdict::InsufficientData;
            report.entries.push_back(entry);
        };

        const std::int64_t end = day_end(date);
        const std::int64_t earliest = day_start(date - std::chrono::days{thresholds.lookback_days});
        std::map<std::string, BigInt> balances;
        std::string missing;
        if (series.empty())
            missing = "no on-chain series";
        for (const auto &[asset, s] : series) {
            auto seen = s.last_observation(end);
            if (!seen || static_cast<std::int64_t>(*seen) < earliest) {
                missing = fmt::format("no on-chain {} observation within {} days", asset, thresholds.lookback_days);
                break;
            }
            balances[asset] += s.balance_at_time(static_cast<std::int64_t>(*seen));
        }
        if (!missing.empty()) {
            insufficient(missing);
            continue;
        }
        Valuation value;
        try {
            value = valuate_balances(balances, registry, prices, date, thresholds.price_window_days);
        } catch (const Error &e) {
            if (e.code() != Errc::StalePrice && e.code() != Errc::UnknownAsset)
                throw;
            insufficient(e.what());
            continue;
        }
        for (auto &w : value.warnings)
            report.warnings.push_back(fmt::format("{}: {}", entity, w));
        entry.onchain_eur = value.total_eur;
        if (!entry.declared_eur) {
            insufficient("no balance-sheet record");
            continue;
        }
        entry.ratio = coverage_ratio(*entry.onchain_eur, *entry.declared_eur);
        entry.verdict = classify(*entry.ratio, thresholds.theta_low);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

std::map<std::string, bool> entity_consistency(const ReconciliationReport &report)
{
    std::map<std::string, bool> out;
    std::map<std::string, int> assessed;
    for (const auto &e : report.entries) {
        auto [it, inserted] = out.try_emplace(e.entity, true);
        if (e.verdict == Verdict::InsufficientData)
            continue;
        ++assessed[e.entity];
        if (e.verdict == Verdict::Shortfall)
            it->second = false;
    }
    for (auto &[entity, ok] : out)
        ok = ok && assessed[entity] > 0;
    return out;
}

ReportFormat parse_report_format(std::string_view name)
{
    if (name == "json")
        return ReportFormat::Json;
    if (name == "csv")
        return ReportFormat::Csv;
    throw Error(Errc::UnsupportedFormat, fmt::format("unsupported report format '{}'", name));
}

namespace {

std::vector<const CoverageEntry *> sorted_entries(const ReconciliationReport &report)
{
    std::vector<const CoverageEntry *> out;
    for (const auto &e : report.entries)
        out.push_back(&e);
    std::stable_sort(out.begin(), out.end(), [](const CoverageEntry *a, const CoverageEntry *b) {
        return std::tie(a->entity, a->report_date) < std::tie(b->entity, b->report_date);
    });
    return out;
}

std::string opt_string(const std::optional<Decimal> &d)
{
    return d ? d->to_string() : std::string();
}

} // namespace

std::string emit_report(const ReconciliationReport &report, ReportFormat format)
{
    const auto entries = sorted_entries(report);
    if (format == ReportFormat::Csv) {
        std::string out = "entity,report_date,onchain_eur,declared_eur,ratio,is_proxy,verdict\n";
        for (const auto *e : entries)
            out += join_csv({e->entity, format_date(e->report_date), opt_string(e->onchain_eur),
                             opt_string(e->declared_eur), e->ratio ? e->ratio->to_string() : std::string(),
                             e->is_proxy ? "true" : "false", std::string(to_string(e->verdict))}) +
                   '\n';
        return out;
    }

    ojson j;
    ojson config;
    config["theta_low"] = report.config.theta_low.to_string();
    config["lookback_days"] = report.config.lookback_days;
    config["price_window_days"] = report.config.price_window_days;
    for (const auto &[k, v] : report.config_extra)
        config[k] = v;
    j["config"] = std::move(config);
    ojson arr = ojson::array();
    for (const auto *e : entries) {
        ojson row;
        row["entity"] = e->entity;
        row["report_date"] = format_date(e->report_date);
        row["onchain_eur"] = e->onchain_eur ? ojson(e->onchain_eur->to_string()) : ojson(nullptr);
        row["declared_eur"] = e->declared_eur ? ojson(e->declared_eur->to_string()) : ojson(nullptr);
        row["ratio"] = e->ratio ? ojson(e->ratio->to_string()) : ojson(nullptr);
        row["is_proxy"] = e->is_proxy;
        row["verdict"] = std::string(to_string(e->verdict));
        arr.push_back(std::move(row));
    }
    j["entries"] = std::move(arr);
    j["warnings"] = report.warnings;
    return j.dump(2) + "\n";
}

std::string emit_report(const ReconciliationReport &report, std::string_view format)
{
    return emit_report(report, parse_report_format(format));
}

ReconciliationReport parse_report_json(std::string_view text)
{
    ReconciliationReport report;
    try {
        const auto j = nlohmann::json::parse(text);
        const auto &config = j.at("config");
        report.config.theta_low = Decimal::parse(config.at("theta_low").get<std::string>());
        report.config.lookback_days = config.at("lookback_days").get<int>();
        report.config.price_window_days = config.at("price_window_days").get<int>();
        for (const auto &[k, v] : config.items())
            if (k != "theta_low" && k != "lookback_days" && k != "price_window_days")
                report.config_extra.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
        auto opt_dec = [](const nlohmann::json &v) -> std::optional<Decimal> {
            if (v.is_null())
                return std::nullopt;
            return Decimal::parse(v.get<std::string>());
        };
        for (const auto &row : j.at("entries")) {
            CoverageEntry e;
            e.entity = row.at("entity").get<std::string>();
            e.report_date = parse_date(row.at("report_date").get<std::string>());
            e.onchain_eur = opt_dec(row.at("onchain_eur"));
            e.declared_eur = opt_dec(row.at("declared_eur"));
            if (!row.at("ratio").is_null())
                e.ratio = CoverageRatio::parse(row.at("ratio").get<std::string>());
            e.is_proxy = row.at("is_proxy").get<bool>();
            e.verdict = parse_verdict(row.at("verdict").get<std::string>());
            report.entries.push_back(std::move(e));
        }
        for (const auto &w : j.at("warnings"))
            report.warnings.push_back(w.get<std::string>());
    } catch (const nlohmann::json::exception &e) {
        throw Error(Errc::MalformedLine, std::string("bad report JSON: ") + e.what());
    }
    return report;
}

} // namespace solvaudit

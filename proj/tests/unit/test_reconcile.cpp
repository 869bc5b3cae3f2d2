#include "support.hpp"

#include <nlohmann/json.hpp>

#include "solvaudit/reconcile.hpp"
#include "solvaudit/testkit.hpp"

using namespace solvaudit;

namespace {

Decimal dec(const char *s) { return Decimal::parse(s); }

// One BTC flow series holding `sats` from block 1 onwards, observed through `through`.
std::map<std::string, BalanceSeries> btc_holding(BigInt sats, std::int64_t at, std::int64_t through)
{
    BalanceSeries s;
    s.entity = "V";
    s.asset = "BTC";
    s.kind = SeriesKind::Flow;
    s.points.push_back({1, static_cast<std::uint64_t>(at), sats});
    s.observed_through = Observation{2, static_cast<std::uint64_t>(through)};
    return {{"BTC", s}};
}

PriceSeries flat_btc(const char *day, const char *price)
{
    PriceSeries p;
    p.insert("BTC", parse_date(day), dec(price));
    return p;
}

} // namespace

TEST(Ratio, PaperShapes)
{
    EXPECT_EQ(coverage_ratio(dec("7559"), dec("10000")).to_string(), "0.7559");
    EXPECT_EQ(coverage_ratio(dec("19456"), dec("10000")).to_string(), "1.9456");
    EXPECT_EQ(coverage_ratio(dec("1685"), dec("10000")).to_string(), "0.1685");
    EXPECT_EQ(coverage_ratio(dec("0"), dec("0")), CoverageRatio::finite(dec("1")));
    EXPECT_EQ(coverage_ratio(dec("5"), dec("0")).to_string(), "inf");
    EXPECT_EQ(coverage_ratio(dec("-5"), dec("0")).to_string(), "-inf");
    EXPECT_EQ(coverage_ratio(dec("-1"), dec("4")).to_string(), "-0.2500");
    EXPECT_ERRC(coverage_ratio(dec("1"), dec("-1")), Errc::NegativeInput);
}

TEST(Ratio, ParsePrintRoundTrip)
{
    for (const char *s : {"0.7559", "inf", "-inf", "1.0000", "-0.0100"})
        EXPECT_EQ(CoverageRatio::parse(s).to_string(), s);
}

TEST(Classify, Thresholds)
{
    const Decimal theta = dec("0.4");
    EXPECT_EQ(classify(coverage_ratio(dec("0.3999"), dec("1")), theta), Verdict::Shortfall);
    EXPECT_EQ(classify(coverage_ratio(dec("0.4"), dec("1")), theta), Verdict::Covered);
    EXPECT_EQ(classify(coverage_ratio(dec("1"), dec("1")), theta), Verdict::Covered);
    EXPECT_EQ(classify(coverage_ratio(dec("1.0001"), dec("1")), theta), Verdict::CoveredExcess);
    EXPECT_EQ(classify(coverage_ratio(dec("1"), dec("0")), theta), Verdict::CoveredExcess);
    EXPECT_EQ(classify(coverage_ratio(dec("-1"), dec("0")), theta), Verdict::Shortfall);
    EXPECT_EQ(classify(coverage_ratio(dec("0"), dec("0")), theta), Verdict::Covered);
    for (auto v : {Verdict::Covered, Verdict::CoveredExcess, Verdict::Shortfall, Verdict::InsufficientData})
        EXPECT_EQ(parse_verdict(to_string(v)), v);
}

TEST(Property, VerdictMonotone)
{
    testkit::SplitMix64 rng(21);
    auto rank = [](Verdict v) { return v == Verdict::Shortfall ? 0 : v == Verdict::Covered ? 1 : 2; };
    for (int round = 0; round < 300; ++round) {
        const Decimal declared(BigInt(rng.below(1'000'000)), 2);
        const Decimal theta(BigInt(rng.below(100)), 2);
        Decimal onchain(BigInt(static_cast<std::int64_t>(rng.below(100'000)) - 50'000), 2);
        int last = -1;
        for (int step = 0; step < 30; ++step) {
            const int r = rank(classify(coverage_ratio(onchain, declared), theta));
            EXPECT_GE(r, last);
            last = r;
            onchain += Decimal(BigInt(rng.below(100'000)), 2);
        }
    }
}

TEST(Assess, PaperRatiosAndVerdicts)
{
    const auto reg = AssetRegistry::defaults();
    const char *years[] = {"2018-12-31", "2019-12-31", "2020-12-31", "2021-12-31"};
    const char *onchain[] = {"0.7559", "0.6668", "1.9456", "1.1679"};
    const char *expect[] = {"COVERED", "COVERED", "COVERED_EXCESS", "COVERED_EXCESS"};
    ReconciliationReport all;
    for (int i = 0; i < 4; ++i) {
        const Date d = parse_date(years[i]);
        auto series = btc_holding(Decimal::parse(onchain[i]).rescaled(8).units(), day_start(d) - 86400, day_end(d));
        std::vector<BalanceSheetRecord> sheets{{"V", d, dec("10000.00"), false}};
        auto r = assess("V", series, reg, flat_btc(years[i], "10000.00"), sheets);
        ASSERT_EQ(r.entries.size(), 1u);
        EXPECT_EQ(r.entries[0].ratio->to_string(), onchain[i]);
        EXPECT_EQ(to_string(r.entries[0].verdict), expect[i]);
        all.merge(std::move(r));
    }
    EXPECT_FALSE(all.has_shortfall());
    EXPECT_TRUE(entity_consistency(all).at("V"));

    const Date d = parse_date("2021-12-31");
    std::vector<BalanceSheetRecord> sheets{{"W", d, dec("10000.00"), false}};
    auto w = assess("W", btc_holding(16'850'000, day_start(d), day_end(d)), reg, flat_btc("2021-12-31", "10000"), sheets);
    EXPECT_EQ(w.entries[0].ratio->to_string(), "0.1685");
    EXPECT_EQ(w.entries[0].verdict, Verdict::Shortfall);
    EXPECT_TRUE(w.has_shortfall());
    EXPECT_FALSE(entity_consistency(w).at("W"));
}

TEST(Assess, InsufficientData)
{
    const auto reg = AssetRegistry::defaults();
    const Date d = parse_date("2021-12-31");
    std::vector<BalanceSheetRecord> sheets{{"V", d, dec("100"), true}};

    // Observation too old for the 30-day lookback.
    auto old = assess("V", btc_holding(1, day_start(d) - 40 * 86400, day_start(d) - 40 * 86400), reg,
                      flat_btc("2021-12-31", "1"), sheets);
    EXPECT_EQ(old.entries[0].verdict, Verdict::InsufficientData);
    EXPECT_TRUE(old.entries[0].is_proxy);
    EXPECT_FALSE(old.warnings.empty());

    // Stale price.
    auto stale = assess("V", btc_holding(1, day_start(d), day_end(d)), reg, flat_btc("2021-11-01", "1"), sheets);
    EXPECT_EQ(stale.entries[0].verdict, Verdict::InsufficientData);

    // Audit date without a balance sheet row.
    const Date extra = parse_date("2021-06-30");
    std::vector<Date> audit{extra};
    auto missing = assess("V", btc_holding(1, day_start(extra), day_end(d)), reg, flat_btc("2021-06-30", "1"), {},
                          {}, audit);
    ASSERT_EQ(missing.entries.size(), 1u);
    EXPECT_EQ(missing.entries[0].verdict, Verdict::InsufficientData);
    EXPECT_FALSE(missing.entries[0].declared_eur);

    // No series at all.
    auto none = assess("V", {}, reg, PriceSeries{}, sheets);
    EXPECT_EQ(none.entries[0].verdict, Verdict::InsufficientData);
    EXPECT_FALSE(entity_consistency(none).at("V"));
}

TEST(Assess, ProxyPropagates)
{
    const auto reg = AssetRegistry::defaults();
    testkit::SplitMix64 rng(2);
    for (int i = 0; i < 50; ++i) {
        const Date d = parse_date("2020-12-31");
        const bool proxy = rng.below(2) == 1;
        std::vector<BalanceSheetRecord> sheets{{"V", d, Decimal(BigInt(rng.below(100000)), 2), proxy}};
        auto r = assess("V", btc_holding(BigInt(rng.below(1'0000'0000)), day_start(d), day_end(d)), reg,
                        flat_btc("2020-12-31", "30000"), sheets);
        EXPECT_EQ(r.entries[0].is_proxy, proxy);
    }
}

TEST(Emit, EmptyReport)
{
    ReconciliationReport r;
    const auto j = nlohmann::json::parse(emit_report(r, ReportFormat::Json));
    EXPECT_TRUE(j.at("entries").is_array());
    EXPECT_TRUE(j.at("entries").empty());
    EXPECT_TRUE(j.contains("config"));
    EXPECT_TRUE(j.contains("warnings"));
    EXPECT_ERRC(emit_report(r, "xml"), Errc::UnsupportedFormat);
    EXPECT_EQ(parse_report_format("csv"), ReportFormat::Csv);
    EXPECT_EQ(parse_report_format("json"), ReportFormat::Json);
}

namespace {

ReconciliationReport sample_report()
{
    ReconciliationReport r;
    r.entries.push_back({"B", parse_date("2020-12-31"), dec("5.00"), dec("10.00"), coverage_ratio(dec("5"), dec("10")),
                         true, Verdict::Covered});
    r.entries.push_back({"A", parse_date("2021-12-31"), dec("1.00"), dec("10.00"), coverage_ratio(dec("1"), dec("10")),
                         false, Verdict::Shortfall});
    r.entries.push_back({"A", parse_date("2020-12-31"), std::nullopt, dec("3.00"), std::nullopt, false,
                         Verdict::InsufficientData});
    r.entries.push_back({"C", parse_date("2020-12-31"), dec("3.00"), dec("0.00"), coverage_ratio(dec("3"), dec("0")),
                         false, Verdict::CoveredExcess});
    r.warnings.push_back("A 2020-12-31: no data");
    return r;
}

} // namespace

TEST(Emit, DeterministicAndSorted)
{
    const auto r = sample_report();
    const auto a = emit_report(r, ReportFormat::Json);
    EXPECT_EQ(a, emit_report(sample_report(), ReportFormat::Json));
    const auto j = nlohmann::json::parse(a);
    ASSERT_EQ(j["entries"].size(), 4u);
    EXPECT_EQ(j["entries"][0]["entity"], "A");
    EXPECT_EQ(j["entries"][0]["report_date"], "2020-12-31");
    EXPECT_EQ(j["entries"][1]["ratio"], "0.1000");
    EXPECT_EQ(j["entries"][3]["ratio"], "inf");
    EXPECT_EQ(j["entries"][2]["is_proxy"], true);
}

TEST(Emit, JsonToCsvPreservesEntries)
{
    const auto json_text = emit_report(sample_report(), ReportFormat::Json);
    const auto parsed = parse_report_json(json_text);
    ASSERT_EQ(parsed.entries.size(), 4u);
    EXPECT_EQ(emit_report(parsed, ReportFormat::Json), json_text);

    const auto csv = emit_report(parsed, ReportFormat::Csv);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "entity,report_date,onchain_eur,declared_eur,ratio,is_proxy,verdict");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line))
        rows.push_back(split_csv(line));
    ASSERT_EQ(rows.size(), parsed.entries.size());
    const auto j = nlohmann::json::parse(json_text);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto &e = j["entries"][i];
        EXPECT_EQ(rows[i][0], e["entity"]);
        EXPECT_EQ(rows[i][1], e["report_date"]);
        EXPECT_EQ(rows[i][2], e["onchain_eur"].is_null() ? "" : e["onchain_eur"].get<std::string>());
        EXPECT_EQ(rows[i][4], e["ratio"].is_null() ? "" : e["ratio"].get<std::string>());
        EXPECT_EQ(rows[i][5], e["is_proxy"].get<bool>() ? "true" : "false");
        EXPECT_EQ(rows[i][6], e["verdict"]);
    }
}

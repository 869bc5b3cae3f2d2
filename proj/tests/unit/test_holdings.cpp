#include "support.hpp"

#include <sstream>

#include "oracles/replay.hpp"
#include "solvaudit/cluster.hpp"
#include "solvaudit/holdings.hpp"
#include "solvaudit/testkit.hpp"

using namespace solvaudit;

namespace {

const BigInt kBtc = 1'0000'0000;

UtxoTransaction tx(int n, std::vector<TxIo> ins, std::vector<TxIo> outs)
{
    UtxoTransaction t;
    t.txid = std::string(60, '0') + std::to_string(1000 + n);
    t.block = static_cast<std::uint64_t>(n);
    t.timestamp = 1600000000u + 600u * static_cast<std::uint64_t>(n);
    t.inputs = std::move(ins);
    t.outputs = std::move(outs);
    return t;
}

struct Fixture {
    std::vector<UtxoTransaction> txs;
    ClusterIndex index;
    EntityMap entities;

    Fixture(std::vector<UtxoTransaction> list, std::vector<std::pair<std::string, std::string>> tag_pairs)
        : txs(std::move(list))
    {
        index = build_clusters(txs);
        TagSet tags;
        for (auto &[a, e] : tag_pairs)
            tags.insert({a, Ledger::Utxo, e, "t", 1.0});
        entities = attribute_clusters(index, tags);
    }
    std::vector<FlowEvent> flows(const std::string &entity, AttributionScope scope = AttributionScope::Cluster) const
    {
        return entity_utxo_flows(txs, index, entities, entity, scope);
    }
};

PriceSeries prices(std::vector<std::tuple<std::string, std::string, std::string>> rows)
{
    PriceSeries p;
    for (auto &[asset, day, price] : rows)
        p.insert(asset, parse_date(day), Decimal::parse(price));
    return p;
}

AccountTransfer transfer(std::uint64_t block, std::string asset, std::string from, std::string to, BigInt value)
{
    return {block, 1600000000u + 12u * block, std::move(asset), std::move(from), std::move(to), std::move(value)};
}

} // namespace

TEST(Flows, PureDeposit)
{
    Fixture f({tx(1, {}, {{"U", 50 * 100000000ULL}}), tx(2, {{"U", 50 * 100000000ULL}}, {{"E", 5 * 100000000ULL}, {"U2", 45 * 100000000ULL}})},
              {{"E", "VASP"}});
    auto flows = f.flows("VASP");
    ASSERT_EQ(flows.size(), 1u);
    EXPECT_EQ(flows[0].delta, 5 * kBtc);
    EXPECT_EQ(flows[0].asset, "BTC");
    EXPECT_EQ(flows[0].txid, f.txs[1].txid);
}

TEST(Flows, SpendWithChange)
{
    Fixture f({tx(1, {}, {{"E1", 3 * 100000000ULL}}), tx(2, {}, {{"E2", 1}}),
               tx(3, {{"E1", 3 * 100000000ULL}, {"E2", 1}}, {{"E2", 1 * 100000000ULL + 1}, {"X", 2 * 100000000ULL}}),
               tx(4, {}, {{"Y", 7}})},
              {{"E1", "VASP"}});
    auto flows = f.flows("VASP");
    ASSERT_EQ(flows.size(), 3u);
    EXPECT_EQ(flows[2].delta, -2 * kBtc);
    // Replay oracle over the cluster's addresses.
    auto r = oracle::replay_utxo(f.txs, 100);
    BigInt cluster_total = r.balances["E1"] + r.balances["E2"];
    BigInt sum = 0;
    for (auto &e : flows)
        sum += e.delta;
    EXPECT_EQ(sum, cluster_total);
}

TEST(Flows, FeeLeavesSpendingEntity)
{
    Fixture f({tx(1, {}, {{"E", 100}}), tx(2, {{"E", 100}}, {{"E", 60}, {"X", 30}})}, {{"E", "V"}});
    auto flows = f.flows("V");
    ASSERT_EQ(flows.size(), 2u);
    EXPECT_EQ(flows[1].delta, -40);
}

TEST(Flows, UntouchedAndUnknown)
{
    Fixture f({tx(1, {}, {{"A", 10}}), tx(2, {{"A", 10}}, {{"B", 10}}), tx(3, {}, {{"E", 1}})}, {{"E", "V"}});
    EXPECT_EQ(f.flows("V").size(), 1u);
    EXPECT_ERRC(f.flows("nobody"), Errc::UnknownEntity);
}

TEST(Flows, AddressScope)
{
    // E2 is linked to E1 only through co-spending; address scope sees E1 alone.
    Fixture f({tx(1, {}, {{"E1", 5}}), tx(2, {}, {{"E2", 7}}), tx(3, {{"E1", 5}, {"E2", 7}}, {{"E2", 12}})},
              {{"E1", "V"}});
    auto cluster = f.flows("V");
    auto address = f.flows("V", AttributionScope::Address);
    BigInt c = 0, a = 0;
    for (auto &e : cluster)
        c += e.delta;
    for (auto &e : address)
        a += e.delta;
    EXPECT_EQ(c, 12);
    EXPECT_EQ(a, 0);
}

TEST(Series, CumulativeAndGap)
{
    std::vector<FlowEvent> flows{{100, 1, "BTC", 5, "t1"}, {200, 2, "BTC", -2, "t2"}};
    auto s = balance_series_utxo("V", flows);
    ASSERT_EQ(s.points.size(), 2u);
    EXPECT_EQ(s.points[0].balance, 5);
    EXPECT_EQ(s.points[1].balance, 3);
    EXPECT_FALSE(s.data_gap);
    EXPECT_EQ(s.observed_through->block, 2u);

    std::vector<FlowEvent> neg{{100, 1, "BTC", -1, "t1"}};
    auto g = balance_series_utxo("V", neg);
    ASSERT_EQ(g.points.size(), 1u);
    EXPECT_EQ(g.points[0].balance, -1);
    ASSERT_TRUE(g.data_gap);
    EXPECT_EQ(g.data_gap->block, 1u);
}

TEST(Series, SameBlockCollapses)
{
    std::vector<FlowEvent> flows{{100, 4, "BTC", 5, "a"}, {100, 4, "BTC", 2, "b"}, {300, 9, "BTC", -1, "c"}};
    auto s = balance_series_utxo("V", flows);
    ASSERT_EQ(s.points.size(), 2u);
    EXPECT_EQ(s.points[0], (BalancePoint{4, 100, 7}));
    EXPECT_EQ(s.balance_at_block(3), 0);
    EXPECT_EQ(s.balance_at_block(8), 7);
    EXPECT_EQ(s.balance_at_block(1000), 6);
    EXPECT_EQ(s.balance_at_time(299), 7);
}

TEST(Series, RandomFlowsMatchReplay)
{
    testkit::SplitMix64 rng(1);
    std::vector<FlowEvent> flows;
    BigInt total = 0;
    std::uint64_t block = 0;
    for (int i = 0; i < 10000; ++i) {
        block += rng.below(3);
        BigInt d = BigInt(static_cast<std::int64_t>(rng.below(2000001)) - 1000000);
        if (d == 0)
            d = 1;
        total += d;
        flows.push_back({1600000000 + block, block, "BTC", d, std::to_string(i)});
    }
    auto s = balance_series_utxo("V", flows);
    EXPECT_EQ(s.points.back().balance, total);
    for (int probe = 0; probe < 200; ++probe) {
        const auto b = rng.below(block + 1);
        BigInt expect = 0;
        for (auto &f : flows)
            if (f.block <= b)
                expect += f.delta;
        EXPECT_EQ(s.balance_at_block(b), expect);
    }
}

TEST(Snapshots, SpecExample)
{
    const BigInt eth = pow10(18);
    std::vector<AccountTransfer> t{transfer(5, "ETH", "0xu", "0xv", 10 * eth), transfer(15000, "ETH", "0xv", "0xw", 4 * eth)};
    std::vector<std::string> assets{"ETH"};
    auto s = account_snapshots(t, {"0xv"}, assets, {.interval_blocks = 10000}, "V");
    const auto &pts = s.at("ETH").points;
    ASSERT_EQ(pts.size(), 3u);
    EXPECT_EQ(pts[0].block, 0u);
    EXPECT_EQ(pts[0].balance, 0);
    EXPECT_EQ(pts[1].block, 10000u);
    EXPECT_EQ(pts[1].balance, 10 * eth);
    EXPECT_EQ(pts[2].block, 20000u);
    EXPECT_EQ(pts[2].balance, 6 * eth);
    EXPECT_EQ(s.at("ETH").kind, SeriesKind::Snapshot);
}

TEST(Snapshots, EmptyAndErrors)
{
    std::vector<AccountTransfer> none;
    std::vector<std::string> assets{"ETH", "USDT"};
    auto s = account_snapshots(none, {"0xv"}, assets, {.interval_blocks = 100, .until_block = 250});
    for (const auto &asset : assets) {
        ASSERT_EQ(s.at(asset).points.size(), 4u);
        for (auto &p : s.at(asset).points)
            EXPECT_EQ(p.balance, 0);
    }
    EXPECT_ERRC(account_snapshots(none, {}, assets, {.interval_blocks = 0}), Errc::IntervalZero);
}

TEST(Snapshots, GridCoversTailAndMatchesReplay)
{
    testkit::SplitMix64 rng(8);
    for (int round = 0; round < 20; ++round) {
        std::vector<AccountTransfer> t;
        std::uint64_t block = 0;
        const std::vector<std::string> addrs{"0x0", "0xa", "0xb", "0xc", "0xd"};
        const std::vector<std::string> assets{"ETH", "DAI"};
        for (int i = 0; i < 200; ++i) {
            block += rng.below(500);
            const auto from = addrs[rng.below(addrs.size())];
            auto to = addrs[rng.below(addrs.size())];
            if (from == "0x0" && to == "0x0")
                to = "0xa";
            t.push_back(transfer(block, assets[rng.below(2)], from, to, BigInt(rng.below(1000))));
        }
        const std::set<std::string> watch{"0xa", "0xc"};
        const std::uint64_t n = 1 + rng.below(5000);
        auto s = account_snapshots(t, watch, assets, {.interval_blocks = n});
        for (const auto &asset : assets) {
            const auto &pts = s.at(asset).points;
            EXPECT_GE(pts.back().block, block);
            EXPECT_LT(pts.back().block, block + n);
            for (std::size_t i = 0; i < pts.size(); ++i) {
                EXPECT_EQ(pts[i].block, i * n);
                EXPECT_EQ(pts[i].balance, oracle::replay_account(t, watch, asset, pts[i].block));
            }
        }
    }
}

TEST(Clock, InterpolatesAndExtrapolates)
{
    BlockClock c;
    c.observe(100, 1000);
    c.observe(200, 2000);
    EXPECT_EQ(c.timestamp_of(150), 1500u);
    EXPECT_EQ(c.timestamp_of(200), 2000u);
    EXPECT_EQ(c.timestamp_of(300), 3000u);
    EXPECT_EQ(c.timestamp_of(0), 0u);
}

TEST(Valuation, SpecExamples)
{
    const auto reg = AssetRegistry::defaults();
    const Date day = parse_date("2021-12-31");
    auto p = prices({{"BTC", "2021-12-31", "30000.00"}, {"ETH", "2021-12-31", "2500.00"}, {"USDT", "2021-12-30", "0.92"}});

    EXPECT_EQ(valuate_balances({}, reg, p, day).total_eur.to_string(), "0.00");
    EXPECT_EQ(valuate_balances({{"BTC", 0}}, reg, PriceSeries{}, day).total_eur.to_string(), "0.00");
    EXPECT_EQ(valuate_balances({{"BTC", 2 * kBtc}}, reg, p, day).total_eur.to_string(), "60000.00");
    auto v = valuate_balances({{"ETH", pow10(18)}, {"USDT", BigInt(100'000'000)}}, reg, p, day);
    EXPECT_EQ(v.total_eur.to_string(), "2592.00");
    EXPECT_EQ(v.per_asset_eur.at("USDT"), Decimal::parse("92"));
}

TEST(Valuation, StaleAndNegative)
{
    const auto reg = AssetRegistry::defaults();
    auto p = prices({{"BTC", "2021-12-01", "30000"}});
    EXPECT_ERRC(valuate_balances({{"BTC", 1}}, reg, p, parse_date("2021-12-31")), Errc::StalePrice);
    EXPECT_NO_THROW(valuate_balances({{"BTC", 1}}, reg, p, parse_date("2021-12-31"), 30));
    auto v = valuate_balances({{"BTC", -kBtc}}, reg, p, parse_date("2021-12-02"));
    EXPECT_EQ(v.total_eur.to_string(), "-30000.00");
    EXPECT_EQ(v.warnings.size(), 1u);
}

TEST(Valuation, RoundsOnlyAtTheEnd)
{
    const auto reg = AssetRegistry::defaults();
    auto p = prices({{"BTC", "2021-01-01", "0.01"}, {"WBTC", "2021-01-01", "0.01"}});
    // Each half-cent alone would round to 0.00 (half-even); together they make a cent.
    auto v = valuate_balances({{"BTC", kBtc / 2}, {"WBTC", kBtc / 2}}, reg, p, parse_date("2021-01-01"));
    EXPECT_EQ(v.total_eur.to_string(), "0.01");
    EXPECT_EQ(valuate_balances({{"BTC", kBtc / 2}}, reg, p, parse_date("2021-01-01")).total_eur.to_string(), "0.00");
}

TEST(Property, ValuationLinearity)
{
    const auto reg = AssetRegistry::defaults();
    testkit::SplitMix64 rng(4);
    const std::vector<std::string> assets{"BTC", "ETH", "USDT", "USDC", "DAI", "WETH", "WBTC"};
    PriceSeries p;
    for (auto &a : assets)
        p.insert(a, parse_date("2021-06-01"), Decimal(BigInt(rng.below(10'000'000)), 2));
    for (int round = 0; round < 200; ++round) {
        std::map<std::string, BigInt> a, b, all;
        for (auto &asset : assets) {
            const BigInt v = BigInt(rng.next()) * BigInt(rng.below(1000));
            (rng.below(2) ? a : b)[asset] = v;
            all[asset] = v;
        }
        const Date d = parse_date("2021-06-03");
        const auto va = valuate_balances(a, reg, p, d), vb = valuate_balances(b, reg, p, d);
        EXPECT_EQ(valuate_balances(all, reg, p, d).exact_total_eur, va.exact_total_eur + vb.exact_total_eur);
        const BigInt k = 1 + rng.below(50);
        std::map<std::string, BigInt> scaled;
        for (auto &[asset, v] : all)
            scaled[asset] = v * k;
        EXPECT_EQ(valuate_balances(scaled, reg, p, d).exact_total_eur,
                  valuate_balances(all, reg, p, d).exact_total_eur * Decimal::from_integer(k));
    }
}

TEST(Property, SelfTransferNeutrality)
{
    testkit::SplitMix64 rng(12);
    for (int round = 0; round < 30; ++round) {
        std::vector<UtxoTransaction> txs;
        int n = 0;
        for (int i = 0; i < 4; ++i)
            txs.push_back(tx(++n, {}, {{"E" + std::to_string(i), 1000}}));
        txs.push_back(tx(++n, {{"E0", 1000}, {"E1", 1000}, {"E2", 1000}, {"E3", 1000}}, {{"E0", 3000}, {"X", 900}}));
        Fixture base(txs, {{"E0", "V"}});
        const auto before = balance_series_utxo("V", base.flows("V"));
        // Move funds strictly inside the cluster, fee 0, at a random block.
        auto with = txs;
        const int at = static_cast<int>(rng.below(3));
        auto self = tx(100 + round, {{"E0", 3000}}, {{"E" + std::to_string(rng.below(4)), 1000}, {"E0", 2000}});
        self.block = txs.back().block + 1 + at;
        with.push_back(self);
        Fixture after(with, {{"E0", "V"}});
        const auto s = balance_series_utxo("V", after.flows("V"));
        EXPECT_EQ(s.points, before.points);
    }
}

TEST(Holdings, EntityHoldingsOnScenario)
{
    auto g = testkit::generate(testkit::default_scenario(3));
    auto idx = build_clusters(g.transactions);
    auto ents = attribute_clusters(idx, g.tags);
    auto clock = clock_from(g.transfers);
    LedgerView view{g.transactions, &idx, &ents, g.transfers, &clock};
    auto a = entity_holdings(view, "VASP-A");
    EXPECT_TRUE(a.count("BTC"));
    EXPECT_TRUE(a.count("ETH"));
    EXPECT_EQ(a.at("BTC").kind, SeriesKind::Flow);
    EXPECT_EQ(a.at("USDT").kind, SeriesKind::Snapshot);
    auto d = entity_holdings(view, "VASP-D");
    EXPECT_FALSE(d.count("BTC"));
    EXPECT_TRUE(entity_holdings(view, "nobody").empty());
}

TEST(SeriesCsv, RoundTrip)
{
    std::vector<FlowEvent> flows{{100, 1, "BTC", 5, "t1"}, {200, 2, "BTC", -2, "t2"}};
    std::vector<BalanceSeries> list{balance_series_utxo("V", flows)};
    const BigInt eth = pow10(18);
    std::vector<AccountTransfer> t{transfer(5, "ETH", "0xu", "0xv", 10 * eth)};
    std::vector<std::string> assets{"ETH"};
    list.push_back(account_snapshots(t, {"0xv"}, assets, {.interval_blocks = 10}, "V").at("ETH"));
    std::ostringstream out;
    write_series_csv(out, list);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "entity,asset,block,timestamp,balance_base_units");
    std::istringstream in(out.str());
    auto back = parse_series_csv(in);
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(back[i].points, list[i].points);
        EXPECT_EQ(back[i].kind, list[i].kind);
    }

    auto p = prices({{"BTC", "2020-09-13", "10000"}, {"ETH", "2020-09-13", "300"}});
    const auto reg = AssetRegistry::defaults();
    std::ostringstream valued;
    write_series_csv(valued, list, &reg, &p);
    EXPECT_NE(valued.str().find(",eur_value\n"), std::string::npos);
}

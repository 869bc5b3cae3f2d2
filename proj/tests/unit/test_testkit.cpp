#include "support.hpp"

#include "oracles/replay.hpp"
#include "solvaudit/testkit.hpp"

using namespace solvaudit;
using namespace solvaudit::testkit;

namespace {

ScenarioConfig single(EntityConfig e, std::uint64_t seed = 1)
{
    ScenarioConfig c;
    c.seed = seed;
    c.entities.push_back(std::move(e));
    return c;
}

EntityConfig entity(std::string name, Ledger ledger, WalletStrategy strategy, double coverage)
{
    EntityConfig e;
    e.name = std::move(name);
    e.ledger = ledger;
    e.strategy = strategy;
    e.tag_coverage = coverage;
    return e;
}

bool is_utxo_address(const std::string &a) { return a.rfind("0x", 0) != 0; }

} // namespace

TEST(Generate, Deterministic)
{
    testing_support::TempDir a, b;
    write_scenario(generate(default_scenario(4)), a.path());
    write_scenario(generate(default_scenario(4)), b.path());
    for (const char *f : {"transactions.jsonl", "transfers.jsonl", "tags.csv", "prices.csv", "balance_sheets.csv",
                          "ground_truth.json"}) {
        const auto x = testing_support::slurp(a / f);
        EXPECT_FALSE(x.empty()) << f;
        EXPECT_EQ(x, testing_support::slurp(b / f)) << f;
    }
    testing_support::TempDir c;
    write_scenario(generate(default_scenario(5)), c.path());
    EXPECT_NE(testing_support::slurp(a / "transactions.jsonl"), testing_support::slurp(c / "transactions.jsonl"));
}

TEST(Generate, LedgerValidity)
{
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        const auto g = generate(default_scenario(seed));
        std::map<std::string, BigInt> balance;
        BigInt minted = 0;
        std::set<std::string> ids;
        std::pair<std::uint64_t, std::string> last{0, ""};
        for (const auto &tx : g.transactions) {
            EXPECT_TRUE(ids.insert(tx.txid).second);
            EXPECT_LE(last, std::make_pair(tx.block, tx.txid));
            last = {tx.block, tx.txid};
            BigInt in = 0, out = 0;
            for (const auto &io : tx.inputs) {
                in += io.value;
                balance[io.address] -= io.value;
                // Spent value was created earlier and not spent yet.
                ASSERT_GE(balance[io.address], 0) << tx.txid;
            }
            for (const auto &io : tx.outputs) {
                out += io.value;
                balance[io.address] += io.value;
                EXPECT_GT(io.value, 0u);
            }
            if (tx.is_coinbase())
                minted += out;
            else
                EXPECT_EQ(in, out + BigInt(tx.fee()));
        }
        EXPECT_EQ(minted, g.truth.supply);

        std::map<std::pair<std::string, std::string>, BigInt> acct;
        for (const auto &t : g.transfers) {
            if (!t.is_mint()) {
                acct[{t.asset, t.from}] -= t.value;
                ASSERT_GE((acct[{t.asset, t.from}]), 0);
            }
            acct[{t.asset, t.to}] += t.value;
        }
    }
}

TEST(Generate, TruthMatchesLedgerReplay)
{
    const auto g = generate(default_scenario(6));
    const std::uint64_t last = g.transactions.back().block;
    for (std::uint64_t b = 0; b <= last; b += std::max<std::uint64_t>(1, last / 37)) {
        const auto r = oracle::replay_utxo(g.transactions, b);
        std::map<std::string, BigInt> per_entity;
        for (const auto &[addr, bal] : r.balances) {
            auto it = g.truth.addresses.find(addr);
            if (it != g.truth.addresses.end())
                per_entity[it->second] += bal;
        }
        for (const auto &e : g.truth.entities())
            EXPECT_EQ(g.truth.balance_at(e, "BTC", b), per_entity[e]) << e << " @" << b;
    }
}

TEST(Generate, InvalidConfig)
{
    ScenarioConfig none;
    EXPECT_ERRC(generate(none), Errc::InvalidConfig);
    auto c = default_scenario(1);
    c.entities[0].tag_coverage = 1.5;
    EXPECT_ERRC(generate(c), Errc::InvalidConfig);
    c = default_scenario(1);
    c.entities.push_back(c.entities[0]);
    EXPECT_ERRC(validate(c), Errc::InvalidConfig);
    c = default_scenario(1);
    c.account_assets.push_back("BTC");
    EXPECT_ERRC(validate(c), Errc::InvalidConfig);
    c = default_scenario(1);
    c.report_dates = {parse_date("2030-01-01")};
    EXPECT_ERRC(validate(c), Errc::InvalidConfig);
    EXPECT_ERRC(scenario_from_json(R"({"entities":[{"name":"X","ledger":"UTXO","strategy":"NOPE"}]})"),
                Errc::InvalidConfig);
}

TEST(Generate, ScenarioJson)
{
    const auto c = scenario_from_json(R"({"seed":9,"users":5,"entities":[
        {"name":"X","ledger":"ACCOUNT","strategy":"COLLECTOR","tag_coverage":0.5,"deposits":4}]})");
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.users, 5u);
    ASSERT_EQ(c.entities.size(), 1u);
    EXPECT_EQ(c.entities[0].ledger, Ledger::Account);
    EXPECT_EQ(c.entities[0].strategy, WalletStrategy::Collector);
    EXPECT_EQ(c.entities[0].deposits, 4u);
    EXPECT_NO_THROW(generate(c));
}

TEST(Recall, ReuseFullCoverageIsExact)
{
    for (auto ledger : {Ledger::Utxo, Ledger::Account}) {
        const auto g = generate(single(entity("R", ledger, WalletStrategy::Reuse, 1.0)));
        const auto view = run_pipeline(g);
        const auto r = compare_to_ground_truth(view, g.truth).at("R");
        EXPECT_EQ(r.address_recall, 1);
        ASSERT_FALSE(r.final_balance_recall.empty());
        for (const auto &[asset, list] : r.balance_recall)
            for (const auto &[block, value] : list)
                EXPECT_EQ(value, 1) << asset << " @" << block;
    }
}

TEST(Recall, ReusePartitionEqualsTruth)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto g = generate(single(entity("R", Ledger::Utxo, WalletStrategy::Reuse, 0.2), seed));
        const auto view = run_pipeline(g);
        std::set<std::string> truth;
        for (const auto &[addr, e] : g.truth.addresses)
            if (e == "R" && is_utxo_address(addr))
                truth.insert(addr);
        EXPECT_EQ(view.addresses.at("R"), truth);
    }
}

TEST(Recall, FreshWithOneTagIsPartial)
{
    auto e = entity("F", Ledger::Utxo, WalletStrategy::FreshPerDeposit, 0.01);
    const auto g = generate(single(e));
    EXPECT_EQ(g.tags.size(), 1u);
    const auto r = compare_to_ground_truth(run_pipeline(g), g.truth).at("F");
    EXPECT_LT(r.address_recall, 1);
    EXPECT_LT(r.final_balance_recall.at("BTC"), 1);
    EXPECT_GE(r.final_balance_recall.at("BTC"), 0);
}

TEST(Recall, HotColdEqualsHotShare)
{
    for (const char *share : {"0.25", "0.1", "0.5", "0.37"}) {
        for (auto ledger : {Ledger::Utxo, Ledger::Account}) {
            auto e = entity("H", ledger, WalletStrategy::HotCold, 0.5);
            e.hot_share = Decimal::parse(share);
            const auto g = generate(single(e, 3));
            ASSERT_EQ(g.tags.size(), 1u);
            const auto r = compare_to_ground_truth(run_pipeline(g), g.truth).at("H");
            const std::string asset = ledger == Ledger::Utxo ? "BTC" : "ETH";
            const Rational expect(Decimal::parse(share).units(), pow10(Decimal::parse(share).scale()));
            EXPECT_EQ(r.final_balance_recall.at(asset), expect) << share << " " << to_string(ledger);
        }
    }
}

TEST(Recall, ZeroTagsGiveZero)
{
    auto cfg = single(entity("Z", Ledger::Utxo, WalletStrategy::Reuse, 0.0));
    cfg.entities.push_back(entity("R", Ledger::Utxo, WalletStrategy::Reuse, 1.0));
    const auto g = generate(cfg);
    const auto r = compare_to_ground_truth(run_pipeline(g), g.truth);
    EXPECT_EQ(r.at("Z").address_recall, 0);
    for (const auto &[asset, list] : r.at("Z").balance_recall)
        for (const auto &[block, value] : list)
            EXPECT_EQ(value, 0);
    EXPECT_EQ(r.at("R").address_recall, 1);
}

TEST(Recall, EntityMismatch)
{
    const auto g = generate(single(entity("R", Ledger::Utxo, WalletStrategy::Reuse, 1.0)));
    auto view = run_pipeline(g);
    view.addresses["Stranger"] = {"x"};
    EXPECT_ERRC(compare_to_ground_truth(view, g.truth), Errc::EntityMismatch);
}

TEST(Recall, ClampedToUnitInterval)
{
    const auto g = generate(default_scenario(2));
    for (const auto &[entity_name, r] : compare_to_ground_truth(run_pipeline(g), g.truth)) {
        EXPECT_GE(r.address_recall, 0);
        EXPECT_LE(r.address_recall, 1);
        for (const auto &[asset, list] : r.balance_recall)
            for (const auto &[block, value] : list) {
                EXPECT_GE(value, 0);
                EXPECT_LE(value, 1);
            }
    }
}

TEST(GroundTruthJson, RoundTrip)
{
    const auto g = generate(default_scenario(7));
    const auto text = ground_truth_to_json(g.truth);
    const auto back = ground_truth_from_json(text);
    EXPECT_EQ(back.addresses, g.truth.addresses);
    EXPECT_EQ(back.series, g.truth.series);
    EXPECT_EQ(back.supply, g.truth.supply);
    EXPECT_EQ(ground_truth_to_json(back), text);
}

TEST(Stream, ValidAndOrdered)
{
    StreamConfig c;
    c.seed = 5;
    c.transactions = 5000;
    c.wallets = 2000;
    const auto txs = generate_stream(c);
    ASSERT_EQ(txs.size(), 5000u);
    std::map<std::string, BigInt> balance;
    for (std::size_t i = 0; i < txs.size(); ++i) {
        if (i)
            EXPECT_LT(std::tie(txs[i - 1].block, txs[i - 1].txid), std::tie(txs[i].block, txs[i].txid));
        for (const auto &io : txs[i].inputs) {
            balance[io.address] -= io.value;
            ASSERT_GE(balance[io.address], 0);
        }
        for (const auto &io : txs[i].outputs)
            balance[io.address] += io.value;
    }
    EXPECT_EQ(generate_stream(c), txs);
}

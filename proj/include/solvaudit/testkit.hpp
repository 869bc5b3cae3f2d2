#pragma once

// Deterministic synthetic ledgers with ground truth.
//
// All randomness comes from SplitMix64 so fixtures can be regenerated
// bit-for-bit in any language:
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
// below(n) rejects draws >= 2^64 - (2^64 mod n) and returns draw mod n.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "solvaudit/holdings.hpp"
#include "solvaudit/ingest.hpp"
#include "solvaudit/numeric.hpp"
#include "solvaudit/price_series.hpp"

namespace solvaudit::testkit {

using Rational = boost::multiprecision::cpp_rational;

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();
    // Uniform in [0, n); n > 0.
    std::uint64_t below(std::uint64_t n);
    // Uniform in [lo, hi].
    std::uint64_t between(std::uint64_t lo, std::uint64_t hi);

private:
    std::uint64_t state_;
};

enum class WalletStrategy { Reuse, FreshPerDeposit, HotCold, Collector };

std::string_view to_string(WalletStrategy strategy) noexcept;

struct EntityConfig {
    std::string name;
    Ledger ledger = Ledger::Utxo;
    WalletStrategy strategy = WalletStrategy::Reuse;
    std::size_t deposits = 20;
    std::size_t withdrawals = 10;
    // Fraction of the entity's on-chain addresses emitted as tags, taken in
    // role order: REUSE wallet order, hot before cold, collector before
    // deposit addresses, deposit addresses by creation.
    double tag_coverage = 1.0;
    // REUSE: number of reused addresses.
    std::size_t reuse_addresses = 3;
    // FRESH_PER_DEPOSIT: co-spend all deposit outputs after every n deposits (0 = never).
    std::size_t sweep_every = 0;
    // HOT_COLD: share of funds left on the hot wallet by the final rebalance.
    Decimal hot_share{25, 2};
    // Declared balance sheet = ground-truth EUR holdings * factor.
    Decimal declare_factor{1, 0};
    bool proxy = false;
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    std::vector<EntityConfig> entities;
    std::size_t users = 40;
    // Coinbase payouts to users after the initial one per user.
    std::size_t extra_coinbases = 40;
    // User-to-user account transfers; one more always closes the ledger at
    // the final rebalance so both ledgers are observed up to it.
    std::size_t background_transfers = 100;
    Date start = Date(std::chrono::year{2018} / 1 / 1);
    Date end = Date(std::chrono::year{2021} / 12 / 31);
    // Defaults to Dec 31 of every year in [start, end].
    std::vector<Date> report_dates;
    // No activity during this many days before a report date.
    int quiet_days = 2;
    std::uint64_t utxo_block_seconds = 600;
    std::uint64_t account_block_seconds = 12;
    std::uint64_t subsidy = 50'0000'0000;
    std::uint64_t fee = 1000;
    std::vector<std::string> account_assets{"ETH", "USDT", "USDC", "DAI", "WETH", "WBTC"};
};

// Throws InvalidConfig.
void validate(const ScenarioConfig &config);
ScenarioConfig default_scenario(std::uint64_t seed);
ScenarioConfig scenario_from_json(std::string_view text);

struct GroundTruth {
    // Every on-chain address controlled by an entity.
    std::map<std::string, std::string> addresses;
    // entity -> asset -> (block, balance) after each block that changed it.
    std::map<std::string, std::map<std::string, std::vector<std::pair<std::uint64_t, BigInt>>>> series;
    // Sum of coinbase outputs.
    BigInt supply;
    // Minted minus burned per account-model asset.
    std::map<std::string, BigInt> account_supply;

    BigInt balance_at(const std::string &entity, const std::string &asset, std::uint64_t block) const;
    std::vector<std::string> entities() const;
};

std::string ground_truth_to_json(const GroundTruth &truth);
GroundTruth ground_truth_from_json(std::string_view text);

struct GeneratedLedger {
    std::vector<UtxoTransaction> transactions;
    std::vector<AccountTransfer> transfers;
    TagSet tags;
    PriceSeries prices;
    std::vector<BalanceSheetRecord> balance_sheets;
    GroundTruth truth;
};

// Throws InvalidConfig.
GeneratedLedger generate(const ScenarioConfig &config);

// transactions.jsonl, transfers.jsonl, tags.csv, prices.csv, balance_sheets.csv, ground_truth.json
void write_scenario(const GeneratedLedger &ledger, const std::filesystem::path &dir);

// Large random UTXO stream for clustering at scale; transactions are valid
// and already in (block, txid) order.
struct StreamConfig {
    std::uint64_t seed = 1;
    std::size_t transactions = 10000;
    std::size_t wallets = 50000;
    std::size_t transactions_per_block = 2000;
};

std::vector<UtxoTransaction> generate_stream(const StreamConfig &config);

// What the pipeline recovered for each entity.
struct PipelineView {
    std::map<std::string, std::set<std::string>> addresses;
    std::map<std::string, std::map<std::string, BalanceSeries>> series;
};

struct EntityRecall {
    Rational address_recall;
    // asset -> (block, recall) where the true balance is positive; clamped to [0, 1].
    std::map<std::string, std::vector<std::pair<std::uint64_t, Rational>>> balance_recall;
    // asset -> recall at the last evaluated block.
    std::map<std::string, Rational> final_balance_recall;
};

// Clusters the generated ledger, attributes its tags and reconstructs every
// tagged entity's holdings (strict attribution).
PipelineView run_pipeline(const GeneratedLedger &ledger, AttributionScope scope = AttributionScope::Cluster,
                          std::uint64_t interval_blocks = 10000);

// Throws EntityMismatch when the pipeline reports an entity the ground
// truth does not know.
std::map<std::string, EntityRecall> compare_to_ground_truth(const PipelineView &pipeline, const GroundTruth &truth);

} // namespace solvaudit::testkit

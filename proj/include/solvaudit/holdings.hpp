#pragma once

// Per-entity balance reconstruction: UTXO net flows, sampled account-model
// snapshots and EUR valuation.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "solvaudit/cluster.hpp"
#include "solvaudit/ingest.hpp"
#include "solvaudit/numeric.hpp"
#include "solvaudit/price_series.hpp"

namespace solvaudit {

struct FlowEvent {
    std::uint64_t timestamp = 0;
    std::uint64_t block = 0;
    std::string asset;
    BigInt delta;
    std::string txid;
};

struct BalancePoint {
    std::uint64_t block = 0;
    std::uint64_t timestamp = 0;
    BigInt balance;

    friend bool operator==(const BalancePoint &, const BalancePoint &) = default;
};

struct Observation {
    std::uint64_t block = 0;
    std::uint64_t timestamp = 0;
};

enum class SeriesKind {
    // Points at every balance change; exact at any block up to observed_through.
    Flow,
    // Points on a block grid; only the points themselves are observations.
    Snapshot,
};

struct DataGapWarning {
    std::uint64_t block = 0;
    BigInt balance;
    std::string message;
};

struct BalanceSeries {
    std::string entity;
    std::string asset;
    SeriesKind kind = SeriesKind::Flow;
    std::vector<BalancePoint> points;
    std::optional<Observation> observed_through;
    // First negative balance, meaning deposits were not observed.
    std::optional<DataGapWarning> data_gap;

    // Step-wise value: last point at or before the argument, zero before the first.
    BigInt balance_at_block(std::uint64_t block) const;
    BigInt balance_at_time(std::int64_t unix_seconds) const;
    // Latest time <= t at which the ledger was actually observed.
    std::optional<std::uint64_t> last_observation(std::int64_t unix_seconds) const;
};

enum class AttributionScope {
    Cluster, // every address in the entity's clusters
    Address, // tagged addresses only
};

// One event per transaction with a nonzero net effect on the entity:
// outputs paid to it minus inputs spent by it. Throws UnknownEntity.
std::vector<FlowEvent> entity_utxo_flows(std::span<const UtxoTransaction> txs, const ClusterIndex &index,
                                         const EntityMap &entities, std::string_view entity,
                                         AttributionScope scope = AttributionScope::Cluster);

// Cumulative sum of the flows, one point per block. `observed_through`
// defaults to the last flow.
BalanceSeries balance_series_utxo(std::string entity, std::span<const FlowEvent> flows,
                                  std::optional<Observation> observed_through = std::nullopt);

// Maps blocks to timestamps from observed (block, timestamp) anchors by
// linear interpolation, extrapolating with the overall rate.
class BlockClock {
public:
    void observe(std::uint64_t block, std::uint64_t timestamp);
    std::uint64_t timestamp_of(std::uint64_t block) const;
    bool empty() const noexcept { return anchors_.empty(); }

private:
    std::map<std::uint64_t, std::uint64_t> anchors_;
};

BlockClock clock_from(std::span<const AccountTransfer> transfers);

struct SnapshotOptions {
    std::uint64_t interval_blocks = 10000;
    // Extends the grid to cover this block even without later transfers.
    std::optional<std::uint64_t> until_block;
    // Used to timestamp grid blocks; built from the transfers when empty.
    const BlockClock *clock = nullptr;
};

// Balance of the watched addresses at every grid block 0, N, 2N, ... up to
// the first multiple of N covering the last transfer. Throws IntervalZero.
std::map<std::string, BalanceSeries> account_snapshots(std::span<const AccountTransfer> transfers,
                                                       const std::set<std::string> &watch,
                                                       std::span<const std::string> assets,
                                                       const SnapshotOptions &options = {},
                                                       const std::string &entity = {});

// Everything an entity's holdings are reconstructed from.
struct LedgerView {
    std::span<const UtxoTransaction> transactions;
    const ClusterIndex *index = nullptr;
    const EntityMap *entities = nullptr;
    std::span<const AccountTransfer> transfers;
    const BlockClock *clock = nullptr;
    std::uint64_t interval_blocks = 10000;
    AttributionScope scope = AttributionScope::Cluster;
};

// BTC flow series observed through the last transaction (when the entity has
// UTXO clusters) plus grid snapshots of every asset moved on the account
// ledger (when it has tagged account addresses). Empty for unknown entities.
std::map<std::string, BalanceSeries> entity_holdings(const LedgerView &view, const std::string &entity);

struct Valuation {
    // Rounded half-even to cents.
    Decimal total_eur;
    Decimal exact_total_eur;
    std::map<std::string, Decimal> per_asset_eur;
    std::map<std::string, BigInt> balances;
    std::vector<std::string> warnings;
};

inline constexpr int kDefaultPriceWindowDays = 7;

// Sum of balance * price / 10^decimals over assets; throws StalePrice for a
// nonzero balance without a recent price.
Valuation valuate_balances(const std::map<std::string, BigInt> &balances, const AssetRegistry &registry,
                           const PriceSeries &prices, Date at, int window_days = kDefaultPriceWindowDays);

// Values each series at the end of day `at`.
Valuation valuate(const std::map<std::string, BalanceSeries> &series, const AssetRegistry &registry,
                  const PriceSeries &prices, Date at, int window_days = kDefaultPriceWindowDays);

// CSV `entity,asset,block,timestamp,balance_base_units[,eur_value]`.
void write_series_csv(std::ostream &out, std::span<const BalanceSeries> series, const AssetRegistry *registry = nullptr,
                      const PriceSeries *prices = nullptr, int window_days = kDefaultPriceWindowDays);
// Reads series back, observed through their last point. BTC rows are taken as
// a complete change list (Flow); other assets as grid snapshots.
std::vector<BalanceSeries> parse_series_csv(std::istream &in);

} // namespace solvaudit

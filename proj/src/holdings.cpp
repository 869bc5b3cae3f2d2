#include "solvaudit/holdings.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>

#include <fmt/format.h>

namespace solvaudit {

BigInt BalanceSeries::balance_at_block(std::uint64_t block) const
{
    auto it = std::upper_bound(points.begin(), points.end(), block,
                               [](std::uint64_t b, const BalancePoint &p) { return b < p.block; });
    return it == points.begin() ? BigInt(0) : std::prev(it)->balance;
}

BigInt BalanceSeries::balance_at_time(std::int64_t unix_seconds) const
{
    if (unix_seconds < 0)
        return 0;
    const auto t = static_cast<std::uint64_t>(unix_seconds);
    auto it = std::upper_bound(points.begin(), points.end(), t,
                               [](std::uint64_t v, const BalancePoint &p) { return v < p.timestamp; });
    return it == points.begin() ? BigInt(0) : std::prev(it)->balance;
}

std::optional<std::uint64_t> BalanceSeries::last_observation(std::int64_t unix_seconds) const
{
    if (unix_seconds < 0)
        return std::nullopt;
    const auto t = static_cast<std::uint64_t>(unix_seconds);
    if (kind == SeriesKind::Flow) {
        if (!observed_through)
            return std::nullopt;
        return std::min(t, observed_through->timestamp);
    }
    auto it = std::upper_bound(points.begin(), points.end(), t,
                               [](std::uint64_t v, const BalancePoint &p) { return v < p.timestamp; });
    if (it == points.begin())
        return std::nullopt;
    return std::prev(it)->timestamp;
}

// --- UTXO flows -------------------------------------------------------------

std::vector<FlowEvent> entity_utxo_flows(std::span<const UtxoTransaction> txs, const ClusterIndex &index,
                                         const EntityMap &entities, std::string_view entity, AttributionScope scope)
{
    std::vector<std::uint8_t> member(index.address_count(), 0);
    if (scope == AttributionScope::Cluster) {
        for (ClusterId c : entities.clusters_of(entity))
            for (std::uint32_t id : index.members(c))
                member[id] = 1;
    } else {
        for (const auto &address : entities.tagged_utxo_addresses(entity))
            if (auto id = index.id_of(address))
                member[*id] = 1;
    }
    auto is_member = [&](const std::string &address) {
        auto id = index.id_of(address);
        return id && member[*id];
    };

    std::vector<FlowEvent> flows;
    for (const auto &tx : txs) {
        // Both sides are bounded by 2^64 * count, so __int128 cannot overflow here.
        __int128 delta = 0;
        for (const auto &out : tx.outputs)
            if (is_member(out.address))
                delta += out.value;
        for (const auto &in : tx.inputs)
            if (is_member(in.address))
                delta -= in.value;
        if (delta == 0)
            continue;
        const bool negative = delta < 0;
        const auto magnitude = static_cast<unsigned __int128>(negative ? -delta : delta);
        BigInt big = static_cast<std::uint64_t>(magnitude >> 64);
        big <<= 64;
        big += static_cast<std::uint64_t>(magnitude);
        flows.push_back({tx.timestamp, tx.block, std::string(kUtxoAsset), negative ? BigInt(-big) : big, tx.txid});
    }
    return flows;
}

BalanceSeries balance_series_utxo(std::string entity, std::span<const FlowEvent> flows,
                                  std::optional<Observation> observed_through)
{
    std::vector<const FlowEvent *> ordered;
    ordered.reserve(flows.size());
    for (const auto &f : flows)
        ordered.push_back(&f);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const FlowEvent *a, const FlowEvent *b) { return a->block < b->block; });

    BalanceSeries series;
    series.entity = std::move(entity);
    series.asset = flows.empty() ? std::string(kUtxoAsset) : flows.front().asset;
    series.kind = SeriesKind::Flow;
    BigInt running = 0;
    for (const FlowEvent *f : ordered) {
        running += f->delta;
        if (!series.points.empty() && series.points.back().block == f->block) {
            series.points.back().balance = running;
            series.points.back().timestamp = std::max(series.points.back().timestamp, f->timestamp);
        } else {
            series.points.push_back({f->block, f->timestamp, running});
        }
        if (running < 0 && !series.data_gap)
            series.data_gap = DataGapWarning{
                f->block, running,
                fmt::format("{} {} balance turns negative ({}) at block {}: deposits were not observed",
                            series.entity, series.asset, running.str(), f->block)};
    }
    if (observed_through)
        series.observed_through = observed_through;
    else if (!series.points.empty())
        series.observed_through = Observation{series.points.back().block, series.points.back().timestamp};
    return series;
}

// --- account snapshots ------------------------------------------------------

void BlockClock::observe(std::uint64_t block, std::uint64_t timestamp)
{
    auto [it, inserted] = anchors_.try_emplace(block, timestamp);
    if (!inserted)
        it->second = std::max(it->second, timestamp);
}

std::uint64_t BlockClock::timestamp_of(std::uint64_t block) const
{
    if (anchors_.empty())
        return 0;
    auto exact = anchors_.find(block);
    if (exact != anchors_.end())
        return exact->second;
    const auto &[first_b, first_t] = *anchors_.begin();
    const auto &[last_b, last_t] = *anchors_.rbegin();
    auto interpolate = [](std::uint64_t b0, std::uint64_t t0, std::uint64_t b1, std::uint64_t t1, std::uint64_t b) {
        // Signed math so extrapolation below b0 and clocks running backwards work.
        const __int128 dt = static_cast<__int128>(t1) - t0;
        const __int128 db = static_cast<__int128>(b1) - b0;
        const __int128 off = static_cast<__int128>(b) - b0;
        __int128 t = t0 + dt * off / db;
        return static_cast<std::uint64_t>(t < 0 ? 0 : t);
    };
    if (anchors_.size() == 1)
        return first_t;
    if (block < first_b || block > last_b)
        return interpolate(first_b, first_t, last_b, last_t, block);
    auto hi = anchors_.upper_bound(block);
    auto lo = std::prev(hi);
    return interpolate(lo->first, lo->second, hi->first, hi->second, block);
}

BlockClock clock_from(std::span<const AccountTransfer> transfers)
{
    BlockClock clock;
    for (const auto &t : transfers)
        clock.observe(t.block, t.timestamp);
    return clock;
}

std::map<std::string, BalanceSeries> account_snapshots(std::span<const AccountTransfer> transfers,
                                                       const std::set<std::string> &watch,
                                                       std::span<const std::string> assets,
                                                       const SnapshotOptions &options, const std::string &entity)
{
    const std::uint64_t n = options.interval_blocks;
    if (n == 0)
        throw Error(Errc::IntervalZero, "snapshot interval must be positive");

    std::uint64_t last_block = options.until_block.value_or(0);
    for (const auto &t : transfers)
        last_block = std::max(last_block, t.block);
    const std::uint64_t last_grid = (last_block + n - 1) / n * n;

    BlockClock own_clock;
    const BlockClock *clock = options.clock;
    if (!clock) {
        own_clock = clock_from(transfers);
        clock = &own_clock;
    }

    std::map<std::string, BigInt> running;
    std::map<std::string, BalanceSeries> out;
    for (const auto &asset : assets) {
        running[asset] = 0;
        auto &s = out[asset];
        s.entity = entity;
        s.asset = asset;
        s.kind = SeriesKind::Snapshot;
    }

    std::vector<const AccountTransfer *> ordered;
    for (const auto &t : transfers)
        if (running.count(t.asset) && (watch.count(t.from) || watch.count(t.to)))
            ordered.push_back(&t);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const AccountTransfer *a, const AccountTransfer *b) { return a->block < b->block; });

    std::size_t next = 0;
    for (std::uint64_t g = 0;; g += n) {
        for (; next < ordered.size() && ordered[next]->block <= g; ++next) {
            const AccountTransfer &t = *ordered[next];
            BigInt &bal = running[t.asset];
            if (watch.count(t.to))
                bal += t.value;
            if (watch.count(t.from))
                bal -= t.value;
        }
        const std::uint64_t ts = clock->timestamp_of(g);
        for (auto &[asset, series] : out) {
            const BigInt &bal = running[asset];
            series.points.push_back({g, ts, bal});
            if (bal < 0 && !series.data_gap)
                series.data_gap = DataGapWarning{
                    g, bal,
                    fmt::format("{} {} balance is negative ({}) at block {}: deposits were not observed", entity,
                                asset, bal.str(), g)};
        }
        if (g >= last_grid)
            break;
    }
    for (auto &[asset, series] : out)
        series.observed_through = Observation{series.points.back().block, series.points.back().timestamp};
    return out;
}

// --- valuation --------------------------------------------------------------

std::map<std::string, BalanceSeries> entity_holdings(const LedgerView &view, const std::string &entity)
{
    std::map<std::string, BalanceSeries> out;
    if (!view.entities || !view.entities->contains(entity))
        return out;
    const auto &entities = *view.entities;
    const bool utxo = view.scope == AttributionScope::Cluster ? !entities.clusters_of(entity).empty()
                                                              : !entities.tagged_utxo_addresses(entity).empty();
    if (utxo && view.index && !view.transactions.empty()) {
        const auto flows = entity_utxo_flows(view.transactions, *view.index, entities, entity, view.scope);
        const auto &last = view.transactions.back();
        auto series = balance_series_utxo(entity, flows, Observation{last.block, last.timestamp});
        out.emplace(series.asset, std::move(series));
    }
    const auto &watched = entities.account_addresses(entity);
    if (!watched.empty() && !view.transfers.empty()) {
        std::set<std::string> assets;
        for (const auto &t : view.transfers)
            assets.insert(t.asset);
        const std::vector<std::string> asset_list(assets.begin(), assets.end());
        SnapshotOptions options;
        options.interval_blocks = view.interval_blocks;
        options.clock = view.clock;
        auto snaps = account_snapshots(view.transfers, std::set<std::string>(watched.begin(), watched.end()),
                                       asset_list, options, entity);
        for (auto &[asset, series] : snaps)
            out.insert_or_assign(asset, std::move(series));
    }
    return out;
}

Valuation valuate_balances(const std::map<std::string, BigInt> &balances, const AssetRegistry &registry,
                           const PriceSeries &prices, Date at, int window_days)
{
    Valuation v;
    v.balances = balances;
    Decimal exact;
    for (const auto &[asset, balance] : balances) {
        if (balance == 0) {
            v.per_asset_eur[asset] = Decimal(0, 2);
            continue;
        }
        const AssetId &id = registry.at(asset);
        const PriceQuote quote = prices.require(id.symbol, at, window_days);
        const Decimal value(balance * quote.eur_per_unit.units(), quote.eur_per_unit.scale() + id.decimals);
        if (balance < 0)
            v.warnings.push_back(fmt::format("negative {} balance {} valued as {} EUR on {}", asset, balance.str(),
                                             value.round_half_even(2).to_string(), format_date(at)));
        v.per_asset_eur[asset] = value.round_half_even(2);
        exact += value;
    }
    v.exact_total_eur = exact;
    v.total_eur = exact.round_half_even(2);
    return v;
}

Valuation valuate(const std::map<std::string, BalanceSeries> &series, const AssetRegistry &registry,
                  const PriceSeries &prices, Date at, int window_days)
{
    std::map<std::string, BigInt> balances;
    for (const auto &[asset, s] : series)
        balances[asset] += s.balance_at_time(day_end(at));
    return valuate_balances(balances, registry, prices, at, window_days);
}

// --- CSV --------------------------------------------------------------------

void write_series_csv(std::ostream &out, std::span<const BalanceSeries> series, const AssetRegistry *registry,
                      const PriceSeries *prices, int window_days)
{
    const bool with_eur = registry && prices;
    out << "entity,asset,block,timestamp,balance_base_units" << (with_eur ? ",eur_value" : "") << '\n';
    for (const auto &s : series) {
        for (const auto &p : s.points) {
            std::vector<std::string> row{s.entity, s.asset, std::to_string(p.block), std::to_string(p.timestamp),
                                         p.balance.str()};
            if (with_eur) {
                std::string eur;
                if (auto q = prices->latest(s.asset, date_of(p.timestamp), window_days)) {
                    const unsigned decimals = registry->at(s.asset).decimals;
                    eur = Decimal(p.balance * q->eur_per_unit.units(), q->eur_per_unit.scale() + decimals)
                              .round_half_even(2)
                              .to_string();
                }
                row.push_back(std::move(eur));
            }
            out << join_csv(row) << '\n';
        }
    }
}

std::vector<BalanceSeries> parse_series_csv(std::istream &in)
{
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line))
        return {};
    if (line != "entity,asset,block,timestamp,balance_base_units" &&
        line != "entity,asset,block,timestamp,balance_base_units,eur_value")
        throw Error(Errc::MalformedRow, "unexpected series header '" + line + "'", line_no);

    std::map<std::pair<std::string, std::string>, BalanceSeries> by_key;
    while (std::getline(in, line)) {
        ++line_no;
        const auto f = split_csv(line);
        if (f.size() < 5)
            throw Error(Errc::MalformedRow, "expected at least 5 fields", line_no);
        BalancePoint p;
        auto num = [&](const std::string &s, std::uint64_t &v) {
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || ptr != s.data() + s.size())
                throw Error(Errc::MalformedRow, "not an unsigned integer: '" + s + "'", line_no);
        };
        num(f[2], p.block);
        num(f[3], p.timestamp);
        Decimal bal;
        if (!Decimal::try_parse(f[4], bal) || bal.scale() != 0)
            throw Error(Errc::MalformedRow, "not an integer balance: '" + f[4] + "'", line_no);
        p.balance = bal.units();
        auto &s = by_key[{f[0], f[1]}];
        s.entity = f[0];
        s.asset = f[1];
        // UTXO series hold every balance change; account series only their grid.
        s.kind = f[1] == kUtxoAsset ? SeriesKind::Flow : SeriesKind::Snapshot;
        if (!s.points.empty() && s.points.back().block >= p.block)
            throw Error(Errc::MalformedRow, "series blocks must increase", line_no);
        s.points.push_back(std::move(p));
    }
    std::vector<BalanceSeries> out;
    for (auto &[key, s] : by_key) {
        s.observed_through = Observation{s.points.back().block, s.points.back().timestamp};
        for (const auto &p : s.points)
            if (p.balance < 0) {
                s.data_gap = DataGapWarning{p.block, p.balance, "negative balance in series input"};
                break;
            }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace solvaudit

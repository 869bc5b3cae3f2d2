#include "solvaudit/testkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "solvaudit/error.hpp"

namespace solvaudit::testkit {

using ojson = nlohmann::ordered_json;
using solvaudit::to_string;

std::uint64_t SplitMix64::next()
{
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t SplitMix64::below(std::uint64_t n)
{
    // 2^64 mod n, computed without 128-bit arithmetic.
    const std::uint64_t reject = (0 - n) % n;
    while (true) {
        const std::uint64_t r = next();
        if (r <= ~std::uint64_t{0} - reject)
            return r % n;
    }
}

std::uint64_t SplitMix64::between(std::uint64_t lo, std::uint64_t hi)
{
    if (hi - lo == ~std::uint64_t{0})
        return next();
    return lo + below(hi - lo + 1);
}

std::string_view to_string(WalletStrategy strategy) noexcept
{
    switch (strategy) {
    case WalletStrategy::Reuse: return "REUSE";
    case WalletStrategy::FreshPerDeposit: return "FRESH_PER_DEPOSIT";
    case WalletStrategy::HotCold: return "HOT_COLD";
    case WalletStrategy::Collector: return "COLLECTOR";
    }
    return "REUSE";
}

namespace {

[[noreturn]] void invalid(const std::string &message)
{
    throw Error(Errc::InvalidConfig, message);
}

WalletStrategy parse_strategy(std::string_view text)
{
    for (auto s : {WalletStrategy::Reuse, WalletStrategy::FreshPerDeposit, WalletStrategy::HotCold,
                   WalletStrategy::Collector})
        if (to_string(s) == text)
            return s;
    invalid(fmt::format("unknown wallet strategy '{}'", text));
}

std::vector<Date> report_dates_of(const ScenarioConfig &config)
{
    if (!config.report_dates.empty())
        return config.report_dates;
    std::vector<Date> out;
    const auto first = std::chrono::year_month_day(config.start).year();
    const auto last = std::chrono::year_month_day(config.end).year();
    for (auto y = first; y <= last; ++y) {
        const Date d(y / 12 / 31);
        if (d >= config.start && d <= config.end)
            out.push_back(d);
    }
    return out;
}

std::string hex_of(SplitMix64 &rng, std::size_t chars)
{
    std::string out;
    while (out.size() < chars)
        out += fmt::format("{:016x}", rng.next());
    out.resize(chars);
    return out;
}

} // namespace

void validate(const ScenarioConfig &config)
{
    if (config.entities.empty())
        invalid("scenario has no entities");
    if (config.users == 0)
        invalid("scenario needs at least one user");
    if (config.start > config.end)
        invalid("start is after end");
    if (config.utxo_block_seconds == 0 || config.account_block_seconds == 0)
        invalid("block cadence must be positive");
    if (config.subsidy == 0)
        invalid("subsidy must be positive");
    if (config.quiet_days < 0)
        invalid("quiet_days must be >= 0");
    const auto registry = AssetRegistry::defaults();
    for (const auto &asset : config.account_assets) {
        if (!registry.contains(asset))
            invalid(fmt::format("unknown account asset '{}'", asset));
        if (asset == kUtxoAsset)
            invalid("BTC is the UTXO ledger's asset");
    }
    for (Date d : config.report_dates)
        if (d < config.start || d > config.end)
            invalid(fmt::format("report date {} outside the scenario", format_date(d)));
    std::set<std::pair<std::string, Ledger>> seen;
    for (const auto &e : config.entities) {
        if (e.name.empty())
            invalid("entity name is empty");
        if (!seen.emplace(e.name, e.ledger).second)
            invalid(fmt::format("entity {} appears twice on the {} ledger", e.name, to_string(e.ledger)));
        if (!(e.tag_coverage >= 0.0 && e.tag_coverage <= 1.0))
            invalid(fmt::format("tag_coverage of {} must be in [0, 1]", e.name));
        if (e.hot_share.sign() < 0 || e.hot_share > Decimal(1, 0))
            invalid(fmt::format("hot_share of {} must be in [0, 1]", e.name));
        if (e.declare_factor.sign() < 0)
            invalid(fmt::format("declare_factor of {} must be >= 0", e.name));
        if (e.strategy == WalletStrategy::Reuse && e.reuse_addresses == 0)
            invalid(fmt::format("reuse_addresses of {} must be positive", e.name));
    }
}

ScenarioConfig default_scenario(std::uint64_t seed)
{
    ScenarioConfig config;
    config.seed = seed;
    auto entity = [](std::string name, Ledger ledger, WalletStrategy strategy, double coverage) {
        EntityConfig e;
        e.name = std::move(name);
        e.ledger = ledger;
        e.strategy = strategy;
        e.tag_coverage = coverage;
        return e;
    };
    config.entities = {
        entity("VASP-A", Ledger::Utxo, WalletStrategy::Reuse, 0.34),
        entity("VASP-A", Ledger::Account, WalletStrategy::Reuse, 1.0),
        entity("VASP-B", Ledger::Utxo, WalletStrategy::FreshPerDeposit, 0.1),
        entity("VASP-C", Ledger::Utxo, WalletStrategy::HotCold, 0.5),
        entity("VASP-D", Ledger::Account, WalletStrategy::Collector, 1.0),
    };
    return config;
}

ScenarioConfig scenario_from_json(std::string_view text)
{
    try {
        const auto j = nlohmann::json::parse(text);
        ScenarioConfig c;
        c.seed = j.value("seed", c.seed);
        c.users = j.value("users", c.users);
        c.extra_coinbases = j.value("extra_coinbases", c.extra_coinbases);
        c.background_transfers = j.value("background_transfers", c.background_transfers);
        auto date = [&](const char *key, Date fallback) {
            if (!j.contains(key))
                return fallback;
            Date d;
            if (!try_parse_date(j.at(key).get<std::string>(), d))
                invalid(fmt::format("{} is not a YYYY-MM-DD date", key));
            return d;
        };
        c.start = date("start", c.start);
        c.end = date("end", c.end);
        if (j.contains("report_dates"))
            for (const auto &d : j.at("report_dates")) {
                Date parsed;
                if (!try_parse_date(d.get<std::string>(), parsed))
                    invalid("report_dates entries must be YYYY-MM-DD");
                c.report_dates.push_back(parsed);
            }
        c.quiet_days = j.value("quiet_days", c.quiet_days);
        c.utxo_block_seconds = j.value("utxo_block_seconds", c.utxo_block_seconds);
        c.account_block_seconds = j.value("account_block_seconds", c.account_block_seconds);
        c.subsidy = j.value("subsidy", c.subsidy);
        c.fee = j.value("fee", c.fee);
        if (j.contains("account_assets"))
            c.account_assets = j.at("account_assets").get<std::vector<std::string>>();
        for (const auto &je : j.at("entities")) {
            EntityConfig e;
            e.name = je.at("name").get<std::string>();
            const auto ledger = je.value("ledger", std::string("UTXO"));
            if (ledger != "UTXO" && ledger != "ACCOUNT")
                invalid(fmt::format("ledger must be UTXO or ACCOUNT, got '{}'", ledger));
            e.ledger = ledger == "UTXO" ? Ledger::Utxo : Ledger::Account;
            e.strategy = parse_strategy(je.value("strategy", std::string("REUSE")));
            e.deposits = je.value("deposits", e.deposits);
            e.withdrawals = je.value("withdrawals", e.withdrawals);
            e.tag_coverage = je.value("tag_coverage", e.tag_coverage);
            e.reuse_addresses = je.value("reuse_addresses", e.reuse_addresses);
            e.sweep_every = je.value("sweep_every", e.sweep_every);
            Decimal d;
            if (je.contains("hot_share")) {
                if (!Decimal::try_parse(je.at("hot_share").get<std::string>(), d))
                    invalid("hot_share must be a decimal string");
                e.hot_share = d;
            }
            if (je.contains("declare_factor")) {
                if (!Decimal::try_parse(je.at("declare_factor").get<std::string>(), d))
                    invalid("declare_factor must be a decimal string");
                e.declare_factor = d;
            }
            e.proxy = je.value("proxy", e.proxy);
            c.entities.push_back(std::move(e));
        }
        validate(c);
        return c;
    } catch (const nlohmann::json::exception &e) {
        invalid(std::string("bad scenario JSON: ") + e.what());
    }
}

// --- ground truth ----------------------------------------------------------

BigInt GroundTruth::balance_at(const std::string &entity, const std::string &asset, std::uint64_t block) const
{
    auto e = series.find(entity);
    if (e == series.end())
        return 0;
    auto a = e->second.find(asset);
    if (a == e->second.end())
        return 0;
    const auto &points = a->second;
    auto it = std::upper_bound(points.begin(), points.end(), block,
                               [](std::uint64_t b, const auto &p) { return b < p.first; });
    return it == points.begin() ? BigInt(0) : std::prev(it)->second;
}

std::vector<std::string> GroundTruth::entities() const
{
    std::set<std::string> names;
    for (const auto &[address, entity] : addresses)
        names.insert(entity);
    for (const auto &[entity, assets] : series)
        names.insert(entity);
    return {names.begin(), names.end()};
}

std::string ground_truth_to_json(const GroundTruth &truth)
{
    ojson j;
    j["addresses"] = ojson::object();
    for (const auto &[address, entity] : truth.addresses)
        j["addresses"][address] = entity;
    j["series"] = ojson::object();
    for (const auto &[entity, assets] : truth.series) {
        ojson per_asset = ojson::object();
        for (const auto &[asset, points] : assets) {
            ojson list = ojson::array();
            for (const auto &[block, balance] : points)
                list.push_back(ojson::array({block, to_string(balance)}));
            per_asset[asset] = std::move(list);
        }
        j["series"][entity] = std::move(per_asset);
    }
    j["supply"] = to_string(truth.supply);
    j["account_supply"] = ojson::object();
    for (const auto &[asset, supply] : truth.account_supply)
        j["account_supply"][asset] = to_string(supply);
    return j.dump() + "\n";
}

GroundTruth ground_truth_from_json(std::string_view text)
{
    auto number = [](const nlohmann::json &v) {
        BigInt out;
        const auto s = v.get<std::string>();
        const bool negative = !s.empty() && s.front() == '-';
        if (!parse_unsigned(negative ? std::string_view(s).substr(1) : std::string_view(s), out))
            throw Error(Errc::MalformedLine, fmt::format("not an integer: '{}'", s));
        return negative ? BigInt(-out) : out;
    };
    try {
        const auto j = nlohmann::json::parse(text);
        GroundTruth truth;
        for (const auto &[address, entity] : j.at("addresses").items())
            truth.addresses[address] = entity.get<std::string>();
        for (const auto &[entity, assets] : j.at("series").items())
            for (const auto &[asset, points] : assets.items()) {
                auto &out = truth.series[entity][asset];
                for (const auto &p : points)
                    out.emplace_back(p.at(0).get<std::uint64_t>(), number(p.at(1)));
            }
        truth.supply = number(j.at("supply"));
        if (j.contains("account_supply"))
            for (const auto &[asset, supply] : j.at("account_supply").items())
                truth.account_supply[asset] = number(supply);
        return truth;
    } catch (const nlohmann::json::exception &e) {
        throw Error(Errc::MalformedLine, std::string("bad ground truth JSON: ") + e.what());
    }
}

// --- generator -------------------------------------------------------------

namespace {

constexpr std::uint64_t kMinAmount = 100'000;
constexpr std::uint64_t kMaxDeposit = 5'0000'0000;
constexpr std::uint64_t kMaxWithdrawal = 2'0000'0000;
constexpr std::int64_t kDay = 86400;

struct Coin {
    std::size_t address = 0;
    std::uint64_t value = 0;
};

struct UtxoWallet {
    std::vector<std::string> addresses;
    std::vector<Coin> coins;

    std::uint64_t total() const
    {
        std::uint64_t t = 0;
        for (const auto &c : coins)
            t += c.value;
        return t;
    }
    std::uint64_t total_at(std::size_t address) const
    {
        std::uint64_t t = 0;
        for (const auto &c : coins)
            if (c.address == address)
                t += c.value;
        return t;
    }
};

struct EntityState {
    const EntityConfig *config = nullptr;
    std::size_t index = 0;
    UtxoWallet utxo;
    std::vector<std::string> account_addresses;
    std::map<std::size_t, std::size_t> customer_address;
    std::size_t deposits_seen = 0;
};

// Block numbering of one ledger: strictly increasing, never inside a quiet window.
class Chain {
public:
    Chain(std::int64_t genesis, std::uint64_t seconds, std::vector<std::pair<std::int64_t, std::int64_t>> quiet)
        : genesis_(genesis), seconds_(seconds), quiet_(std::move(quiet))
    {
    }

    std::uint64_t place(std::int64_t time)
    {
        std::uint64_t block = time <= genesis_ ? 0 : static_cast<std::uint64_t>(time - genesis_) / seconds_;
        if (last_ && block <= *last_)
            block = *last_ + 1;
        for (bool moved = true; moved;) {
            moved = false;
            const auto ts = timestamp_of(block);
            for (const auto &[from, to] : quiet_)
                if (ts >= from && ts < to) {
                    block = static_cast<std::uint64_t>(to - genesis_ + seconds_ - 1) / seconds_;
                    moved = true;
                }
        }
        last_ = block;
        return block;
    }

    std::int64_t timestamp_of(std::uint64_t block) const
    {
        return genesis_ + static_cast<std::int64_t>(block * seconds_);
    }
    std::uint64_t block_at(std::int64_t time) const
    {
        return time <= genesis_ ? 0 : static_cast<std::uint64_t>(time - genesis_) / seconds_;
    }

private:
    std::int64_t genesis_;
    std::uint64_t seconds_;
    std::vector<std::pair<std::int64_t, std::int64_t>> quiet_;
    std::optional<std::uint64_t> last_;
};

class Generator {
public:
    explicit Generator(const ScenarioConfig &config)
        : config_(config), rng_(config.seed), registry_(AssetRegistry::defaults()), report_dates_(report_dates_of(config)),
          genesis_(day_start(config.start)), utxo_chain_(genesis_, config.utxo_block_seconds, quiet_windows()),
          account_chain_(genesis_, config.account_block_seconds, quiet_windows())
    {
        for (std::size_t i = 0; i < config.entities.size(); ++i) {
            EntityState s;
            s.config = &config.entities[i];
            s.index = i;
            entities_.push_back(std::move(s));
        }
    }

    GeneratedLedger run()
    {
        setup();
        simulate();
        finalize();
        emit_tags();
        emit_prices();
        emit_balance_sheets();
        out_.truth.supply = supply_;
        for (const auto &asset : config_.account_assets)
            out_.truth.account_supply[asset] = account_supply_[asset];
        return std::move(out_);
    }

private:
    enum class Kind { Coinbase, Deposit, Withdrawal, Background };
    struct Event {
        std::int64_t time;
        std::size_t seq;
        Kind kind;
        std::size_t entity;
        std::size_t user;
    };

    std::vector<std::pair<std::int64_t, std::int64_t>> quiet_windows() const
    {
        std::vector<std::pair<std::int64_t, std::int64_t>> out;
        for (Date d : report_dates_)
            out.emplace_back(day_start(d) + kDay * (1 - config_.quiet_days), day_start(d) + kDay);
        return out;
    }

    // Random activity happens before this time; the final rebalances happen at it.
    std::int64_t finalize_time() const
    {
        const Date last = report_dates_.empty() ? config_.end : report_dates_.back();
        return std::max(genesis_ + 1, day_start(last) - kDay * (config_.quiet_days + 1));
    }

    std::string utxo_address() { return "bc1q" + hex_of(rng_, 38); }
    std::string account_address() { return "0x" + hex_of(rng_, 40); }

    std::size_t new_entity_address(EntityState &e)
    {
        auto address = utxo_address();
        utxo_owner_[address] = e.index;
        e.utxo.addresses.push_back(std::move(address));
        return e.utxo.addresses.size() - 1;
    }

    std::size_t new_account_address(EntityState &e)
    {
        auto address = account_address();
        account_owner_[address] = e.index;
        e.account_addresses.push_back(std::move(address));
        return e.account_addresses.size() - 1;
    }

    void setup()
    {
        for (std::size_t u = 0; u < config_.users; ++u) {
            users_.push_back({{utxo_address()}, {}});
            user_accounts_.push_back(account_address());
        }
        for (auto &e : entities_) {
            const auto &c = *e.config;
            if (c.ledger == Ledger::Utxo) {
                if (c.strategy == WalletStrategy::Reuse)
                    for (std::size_t i = 0; i < c.reuse_addresses; ++i)
                        new_entity_address(e);
                else if (c.strategy == WalletStrategy::HotCold) {
                    new_entity_address(e); // hot
                    new_entity_address(e); // cold
                } else if (c.strategy == WalletStrategy::Collector)
                    new_entity_address(e);
            } else {
                if (c.strategy == WalletStrategy::Reuse)
                    for (std::size_t i = 0; i < c.reuse_addresses; ++i)
                        new_account_address(e);
                else if (c.strategy == WalletStrategy::HotCold) {
                    new_account_address(e);
                    new_account_address(e);
                } else if (c.strategy == WalletStrategy::Collector)
                    new_account_address(e);
            }
        }
    }

    void simulate()
    {
        std::vector<Event> events;
        std::size_t seq = 0;
        for (std::size_t u = 0; u < config_.users; ++u)
            events.push_back({genesis_, seq++, Kind::Coinbase, 0, u});
        const auto from = genesis_ + 1;
        const auto to = finalize_time();
        auto when = [&] { return to > from ? from + static_cast<std::int64_t>(rng_.below(to - from)) : from; };
        for (std::size_t i = 0; i < config_.extra_coinbases; ++i)
            events.push_back({when(), seq++, Kind::Coinbase, 0, rng_.below(config_.users)});
        for (std::size_t i = 0; i < config_.background_transfers; ++i)
            events.push_back({when(), seq++, Kind::Background, 0, rng_.below(config_.users)});
        for (const auto &e : entities_) {
            for (std::size_t i = 0; i < e.config->deposits; ++i)
                events.push_back({when(), seq++, Kind::Deposit, e.index, rng_.below(config_.users)});
            for (std::size_t i = 0; i < e.config->withdrawals; ++i)
                events.push_back({when(), seq++, Kind::Withdrawal, e.index, rng_.below(config_.users)});
        }
        std::sort(events.begin(), events.end(),
                  [](const Event &a, const Event &b) { return std::tie(a.time, a.seq) < std::tie(b.time, b.seq); });

        for (std::size_t u = 0; u < config_.users; ++u)
            for (const auto &asset : config_.account_assets)
                mint(genesis_, u, asset);
        for (const auto &ev : events) {
            switch (ev.kind) {
            case Kind::Coinbase: coinbase(ev.time, ev.user); break;
            case Kind::Background: background(ev.time, ev.user); break;
            case Kind::Deposit:
                if (entities_[ev.entity].config->ledger == Ledger::Utxo)
                    utxo_deposit(ev.time, entities_[ev.entity], ev.user);
                else
                    account_deposit(ev.time, entities_[ev.entity], ev.user);
                break;
            case Kind::Withdrawal:
                if (entities_[ev.entity].config->ledger == Ledger::Utxo)
                    utxo_withdrawal(ev.time, entities_[ev.entity], ev.user);
                else
                    account_withdrawal(ev.time, entities_[ev.entity], ev.user);
                break;
            }
        }
    }

    void finalize()
    {
        const auto t = finalize_time();
        coinbase(t, rng_.below(config_.users));
        background(t, rng_.below(config_.users));
        for (auto &e : entities_) {
            const auto &c = *e.config;
            if (c.ledger == Ledger::Utxo && c.strategy == WalletStrategy::Reuse)
                reuse_consolidate(t, e);
            else if (c.ledger == Ledger::Utxo && c.strategy == WalletStrategy::HotCold)
                utxo_rebalance(t, e);
            else if (c.ledger == Ledger::Account && c.strategy == WalletStrategy::HotCold)
                for (const auto &asset : config_.account_assets)
                    account_rebalance(t, e, asset);
        }
    }

    // --- UTXO ledger ---

    struct Payee {
        UtxoWallet *wallet;
        std::size_t address;
        std::uint64_t value;
    };

    std::vector<Coin> take(UtxoWallet &w, auto &&pred)
    {
        std::vector<Coin> taken;
        std::vector<Coin> kept;
        for (const auto &c : w.coins)
            (pred(c) ? taken : kept).push_back(c);
        w.coins = std::move(kept);
        return taken;
    }

    void emit_utxo(std::int64_t time, const UtxoWallet &payer, const std::vector<Coin> &spent,
                   const std::vector<Payee> &payees)
    {
        UtxoTransaction tx;
        tx.block = utxo_chain_.place(time);
        tx.timestamp = static_cast<std::uint64_t>(utxo_chain_.timestamp_of(tx.block));
        tx.txid = fmt::format("{:016x}", utxo_seq_++) + hex_of(rng_, 48);
        std::map<std::size_t, BigInt> delta;
        for (const auto &c : spent) {
            const auto &address = payer.addresses[c.address];
            tx.inputs.push_back({address, c.value});
            if (auto it = utxo_owner_.find(address); it != utxo_owner_.end())
                delta[it->second] -= c.value;
        }
        for (const auto &p : payees) {
            if (p.value == 0)
                continue;
            const auto &address = p.wallet->addresses[p.address];
            tx.outputs.push_back({address, p.value});
            p.wallet->coins.push_back({p.address, p.value});
            if (auto it = utxo_owner_.find(address); it != utxo_owner_.end()) {
                delta[it->second] += p.value;
                out_.truth.addresses[address] = entities_[it->second].config->name;
                onchain_.insert(address);
            }
        }
        if (tx.is_coinbase())
            for (const auto &o : tx.outputs)
                supply_ += o.value;
        record(delta, std::string(kUtxoAsset), tx.block);
        out_.transactions.push_back(std::move(tx));
    }

    void record(const std::map<std::size_t, BigInt> &delta, const std::string &asset, std::uint64_t block)
    {
        for (const auto &[entity, d] : delta) {
            if (d == 0)
                continue;
            const auto &name = entities_[entity].config->name;
            auto &balance = balances_[{name, asset}];
            balance += d;
            auto &points = out_.truth.series[name][asset];
            if (!points.empty() && points.back().first == block)
                points.back().second = balance;
            else
                points.emplace_back(block, balance);
        }
    }

    void coinbase(std::int64_t time, std::size_t user)
    {
        emit_utxo(time, users_[user], {}, {{&users_[user], 0, config_.subsidy}});
    }

    // Spends the user's coins (oldest first) to pay `amount` to `to`.
    void user_pays(std::int64_t time, std::size_t user, Payee to)
    {
        auto &w = users_[user];
        std::uint64_t gathered = 0;
        std::size_t n = 0;
        while (n < w.coins.size() && gathered < to.value + config_.fee)
            gathered += w.coins[n++].value;
        std::vector<Coin> spent(w.coins.begin(), w.coins.begin() + static_cast<std::ptrdiff_t>(n));
        w.coins.erase(w.coins.begin(), w.coins.begin() + static_cast<std::ptrdiff_t>(n));
        emit_utxo(time, w, spent, {to, {&w, 0, gathered - to.value - config_.fee}});
    }

    void utxo_deposit(std::int64_t time, EntityState &e, std::size_t user)
    {
        const auto available = users_[user].total();
        if (available < kMinAmount + config_.fee)
            return;
        const auto amount = rng_.between(kMinAmount, std::min(available - config_.fee, kMaxDeposit));
        std::size_t dest = 0;
        switch (e.config->strategy) {
        case WalletStrategy::Reuse: dest = e.deposits_seen == 0 ? 0 : rng_.below(e.utxo.addresses.size()); break;
        case WalletStrategy::FreshPerDeposit: dest = new_entity_address(e); break;
        case WalletStrategy::HotCold: dest = 0; break;
        case WalletStrategy::Collector: {
            auto it = e.customer_address.find(user);
            if (it == e.customer_address.end())
                it = e.customer_address.emplace(user, new_entity_address(e)).first;
            dest = it->second;
            break;
        }
        }
        user_pays(time, user, {&e.utxo, dest, amount});
        ++e.deposits_seen;

        const auto &c = *e.config;
        if (c.strategy == WalletStrategy::Collector) {
            auto spent = take(e.utxo, [&](const Coin &coin) { return coin.address == dest; });
            std::uint64_t total = 0;
            for (const auto &s : spent)
                total += s.value;
            emit_utxo(time, e.utxo, spent, {{&e.utxo, 0, total - config_.fee}});
        } else if (c.strategy == WalletStrategy::FreshPerDeposit && c.sweep_every > 0 &&
                   e.deposits_seen % c.sweep_every == 0 && e.utxo.coins.size() > 1) {
            auto spent = take(e.utxo, [](const Coin &) { return true; });
            std::uint64_t total = 0;
            for (const auto &s : spent)
                total += s.value;
            const auto to = new_entity_address(e);
            emit_utxo(time, e.utxo, spent, {{&e.utxo, to, total - config_.fee}});
        } else if (c.strategy == WalletStrategy::HotCold && e.deposits_seen % 3 == 0) {
            const auto hot = e.utxo.total_at(0);
            if (hot > 2 * config_.fee + 2 * kMinAmount) {
                auto spent = take(e.utxo, [](const Coin &coin) { return coin.address == 0; });
                emit_utxo(time, e.utxo, spent, {{&e.utxo, 1, hot / 2}, {&e.utxo, 0, hot - hot / 2 - config_.fee}});
            }
        }
    }

    void utxo_withdrawal(std::int64_t time, EntityState &e, std::size_t user)
    {
        auto want = rng_.between(kMinAmount, kMaxWithdrawal);
        const auto fee = config_.fee;
        Payee customer{&users_[user], 0, 0};
        switch (e.config->strategy) {
        case WalletStrategy::Reuse: {
            // Everything is spent and change returns to address 0, so address 0
            // always holds a coin and co-spends with every other address.
            const auto total = e.utxo.total();
            if (total < kMinAmount + fee + 1)
                return;
            customer.value = std::min(want, total - fee - 1);
            auto spent = take(e.utxo, [](const Coin &) { return true; });
            emit_utxo(time, e.utxo, spent, {customer, {&e.utxo, 0, total - customer.value - fee}});
            return;
        }
        case WalletStrategy::FreshPerDeposit: {
            auto best = std::max_element(e.utxo.coins.begin(), e.utxo.coins.end(),
                                         [](const Coin &a, const Coin &b) { return a.value < b.value; });
            if (best == e.utxo.coins.end() || best->value < kMinAmount + fee + 1)
                return;
            const Coin coin = *best;
            e.utxo.coins.erase(best);
            customer.value = std::min(want, coin.value - fee - 1);
            const auto change = new_entity_address(e);
            emit_utxo(time, e.utxo, {coin}, {customer, {&e.utxo, change, coin.value - customer.value - fee}});
            return;
        }
        case WalletStrategy::HotCold: {
            if (e.utxo.total_at(0) < want + fee + 1 && e.utxo.total_at(1) > fee + kMinAmount) {
                const auto cold = e.utxo.total_at(1);
                auto spent = take(e.utxo, [](const Coin &coin) { return coin.address == 1; });
                emit_utxo(time, e.utxo, spent, {{&e.utxo, 0, cold - fee}});
            }
            [[fallthrough]];
        }
        case WalletStrategy::Collector: {
            const auto hot = e.utxo.total_at(0);
            if (hot < kMinAmount + fee + 1)
                return;
            customer.value = std::min(want, hot - fee - 1);
            auto spent = take(e.utxo, [](const Coin &coin) { return coin.address == 0; });
            emit_utxo(time, e.utxo, spent, {customer, {&e.utxo, 0, hot - customer.value - fee}});
            return;
        }
        }
    }

    void reuse_consolidate(std::int64_t time, EntityState &e)
    {
        std::set<std::size_t> holding;
        for (const auto &c : e.utxo.coins)
            holding.insert(c.address);
        if (holding.size() < 2)
            return;
        const auto total = e.utxo.total();
        if (total <= config_.fee)
            return;
        auto spent = take(e.utxo, [](const Coin &) { return true; });
        emit_utxo(time, e.utxo, spent, {{&e.utxo, 0, total - config_.fee}});
    }

    // Leaves exactly hot_share of the remaining funds on the hot address by
    // picking a fee in [fee, fee + q) that makes the total divisible by q.
    void utxo_rebalance(std::int64_t time, EntityState &e)
    {
        const auto &share = e.config->hot_share;
        BigInt p = share.units();
        BigInt q = pow10(share.scale());
        const BigInt g = boost::multiprecision::gcd(p, q);
        if (g != 0) {
            p /= g;
            q /= g;
        }
        const auto qq = static_cast<std::uint64_t>(q);
        const auto pp = static_cast<std::uint64_t>(p);
        for (int attempt = 0; attempt < 2; ++attempt) {
            const std::uint64_t hot = e.utxo.total_at(0), cold = e.utxo.total_at(1);
            const std::uint64_t total = hot + cold;
            if (total < config_.fee + qq)
                return;
            std::uint64_t fee = config_.fee;
            fee += (total - fee) % qq;
            const std::uint64_t target = static_cast<std::uint64_t>(
                (static_cast<unsigned __int128>(total - fee) * pp) / qq);
            if (hot >= target + fee && hot > 0) {
                auto spent = take(e.utxo, [](const Coin &c) { return c.address == 0; });
                emit_utxo(time, e.utxo, spent, {{&e.utxo, 1, hot - fee - target}, {&e.utxo, 0, target}});
                return;
            }
            if (hot <= target && cold > 0) {
                auto spent = take(e.utxo, [](const Coin &c) { return c.address == 1; });
                emit_utxo(time, e.utxo, spent, {{&e.utxo, 0, target - hot}, {&e.utxo, 1, cold - fee - (target - hot)}});
                return;
            }
            // hot sits within one fee of the target: park half of it cold first.
            auto spent = take(e.utxo, [](const Coin &c) { return c.address == 0; });
            emit_utxo(time, e.utxo, spent, {{&e.utxo, 1, hot / 2}, {&e.utxo, 0, hot - hot / 2 - config_.fee}});
        }
    }

    // --- account ledger ---

    void emit_transfer(std::int64_t time, const std::string &asset, const std::string &from, const std::string &to,
                       const BigInt &value)
    {
        if (value <= 0)
            return;
        AccountTransfer t;
        t.block = account_chain_.place(time);
        t.timestamp = static_cast<std::uint64_t>(account_chain_.timestamp_of(t.block));
        t.asset = asset;
        t.from = from;
        t.to = to;
        t.value = value;
        account_balance_[{from, asset}] -= value;
        account_balance_[{to, asset}] += value;
        std::map<std::size_t, BigInt> delta;
        if (auto it = account_owner_.find(from); it != account_owner_.end())
            delta[it->second] -= value;
        if (auto it = account_owner_.find(to); it != account_owner_.end()) {
            delta[it->second] += value;
            out_.truth.addresses[to] = entities_[it->second].config->name;
            onchain_.insert(to);
        }
        if (t.is_mint())
            account_supply_[asset] += value;
        record(delta, asset, t.block);
        out_.transfers.push_back(std::move(t));
    }

    BigInt account_balance(const std::string &address, const std::string &asset) const
    {
        auto it = account_balance_.find({address, asset});
        return it == account_balance_.end() ? BigInt(0) : it->second;
    }

    void mint(std::int64_t time, std::size_t user, const std::string &asset)
    {
        const auto decimals = registry_.at(asset).decimals;
        emit_transfer(time, asset, std::string(kMintBurnAddress), user_accounts_[user], pow10(decimals) * 10000);
    }

    void background(std::int64_t time, std::size_t user)
    {
        if (config_.account_assets.empty())
            return;
        const auto &asset = config_.account_assets[rng_.below(config_.account_assets.size())];
        const auto to = rng_.below(config_.users);
        const auto &from = user_accounts_[user];
        emit_transfer(time, asset, from, user_accounts_[to], account_balance(from, asset) * rng_.between(1, 100) / 1000);
    }

    void account_deposit(std::int64_t time, EntityState &e, std::size_t user)
    {
        const auto &asset = config_.account_assets[rng_.below(config_.account_assets.size())];
        const auto available = account_balance(user_accounts_[user], asset);
        const BigInt amount = available * rng_.between(1, 100) / 1000;
        if (amount <= 0)
            return;
        std::size_t dest = 0;
        switch (e.config->strategy) {
        case WalletStrategy::Reuse: dest = rng_.below(e.account_addresses.size()); break;
        case WalletStrategy::FreshPerDeposit: dest = new_account_address(e); break;
        case WalletStrategy::HotCold: dest = 0; break;
        case WalletStrategy::Collector: {
            auto it = e.customer_address.find(user);
            if (it == e.customer_address.end())
                it = e.customer_address.emplace(user, new_account_address(e)).first;
            dest = it->second;
            break;
        }
        }
        emit_transfer(time, asset, user_accounts_[user], e.account_addresses[dest], amount);
        ++e.deposits_seen;
        if (e.config->strategy == WalletStrategy::Collector)
            emit_transfer(time, asset, e.account_addresses[dest], e.account_addresses[0], amount);
        else if (e.config->strategy == WalletStrategy::HotCold && e.deposits_seen % 3 == 0) {
            const auto &hot = e.account_addresses[0];
            emit_transfer(time, asset, hot, e.account_addresses[1], account_balance(hot, asset) / 2);
        }
    }

    void account_withdrawal(std::int64_t time, EntityState &e, std::size_t user)
    {
        const auto &asset = config_.account_assets[rng_.below(config_.account_assets.size())];
        std::size_t source = 0;
        if (e.config->strategy == WalletStrategy::Reuse || e.config->strategy == WalletStrategy::FreshPerDeposit) {
            BigInt best = -1;
            for (std::size_t i = 0; i < e.account_addresses.size(); ++i) {
                const auto b = account_balance(e.account_addresses[i], asset);
                if (b > best) {
                    best = b;
                    source = i;
                }
            }
        }
        if (e.config->strategy == WalletStrategy::HotCold && account_balance(e.account_addresses[0], asset) == 0)
            emit_transfer(time, asset, e.account_addresses[1], e.account_addresses[0],
                          account_balance(e.account_addresses[1], asset));
        if (e.account_addresses.empty())
            return;
        const auto &from = e.account_addresses[source];
        emit_transfer(time, asset, from, user_accounts_[user], account_balance(from, asset) * rng_.between(1, 50) / 100);
    }

    void account_rebalance(std::int64_t time, EntityState &e, const std::string &asset)
    {
        const auto &hot = e.account_addresses[0];
        const auto &cold = e.account_addresses[1];
        const BigInt h = account_balance(hot, asset);
        const BigInt total = h + account_balance(cold, asset);
        const BigInt target = total * e.config->hot_share.units() / pow10(e.config->hot_share.scale());
        if (h > target)
            emit_transfer(time, asset, hot, cold, h - target);
        else if (h < target)
            emit_transfer(time, asset, cold, hot, target - h);
    }

    // --- side files ---

    void emit_tags()
    {
        for (const auto &e : entities_) {
            const auto &c = *e.config;
            const auto &addresses = c.ledger == Ledger::Utxo ? e.utxo.addresses : e.account_addresses;
            std::vector<std::string> onchain;
            for (const auto &a : addresses)
                if (onchain_.contains(a))
                    onchain.push_back(a);
            const auto n = static_cast<std::size_t>(
                std::ceil(c.tag_coverage * static_cast<double>(onchain.size()) - 1e-9));
            for (std::size_t i = 0; i < std::min(n, onchain.size()); ++i)
                out_.tags.insert({onchain[i], c.ledger, c.name, "testkit", 1.0});
        }
    }

    // Daily walk: BTC from 12000.00 and ETH from 600.00 move by a uniform
    // integer number of basis points in [-200, 200] per day, rounded half-even
    // to cents; WBTC and WETH follow BTC and ETH; stablecoins draw 0.80..0.90.
    void emit_prices()
    {
        SplitMix64 walk(config_.seed ^ 0x5052494345ULL);
        Decimal btc = Decimal::parse("12000.00"), eth = Decimal::parse("600.00");
        const Date first = config_.start - std::chrono::days(kDefaultPriceWindowDays);
        for (Date d = first; d <= config_.end; d += std::chrono::days(1)) {
            auto step = [&](Decimal &p) {
                const auto bp = static_cast<std::int64_t>(walk.below(401)) - 200;
                p = (p * Decimal(BigInt(10000 + bp), 4)).round_half_even(2);
                if (p <= Decimal(1, 2))
                    p = Decimal(1, 2);
            };
            step(btc);
            step(eth);
            const Decimal stable(BigInt(80 + walk.below(11)), 2);
            out_.prices.insert(std::string(kUtxoAsset), d, btc);
            for (const auto &asset : config_.account_assets) {
                if (asset == "ETH" || asset == "WETH")
                    out_.prices.insert(asset, d, eth);
                else if (asset == "WBTC")
                    out_.prices.insert(asset, d, btc);
                else
                    out_.prices.insert(asset, d, stable);
            }
        }
    }

    void emit_balance_sheets()
    {
        std::map<std::string, const EntityConfig *> names;
        for (const auto &e : config_.entities)
            names.try_emplace(e.name, &e);
        for (const auto &[name, c] : names)
            for (Date d : report_dates_) {
                const auto end = day_end(d);
                std::map<std::string, BigInt> balances;
                balances[std::string(kUtxoAsset)] =
                    out_.truth.balance_at(name, std::string(kUtxoAsset), utxo_chain_.block_at(end));
                for (const auto &asset : config_.account_assets)
                    balances[asset] = out_.truth.balance_at(name, asset, account_chain_.block_at(end));
                const auto value = valuate_balances(balances, registry_, out_.prices, d);
                out_.balance_sheets.push_back(
                    {name, d, (value.total_eur * c->declare_factor).round_half_even(2), c->proxy});
            }
    }

    const ScenarioConfig &config_;
    SplitMix64 rng_;
    AssetRegistry registry_;
    std::vector<Date> report_dates_;
    std::int64_t genesis_;
    Chain utxo_chain_;
    Chain account_chain_;

    std::vector<EntityState> entities_;
    std::vector<UtxoWallet> users_;
    std::vector<std::string> user_accounts_;
    std::unordered_map<std::string, std::size_t> utxo_owner_;
    std::unordered_map<std::string, std::size_t> account_owner_;
    std::set<std::string> onchain_;
    std::map<std::pair<std::string, std::string>, BigInt> account_balance_;
    std::map<std::pair<std::string, std::string>, BigInt> balances_;
    std::map<std::string, BigInt> account_supply_;
    BigInt supply_;
    std::uint64_t utxo_seq_ = 0;

    GeneratedLedger out_;
};

} // namespace

GeneratedLedger generate(const ScenarioConfig &config)
{
    validate(config);
    return Generator(config).run();
}

void write_scenario(const GeneratedLedger &ledger, const std::filesystem::path &dir)
{
    std::filesystem::create_directories(dir);
    auto open = [&](const char *name) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out)
            throw Error(Errc::Io, fmt::format("cannot write {}", (dir / name).string()));
        return out;
    };
    {
        auto out = open("transactions.jsonl");
        write_utxo_transactions(out, ledger.transactions);
    }
    {
        auto out = open("transfers.jsonl");
        write_account_transfers(out, ledger.transfers);
    }
    {
        auto out = open("tags.csv");
        write_attribution_tags(out, ledger.tags);
    }
    {
        auto out = open("prices.csv");
        write_price_series(out, ledger.prices);
    }
    {
        auto out = open("balance_sheets.csv");
        write_balance_sheets(out, ledger.balance_sheets);
    }
    {
        auto out = open("ground_truth.json");
        out << ground_truth_to_json(ledger.truth);
    }
}

// --- scale stream ----------------------------------------------------------

std::vector<UtxoTransaction> generate_stream(const StreamConfig &config)
{
    if (config.wallets == 0 || config.transactions_per_block == 0)
        throw Error(Errc::InvalidConfig, "stream needs wallets and a positive block size");
    SplitMix64 rng(config.seed);
    constexpr std::uint64_t kSubsidy = 50'0000'0000;
    constexpr std::uint64_t kFee = 500;

    struct StreamCoin {
        std::uint32_t address;
        std::uint64_t value;
    };
    struct Wallet {
        std::vector<std::uint32_t> addresses;
        std::vector<StreamCoin> coins;
    };
    std::vector<Wallet> wallets(config.wallets);
    std::uint32_t next_address = 0;
    // 15 characters keeps every address inside the small-string buffer.
    auto name = [](std::uint32_t id) { return fmt::format("s{:014x}", static_cast<std::uint64_t>(id) * 0x9E3779B1ULL); };
    auto fresh = [&](Wallet &w) {
        w.addresses.push_back(next_address++);
        return w.addresses.back();
    };
    std::vector<std::uint32_t> funded;

    std::vector<UtxoTransaction> out;
    out.reserve(config.transactions);
    for (std::size_t i = 0; i < config.transactions; ++i) {
        UtxoTransaction tx;
        tx.block = i / config.transactions_per_block;
        tx.timestamp = 1'230'768'000 + tx.block * 600;
        tx.txid = fmt::format("{:016x}", i) + hex_of(rng, 48);

        const bool mine = funded.empty() || rng.below(20) == 0;
        if (mine) {
            const auto w = static_cast<std::uint32_t>(rng.below(wallets.size()));
            auto &wallet = wallets[w];
            const auto a = wallet.addresses.empty() || rng.below(2) == 0 ? fresh(wallet)
                                                                          : wallet.addresses[rng.below(wallet.addresses.size())];
            tx.outputs.push_back({name(a), kSubsidy});
            if (wallet.coins.empty())
                funded.push_back(w);
            wallet.coins.push_back({a, kSubsidy});
            out.push_back(std::move(tx));
            continue;
        }

        std::uint32_t payer_id = 0;
        while (true) {
            const auto slot = rng.below(funded.size());
            payer_id = funded[slot];
            if (!wallets[payer_id].coins.empty())
                break;
            funded[slot] = funded.back();
            funded.pop_back();
            if (funded.empty())
                break;
        }
        auto &payer = wallets[payer_id];
        if (payer.coins.empty()) {
            --i;
            continue;
        }
        const auto n_in = std::min<std::size_t>(payer.coins.size(), 1 + rng.below(3));
        std::uint64_t total = 0;
        for (std::size_t k = 0; k < n_in; ++k) {
            const auto pick = rng.below(payer.coins.size());
            const auto coin = payer.coins[pick];
            payer.coins[pick] = payer.coins.back();
            payer.coins.pop_back();
            tx.inputs.push_back({name(coin.address), coin.value});
            total += coin.value;
        }
        if (total <= kFee) {
            out.push_back(std::move(tx)); // all of it goes to fees
            continue;
        }
        std::uint64_t left = total - kFee;
        const auto n_out = 1 + rng.below(2);
        for (std::size_t k = 0; k < n_out && left > 0; ++k) {
            const auto payee_id = static_cast<std::uint32_t>(rng.below(wallets.size()));
            auto &payee = wallets[payee_id];
            const auto a = payee.addresses.empty() || rng.below(2) == 0 ? fresh(payee)
                                                                        : payee.addresses[rng.below(payee.addresses.size())];
            const auto value = k + 1 == n_out ? left / 2 + 1 : rng.between(1, left);
            tx.outputs.push_back({name(a), value});
            left -= value;
            if (payee.coins.empty())
                funded.push_back(payee_id);
            payee.coins.push_back({a, value});
        }
        if (left > 0) {
            const auto a = rng.below(2) == 0 ? fresh(payer) : payer.addresses[rng.below(payer.addresses.size())];
            tx.outputs.push_back({name(a), left});
            if (payer.coins.empty())
                funded.push_back(payer_id);
            payer.coins.push_back({a, left});
        }
        out.push_back(std::move(tx));
    }
    return out;
}

// --- recall ----------------------------------------------------------------

std::map<std::string, EntityRecall> compare_to_ground_truth(const PipelineView &pipeline, const GroundTruth &truth)
{
    const auto known = truth.entities();
    const std::set<std::string> truth_entities(known.begin(), known.end());
    for (const auto &[entity, addresses] : pipeline.addresses)
        if (!truth_entities.contains(entity))
            throw Error(Errc::EntityMismatch, fmt::format("entity {} is not in the ground truth", entity));
    for (const auto &[entity, series] : pipeline.series)
        if (!truth_entities.contains(entity))
            throw Error(Errc::EntityMismatch, fmt::format("entity {} is not in the ground truth", entity));

    std::map<std::string, std::size_t> owned;
    for (const auto &[address, entity] : truth.addresses)
        ++owned[entity];

    auto clamp = [](Rational r) {
        if (r < 0)
            return Rational(0);
        if (r > 1)
            return Rational(1);
        return r;
    };

    std::map<std::string, EntityRecall> out;
    for (const auto &entity : known) {
        EntityRecall recall;
        std::size_t hits = 0;
        if (auto it = pipeline.addresses.find(entity); it != pipeline.addresses.end())
            for (const auto &a : it->second) {
                auto t = truth.addresses.find(a);
                if (t != truth.addresses.end() && t->second == entity)
                    ++hits;
            }
        recall.address_recall = owned[entity] == 0 ? Rational(0) : Rational(hits, owned[entity]);

        const std::map<std::string, BalanceSeries> *series = nullptr;
        if (auto it = pipeline.series.find(entity); it != pipeline.series.end())
            series = &it->second;
        auto truth_assets = truth.series.find(entity);
        if (truth_assets == truth.series.end()) {
            out[entity] = std::move(recall);
            continue;
        }
        for (const auto &[asset, points] : truth_assets->second) {
            const BalanceSeries *s = nullptr;
            if (series)
                if (auto it = series->find(asset); it != series->end())
                    s = &it->second;
            // Flow series are exact everywhere: evaluate at the true change
            // points. Snapshots only know their grid.
            std::vector<std::uint64_t> blocks;
            if (s && s->kind == SeriesKind::Snapshot)
                for (const auto &p : s->points)
                    blocks.push_back(p.block);
            else
                for (const auto &p : points)
                    blocks.push_back(p.first);
            auto &list = recall.balance_recall[asset];
            for (auto b : blocks) {
                const BigInt t = truth.balance_at(entity, asset, b);
                if (t <= 0)
                    continue;
                const BigInt got = s ? s->balance_at_block(b) : BigInt(0);
                list.emplace_back(b, clamp(Rational(got, t)));
            }
            if (!list.empty())
                recall.final_balance_recall[asset] = list.back().second;
        }
        out[entity] = std::move(recall);
    }
    return out;
}

PipelineView run_pipeline(const GeneratedLedger &ledger, AttributionScope scope, std::uint64_t interval_blocks)
{
    const ClusterIndex index = build_clusters(ledger.transactions);
    const EntityMap entities = attribute_clusters(index, ledger.tags);
    const BlockClock clock = clock_from(ledger.transfers);
    LedgerView view{ledger.transactions, &index, &entities, ledger.transfers, &clock, interval_blocks, scope};

    PipelineView out;
    for (const auto &entity : entities.entities()) {
        auto &addresses = out.addresses[entity];
        if (scope == AttributionScope::Cluster) {
            for (auto cluster : entities.clusters_of(entity))
                for (auto id : index.members(cluster))
                    addresses.insert(index.address(id));
        } else {
            const auto &tagged = entities.tagged_utxo_addresses(entity);
            addresses.insert(tagged.begin(), tagged.end());
        }
        const auto &account = entities.account_addresses(entity);
        addresses.insert(account.begin(), account.end());
        out.series[entity] = entity_holdings(view, entity);
    }
    return out;
}

} // namespace solvaudit::testkit

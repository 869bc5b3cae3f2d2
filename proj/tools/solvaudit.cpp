// solvaudit command-line front end.
//
// Exit codes: 0 ok, 1 error, 2 audit found a SHORTFALL, 3 proof rejected.
// Errors go to stderr as `error[<Code>] <message>`, warnings as `warning: <message>`.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "solvaudit/categorize.hpp"
#include "solvaudit/cluster.hpp"
#include "solvaudit/error.hpp"
#include "solvaudit/holdings.hpp"
#include "solvaudit/ingest.hpp"
#include "solvaudit/pol.hpp"
#include "solvaudit/reconcile.hpp"
#include "solvaudit/testkit.hpp"

namespace fs = std::filesystem;
using namespace solvaudit;

namespace {

enum Exit { kOk = 0, kError = 1, kShortfall = 2, kRejected = 3 };

struct RunConfig {
    std::string txs, transfers, tags, prices, balance_sheets, features, assets;
    std::vector<std::string> entities;
    std::vector<std::string> series;
    std::uint64_t interval = 10000;
    std::string theta_low = "0.4";
    int price_window_days = kDefaultPriceWindowDays;
    int lookback_days = 30;
    std::size_t k = 5;
    std::string out;
    bool lenient = false;
    std::uint64_t seed = 1;
    bool seed_given = false;
    std::string format = "json";
    std::string scope = "cluster";
    // pol
    std::string liabilities, tree, user, root, proof;
    bool attack = false;
    // gen
    std::string scenario;
    std::size_t stream_txs = 0;
};

class Warnings {
public:
    void add(std::string message)
    {
        std::cerr << "warning: " << message << '\n';
        lines_.push_back(std::move(message));
    }
    void add(const std::string &file, const std::vector<Diagnostic> &skipped)
    {
        for (const auto &d : skipped)
            add(fmt::format("{}:{}: skipped ({}): {}", file, d.line, to_string(d.code), d.message));
    }
    const std::vector<std::string> &lines() const noexcept { return lines_; }

private:
    std::vector<std::string> lines_;
};

std::ifstream open_input(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::Io, fmt::format("cannot open {}", path));
    return in;
}

std::string slurp(const std::string &path)
{
    auto in = open_input(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Prefixes errors from `parse` with the file they came from.
template <typename F>
auto read_input(const std::string &path, F &&parse)
{
    auto in = open_input(path);
    try {
        return parse(in);
    } catch (const Error &e) {
        throw Error(e.code(), fmt::format("{}: {}", path, e.what()));
    }
}

fs::path output_dir(const RunConfig &c)
{
    std::string dir = c.out;
    if (dir.empty())
        if (const char *env = std::getenv("SOLVAUDIT_OUT"))
            dir = env;
    if (dir.empty())
        throw Error(Errc::InvalidConfig, "no output directory: pass --out or set SOLVAUDIT_OUT");
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path &path, std::string_view content)
{
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(content.data(), static_cast<std::streamsize>(content.size())))
        throw Error(Errc::Io, fmt::format("cannot write {}", path.string()));
}

std::string safe_name(std::string_view name)
{
    std::string out;
    for (char ch : name)
        out += std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.' ? ch : '_';
    return out.empty() ? "_" : out;
}

void require(const std::string &value, std::string_view flag)
{
    if (value.empty())
        throw Error(Errc::InvalidConfig, fmt::format("{} is required", flag));
}

Thresholds thresholds(const RunConfig &c)
{
    Thresholds t;
    if (!Decimal::try_parse(c.theta_low, t.theta_low) || t.theta_low.sign() < 0)
        throw Error(Errc::InvalidConfig, fmt::format("--theta-low must be a non-negative decimal, got '{}'", c.theta_low));
    t.lookback_days = c.lookback_days;
    t.price_window_days = c.price_window_days;
    return t;
}

AssetRegistry registry(const RunConfig &c)
{
    if (c.assets.empty())
        return AssetRegistry::defaults();
    return read_input(c.assets, [](std::istream &in) { return AssetRegistry::parse(in); });
}

struct Inputs {
    std::vector<UtxoTransaction> txs;
    std::vector<AccountTransfer> transfers;
    TagSet tags;
    PriceSeries prices;
    std::vector<BalanceSheetRecord> sheets;
};

void load_ledgers(const RunConfig &c, const AssetRegistry &reg, Inputs &in, Warnings &w)
{
    if (c.txs.empty() && c.transfers.empty())
        throw Error(Errc::InvalidConfig, "--txs or --transfers is required");
    const ParseOptions opts{c.lenient};
    if (!c.txs.empty()) {
        auto parsed = read_input(c.txs, [&](std::istream &s) { return parse_utxo_transactions(s, opts); });
        w.add(c.txs, parsed.skipped);
        in.txs = std::move(parsed.value);
    }
    if (!c.transfers.empty()) {
        auto parsed = read_input(c.transfers, [&](std::istream &s) { return parse_account_transfers(s, reg, opts); });
        w.add(c.transfers, parsed.skipped);
        in.transfers = std::move(parsed.value);
    }
    require(c.tags, "--tags");
    auto tags = read_input(c.tags, [&](std::istream &s) { return parse_attribution_tags(s, opts); });
    w.add(c.tags, tags.skipped);
    in.tags = std::move(tags.value);
}

void load_prices(const RunConfig &c, const AssetRegistry &reg, Inputs &in, Warnings &w)
{
    auto prices = read_input(c.prices, [&](std::istream &s) { return parse_price_series(s, reg, {c.lenient}); });
    w.add(c.prices, prices.skipped);
    in.prices = std::move(prices.value);
}

void load_sheets(const RunConfig &c, Inputs &in, Warnings &w)
{
    auto sheets = read_input(c.balance_sheets, [&](std::istream &s) { return parse_balance_sheets(s, {c.lenient}); });
    w.add(c.balance_sheets, sheets.skipped);
    in.sheets = std::move(sheets.value);
}

std::vector<std::string> selected_entities(const RunConfig &c, std::vector<std::string> known)
{
    if (!c.entities.empty())
        known = c.entities;
    std::sort(known.begin(), known.end());
    known.erase(std::unique(known.begin(), known.end()), known.end());
    return known;
}

// UTXO series get a closing point at the observation horizon so a reader of
// the CSV knows how far the ledger was seen.
std::vector<BalanceSeries> series_for_export(const std::map<std::string, BalanceSeries> &series)
{
    std::vector<BalanceSeries> out;
    for (const auto &[asset, s] : series) {
        auto copy = s;
        if (copy.kind == SeriesKind::Flow && copy.observed_through &&
            (copy.points.empty() || copy.points.back().block < copy.observed_through->block))
            copy.points.push_back({copy.observed_through->block, copy.observed_through->timestamp,
                                   copy.points.empty() ? BigInt(0) : copy.points.back().balance});
        out.push_back(std::move(copy));
    }
    return out;
}

struct Pipeline {
    ClusterIndex index;
    EntityMap entities;
    BlockClock clock;
};

Pipeline run_attribution(const RunConfig &c, const Inputs &in, Warnings &w)
{
    Pipeline p;
    p.index = build_clusters(in.txs);
    p.entities = attribute_clusters(p.index, in.tags, !c.lenient);
    for (const auto &conflict : p.entities.conflicts())
        w.add(fmt::format("cluster {} tagged with {}; left unattributed", p.index.address(conflict.cluster.value),
                          fmt::join(conflict.entities, ", ")));
    for (const auto &msg : p.entities.warnings())
        w.add(msg);
    p.clock = clock_from(in.transfers);
    return p;
}

LedgerView view_of(const RunConfig &c, const Inputs &in, const Pipeline &p)
{
    LedgerView v;
    v.transactions = in.txs;
    v.index = &p.index;
    v.entities = &p.entities;
    v.transfers = in.transfers;
    v.clock = &p.clock;
    v.interval_blocks = c.interval;
    if (c.scope == "address")
        v.scope = AttributionScope::Address;
    else if (c.scope != "cluster")
        throw Error(Errc::InvalidConfig, fmt::format("--scope must be cluster or address, got '{}'", c.scope));
    return v;
}

std::string series_csv(std::span<const BalanceSeries> series, const AssetRegistry &reg, const PriceSeries *prices,
                       int window)
{
    std::ostringstream out;
    write_series_csv(out, series, prices ? &reg : nullptr, prices, window);
    return out.str();
}

std::string join_lines(const std::vector<std::string> &lines)
{
    std::string out;
    for (const auto &l : lines)
        out += l + '\n';
    return out;
}

// --- commands --------------------------------------------------------------

int cmd_audit(const RunConfig &c)
{
    require(c.prices, "--prices");
    require(c.balance_sheets, "--balance-sheets");
    const auto reg = registry(c);
    const auto th = thresholds(c);
    Warnings w;
    Inputs in;
    load_ledgers(c, reg, in, w);
    load_prices(c, reg, in, w);
    load_sheets(c, in, w);
    const auto dir = output_dir(c);

    const auto p = run_attribution(c, in, w);
    const auto view = view_of(c, in, p);
    auto known = p.entities.entities();
    for (const auto &s : in.sheets)
        known.push_back(s.entity);

    ReconciliationReport report;
    report.config = th;
    report.config_extra = {{"interval", std::to_string(c.interval)},
                           {"scope", c.scope},
                           {"lenient", c.lenient ? "true" : "false"},
                           {"entities", fmt::format("{}", fmt::join(c.entities, ";"))}};
    report.warnings = w.lines();
    for (const auto &entity : selected_entities(c, known)) {
        const auto series = entity_holdings(view, entity);
        for (const auto &[asset, s] : series)
            if (s.data_gap)
                report.warnings.push_back(s.data_gap->message);
        const auto exported = series_for_export(series);
        write_file(dir / "series" / (safe_name(entity) + ".csv"),
                   series_csv(exported, reg, &in.prices, th.price_window_days));
        report.merge(assess(entity, series, reg, in.prices, in.sheets, th));
    }
    write_file(dir / "report.json", emit_report(report, ReportFormat::Json));
    write_file(dir / "warnings.log", join_lines(report.warnings));
    for (const auto &e : report.entries)
        std::cout << fmt::format("{} {} {}\n", e.entity, format_date(e.report_date), to_string(e.verdict));
    return report.has_shortfall() ? kShortfall : kOk;
}

int cmd_cluster(const RunConfig &c)
{
    require(c.txs, "--txs");
    Warnings w;
    auto parsed = read_input(c.txs, [&](std::istream &s) { return parse_utxo_transactions(s, {c.lenient}); });
    w.add(c.txs, parsed.skipped);
    const auto dir = output_dir(c);
    const auto index = build_clusters(parsed.value);
    std::optional<EntityMap> entities;
    if (!c.tags.empty()) {
        auto tags = read_input(c.tags, [&](std::istream &s) { return parse_attribution_tags(s, {c.lenient}); });
        w.add(c.tags, tags.skipped);
        entities = attribute_clusters(index, tags.value, !c.lenient);
        for (const auto &msg : entities->warnings())
            w.add(msg);
    }
    std::ostringstream dump;
    write_cluster_dump(dump, index, entities ? &*entities : nullptr);
    write_file(dir / "clusters.csv", dump.str());

    const auto stats = cluster_stats(index);
    nlohmann::ordered_json j;
    j["address_count"] = stats.address_count;
    j["cluster_count"] = stats.cluster_count;
    j["largest_size"] = stats.largest_size;
    j["largest_cluster"] = stats.largest_cluster ? index.address(stats.largest_cluster->value) : "";
    j["size_histogram"] = nlohmann::ordered_json::object();
    for (const auto &[size, count] : stats.size_histogram)
        j["size_histogram"][std::to_string(size)] = count;
    write_file(dir / "stats.json", j.dump(2) + "\n");
    std::cout << fmt::format("{} addresses in {} clusters (largest {})\n", stats.address_count, stats.cluster_count,
                             stats.largest_size);
    return kOk;
}

int cmd_holdings(const RunConfig &c)
{
    const auto reg = registry(c);
    Warnings w;
    Inputs in;
    load_ledgers(c, reg, in, w);
    if (!c.prices.empty())
        load_prices(c, reg, in, w);
    const auto dir = output_dir(c);
    const auto p = run_attribution(c, in, w);
    const auto view = view_of(c, in, p);
    for (const auto &entity : selected_entities(c, p.entities.entities())) {
        const auto series = entity_holdings(view, entity);
        for (const auto &[asset, s] : series)
            if (s.data_gap)
                w.add(s.data_gap->message);
        write_file(dir / "series" / (safe_name(entity) + ".csv"),
                   series_csv(series_for_export(series), reg, c.prices.empty() ? nullptr : &in.prices,
                              c.price_window_days));
        std::cout << fmt::format("{}: {} series\n", entity, series.size());
    }
    write_file(dir / "warnings.log", join_lines(w.lines()));
    return kOk;
}

int cmd_reconcile(const RunConfig &c)
{
    require(c.prices, "--prices");
    require(c.balance_sheets, "--balance-sheets");
    if (c.series.empty())
        throw Error(Errc::InvalidConfig, "--series is required");
    const auto format = parse_report_format(c.format);
    const auto reg = registry(c);
    const auto th = thresholds(c);
    Warnings w;
    Inputs in;
    load_prices(c, reg, in, w);
    load_sheets(c, in, w);

    std::vector<std::string> files;
    for (const auto &s : c.series) {
        if (fs::is_directory(s)) {
            std::vector<std::string> found;
            for (const auto &e : fs::directory_iterator(s))
                if (e.path().extension() == ".csv")
                    found.push_back(e.path().string());
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(s);
        }
    }
    std::map<std::string, std::map<std::string, BalanceSeries>> by_entity;
    for (const auto &f : files)
        for (auto &s : read_input(f, [](std::istream &in) { return parse_series_csv(in); })) {
            if (s.data_gap)
                w.add(fmt::format("{}: {} {} {}", f, s.entity, s.asset, s.data_gap->message));
            auto entity = s.entity;
            auto asset = s.asset;
            by_entity[entity].insert_or_assign(asset, std::move(s));
        }
    std::vector<std::string> known;
    for (const auto &[entity, series] : by_entity)
        known.push_back(entity);
    for (const auto &s : in.sheets)
        known.push_back(s.entity);

    const auto dir = output_dir(c);
    ReconciliationReport report;
    report.config = th;
    report.warnings = w.lines();
    for (const auto &entity : selected_entities(c, known)) {
        static const std::map<std::string, BalanceSeries> none;
        auto it = by_entity.find(entity);
        report.merge(assess(entity, it == by_entity.end() ? none : it->second, reg, in.prices, in.sheets, th));
    }
    write_file(dir / (format == ReportFormat::Json ? "report.json" : "report.csv"), emit_report(report, format));
    for (const auto &e : report.entries)
        std::cout << fmt::format("{} {} {} {}\n", e.entity, format_date(e.report_date),
                                 e.ratio ? e.ratio->to_string() : "-", to_string(e.verdict));
    return report.has_shortfall() ? kShortfall : kOk;
}

// CSV `user_id,balance`; balances are integers in base units.
std::vector<pol::LiabilityLeaf> read_liabilities(const std::string &path, const RunConfig &c)
{
    return read_input(path, [&](std::istream &in) {
        std::vector<pol::LiabilityLeaf> leaves;
        std::string line;
        std::size_t line_no = 1;
        if (!std::getline(in, line) || (line != "user_id,balance" && line != "user_id,balance\r"))
            throw Error(Errc::MalformedRow, "expected header 'user_id,balance'", 1);
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            const auto f = split_csv(line);
            if (f.size() != 2 || f[0].empty())
                throw Error(Errc::MalformedRow, "expected user_id,balance", line_no);
            pol::LiabilityLeaf leaf;
            leaf.user_id = f[0];
            try {
                leaf.balance = pol::sum_from_string(f[1]);
            } catch (const Error &e) {
                throw Error(e.code(), e.what(), line_no);
            }
            leaf.salt = c.seed_given ? pol::derive_salt(c.seed, leaf.user_id) : pol::random_salt();
            leaves.push_back(std::move(leaf));
        }
        return leaves;
    });
}

int cmd_pol_build(const RunConfig &c)
{
    require(c.liabilities, "--liabilities");
    auto leaves = read_liabilities(c.liabilities, c);
    const auto dir = output_dir(c);
    const auto tree = pol::build_tree(std::move(leaves), c.attack);
    write_file(dir / "tree.json", pol::tree_to_json(tree));
    write_file(dir / "root.json", pol::root_to_json(tree.root()));
    std::cout << fmt::format("root {} sum {}\n", pol::to_hex(tree.root().digest), pol::sum_to_string(tree.root().sum));
    return kOk;
}

int cmd_pol_prove(const RunConfig &c)
{
    require(c.tree, "--tree");
    require(c.user, "--user");
    const auto tree = pol::tree_from_json(slurp(c.tree));
    const auto proof = pol::proof_to_json(tree.prove(c.user));
    if (c.out.empty() && !std::getenv("SOLVAUDIT_OUT")) {
        std::cout << proof;
        return kOk;
    }
    write_file(output_dir(c) / ("proof-" + safe_name(c.user) + ".json"), proof);
    return kOk;
}

int cmd_pol_verify(const RunConfig &c)
{
    require(c.root, "--root");
    require(c.proof, "--proof");
    const auto root = pol::root_from_json(slurp(c.root));
    const auto proof = pol::proof_from_json(slurp(c.proof));
    const auto result = pol::verify(root, proof);
    if (result.accepted()) {
        std::cout << "ACCEPT\n";
        return kOk;
    }
    std::cout << "REJECT " << pol::to_string(*result.rejection) << '\n';
    return kRejected;
}

int cmd_categorize(const RunConfig &c)
{
    require(c.features, "--features");
    Warnings w;
    auto parsed = read_input(c.features, [&](std::istream &s) { return parse_service_features(s, {c.lenient}); });
    w.add(c.features, parsed.skipped);
    const auto dir = output_dir(c);
    const auto d = hac(parsed.value);
    const auto labels = cut_labels(d, c.k);
    std::ostringstream cut;
    write_cut_csv(cut, d, labels);
    write_file(dir / "dendrogram.json", dendrogram_to_json(d));
    write_file(dir / "cut.csv", cut.str());
    std::map<int, std::vector<std::string>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i)
        groups[labels[i]].push_back(d.labels[i]);
    for (const auto &[label, members] : groups)
        std::cout << fmt::format("cluster {} (N = {}): {}\n", label, members.size(), fmt::join(members, " "));
    return kOk;
}

int cmd_gen(const RunConfig &c)
{
    const auto dir = output_dir(c);
    if (c.stream_txs > 0) {
        testkit::StreamConfig sc;
        sc.seed = c.seed;
        sc.transactions = c.stream_txs;
        sc.wallets = std::max<std::size_t>(1000, c.stream_txs / 8);
        std::ofstream out(dir / "transactions.jsonl", std::ios::binary);
        write_utxo_transactions(out, testkit::generate_stream(sc));
        if (!out)
            throw Error(Errc::Io, "cannot write transactions.jsonl");
        return kOk;
    }
    testkit::ScenarioConfig config = c.scenario.empty() ? testkit::default_scenario(c.seed)
                                                        : testkit::scenario_from_json(slurp(c.scenario));
    if (c.seed_given)
        config.seed = c.seed;
    const auto ledger = testkit::generate(config);
    testkit::write_scenario(ledger, dir);
    std::cout << fmt::format("{} transactions, {} transfers, {} tags, {} balance-sheet rows\n",
                             ledger.transactions.size(), ledger.transfers.size(), ledger.tags.size(),
                             ledger.balance_sheets.size());
    return kOk;
}

// --- option wiring ---------------------------------------------------------

void add_out(CLI::App *app, RunConfig &c)
{
    app->add_option("--out", c.out, "Output directory (falls back to $SOLVAUDIT_OUT)");
}

void add_lenient(CLI::App *app, RunConfig &c)
{
    app->add_flag("--lenient", c.lenient, "Skip malformed lines (and conflicting clusters) with a warning");
}

void add_ledgers(CLI::App *app, RunConfig &c)
{
    app->add_option("--txs", c.txs, "UTXO transactions (JSONL)");
    app->add_option("--transfers", c.transfers, "Account-model transfers (JSONL)");
    app->add_option("--tags", c.tags, "Attribution tags (CSV)");
    app->add_option("--assets", c.assets, "Extra asset decimals (CSV asset,decimals)");
    app->add_option("--entity", c.entities, "Restrict to these entities (repeatable)");
    app->add_option("--interval", c.interval, "Account snapshot interval in blocks")->capture_default_str();
    app->add_option("--scope", c.scope, "Attribute whole clusters or tagged addresses only")
        ->check(CLI::IsMember({"cluster", "address"}))
        ->capture_default_str();
}

void add_thresholds(CLI::App *app, RunConfig &c)
{
    app->add_option("--theta-low", c.theta_low, "Coverage ratio below which a report date is a SHORTFALL")
        ->capture_default_str();
    app->add_option("--price-window-days", c.price_window_days, "Oldest usable price, in days before the date")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app->add_option("--lookback-days", c.lookback_days, "Oldest usable on-chain observation, in days")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
}

void add_seed(CLI::App *app, RunConfig &c, const char *help)
{
    app->add_option_function<std::uint64_t>(
        "--seed",
        [&c](std::uint64_t v) {
            c.seed = v;
            c.seed_given = true;
        },
        help);
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Reconstructs entity holdings from ledger exports and reconciles them with balance sheets"};
    app.set_config("--config", "", "TOML file with option defaults (flags override it)");
    app.require_subcommand(1);
    RunConfig c;

    auto *audit = app.add_subcommand("audit", "Cluster, reconstruct holdings and reconcile in one run");
    add_ledgers(audit, c);
    audit->add_option("--prices", c.prices, "Daily EUR prices (CSV)");
    audit->add_option("--balance-sheets", c.balance_sheets, "Declared crypto assets (CSV)");
    add_thresholds(audit, c);
    add_out(audit, c);
    add_lenient(audit, c);

    auto *cluster = app.add_subcommand("cluster", "Multi-input clustering of the UTXO ledger");
    cluster->add_option("--txs", c.txs, "UTXO transactions (JSONL)");
    cluster->add_option("--tags", c.tags, "Attribution tags (CSV), labels the dump");
    add_out(cluster, c);
    add_lenient(cluster, c);

    auto *holdings = app.add_subcommand("holdings", "Per-entity balance series");
    add_ledgers(holdings, c);
    holdings->add_option("--prices", c.prices, "Daily EUR prices (CSV), adds an eur_value column");
    holdings->add_option("--price-window-days", c.price_window_days, "Oldest usable price, in days")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    add_out(holdings, c);
    add_lenient(holdings, c);

    auto *reconcile = app.add_subcommand("reconcile", "Coverage ratios from series CSVs and balance sheets");
    reconcile->add_option("--series", c.series, "Series CSV files or directories of them");
    reconcile->add_option("--prices", c.prices, "Daily EUR prices (CSV)");
    reconcile->add_option("--balance-sheets", c.balance_sheets, "Declared crypto assets (CSV)");
    reconcile->add_option("--assets", c.assets, "Extra asset decimals (CSV asset,decimals)");
    reconcile->add_option("--entity", c.entities, "Restrict to these entities (repeatable)");
    reconcile->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
    add_thresholds(reconcile, c);
    add_out(reconcile, c);
    add_lenient(reconcile, c);

    auto *pol_cmd = app.add_subcommand("pol", "Merkle-sum-tree proof of liabilities");
    pol_cmd->require_subcommand(1);
    auto *build = pol_cmd->add_subcommand("build", "Build a tree from user_id,balance rows");
    build->add_option("--liabilities", c.liabilities, "Liabilities (CSV user_id,balance)");
    add_seed(build, c, "Derive salts from this seed instead of drawing them at random");
    build->add_flag("--attack", c.attack, "Accept negative balances (to demonstrate the attack)");
    add_out(build, c);
    auto *prove = pol_cmd->add_subcommand("prove", "Inclusion proof for one user");
    prove->add_option("--tree", c.tree, "tree.json from pol build");
    prove->add_option("--user", c.user, "User id");
    add_out(prove, c);
    auto *verify = pol_cmd->add_subcommand("verify", "Check a proof against a published root");
    verify->add_option("--root", c.root, "root.json (or tree.json)");
    verify->add_option("--proof", c.proof, "Proof JSON");

    auto *categorize = app.add_subcommand("categorize", "Ward clustering of VASP service features");
    categorize->add_option("--features", c.features, "Feature table (CSV)");
    categorize->add_option("--k", c.k, "Number of clusters in the cut")->check(CLI::PositiveNumber)->capture_default_str();
    add_out(categorize, c);
    add_lenient(categorize, c);

    auto *gen = app.add_subcommand("gen", "Write a synthetic scenario with ground truth");
    add_seed(gen, c, "Scenario seed (default 1)");
    gen->add_option("--scenario", c.scenario, "Scenario JSON (default: built-in four-VASP scenario)");
    gen->add_option("--stream-txs", c.stream_txs, "Write only a random UTXO stream of this many transactions");
    add_out(gen, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? kOk : kError;
    }

    try {
        if (*audit)
            return cmd_audit(c);
        if (*cluster)
            return cmd_cluster(c);
        if (*holdings)
            return cmd_holdings(c);
        if (*reconcile)
            return cmd_reconcile(c);
        if (*build)
            return cmd_pol_build(c);
        if (*prove)
            return cmd_pol_prove(c);
        if (*verify)
            return cmd_pol_verify(c);
        if (*categorize)
            return cmd_categorize(c);
        if (*gen)
            return cmd_gen(c);
    } catch (const Error &e) {
        std::cerr << fmt::format("error[{}] {}\n", to_string(e.code()), e.what());
        return kError;
    } catch (const std::exception &e) {
        std::cerr << fmt::format("error[Internal] {}\n", e.what());
        return kError;
    }
    return kError;
}

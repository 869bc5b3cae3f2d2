#pragma once

// Streaming parsers (and matching writers) for the ledger exports, tag packs,
// price files, balance sheets and service-feature tables.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "solvaudit/error.hpp"
#include "solvaudit/numeric.hpp"
#include "solvaudit/price_series.hpp"

namespace solvaudit {

struct AssetId {
    std::string symbol;
    unsigned decimals = 0;

    friend bool operator==(const AssetId &, const AssetId &) = default;
};

class AssetRegistry {
public:
    // BTC/8, ETH/18, USDT/6, USDC/6, DAI/18, WETH/18, WBTC/8.
    static AssetRegistry defaults();
    // CSV with header `asset,decimals`. Entries replace defaults with the same symbol.
    static AssetRegistry parse(std::istream &in);

    void add(AssetId asset);
    bool contains(std::string_view symbol) const;
    // Symbols are matched case-insensitively; throws UnknownAsset.
    const AssetId &at(std::string_view symbol) const;
    const std::vector<AssetId> &assets() const noexcept { return assets_; }

private:
    std::vector<AssetId> assets_;
};

// Native asset of the UTXO ledger.
inline constexpr std::string_view kUtxoAsset = "BTC";
// Sender of minted / recipient of burned account-model value.
inline constexpr std::string_view kMintBurnAddress = "0x0";

struct TxIo {
    std::string address;
    std::uint64_t value = 0;

    friend bool operator==(const TxIo &, const TxIo &) = default;
};

struct UtxoTransaction {
    std::string txid;
    std::uint64_t block = 0;
    std::uint64_t timestamp = 0;
    std::vector<TxIo> inputs;
    std::vector<TxIo> outputs;

    bool is_coinbase() const noexcept { return inputs.empty(); }
    // Zero for coinbase transactions.
    std::uint64_t fee() const;

    friend bool operator==(const UtxoTransaction &, const UtxoTransaction &) = default;
};

struct AccountTransfer {
    std::uint64_t block = 0;
    std::uint64_t timestamp = 0;
    std::string asset;
    std::string from;
    std::string to;
    BigInt value;

    bool is_mint() const noexcept { return from == kMintBurnAddress; }
    bool is_burn() const noexcept { return to == kMintBurnAddress; }

    friend bool operator==(const AccountTransfer &, const AccountTransfer &) = default;
};

enum class Ledger { Utxo, Account };

std::string_view to_string(Ledger ledger) noexcept;

struct AttributionTag {
    std::string address;
    Ledger ledger = Ledger::Utxo;
    std::string entity;
    // Multiple sources of a deduplicated tag are joined with ';'.
    std::string source;
    double confidence = 1.0;

    friend bool operator==(const AttributionTag &, const AttributionTag &) = default;
};

class TagSet {
public:
    using Key = std::pair<Ledger, std::string>;
    using Map = std::map<Key, AttributionTag>;

    // Merges sources of an identical (ledger, address, entity) tag; throws
    // ConflictingTag when the entity differs.
    void insert(AttributionTag tag);

    const AttributionTag *find(Ledger ledger, std::string_view address) const;
    std::size_t size() const noexcept { return tags_.size(); }
    bool empty() const noexcept { return tags_.empty(); }
    Map::const_iterator begin() const { return tags_.begin(); }
    Map::const_iterator end() const { return tags_.end(); }

private:
    Map tags_;
};

struct BalanceSheetRecord {
    std::string entity;
    Date report_date;
    Decimal crypto_assets_eur;
    bool is_proxy = false;

    friend bool operator==(const BalanceSheetRecord &, const BalanceSheetRecord &) = default;
};

inline constexpr std::size_t kFeatureCount = 5;
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{"custody", "buy_sell", "payment",
                                                                          "consulting", "trading"};

struct FeatureRow {
    std::string vasp_id;
    std::array<std::uint8_t, kFeatureCount> features{};

    friend bool operator==(const FeatureRow &, const FeatureRow &) = default;
};

struct FeatureMatrix {
    std::vector<FeatureRow> rows;

    std::size_t size() const noexcept { return rows.size(); }
};

struct ParseOptions {
    // Skip bad lines (recording a diagnostic) instead of throwing.
    bool lenient = false;
};

struct Diagnostic {
    std::size_t line = 0;
    Errc code = Errc::MalformedLine;
    std::string message;
};

// Every data line ends up either in `value` or in `skipped`
// (merged duplicate tags are counted in `merged`).
template <typename T>
struct Parsed {
    T value{};
    std::vector<Diagnostic> skipped;
    std::size_t data_lines = 0;
    std::size_t merged = 0;
};

Parsed<std::vector<UtxoTransaction>> parse_utxo_transactions(std::istream &in, const ParseOptions &opts = {});
Parsed<std::vector<AccountTransfer>> parse_account_transfers(std::istream &in, const AssetRegistry &registry,
                                                             const ParseOptions &opts = {});
Parsed<TagSet> parse_attribution_tags(std::istream &in, const ParseOptions &opts = {});
Parsed<PriceSeries> parse_price_series(std::istream &in, const AssetRegistry &registry,
                                       const ParseOptions &opts = {});
Parsed<std::vector<BalanceSheetRecord>> parse_balance_sheets(std::istream &in, const ParseOptions &opts = {});
Parsed<FeatureMatrix> parse_service_features(std::istream &in, const ParseOptions &opts = {});

void write_utxo_transactions(std::ostream &out, const std::vector<UtxoTransaction> &txs);
void write_account_transfers(std::ostream &out, const std::vector<AccountTransfer> &transfers);
void write_attribution_tags(std::ostream &out, const TagSet &tags);
void write_price_series(std::ostream &out, const PriceSeries &prices);
void write_balance_sheets(std::ostream &out, const std::vector<BalanceSheetRecord> &records);
void write_service_features(std::ostream &out, const FeatureMatrix &features);

// Account-model addresses compare case-insensitively; this is the canonical form.
std::string normalize_account_address(std::string_view address);

// Splits one CSV line (quotes with backslash escapes) / joins fields back.
std::vector<std::string> split_csv(const std::string &line);
std::string join_csv(const std::vector<std::string> &fields);

} // namespace solvaudit

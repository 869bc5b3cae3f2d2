#include "solvaudit/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <boost/tokenizer.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace solvaudit {

using nlohmann::json;

namespace {

std::string upper(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
    return out;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool is_hex(std::string_view s)
{
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isxdigit(c) != 0; });
}

// Reads `in` line by line, checks the header (when given) and feeds each data
// line to `handle`. Errors thrown by `handle` are fatal unless lenient.
template <typename T, typename Handler>
void for_each_line(std::istream &in, std::string_view header, const ParseOptions &opts, Parsed<T> &result,
                   Handler &&handle)
{
    std::string line;
    std::size_t line_no = 0;
    if (!header.empty()) {
        ++line_no;
        if (!std::getline(in, line))
            return; // empty file
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line != header)
            throw Error(Errc::MalformedRow, fmt::format("expected header '{}', got '{}'", header, line), line_no);
    }
    while (std::getline(in, line)) {
        ++line_no;
        ++result.data_lines;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        try {
            if (line.empty())
                throw Error(header.empty() ? Errc::MalformedLine : Errc::MalformedRow, "empty line");
            handle(line, line_no);
        } catch (const Error &e) {
            if (!opts.lenient) {
                if (e.line())
                    throw;
                throw Error(e.code(), e.what(), line_no);
            }
            result.skipped.push_back({e.line().value_or(line_no), e.code(), e.what()});
        }
    }
}

std::uint64_t json_u64(const json &obj, const char *key, Errc negative_code = Errc::NegativeValue)
{
    auto it = obj.find(key);
    if (it == obj.end())
        throw Error(Errc::MalformedLine, fmt::format("missing field '{}'", key));
    if (it->is_number_unsigned())
        return it->get<std::uint64_t>();
    if (it->is_number_integer())
        throw Error(negative_code, fmt::format("field '{}' is negative", key));
    throw Error(Errc::MalformedLine, fmt::format("field '{}' is not an unsigned integer", key));
}

const std::string &json_str(const json &obj, const char *key)
{
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string())
        throw Error(Errc::MalformedLine, fmt::format("missing or non-string field '{}'", key));
    return it->get_ref<const std::string &>();
}

std::vector<TxIo> parse_ios(const json &obj, const char *key)
{
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_array())
        throw Error(Errc::MalformedLine, fmt::format("missing array '{}'", key));
    std::vector<TxIo> ios;
    ios.reserve(it->size());
    for (const auto &entry : *it) {
        if (!entry.is_object())
            throw Error(Errc::MalformedLine, fmt::format("'{}' entries must be objects", key));
        TxIo io{json_str(entry, "address"), json_u64(entry, "value")};
        if (io.address.empty())
            throw Error(Errc::MalformedLine, "empty address");
        ios.push_back(std::move(io));
    }
    return ios;
}

unsigned __int128 sum_values(const std::vector<TxIo> &ios)
{
    unsigned __int128 total = 0;
    for (const auto &io : ios)
        total += io.value;
    return total;
}

json json_line(std::string_view line)
{
    try {
        json j = json::parse(line);
        if (!j.is_object())
            throw Error(Errc::MalformedLine, "expected a JSON object");
        return j;
    } catch (const json::exception &e) {
        throw Error(Errc::MalformedLine, e.what());
    }
}

std::vector<std::string> csv_fields(const std::string &line, std::size_t expected)
{
    std::vector<std::string> fields;
    try {
        fields = split_csv(line);
    } catch (const boost::escaped_list_error &e) {
        throw Error(Errc::MalformedRow, e.what());
    }
    if (fields.size() != expected)
        throw Error(Errc::MalformedRow, fmt::format("expected {} fields, got {}", expected, fields.size()));
    return fields;
}

Decimal non_negative_decimal(const std::string &text, const char *what)
{
    Decimal d;
    if (!Decimal::try_parse(text, d))
        throw Error(Errc::MalformedRow, fmt::format("{} is not a decimal: '{}'", what, text));
    if (d.sign() < 0)
        throw Error(Errc::MalformedRow, fmt::format("{} is negative: '{}'", what, text));
    return d;
}

Date day_field(const std::string &text)
{
    Date d;
    if (!try_parse_date(text, d))
        throw Error(Errc::MalformedRow, fmt::format("not an ISO-8601 day: '{}'", text));
    return d;
}

bool parse_bool(const std::string &text, bool &out)
{
    const std::string v = lower(text);
    if (v == "true" || v == "1" || v == "y" || v == "yes") {
        out = true;
        return true;
    }
    if (v == "false" || v == "0" || v == "n" || v == "no") {
        out = false;
        return true;
    }
    return false;
}

} // namespace

std::uint64_t UtxoTransaction::fee() const
{
    if (is_coinbase())
        return 0;
    return static_cast<std::uint64_t>(sum_values(inputs) - sum_values(outputs));
}

std::string_view to_string(Ledger ledger) noexcept
{
    return ledger == Ledger::Utxo ? "UTXO" : "ACCOUNT";
}

std::string normalize_account_address(std::string_view address)
{
    return lower(address);
}

std::vector<std::string> split_csv(const std::string &line)
{
    using Sep = boost::escaped_list_separator<char>;
    boost::tokenizer<Sep> tok(line, Sep('\\', ',', '"'));
    return {tok.begin(), tok.end()};
}

std::string join_csv(const std::vector<std::string> &fields)
{
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i)
            out += ',';
        const auto &f = fields[i];
        if (f.find_first_of(",\"\\") == std::string::npos) {
            out += f;
            continue;
        }
        out += '"';
        for (char c : f) {
            if (c == '"' || c == '\\')
                out += '\\';
            out += c;
        }
        out += '"';
    }
    return out;
}

// --- asset registry ---------------------------------------------------------

AssetRegistry AssetRegistry::defaults()
{
    AssetRegistry r;
    for (auto &[sym, dec] : std::initializer_list<std::pair<const char *, unsigned>>{
             {"BTC", 8}, {"ETH", 18}, {"USDT", 6}, {"USDC", 6}, {"DAI", 18}, {"WETH", 18}, {"WBTC", 8}})
        r.add({sym, dec});
    return r;
}

AssetRegistry AssetRegistry::parse(std::istream &in)
{
    AssetRegistry r = defaults();
    Parsed<int> dummy;
    for_each_line(in, "asset,decimals", ParseOptions{}, dummy, [&](const std::string &line, std::size_t) {
        auto f = csv_fields(line, 2);
        unsigned dec = 0;
        auto [ptr, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), dec);
        if (ec != std::errc{} || ptr != f[1].data() + f[1].size() || dec > 30 || f[0].empty())
            throw Error(Errc::MalformedRow, fmt::format("bad asset row '{}'", line));
        r.add({upper(f[0]), dec});
    });
    return r;
}

void AssetRegistry::add(AssetId asset)
{
    asset.symbol = upper(asset.symbol);
    for (auto &a : assets_) {
        if (a.symbol == asset.symbol) {
            a = std::move(asset);
            return;
        }
    }
    assets_.push_back(std::move(asset));
}

bool AssetRegistry::contains(std::string_view symbol) const
{
    const std::string s = upper(symbol);
    return std::any_of(assets_.begin(), assets_.end(), [&](const AssetId &a) { return a.symbol == s; });
}

const AssetId &AssetRegistry::at(std::string_view symbol) const
{
    const std::string s = upper(symbol);
    for (const auto &a : assets_)
        if (a.symbol == s)
            return a;
    throw Error(Errc::UnknownAsset, fmt::format("asset '{}' is not in the registry", symbol));
}

// --- tag set ----------------------------------------------------------------

namespace {

bool tag_insert(TagSet::Map &tags, AttributionTag tag)
{
    TagSet::Key key{tag.ledger, tag.address};
    auto [it, inserted] = tags.try_emplace(key, tag);
    if (inserted)
        return true;
    AttributionTag &existing = it->second;
    if (existing.entity != tag.entity)
        throw Error(Errc::ConflictingTag, fmt::format("{} address {} tagged as both '{}' and '{}'",
                                                      to_string(tag.ledger), tag.address, existing.entity,
                                                      tag.entity));
    std::vector<std::string> sources;
    std::string_view rest = existing.source;
    while (!rest.empty()) {
        auto cut = rest.find(';');
        sources.emplace_back(rest.substr(0, cut));
        rest = cut == std::string_view::npos ? std::string_view{} : rest.substr(cut + 1);
    }
    if (!tag.source.empty() && std::find(sources.begin(), sources.end(), tag.source) == sources.end())
        existing.source += existing.source.empty() ? tag.source : ";" + tag.source;
    existing.confidence = std::max(existing.confidence, tag.confidence);
    return false;
}

} // namespace

void TagSet::insert(AttributionTag tag)
{
    if (tag.ledger == Ledger::Account)
        tag.address = normalize_account_address(tag.address);
    tag_insert(tags_, std::move(tag));
}

const AttributionTag *TagSet::find(Ledger ledger, std::string_view address) const
{
    auto it = tags_.find(Key{ledger, ledger == Ledger::Account ? normalize_account_address(address)
                                                               : std::string(address)});
    return it == tags_.end() ? nullptr : &it->second;
}

// --- price series -----------------------------------------------------------

bool PriceSeries::insert(const std::string &asset, Date date, Decimal eur_per_unit)
{
    return series_[asset].try_emplace(date, std::move(eur_per_unit)).second;
}

std::optional<Decimal> PriceSeries::exact(std::string_view asset, Date date) const
{
    auto a = series_.find(asset);
    if (a == series_.end())
        return std::nullopt;
    auto p = a->second.find(date);
    if (p == a->second.end())
        return std::nullopt;
    return p->second;
}

std::optional<PriceQuote> PriceSeries::latest(std::string_view asset, Date date, int window_days) const
{
    auto a = series_.find(asset);
    if (a == series_.end())
        return std::nullopt;
    auto it = a->second.upper_bound(date);
    if (it == a->second.begin())
        return std::nullopt;
    --it;
    if (date - it->first > std::chrono::days{window_days})
        return std::nullopt;
    return PriceQuote{it->first, it->second};
}

PriceQuote PriceSeries::require(std::string_view asset, Date date, int window_days) const
{
    if (auto q = latest(asset, date, window_days))
        return *q;
    throw Error(Errc::StalePrice, fmt::format("no {} price within {} days before {}", asset, window_days,
                                              format_date(date)));
}

// --- parsers ----------------------------------------------------------------

Parsed<std::vector<UtxoTransaction>> parse_utxo_transactions(std::istream &in, const ParseOptions &opts)
{
    Parsed<std::vector<UtxoTransaction>> result;
    std::unordered_set<std::string> seen;
    for_each_line(in, "", opts, result, [&](const std::string &line, std::size_t) {
        const json j = json_line(line);
        UtxoTransaction tx;
        tx.txid = lower(json_str(j, "txid"));
        if (tx.txid.size() != 64 || !is_hex(tx.txid))
            throw Error(Errc::MalformedLine, fmt::format("txid must be 64 hex characters: '{}'", tx.txid));
        tx.block = json_u64(j, "block", Errc::MalformedLine);
        tx.timestamp = json_u64(j, "timestamp", Errc::MalformedLine);
        tx.inputs = parse_ios(j, "inputs");
        tx.outputs = parse_ios(j, "outputs");
        if (!tx.inputs.empty() && sum_values(tx.inputs) < sum_values(tx.outputs))
            throw Error(Errc::FeeNegative, fmt::format("tx {} spends more than its inputs", tx.txid));
        if (!seen.insert(tx.txid).second)
            throw Error(Errc::DuplicateTxid, fmt::format("duplicate txid {}", tx.txid));
        result.value.push_back(std::move(tx));
    });
    std::sort(result.value.begin(), result.value.end(), [](const UtxoTransaction &a, const UtxoTransaction &b) {
        return std::tie(a.block, a.txid) < std::tie(b.block, b.txid);
    });
    return result;
}

Parsed<std::vector<AccountTransfer>> parse_account_transfers(std::istream &in, const AssetRegistry &registry,
                                                             const ParseOptions &opts)
{
    Parsed<std::vector<AccountTransfer>> result;
    for_each_line(in, "", opts, result, [&](const std::string &line, std::size_t) {
        const json j = json_line(line);
        AccountTransfer t;
        t.block = json_u64(j, "block", Errc::MalformedLine);
        t.timestamp = json_u64(j, "timestamp", Errc::MalformedLine);
        t.from = normalize_account_address(json_str(j, "from"));
        t.to = normalize_account_address(json_str(j, "to"));
        if (t.from.empty() || t.to.empty())
            throw Error(Errc::MalformedLine, "empty address");
        if (t.is_mint() && t.is_burn())
            throw Error(Errc::MalformedLine, "transfer from and to the mint/burn address");
        const std::string &value = json_str(j, "value");
        if (!parse_unsigned(value, t.value))
            throw Error(Errc::MalformedLine, fmt::format("value must be an unsigned decimal string: '{}'", value));
        if (t.value > max_uint256())
            throw Error(Errc::ValueOverflow, fmt::format("value exceeds 256 bits: {}", value));
        t.asset = registry.at(json_str(j, "asset")).symbol;
        result.value.push_back(std::move(t));
    });
    std::stable_sort(result.value.begin(), result.value.end(),
                     [](const AccountTransfer &a, const AccountTransfer &b) { return a.block < b.block; });
    return result;
}

Parsed<TagSet> parse_attribution_tags(std::istream &in, const ParseOptions &opts)
{
    Parsed<TagSet> result;
    TagSet::Map tags;
    for_each_line(in, "address,ledger,entity,source,confidence", opts, result,
                  [&](const std::string &line, std::size_t) {
                      auto f = csv_fields(line, 5);
                      AttributionTag tag;
                      const std::string ledger = upper(f[1]);
                      if (ledger == "UTXO")
                          tag.ledger = Ledger::Utxo;
                      else if (ledger == "ACCOUNT")
                          tag.ledger = Ledger::Account;
                      else
                          throw Error(Errc::MalformedRow, fmt::format("unknown ledger '{}'", f[1]));
                      tag.address = tag.ledger == Ledger::Account ? normalize_account_address(f[0]) : f[0];
                      tag.entity = f[2];
                      tag.source = f[3];
                      if (tag.address.empty() || tag.entity.empty())
                          throw Error(Errc::MalformedRow, "empty address or entity");
                      auto [ptr, ec] = std::from_chars(f[4].data(), f[4].data() + f[4].size(), tag.confidence);
                      if (ec != std::errc{} || ptr != f[4].data() + f[4].size() || !(tag.confidence >= 0.0) ||
                          tag.confidence > 1.0)
                          throw Error(Errc::MalformedRow, fmt::format("confidence must be in [0,1]: '{}'", f[4]));
                      if (!tag_insert(tags, std::move(tag)))
                          ++result.merged;
                  });
    for (auto &[key, tag] : tags)
        result.value.insert(std::move(tag));
    return result;
}

Parsed<PriceSeries> parse_price_series(std::istream &in, const AssetRegistry &registry, const ParseOptions &opts)
{
    Parsed<PriceSeries> result;
    for_each_line(in, "date,asset,eur_per_unit", opts, result, [&](const std::string &line, std::size_t) {
        auto f = csv_fields(line, 3);
        const Date date = day_field(f[0]);
        const std::string &asset = registry.at(f[1]).symbol;
        Decimal price = non_negative_decimal(f[2], "eur_per_unit");
        if (!result.value.insert(asset, date, std::move(price)))
            throw Error(Errc::DuplicateKey, fmt::format("duplicate price for ({}, {})", f[0], asset));
    });
    return result;
}

Parsed<std::vector<BalanceSheetRecord>> parse_balance_sheets(std::istream &in, const ParseOptions &opts)
{
    Parsed<std::vector<BalanceSheetRecord>> result;
    std::map<std::pair<std::string, Date>, bool> seen;
    for_each_line(in, "entity,report_date,crypto_assets_eur,is_proxy", opts, result,
                  [&](const std::string &line, std::size_t) {
                      auto f = csv_fields(line, 4);
                      BalanceSheetRecord r;
                      r.entity = f[0];
                      if (r.entity.empty())
                          throw Error(Errc::MalformedRow, "empty entity");
                      r.report_date = day_field(f[1]);
                      r.crypto_assets_eur = non_negative_decimal(f[2], "crypto_assets_eur");
                      if (!parse_bool(f[3], r.is_proxy))
                          throw Error(Errc::MalformedRow, fmt::format("is_proxy must be boolean: '{}'", f[3]));
                      if (!seen.try_emplace({r.entity, r.report_date}, true).second)
                          throw Error(Errc::DuplicateKey,
                                      fmt::format("duplicate balance sheet for ({}, {})", r.entity, f[1]));
                      result.value.push_back(std::move(r));
                  });
    std::sort(result.value.begin(), result.value.end(), [](const BalanceSheetRecord &a, const BalanceSheetRecord &b) {
        return std::tie(a.entity, a.report_date) < std::tie(b.entity, b.report_date);
    });
    return result;
}

Parsed<FeatureMatrix> parse_service_features(std::istream &in, const ParseOptions &opts)
{
    Parsed<FeatureMatrix> result;
    std::unordered_set<std::string> seen;
    for_each_line(in, "vasp_id,custody,buy_sell,payment,consulting,trading", opts, result,
                  [&](const std::string &line, std::size_t) {
                      auto f = csv_fields(line, 1 + kFeatureCount);
                      FeatureRow row;
                      row.vasp_id = f[0];
                      if (row.vasp_id.empty())
                          throw Error(Errc::MalformedRow, "empty vasp_id");
                      for (std::size_t i = 0; i < kFeatureCount; ++i) {
                          const std::string v = upper(f[i + 1]);
                          if (v == "Y" || v == "1")
                              row.features[i] = 1;
                          else if (v == "N" || v == "0")
                              row.features[i] = 0;
                          else
                              throw Error(Errc::NonBinaryFeature,
                                          fmt::format("{} of {} is not Y/N/1/0: '{}'", kFeatureNames[i],
                                                      row.vasp_id, f[i + 1]));
                      }
                      if (!seen.insert(row.vasp_id).second)
                          throw Error(Errc::DuplicateKey, fmt::format("duplicate vasp_id {}", row.vasp_id));
                      result.value.rows.push_back(std::move(row));
                  });
    return result;
}

// --- writers ----------------------------------------------------------------

void write_utxo_transactions(std::ostream &out, const std::vector<UtxoTransaction> &txs)
{
    auto ios = [](const std::vector<TxIo> &list) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto &io : list)
            arr.push_back({{"address", io.address}, {"value", io.value}});
        return arr;
    };
    for (const auto &tx : txs) {
        nlohmann::ordered_json j;
        j["txid"] = tx.txid;
        j["block"] = tx.block;
        j["timestamp"] = tx.timestamp;
        j["inputs"] = ios(tx.inputs);
        j["outputs"] = ios(tx.outputs);
        out << j.dump() << '\n';
    }
}

void write_account_transfers(std::ostream &out, const std::vector<AccountTransfer> &transfers)
{
    for (const auto &t : transfers) {
        nlohmann::ordered_json j;
        j["block"] = t.block;
        j["timestamp"] = t.timestamp;
        j["asset"] = t.asset;
        j["from"] = t.from;
        j["to"] = t.to;
        j["value"] = t.value.str();
        out << j.dump() << '\n';
    }
}

void write_attribution_tags(std::ostream &out, const TagSet &tags)
{
    out << "address,ledger,entity,source,confidence\n";
    for (const auto &[key, tag] : tags)
        out << join_csv({tag.address, std::string(to_string(tag.ledger)), tag.entity, tag.source,
                         fmt::format("{}", tag.confidence)})
            << '\n';
}

void write_price_series(std::ostream &out, const PriceSeries &prices)
{
    // Rows ordered by date, then asset.
    std::map<std::pair<Date, std::string>, const Decimal *> rows;
    for (const auto &[asset, points] : prices.assets())
        for (const auto &[date, price] : points)
            rows.emplace(std::pair{date, asset}, &price);
    out << "date,asset,eur_per_unit\n";
    for (const auto &[key, price] : rows)
        out << format_date(key.first) << ',' << key.second << ',' << price->to_string() << '\n';
}

void write_balance_sheets(std::ostream &out, const std::vector<BalanceSheetRecord> &records)
{
    out << "entity,report_date,crypto_assets_eur,is_proxy\n";
    for (const auto &r : records)
        out << join_csv({r.entity, format_date(r.report_date), r.crypto_assets_eur.to_string(),
                         r.is_proxy ? "true" : "false"})
            << '\n';
}

void write_service_features(std::ostream &out, const FeatureMatrix &features)
{
    out << "vasp_id,custody,buy_sell,payment,consulting,trading\n";
    for (const auto &row : features.rows) {
        std::vector<std::string> fields{row.vasp_id};
        for (auto v : row.features)
            fields.emplace_back(v ? "Y" : "N");
        out << join_csv(fields) << '\n';
    }
}

} // namespace solvaudit

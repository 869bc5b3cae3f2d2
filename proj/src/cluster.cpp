#include "solvaudit/cluster.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace solvaudit {

DisjointSet::DisjointSet(std::size_t n) : parent_(n), rank_(n, 0)
{
    for (std::size_t i = 0; i < n; ++i)
        parent_[i] = static_cast<std::uint32_t>(i);
}

std::uint32_t DisjointSet::add()
{
    const auto id = static_cast<std::uint32_t>(parent_.size());
    parent_.push_back(id);
    rank_.push_back(0);
    return id;
}

std::uint32_t DisjointSet::find(std::uint32_t x)
{
    while (parent_[x] != x) {
        parent_[x] = parent_[parent_[x]];
        x = parent_[x];
    }
    return x;
}

bool DisjointSet::unite(std::uint32_t a, std::uint32_t b)
{
    a = find(a);
    b = find(b);
    if (a == b)
        return false;
    if (rank_[a] < rank_[b])
        std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b])
        ++rank_[a];
    return true;
}

// --- index ------------------------------------------------------------------

std::optional<std::uint32_t> ClusterIndex::id_of(std::string_view address) const
{
    auto it = ids_.find(address);
    if (it == ids_.end())
        return std::nullopt;
    return it->second;
}

ClusterId ClusterIndex::cluster_of(std::string_view address) const
{
    auto id = id_of(address);
    if (!id)
        throw Error(Errc::AddressUnknown, fmt::format("address {} does not occur in the ledger", address));
    return cluster_of_id(*id);
}

std::span<const std::uint32_t> ClusterIndex::members(ClusterId cluster) const
{
    if (cluster.value >= representative_.size() || representative_[cluster.value] != cluster.value)
        return {};
    const std::uint32_t slot = slot_of_representative_[cluster.value];
    return std::span<const std::uint32_t>(cluster_members_).subspan(
        cluster_offsets_[slot], cluster_offsets_[slot + 1] - cluster_offsets_[slot]);
}

std::uint32_t ClusterIndex::intern(const std::string &address)
{
    auto it = ids_.find(address);
    if (it != ids_.end())
        return it->second;
    const auto id = static_cast<std::uint32_t>(addresses_.size());
    const std::string &stored = addresses_.emplace_back(address);
    ids_.emplace(stored, id);
    return id;
}

void ClusterIndex::freeze(DisjointSet &sets)
{
    const std::size_t n = addresses_.size();
    constexpr std::uint32_t none = UINT32_MAX;
    std::vector<std::uint32_t> smallest_of_root(n, none);
    representative_.resize(n);
    slot_of_representative_.assign(n, none);
    std::vector<std::uint32_t> sizes;
    // Ids ascend, so the first id met for a root is the smallest member.
    for (std::uint32_t id = 0; id < n; ++id) {
        const std::uint32_t root = sets.find(id);
        if (smallest_of_root[root] == none) {
            smallest_of_root[root] = id;
            slot_of_representative_[id] = static_cast<std::uint32_t>(cluster_ids_.size());
            cluster_ids_.push_back(ClusterId{id});
            sizes.push_back(0);
        }
        representative_[id] = smallest_of_root[root];
        ++sizes[slot_of_representative_[representative_[id]]];
    }
    cluster_offsets_.assign(cluster_ids_.size() + 1, 0);
    for (std::size_t k = 0; k < sizes.size(); ++k)
        cluster_offsets_[k + 1] = cluster_offsets_[k] + sizes[k];
    cluster_members_.resize(n);
    std::vector<std::uint32_t> cursor(cluster_offsets_.begin(), cluster_offsets_.end() - 1);
    for (std::uint32_t id = 0; id < n; ++id)
        cluster_members_[cursor[slot_of_representative_[representative_[id]]]++] = id;
}

ClusterIndex build_clusters(std::span<const UtxoTransaction> txs)
{
    ClusterIndex index;
    DisjointSet sets;
    auto intern = [&](const std::string &address) {
        const std::uint32_t id = index.intern(address);
        if (id == sets.size())
            sets.add();
        return id;
    };
    for (const auto &tx : txs) {
        if (!tx.inputs.empty()) {
            const std::uint32_t first = intern(tx.inputs.front().address);
            for (std::size_t i = 1; i < tx.inputs.size(); ++i)
                sets.unite(first, intern(tx.inputs[i].address));
        }
        for (const auto &out : tx.outputs)
            intern(out.address);
    }
    index.freeze(sets);
    return index;
}

// --- attribution ------------------------------------------------------------

namespace {

const std::vector<std::string> kNoStrings;

} // namespace

const EntityMap::Entry &EntityMap::entry(std::string_view entity) const
{
    auto it = entities_.find(entity);
    if (it == entities_.end())
        throw Error(Errc::UnknownEntity, fmt::format("no attribution tags for entity '{}'", entity));
    return it->second;
}

bool EntityMap::contains(std::string_view entity) const
{
    return entities_.find(entity) != entities_.end();
}

std::vector<std::string> EntityMap::entities() const
{
    std::vector<std::string> out;
    for (const auto &[name, e] : entities_)
        out.push_back(name);
    return out;
}

const std::string *EntityMap::entity_of(ClusterId cluster) const
{
    auto it = cluster_entity_.find(cluster);
    return it == cluster_entity_.end() ? nullptr : &it->second;
}

const std::vector<ClusterId> &EntityMap::clusters_of(std::string_view entity) const
{
    return entry(entity).clusters;
}

const std::vector<std::string> &EntityMap::tagged_utxo_addresses(std::string_view entity) const
{
    return entry(entity).utxo_addresses;
}

const std::vector<std::string> &EntityMap::account_addresses(std::string_view entity) const
{
    return entry(entity).account_addresses;
}

const std::vector<std::string> &EntityMap::provenance(ClusterId cluster) const
{
    auto it = provenance_.find(cluster);
    return it == provenance_.end() ? kNoStrings : it->second;
}

EntityMap attribute_clusters(const ClusterIndex &index, const TagSet &tags, bool strict)
{
    EntityMap map;
    // cluster -> entity -> tagged addresses
    std::map<ClusterId, std::map<std::string, std::vector<std::string>>> labels;
    for (const auto &[key, tag] : tags) {
        auto &entry = map.entities_[tag.entity];
        if (tag.ledger == Ledger::Account) {
            entry.account_addresses.push_back(tag.address);
            continue;
        }
        entry.utxo_addresses.push_back(tag.address);
        auto id = index.id_of(tag.address);
        if (!id) {
            map.warnings_.push_back(
                fmt::format("tagged address {} of '{}' never appears on-chain", tag.address, tag.entity));
            continue;
        }
        labels[index.cluster_of_id(*id)][tag.entity].push_back(tag.address);
    }
    for (auto &[cluster, by_entity] : labels) {
        if (by_entity.size() > 1) {
            ClusterConflict conflict{cluster, {}};
            for (const auto &[entity, addrs] : by_entity)
                conflict.entities.push_back(entity);
            const std::string msg =
                fmt::format("cluster {} (contains {}) is tagged with entities {}", cluster.value,
                            index.address(cluster.value), fmt::join(conflict.entities, ", "));
            if (strict)
                throw Error(Errc::ClusterEntityConflict, msg);
            map.warnings_.push_back(msg);
            map.conflicts_.push_back(std::move(conflict));
            continue;
        }
        auto &[entity, addrs] = *by_entity.begin();
        map.cluster_entity_.emplace(cluster, entity);
        map.entities_[entity].clusters.push_back(cluster);
        map.provenance_.emplace(cluster, std::move(addrs));
    }
    for (const auto &[name, entry] : map.entities_)
        if (entry.clusters.empty() && entry.account_addresses.empty())
            map.warnings_.push_back(fmt::format("entity '{}' has no on-chain clusters", name));
    return map;
}

// --- stats / dump -----------------------------------------------------------

ClusterStats cluster_stats(const ClusterIndex &index)
{
    ClusterStats stats;
    stats.address_count = index.address_count();
    stats.cluster_count = index.cluster_count();
    for (ClusterId c : index.clusters()) {
        const std::size_t size = index.members(c).size();
        ++stats.size_histogram[size];
        if (size > stats.largest_size) {
            stats.largest_size = size;
            stats.largest_cluster = c;
        }
    }
    return stats;
}

void write_cluster_dump(std::ostream &out, const ClusterIndex &index, const EntityMap *entities)
{
    out << "address,cluster_id,entity\n";
    std::vector<std::string_view> names;
    for (ClusterId c : index.clusters()) {
        names.clear();
        for (std::uint32_t id : index.members(c))
            names.push_back(index.address(id));
        std::sort(names.begin(), names.end());
        const std::string *entity = entities ? entities->entity_of(c) : nullptr;
        for (auto name : names)
            out << join_csv({std::string(name), std::to_string(c.value), entity ? *entity : std::string()}) << '\n';
    }
}

} // namespace solvaudit

#pragma once

// Multi-input address clustering over the UTXO ledger and entity attribution.

#include <compare>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "solvaudit/ingest.hpp"

namespace solvaudit {

// Union by rank with path halving over dense ids.
class DisjointSet {
public:
    DisjointSet() = default;
    explicit DisjointSet(std::size_t n);

    std::uint32_t add();
    std::uint32_t find(std::uint32_t x);
    // Returns true when the two sets were distinct.
    bool unite(std::uint32_t a, std::uint32_t b);
    std::size_t size() const noexcept { return parent_.size(); }

private:
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint8_t> rank_;
};

// Smallest interned address id in the cluster.
struct ClusterId {
    std::uint32_t value = 0;
    friend auto operator<=>(const ClusterId &, const ClusterId &) = default;
};

// Frozen partition of every address seen in a transaction list. Read-only
// after build_clusters(), so concurrent queries are safe.
class ClusterIndex {
public:
    ClusterIndex() = default;
    // ids_ views into addresses_, whose elements keep their address across moves only.
    ClusterIndex(const ClusterIndex &) = delete;
    ClusterIndex &operator=(const ClusterIndex &) = delete;
    ClusterIndex(ClusterIndex &&) noexcept = default;
    ClusterIndex &operator=(ClusterIndex &&) noexcept = default;

    std::size_t address_count() const noexcept { return addresses_.size(); }
    std::size_t cluster_count() const noexcept { return cluster_offsets_.empty() ? 0 : cluster_offsets_.size() - 1; }

    std::optional<std::uint32_t> id_of(std::string_view address) const;
    const std::string &address(std::uint32_t id) const { return addresses_[id]; }

    // Throws AddressUnknown for addresses not present in the indexed transactions.
    ClusterId cluster_of(std::string_view address) const;
    ClusterId cluster_of_id(std::uint32_t id) const { return ClusterId{representative_[id]}; }

    // Member address ids in ascending order.
    std::span<const std::uint32_t> members(ClusterId cluster) const;
    // All clusters, ascending.
    std::span<const ClusterId> clusters() const noexcept { return cluster_ids_; }

private:
    friend ClusterIndex build_clusters(std::span<const UtxoTransaction> txs);

    std::uint32_t intern(const std::string &address);
    void freeze(DisjointSet &sets);

    std::deque<std::string> addresses_;
    std::unordered_map<std::string_view, std::uint32_t> ids_;
    std::vector<std::uint32_t> representative_;
    std::vector<ClusterId> cluster_ids_;
    // cluster_members_[cluster_offsets_[k] .. cluster_offsets_[k+1]) belong to cluster_ids_[k].
    std::vector<std::uint32_t> cluster_offsets_;
    std::vector<std::uint32_t> cluster_members_;
    std::vector<std::uint32_t> slot_of_representative_;
};

// Every input address of a transaction joins one cluster.
ClusterIndex build_clusters(std::span<const UtxoTransaction> txs);

struct ClusterConflict {
    ClusterId cluster;
    std::vector<std::string> entities;
};

class EntityMap {
public:
    bool contains(std::string_view entity) const;
    std::vector<std::string> entities() const;

    const std::string *entity_of(ClusterId cluster) const;
    // Throws UnknownEntity.
    const std::vector<ClusterId> &clusters_of(std::string_view entity) const;
    // Tagged UTXO addresses of the entity, including ones never seen on-chain.
    const std::vector<std::string> &tagged_utxo_addresses(std::string_view entity) const;
    // Account-model addresses map 1:1 through tags.
    const std::vector<std::string> &account_addresses(std::string_view entity) const;
    // Tagged addresses that induced the cluster's label.
    const std::vector<std::string> &provenance(ClusterId cluster) const;

    const std::vector<ClusterConflict> &conflicts() const noexcept { return conflicts_; }
    const std::vector<std::string> &warnings() const noexcept { return warnings_; }

private:
    friend EntityMap attribute_clusters(const ClusterIndex &, const TagSet &, bool);

    struct Entry {
        std::vector<ClusterId> clusters;
        std::vector<std::string> utxo_addresses;
        std::vector<std::string> account_addresses;
    };
    const Entry &entry(std::string_view entity) const;

    std::map<std::string, Entry, std::less<>> entities_;
    std::map<ClusterId, std::string> cluster_entity_;
    std::map<ClusterId, std::vector<std::string>> provenance_;
    std::vector<ClusterConflict> conflicts_;
    std::vector<std::string> warnings_;
};

// Labels each cluster holding tagged addresses with the tag's entity. A
// cluster tagged with two entities throws ClusterEntityConflict, or with
// `strict` = false is recorded in conflicts() and left unlabeled.
EntityMap attribute_clusters(const ClusterIndex &index, const TagSet &tags, bool strict = true);

struct ClusterStats {
    std::size_t address_count = 0;
    std::size_t cluster_count = 0;
    // cluster size -> number of clusters of that size
    std::map<std::size_t, std::size_t> size_histogram;
    std::size_t largest_size = 0;
    std::optional<ClusterId> largest_cluster;

    friend bool operator==(const ClusterStats &, const ClusterStats &) = default;
};

ClusterStats cluster_stats(const ClusterIndex &index);

// CSV `address,cluster_id,entity`, sorted by cluster id then address.
void write_cluster_dump(std::ostream &out, const ClusterIndex &index, const EntityMap *entities = nullptr);

} // namespace solvaudit

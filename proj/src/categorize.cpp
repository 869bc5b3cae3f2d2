#include "solvaudit/categorize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace solvaudit {

Dendrogram ward_linkage(std::span<const std::vector<double>> points, std::vector<std::string> labels)
{
    const std::size_t n = points.size();
    if (n < 2)
        throw Error(Errc::TooFewRows, fmt::format("clustering needs at least 2 rows, got {}", n));

    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double d = 0.0;
            for (std::size_t f = 0; f < points[i].size(); ++f) {
                const double diff = points[i][f] - points[j][f];
                d += diff * diff;
            }
            dist[i][j] = dist[j][i] = d;
        }

    // Slot s holds node node_of[s] of size size_of[s] while active[s].
    std::vector<std::size_t> node_of(n), size_of(n, 1);
    std::iota(node_of.begin(), node_of.end(), 0);
    std::vector<bool> active(n, true);

    Dendrogram out;
    out.labels = std::move(labels);
    double previous = 0.0;
    for (std::size_t step = 0; step + 1 < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < n; ++a)
            if (active[a])
                for (std::size_t b = a + 1; b < n; ++b)
                    if (active[b])
                        best = std::min(best, dist[a][b]);
        const double limit = best + kTieTolerance * std::max(1.0, std::abs(best));
        std::size_t sa = n, sb = n;
        std::pair<std::size_t, std::size_t> key{SIZE_MAX, SIZE_MAX};
        for (std::size_t a = 0; a < n; ++a) {
            if (!active[a])
                continue;
            for (std::size_t b = a + 1; b < n; ++b) {
                if (!active[b] || dist[a][b] > limit)
                    continue;
                const std::pair<std::size_t, std::size_t> candidate{std::min(node_of[a], node_of[b]),
                                                                  std::max(node_of[a], node_of[b])};
                if (candidate < key) {
                    key = candidate;
                    sa = a;
                    sb = b;
                }
            }
        }

        const double ni = static_cast<double>(size_of[sa]);
        const double nj = static_cast<double>(size_of[sb]);
        const double dij = dist[sa][sb];
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == sa || k == sb)
                continue;
            const double nk = static_cast<double>(size_of[k]);
            const double updated = ((ni + nk) * dist[sa][k] + (nj + nk) * dist[sb][k] - nk * dij) / (ni + nj + nk);
            dist[sa][k] = dist[k][sa] = updated;
        }
        // Ward heights never decrease; absorb floating-point noise from near-ties.
        const double height = std::max(previous, dij);
        previous = height;
        out.merges.push_back({key.first, key.second, height, size_of[sa] + size_of[sb]});
        node_of[sa] = n + step;
        size_of[sa] += size_of[sb];
        active[sb] = false;
    }
    return out;
}

Dendrogram hac(const FeatureMatrix &features)
{
    std::vector<std::vector<double>> points;
    std::vector<std::string> labels;
    for (const auto &row : features.rows) {
        std::vector<double> p;
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            if (row.features[i] > 1)
                throw Error(Errc::NonBinaryFeature,
                            fmt::format("{} of {} is {}", kFeatureNames[i], row.vasp_id, row.features[i]));
            p.push_back(row.features[i]);
        }
        points.push_back(std::move(p));
        labels.push_back(row.vasp_id);
    }
    return ward_linkage(points, std::move(labels));
}

std::vector<int> cut_labels(const Dendrogram &dendrogram, std::size_t k)
{
    const std::size_t n = dendrogram.leaf_count();
    if (k < 1 || k > n)
        throw Error(Errc::BadK, fmt::format("k must be in [1, {}], got {}", n, k));
    // parent over all 2n-1 nodes; applying the first n-k merges.
    std::vector<std::size_t> parent(2 * n - 1);
    std::iota(parent.begin(), parent.end(), 0);
    for (std::size_t t = 0; t < n - k; ++t) {
        const auto &m = dendrogram.merges[t];
        parent[m.left] = parent[m.right] = n + t;
    }
    auto root = [&](std::size_t x) {
        while (parent[x] != x)
            x = parent[x];
        return x;
    };
    std::vector<int> labels(n, 0);
    std::map<std::size_t, int> label_of_root;
    for (std::size_t leaf = 0; leaf < n; ++leaf) {
        auto [it, inserted] = label_of_root.try_emplace(root(leaf), static_cast<int>(label_of_root.size()) + 1);
        labels[leaf] = it->second;
    }
    return labels;
}

std::map<std::string, int> cut(const Dendrogram &dendrogram, std::size_t k)
{
    const auto labels = cut_labels(dendrogram, k);
    std::map<std::string, int> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        out[dendrogram.labels[i]] = labels[i];
    return out;
}

std::vector<std::vector<double>> cophenetic_heights(const Dendrogram &dendrogram)
{
    const std::size_t n = dendrogram.leaf_count();
    std::vector<std::vector<double>> heights(n, std::vector<double>(n, 0.0));
    std::vector<std::vector<std::size_t>> leaves(2 * n - 1);
    for (std::size_t i = 0; i < n; ++i)
        leaves[i] = {i};
    for (std::size_t t = 0; t < dendrogram.merges.size(); ++t) {
        const auto &m = dendrogram.merges[t];
        for (auto a : leaves[m.left])
            for (auto b : leaves[m.right])
                heights[a][b] = heights[b][a] = m.height;
        auto &joined = leaves[n + t];
        joined = leaves[m.left];
        joined.insert(joined.end(), leaves[m.right].begin(), leaves[m.right].end());
    }
    return heights;
}

std::string dendrogram_to_json(const Dendrogram &dendrogram)
{
    nlohmann::ordered_json j;
    j["labels"] = dendrogram.labels;
    auto merges = nlohmann::ordered_json::array();
    for (const auto &m : dendrogram.merges) {
        nlohmann::ordered_json row;
        row["left"] = m.left;
        row["right"] = m.right;
        row["height"] = m.height;
        row["size"] = m.size;
        merges.push_back(std::move(row));
    }
    j["merges"] = std::move(merges);
    return j.dump(2) + "\n";
}

void write_cut_csv(std::ostream &out, const Dendrogram &dendrogram, std::span<const int> labels)
{
    out << "vasp_id,cluster\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
        out << join_csv({dendrogram.labels[i], std::to_string(labels[i])}) << '\n';
}

} // namespace solvaudit

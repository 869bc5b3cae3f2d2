#pragma once

// Ward-linkage agglomerative clustering of VASP service-feature vectors.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "solvaudit/ingest.hpp"

namespace solvaudit {

// Node ids follow the usual linkage convention: leaves are 0..n-1 and the
// t-th merge creates node n+t.
struct Merge {
    std::size_t left = 0;
    std::size_t right = 0;
    // Ward-updated squared Euclidean distance (no square root).
    double height = 0.0;
    std::size_t size = 0;
};

struct Dendrogram {
    std::vector<std::string> labels;
    std::vector<Merge> merges;

    std::size_t leaf_count() const noexcept { return labels.size(); }
};

// Relative tolerance under which two candidate distances count as tied.
inline constexpr double kTieTolerance = 1e-12;

// Lance-Williams Ward recurrence over squared Euclidean distances; ties go to
// the lexicographically smallest (node, node) pair. Throws TooFewRows.
Dendrogram ward_linkage(std::span<const std::vector<double>> points, std::vector<std::string> labels);

// ward_linkage() over the binary features. Throws TooFewRows, NonBinaryFeature.
Dendrogram hac(const FeatureMatrix &features);

// Cluster label (1..k) per leaf after undoing the last k-1 merges; labels are
// ordered by each cluster's smallest leaf index. Throws BadK.
std::vector<int> cut_labels(const Dendrogram &dendrogram, std::size_t k);
std::map<std::string, int> cut(const Dendrogram &dendrogram, std::size_t k);

// Symmetric leaf-by-leaf matrix of the height at which two leaves first join.
std::vector<std::vector<double>> cophenetic_heights(const Dendrogram &dendrogram);

std::string dendrogram_to_json(const Dendrogram &dendrogram);
// CSV `vasp_id,cluster` in leaf order.
void write_cut_csv(std::ostream &out, const Dendrogram &dendrogram, std::span<const int> labels);

} // namespace solvaudit

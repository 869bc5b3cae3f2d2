#pragma once

// Merkle-sum-tree proof of liabilities.
//
// Encoding (H = SHA-256, sums are 16-byte big-endian two's complement):
//   leaf     = H(0x00 || user_id utf-8 || salt[16] || balance)
//   internal = H(0x01 || left.digest || left.sum || right.digest || right.sum)
//   padding  = digest H(0x02), sum 0; appended to every level of odd length > 1.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace solvaudit::pol {

using Digest = std::array<std::uint8_t, 32>;
using Salt = std::array<std::uint8_t, 16>;
using Sum = __int128;

std::string to_hex(std::span<const std::uint8_t> bytes);
// Throws MalformedLine on bad hex or wrong length.
Digest digest_from_hex(std::string_view hex);
Salt salt_from_hex(std::string_view hex);

std::string sum_to_string(Sum value);
// Throws MalformedLine / ValueOverflow.
Sum sum_from_string(std::string_view text);

Salt random_salt();
// First 16 bytes of H("solvaudit-salt" || seed (8 bytes BE) || user_id).
Salt derive_salt(std::uint64_t seed, std::string_view user_id);

struct LiabilityLeaf {
    std::string user_id;
    Salt salt{};
    Sum balance = 0;

    friend bool operator==(const LiabilityLeaf &, const LiabilityLeaf &) = default;
};

struct MerkleSumNode {
    Digest digest{};
    Sum sum = 0;

    friend bool operator==(const MerkleSumNode &, const MerkleSumNode &) = default;
};

Digest leaf_digest(const LiabilityLeaf &leaf);
Digest internal_digest(const MerkleSumNode &left, const MerkleSumNode &right);
const MerkleSumNode &padding_node();

// Side on which the sibling sits.
enum class Side { Left, Right };

struct PathStep {
    Digest digest{};
    Sum sum = 0;
    Side side = Side::Left;

    friend bool operator==(const PathStep &, const PathStep &) = default;
};

struct InclusionProof {
    MerkleSumNode root;
    LiabilityLeaf leaf;
    std::vector<PathStep> path;

    friend bool operator==(const InclusionProof &, const InclusionProof &) = default;
};

class MerkleSumTree {
public:
    const MerkleSumNode &root() const { return levels_.back().front(); }
    std::size_t height() const noexcept { return levels_.size() - 1; }
    const std::vector<LiabilityLeaf> &leaves() const noexcept { return leaves_; }
    bool attack_mode() const noexcept { return attack_mode_; }

    // Throws UnknownUser.
    InclusionProof prove(std::string_view user_id) const;

private:
    friend MerkleSumTree build_tree(std::vector<LiabilityLeaf> leaves, bool attack_mode);

    std::vector<LiabilityLeaf> leaves_;
    std::vector<std::vector<MerkleSumNode>> levels_;
    std::map<std::string, std::size_t, std::less<>> position_;
    bool attack_mode_ = false;
};

// Throws EmptyLeafSet, NegativeBalance (unless attack_mode), DuplicateKey
// for repeated user ids and ValueOverflow if a sum leaves 128 bits.
MerkleSumTree build_tree(std::vector<LiabilityLeaf> leaves, bool attack_mode = false);

enum class RejectReason { BadDigest, BadSum, NegativeOnPath };

std::string_view to_string(RejectReason reason) noexcept;

struct VerifyResult {
    std::optional<RejectReason> rejection;

    bool accepted() const noexcept { return !rejection; }
};

// Accepts iff the recomputed digest and sum reach `root` and neither the
// leaf balance nor any sibling sum on the path is negative.
VerifyResult verify(const MerkleSumNode &root, const InclusionProof &proof);

std::string proof_to_json(const InclusionProof &proof);
InclusionProof proof_from_json(std::string_view text);

// {"root":{...},"attack_mode":bool,"leaves":[{"user_id","salt","balance"}]}
std::string tree_to_json(const MerkleSumTree &tree);
MerkleSumTree tree_from_json(std::string_view text);

std::string root_to_json(const MerkleSumNode &root);
MerkleSumNode root_from_json(std::string_view text);

} // namespace solvaudit::pol

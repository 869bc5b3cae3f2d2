#include "solvaudit/pol.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include "solvaudit/error.hpp"
#include "solvaudit/numeric.hpp"

namespace solvaudit::pol {

using ojson = nlohmann::ordered_json;

namespace {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new())
    {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
            throw std::runtime_error("SHA-256 initialisation failed");
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256 &) = delete;
    Sha256 &operator=(const Sha256 &) = delete;

    Sha256 &update(std::span<const std::uint8_t> bytes)
    {
        EVP_DigestUpdate(ctx_, bytes.data(), bytes.size());
        return *this;
    }
    Sha256 &update(std::string_view text)
    {
        EVP_DigestUpdate(ctx_, text.data(), text.size());
        return *this;
    }
    Sha256 &update(std::uint8_t byte) { return update(std::span<const std::uint8_t>(&byte, 1)); }
    Sha256 &update(Sum value)
    {
        const auto bytes = encode_sum(value);
        return update(std::span<const std::uint8_t>(bytes));
    }

    Digest finish()
    {
        Digest out{};
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_, out.data(), &len);
        return out;
    }

    static std::array<std::uint8_t, 16> encode_sum(Sum value)
    {
        std::array<std::uint8_t, 16> out{};
        auto bits = static_cast<unsigned __int128>(value);
        for (int i = 15; i >= 0; --i) {
            out[i] = static_cast<std::uint8_t>(bits & 0xff);
            bits >>= 8;
        }
        return out;
    }

private:
    EVP_MD_CTX *ctx_;
};

constexpr Sum kSumMax = static_cast<Sum>(~static_cast<unsigned __int128>(0) >> 1);
constexpr Sum kSumMin = -kSumMax - 1;

bool checked_add(Sum a, Sum b, Sum &out)
{
    return !__builtin_add_overflow(a, b, &out);
}

template <std::size_t N>
std::array<std::uint8_t, N> bytes_from_hex(std::string_view hex)
{
    std::array<std::uint8_t, N> out{};
    if (hex.size() != 2 * N)
        throw Error(Errc::MalformedLine, fmt::format("expected {} hex characters, got {}", 2 * N, hex.size()));
    auto nibble = [&](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9')
            return c - '0';
        if (c >= 'a' && c <= 'f')
            return c - 'a' + 10;
        if (c >= 'A' && c <= 'F')
            return c - 'A' + 10;
        throw Error(Errc::MalformedLine, fmt::format("bad hex digit '{}'", c));
    };
    for (std::size_t i = 0; i < N; ++i)
        out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return out;
}

} // namespace

std::string to_hex(std::span<const std::uint8_t> bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out += digits[b >> 4];
        out += digits[b & 0xf];
    }
    return out;
}

Digest digest_from_hex(std::string_view hex)
{
    return bytes_from_hex<32>(hex);
}

Salt salt_from_hex(std::string_view hex)
{
    return bytes_from_hex<16>(hex);
}

std::string sum_to_string(Sum value)
{
    if (value == 0)
        return "0";
    const bool negative = value < 0;
    // Magnitude via unsigned arithmetic so kSumMin prints correctly.
    auto mag = negative ? ~static_cast<unsigned __int128>(value) + 1 : static_cast<unsigned __int128>(value);
    std::string out;
    while (mag > 0) {
        out += static_cast<char>('0' + static_cast<int>(mag % 10));
        mag /= 10;
    }
    if (negative)
        out += '-';
    std::reverse(out.begin(), out.end());
    return out;
}

Sum sum_from_string(std::string_view text)
{
    bool negative = false;
    std::string_view digits = text;
    if (!digits.empty() && digits.front() == '-') {
        negative = true;
        digits.remove_prefix(1);
    }
    BigInt value;
    if (!parse_unsigned(digits, value))
        throw Error(Errc::MalformedLine, fmt::format("not an integer: '{}'", text));
    if (negative)
        value = -value;
    if (value > BigInt(sum_to_string(kSumMax)) || value < BigInt(sum_to_string(kSumMin)))
        throw Error(Errc::ValueOverflow, fmt::format("value does not fit in 128 bits: {}", text));
    unsigned __int128 mag = 0;
    for (char c : digits)
        mag = mag * 10 + static_cast<unsigned>(c - '0');
    return negative ? static_cast<Sum>(~mag + 1) : static_cast<Sum>(mag);
}

Salt random_salt()
{
    Salt salt{};
    if (RAND_bytes(salt.data(), static_cast<int>(salt.size())) != 1)
        throw std::runtime_error("RAND_bytes failed");
    return salt;
}

Salt derive_salt(std::uint64_t seed, std::string_view user_id)
{
    std::array<std::uint8_t, 8> be{};
    for (int i = 7; i >= 0; --i, seed >>= 8)
        be[i] = static_cast<std::uint8_t>(seed & 0xff);
    const Digest d = Sha256().update(std::string_view("solvaudit-salt")).update(be).update(user_id).finish();
    Salt salt{};
    std::copy_n(d.begin(), salt.size(), salt.begin());
    return salt;
}

Digest leaf_digest(const LiabilityLeaf &leaf)
{
    return Sha256()
        .update(std::uint8_t{0x00})
        .update(std::string_view(leaf.user_id))
        .update(leaf.salt)
        .update(leaf.balance)
        .finish();
}

Digest internal_digest(const MerkleSumNode &left, const MerkleSumNode &right)
{
    return Sha256()
        .update(std::uint8_t{0x01})
        .update(left.digest)
        .update(left.sum)
        .update(right.digest)
        .update(right.sum)
        .finish();
}

const MerkleSumNode &padding_node()
{
    static const MerkleSumNode node{Sha256().update(std::uint8_t{0x02}).finish(), 0};
    return node;
}

std::string_view to_string(RejectReason reason) noexcept
{
    switch (reason) {
    case RejectReason::BadDigest: return "BAD_DIGEST";
    case RejectReason::BadSum: return "BAD_SUM";
    case RejectReason::NegativeOnPath: return "NEGATIVE_ON_PATH";
    }
    return "BAD_DIGEST";
}

MerkleSumTree build_tree(std::vector<LiabilityLeaf> leaves, bool attack_mode)
{
    if (leaves.empty())
        throw Error(Errc::EmptyLeafSet, "a liability tree needs at least one leaf");
    MerkleSumTree tree;
    tree.attack_mode_ = attack_mode;
    std::vector<MerkleSumNode> level;
    level.reserve(leaves.size() + 1);
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const auto &leaf = leaves[i];
        if (!attack_mode && leaf.balance < 0)
            throw Error(Errc::NegativeBalance,
                        fmt::format("user {} has negative balance {}", leaf.user_id, sum_to_string(leaf.balance)));
        if (!tree.position_.emplace(leaf.user_id, i).second)
            throw Error(Errc::DuplicateKey, fmt::format("user {} appears twice", leaf.user_id));
        level.push_back({leaf_digest(leaf), leaf.balance});
    }
    tree.leaves_ = std::move(leaves);
    while (true) {
        if (level.size() > 1 && level.size() % 2 == 1)
            level.push_back(padding_node());
        tree.levels_.push_back(level);
        if (level.size() == 1)
            break;
        std::vector<MerkleSumNode> parent;
        parent.reserve(level.size() / 2 + 1);
        for (std::size_t i = 0; i < level.size(); i += 2) {
            MerkleSumNode node;
            if (!checked_add(level[i].sum, level[i + 1].sum, node.sum))
                throw Error(Errc::ValueOverflow, "liability sum exceeds 128 bits");
            node.digest = internal_digest(level[i], level[i + 1]);
            parent.push_back(node);
        }
        level = std::move(parent);
    }
    return tree;
}

InclusionProof MerkleSumTree::prove(std::string_view user_id) const
{
    auto it = position_.find(user_id);
    if (it == position_.end())
        throw Error(Errc::UnknownUser, fmt::format("user {} is not in the tree", user_id));
    InclusionProof proof;
    proof.root = root();
    proof.leaf = leaves_[it->second];
    std::size_t pos = it->second;
    for (std::size_t h = 0; h + 1 < levels_.size(); ++h) {
        const std::size_t sibling = pos ^ 1;
        const auto &node = levels_[h][sibling];
        proof.path.push_back({node.digest, node.sum, sibling < pos ? Side::Left : Side::Right});
        pos /= 2;
    }
    return proof;
}

VerifyResult verify(const MerkleSumNode &root, const InclusionProof &proof)
{
    MerkleSumNode current{leaf_digest(proof.leaf), proof.leaf.balance};
    for (const auto &step : proof.path) {
        const MerkleSumNode sibling{step.digest, step.sum};
        MerkleSumNode parent;
        if (!checked_add(current.sum, sibling.sum, parent.sum))
            return {RejectReason::BadSum};
        parent.digest = step.side == Side::Left ? internal_digest(sibling, current) : internal_digest(current, sibling);
        current = parent;
    }
    if (current.digest != root.digest)
        return {RejectReason::BadDigest};
    if (current.sum != root.sum)
        return {RejectReason::BadSum};
    if (proof.leaf.balance < 0)
        return {RejectReason::NegativeOnPath};
    for (const auto &step : proof.path)
        if (step.sum < 0)
            return {RejectReason::NegativeOnPath};
    return {};
}

// --- JSON -------------------------------------------------------------------

namespace {

ojson node_json(const MerkleSumNode &node)
{
    ojson j;
    j["digest"] = to_hex(node.digest);
    j["sum"] = sum_to_string(node.sum);
    return j;
}

MerkleSumNode node_from(const nlohmann::json &j)
{
    return {digest_from_hex(j.at("digest").get<std::string>()), sum_from_string(j.at("sum").get<std::string>())};
}

ojson leaf_json(const LiabilityLeaf &leaf)
{
    ojson j;
    j["user_id"] = leaf.user_id;
    j["salt"] = to_hex(leaf.salt);
    j["balance"] = sum_to_string(leaf.balance);
    return j;
}

LiabilityLeaf leaf_from(const nlohmann::json &j)
{
    return {j.at("user_id").get<std::string>(), salt_from_hex(j.at("salt").get<std::string>()),
            sum_from_string(j.at("balance").get<std::string>())};
}

template <typename F>
auto parse_json(std::string_view text, F &&f)
{
    try {
        return f(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception &e) {
        throw Error(Errc::MalformedLine, std::string("bad JSON: ") + e.what());
    }
}

} // namespace

std::string proof_to_json(const InclusionProof &proof)
{
    ojson j;
    j["root"] = node_json(proof.root);
    j["leaf"] = leaf_json(proof.leaf);
    ojson path = ojson::array();
    for (const auto &step : proof.path) {
        ojson s;
        s["digest"] = to_hex(step.digest);
        s["sum"] = sum_to_string(step.sum);
        s["side"] = step.side == Side::Left ? "L" : "R";
        path.push_back(std::move(s));
    }
    j["path"] = std::move(path);
    return j.dump(2) + "\n";
}

InclusionProof proof_from_json(std::string_view text)
{
    return parse_json(text, [](const nlohmann::json &j) {
        InclusionProof proof;
        proof.root = node_from(j.at("root"));
        proof.leaf = leaf_from(j.at("leaf"));
        for (const auto &s : j.at("path")) {
            const auto side = s.at("side").get<std::string>();
            if (side != "L" && side != "R")
                throw Error(Errc::MalformedLine, "side must be L or R");
            proof.path.push_back({digest_from_hex(s.at("digest").get<std::string>()),
                                  sum_from_string(s.at("sum").get<std::string>()),
                                  side == "L" ? Side::Left : Side::Right});
        }
        return proof;
    });
}

std::string tree_to_json(const MerkleSumTree &tree)
{
    ojson j;
    j["root"] = node_json(tree.root());
    j["attack_mode"] = tree.attack_mode();
    ojson leaves = ojson::array();
    for (const auto &leaf : tree.leaves())
        leaves.push_back(leaf_json(leaf));
    j["leaves"] = std::move(leaves);
    return j.dump(2) + "\n";
}

MerkleSumTree tree_from_json(std::string_view text)
{
    return parse_json(text, [](const nlohmann::json &j) {
        std::vector<LiabilityLeaf> leaves;
        for (const auto &l : j.at("leaves"))
            leaves.push_back(leaf_from(l));
        MerkleSumTree tree = build_tree(std::move(leaves), j.value("attack_mode", false));
        if (tree.root() != node_from(j.at("root")))
            throw Error(Errc::MalformedLine, "stored root does not match the leaves");
        return tree;
    });
}

std::string root_to_json(const MerkleSumNode &root)
{
    return node_json(root).dump(2) + "\n";
}

MerkleSumNode root_from_json(std::string_view text)
{
    return parse_json(text, [](const nlohmann::json &j) { return node_from(j.contains("root") ? j.at("root") : j); });
}

} // namespace solvaudit::pol

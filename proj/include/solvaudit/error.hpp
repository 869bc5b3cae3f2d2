#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace solvaudit {

// Every recoverable failure in the library carries one of these codes so the
// CLI can map it to an exit status and callers can test for a specific kind.
enum class Errc {
    MalformedLine,
    MalformedRow,
    NegativeValue,
    FeeNegative,
    DuplicateTxid,
    ValueOverflow,
    UnknownAsset,
    ConflictingTag,
    DuplicateKey,
    NonBinaryFeature,
    AddressUnknown,
    ClusterEntityConflict,
    UnknownEntity,
    IntervalZero,
    StalePrice,
    NegativeInput,
    UnsupportedFormat,
    NegativeBalance,
    EmptyLeafSet,
    UnknownUser,
    TooFewRows,
    BadK,
    InvalidConfig,
    EntityMismatch,
    Io,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string &message, std::optional<std::size_t> line = std::nullopt);

    Errc code() const noexcept { return code_; }
    // 1-based input line (header included) for parse errors.
    std::optional<std::size_t> line() const noexcept { return line_; }

private:
    Errc code_;
    std::optional<std::size_t> line_;
};

} // namespace solvaudit

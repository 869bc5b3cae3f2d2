#include "solvaudit/error.hpp"

namespace solvaudit {

std::string_view to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::NegativeValue: return "NegativeValue";
    case Errc::FeeNegative: return "FeeNegative";
    case Errc::DuplicateTxid: return "DuplicateTxid";
    case Errc::ValueOverflow: return "ValueOverflow";
    case Errc::UnknownAsset: return "UnknownAsset";
    case Errc::ConflictingTag: return "ConflictingTag";
    case Errc::DuplicateKey: return "DuplicateKey";
    case Errc::NonBinaryFeature: return "NonBinaryFeature";
    case Errc::AddressUnknown: return "AddressUnknown";
    case Errc::ClusterEntityConflict: return "ClusterEntityConflict";
    case Errc::UnknownEntity: return "UnknownEntity";
    case Errc::IntervalZero: return "IntervalZero";
    case Errc::StalePrice: return "StalePrice";
    case Errc::NegativeInput: return "NegativeInput";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::NegativeBalance: return "NegativeBalance";
    case Errc::EmptyLeafSet: return "EmptyLeafSet";
    case Errc::UnknownUser: return "UnknownUser";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::BadK: return "BadK";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::EntityMismatch: return "EntityMismatch";
    case Errc::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string &message, std::optional<std::size_t> line)
    : std::runtime_error(line ? "line " + std::to_string(*line) + ": " + message : message), code_(code), line_(line)
{
}

} // namespace solvaudit

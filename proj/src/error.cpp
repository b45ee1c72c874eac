#include "tempora/error.hpp"

namespace tempora {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::Schema: return "Schema";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::MissingQuestion: return "MissingQuestion";
    case Errc::EmptyText: return "EmptyText";
    case Errc::Transport: return "Transport";
    case Errc::ProtocolMismatch: return "ProtocolMismatch";
    case Errc::AuthMissing: return "AuthMissing";
    case Errc::Unsupported: return "Unsupported";
    case Errc::Parse: return "Parse";
    case Errc::RobotsDisallowed: return "RobotsDisallowed";
    case Errc::ZeroLength: return "ZeroLength";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::MixedMode: return "MixedMode";
    case Errc::ZeroBase: return "ZeroBase";
    case Errc::InsufficientPoints: return "InsufficientPoints";
    case Errc::NoBaseData: return "NoBaseData";
    case Errc::NonFinite: return "NonFinite";
    case Errc::ZeroSample: return "ZeroSample";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoFailure: return "IoFailure";
    case Errc::Conflict: return "Conflict";
    case Errc::MissingArtifact: return "MissingArtifact";
    case Errc::Config: return "Config";
    }
    return "Unknown";
}

} // namespace tempora

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tempora {

enum class Errc {
    // corpus / event_eval input
    Schema,
    DuplicateId,
    MissingQuestion,
    // model_gateway
    EmptyText,
    Transport,
    ProtocolMismatch,
    AuthMissing,
    Unsupported,
    // collectors
    Parse,
    RobotsDisallowed,
    // metrics / stats / temporal
    ZeroLength,
    EmptyInput,
    MixedMode,
    ZeroBase,
    InsufficientPoints,
    NoBaseData,
    NonFinite,
    ZeroSample,
    LengthMismatch,
    ZeroVariance,
    InvalidArgument,
    // harness
    IoFailure,
    Conflict,
    MissingArtifact,
    Config,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

// Transport failures carry the URL and, when one was received, the HTTP status.
class TransportError : public Error {
public:
    TransportError(std::string url, int status, const std::string& detail)
        : Error(Errc::Transport, url + (status > 0 ? " (HTTP " + std::to_string(status) + ")" : "") +
                                     (detail.empty() ? "" : ": " + detail)),
          url_(std::move(url)), status_(status) {}

    const std::string& url() const noexcept { return url_; }
    int status() const noexcept { return status_; }

private:
    std::string url_;
    int status_;
};

} // namespace tempora

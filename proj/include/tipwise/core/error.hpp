#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tipwise {

enum class ErrorCode {
    InvalidArgument,
    Io,
    NotFound,
    // trajectory log
    OrderViolation,
    Terminal,
    // action grammar
    MissingActionTag,
    MultipleActions,
    UnknownActionName,
    MalformedArguments,
    ParseError,
    DivisionByZero,
    // knowledge base
    Frozen,
    DuplicateId,
    InvalidTip,
    BadPattern,
    // summarizer / operator
    ModelUnavailable,
    BudgetImpossible,
    ParseFailure,
    GroundingFailure,
    // environment
    SessionLost,
    NavigationError,
    Timeout,
    InvalidBid,
    SpecMissing,
    Unrecoverable,
    // model gateway
    RateLimited,
    Protocol,
    CassetteMiss,
    // orchestration / service
    QueueUnavailable,
    ProtocolViolation,
    BindFailure,
    StoreUnavailable,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every recoverable failure in the runtime. `detail`
/// carries machine-oriented context (offending span, digest, validator name).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string detail = {})
        : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace tipwise

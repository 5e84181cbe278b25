#include "tipwise/core/error.hpp"

namespace tipwise {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "Io";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::OrderViolation: return "OrderViolation";
        case ErrorCode::Terminal: return "Terminal";
        case ErrorCode::MissingActionTag: return "MissingActionTag";
        case ErrorCode::MultipleActions: return "MultipleActions";
        case ErrorCode::UnknownActionName: return "UnknownActionName";
        case ErrorCode::MalformedArguments: return "MalformedArguments";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::DivisionByZero: return "DivisionByZero";
        case ErrorCode::Frozen: return "Frozen";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::InvalidTip: return "InvalidTip";
        case ErrorCode::BadPattern: return "BadPattern";
        case ErrorCode::ModelUnavailable: return "ModelUnavailable";
        case ErrorCode::BudgetImpossible: return "BudgetImpossible";
        case ErrorCode::ParseFailure: return "ParseFailure";
        case ErrorCode::GroundingFailure: return "GroundingFailure";
        case ErrorCode::SessionLost: return "SessionLost";
        case ErrorCode::NavigationError: return "NavigationError";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::InvalidBid: return "InvalidBid";
        case ErrorCode::SpecMissing: return "SpecMissing";
        case ErrorCode::Unrecoverable: return "Unrecoverable";
        case ErrorCode::RateLimited: return "RateLimited";
        case ErrorCode::Protocol: return "Protocol";
        case ErrorCode::CassetteMiss: return "CassetteMiss";
        case ErrorCode::QueueUnavailable: return "QueueUnavailable";
        case ErrorCode::ProtocolViolation: return "ProtocolViolation";
        case ErrorCode::BindFailure: return "BindFailure";
        case ErrorCode::StoreUnavailable: return "StoreUnavailable";
    }
    return "Unknown";
}

}  // namespace tipwise

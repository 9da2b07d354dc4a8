#ifndef PAMM_ERRORS_HPP
#define PAMM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pamm {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric argument outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

// Constant outside the admissible interval [a, b].
struct BoundsError : Error {
    using Error::Error;
};

// Curve trade would drain the perishable reserve to zero or below.
struct InsufficientInventoryError : Error {
    using Error::Error;
};

struct NotAnEpochError : Error {
    using Error::Error;
};

struct UnknownProviderError : Error {
    using Error::Error;
};

struct EmptyPoolError : Error {
    using Error::Error;
};

struct MarketClosedError : Error {
    using Error::Error;
};

// Bids are increase-only: withdrawal and price decreases are rejected.
struct LockedOrderError : Error {
    using Error::Error;
};

struct OwnershipError : Error {
    using Error::Error;
};

struct PrematureSnapshotError : Error {
    using Error::Error;
};

struct MembershipError : Error {
    using Error::Error;
};

struct DoubleSettlementError : Error {
    using Error::Error;
};

struct SizeLimitError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct IncompleteTraceError : Error {
    using Error::Error;
};

}  // namespace pamm

#endif

#pragma once

#include <stdexcept>
#include <string>

namespace polysplat {

// Base for all typed errors thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// kernel fitting / root finding
struct FitDiverged : Error { using Error::Error; };
struct NoPositiveRoot : Error { using Error::Error; };

// culling
struct FullyCulled : Error { using Error::Error; };
struct EpsilonZeroUnbounded : Error { using Error::Error; };
struct EmptyBounds : Error { using Error::Error; };

// projection
struct DegenerateCovariance : Error { using Error::Error; };

// npu reformulation
struct WrongOrder : Error { using Error::Error; };

// metrics
struct DimensionMismatch : Error { using Error::Error; };
struct TooSmall : Error { using Error::Error; };

// scene io
struct IoError : Error { using Error::Error; };
struct MalformedHeader : Error { using Error::Error; };
struct UnsupportedFormat : Error { using Error::Error; };
struct MissingProperty : Error { using Error::Error; };
struct TruncatedData : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct NonOrthonormalRotation : Error { using Error::Error; };

} // namespace polysplat

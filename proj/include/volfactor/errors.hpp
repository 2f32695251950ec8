#pragma once

#include <stdexcept>
#include <string>

namespace volfactor {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidCorrelation : Error { using Error::Error; };
struct InvalidExponent : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct DegenerateRoots : Error { using Error::Error; };
struct QuadratureError : Error { using Error::Error; };
struct NegativeBase : Error { using Error::Error; };
struct OutOfDomain : Error { using Error::Error; };
struct StabilityFailure : Error { using Error::Error; };
struct NewtonDivergence : Error { using Error::Error; };
struct NonFiniteUtility : Error { using Error::Error; };
struct BoundDegenerate : Error { using Error::Error; };
struct SingularHessian : Error { using Error::Error; };
struct FullyCorrelatedStocks : Error { using Error::Error; };
struct StepTooSmall : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };

} // namespace volfactor

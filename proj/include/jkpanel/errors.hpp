#pragma once

#include <stdexcept>
#include <string>

namespace jkpanel {

// Base of every error raised by the library. Each subclass corresponds to a
// named failure mode so callers (and the CLI exit-code mapping) can dispatch
// on type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define JKPANEL_DEFINE_ERROR(Name)            \
    class Name : public Error {               \
    public:                                   \
        using Error::Error;                   \
    }

// linalg
JKPANEL_DEFINE_ERROR(SingularMatrix);
JKPANEL_DEFINE_ERROR(NotSymmetric);
JKPANEL_DEFINE_ERROR(InfeasibleConstraints);
JKPANEL_DEFINE_ERROR(DimensionMismatch);

// design
JKPANEL_DEFINE_ERROR(UnsupportedOrder);
JKPANEL_DEFINE_ERROR(IndivisibleAxis);
JKPANEL_DEFINE_ERROR(InvalidDesign);

// weights
JKPANEL_DEFINE_ERROR(RankDeficient);
JKPANEL_DEFINE_ERROR(DegenerateVariance);
JKPANEL_DEFINE_ERROR(InsufficientDirections);

// tdist / inference
JKPANEL_DEFINE_ERROR(DomainError);
JKPANEL_DEFINE_ERROR(ZeroVariance);

// estimators
JKPANEL_DEFINE_ERROR(DegenerateRegressor);
JKPANEL_DEFINE_ERROR(NoConvergence);
JKPANEL_DEFINE_ERROR(Separation);

// io / cli
JKPANEL_DEFINE_ERROR(ParseError);
JKPANEL_DEFINE_ERROR(ShapeMismatch);

#undef JKPANEL_DEFINE_ERROR

// Raised by run_jackknife when the plug-in estimator throws on a subsample.
class EstimatorFailure : public Error {
public:
    EstimatorFailure(std::size_t subsample, const std::string& what)
        : Error("estimator failed on subsample " + std::to_string(subsample) + ": " + what),
          subsample_(subsample) {}

    std::size_t subsample() const noexcept { return subsample_; }

private:
    std::size_t subsample_;
};

}  // namespace jkpanel

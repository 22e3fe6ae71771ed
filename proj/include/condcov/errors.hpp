#pragma once

#include <stdexcept>
#include <string>

namespace condcov {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CONDCOV_DEFINE_ERROR(name)        \
  class name : public Error {             \
   public:                                \
    using Error::Error;                   \
  };

CONDCOV_DEFINE_ERROR(ParseError)          // malformed input file
CONDCOV_DEFINE_ERROR(SchemaError)         // column mapping does not match file
CONDCOV_DEFINE_ERROR(ChannelError)        // a channel is unusable (e.g. all missing)
CONDCOV_DEFINE_ERROR(UpsampleError)       // target period finer than source data
CONDCOV_DEFINE_ERROR(StratificationError) // empty stratum in a split plan
CONDCOV_DEFINE_ERROR(ParameterError)      // out-of-range scalar parameter
CONDCOV_DEFINE_ERROR(ShapeError)          // dimension mismatch between inputs
CONDCOV_DEFINE_ERROR(FitError)            // model fit failed (e.g. rank-deficient design)
CONDCOV_DEFINE_ERROR(ExtrapolationError)  // z outside validity interval, clamping disabled
CONDCOV_DEFINE_ERROR(SparseRegionError)   // kernel weight mass below floor at requested z
CONDCOV_DEFINE_ERROR(DegenerateChannelError)  // zero conditional variance
CONDCOV_DEFINE_ERROR(DegenerateComponentError)  // eigenvalue below floor for requested component
CONDCOV_DEFINE_ERROR(SymmetryError)       // matrix expected symmetric is not
CONDCOV_DEFINE_ERROR(SingularityError)    // covariance not invertible after jitter
CONDCOV_DEFINE_ERROR(TuningError)         // no finite loss for a tuned scalar
CONDCOV_DEFINE_ERROR(NumericError)        // iteration failure in a numeric routine
CONDCOV_DEFINE_ERROR(ConfigError)         // invalid run configuration

#undef CONDCOV_DEFINE_ERROR

}  // namespace condcov

#pragma once

#include <stdexcept>
#include <string>

namespace gridfreq {

// Error taxonomy. The CLI maps the three base classes to exit codes:
// ConfigError -> 2, DataError -> 3, NumericError -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

struct DegenerateEigenvalues : NumericError {
    using NumericError::NumericError;
};
struct NegativeVariance : NumericError {
    using NumericError::NumericError;
};
struct StepTooLarge : NumericError {
    using NumericError::NumericError;
};
struct NonFiniteLoss : NumericError {
    using NumericError::NumericError;
};
struct SingularRegression : NumericError {
    using NumericError::NumericError;
};

struct EmptySeries : DataError {
    using DataError::DataError;
};
struct SeriesTooShort : DataError {
    using DataError::DataError;
};
struct TOutOfRange : DataError {
    using DataError::DataError;
};
struct DimensionMismatch : DataError {
    using DataError::DataError;
};
struct NonPositiveInput : DataError {
    using DataError::DataError;
};
struct ZeroVarianceFeature : DataError {
    using DataError::DataError;
};
struct MissingCounterpart : DataError {
    using DataError::DataError;
};
struct MisalignedIntervals : DataError {
    using DataError::DataError;
};
struct IrregularTimestamps : DataError {
    using DataError::DataError;
};
struct InsufficientData : DataError {
    using DataError::DataError;
};
struct ZeroBenchmark : DataError {
    using DataError::DataError;
};

struct TooManyFeatures : ConfigError {
    using ConfigError::ConfigError;
};

}  // namespace gridfreq

#pragma once

#include <stdexcept>
#include <string>

namespace gbt {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// RK4 integration produced a non-finite state.
class IntegrationDivergedError : public Error {
public:
    using Error::Error;
};

/// Observer and (perturbed) target positions coincide; no bearing exists.
class CoincidentPositionError : public Error {
public:
    using Error::Error;
};

/// Pseudo-linear batch requested from an empty data window.
class EmptyBatchError : public Error {
public:
    using Error::Error;
};

/// Sample pushed into a window violates unit-norm or uniform-spacing rules.
class InvalidSampleError : public Error {
public:
    using Error::Error;
};

/// Cholesky factorization failed even after jitter escalation.
class IllConditionedPriorError : public Error {
public:
    using Error::Error;
};

/// Optimal bearing set requested with fewer than three members.
class DegenerateBearingSetError : public Error {
public:
    using Error::Error;
};

/// Matrix square root requested for a non-PSD matrix.
class MatrixRootError : public Error {
public:
    using Error::Error;
};

/// A trajectory endpoint coincides with a sigma point.
class NearSingularBearingError : public Error {
public:
    using Error::Error;
};

/// Piecewise-polynomial constraint system is singular.
class SplineSolveError : public Error {
public:
    using Error::Error;
};

/// Kalman innovation covariance is not positive.
class FilterDegenerateError : public Error {
public:
    using Error::Error;
};

/// Regression normal equations are rank deficient (parallel bearings).
class DegenerateGeometryError : public Error {
public:
    using Error::Error;
};

/// Configuration file failed to parse or validate.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Filesystem write failed.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace gbt

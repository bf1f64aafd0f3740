// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace qcal {

// Base for every domain error raised by the library. Precondition violations
// use std::invalid_argument directly; everything that can happen on valid
// inputs (bad data, non-convergence, missing dependencies) derives from here
// so callers can catch one type at the pipeline boundary.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input data carries no usable signal (identical points, zero variance).
class DegenerateDataError : public Error {
public:
    using Error::Error;
};

// A fit converged onto a meaningless answer (zero amplitude, f <= 0).
class DegenerateFitError : public Error {
public:
    using Error::Error;
};

// A fit failed to converge after all restarts.
class FitFailedError : public Error {
public:
    using Error::Error;
};

// A sweep's extremum landed on the edge of the scanned bracket.
class BracketFailedError : public Error {
public:
    using Error::Error;
};

// The optimizer could not evaluate its starting point.
class InitFailedError : public Error {
public:
    using Error::Error;
};

// A calibration stage finished but failed its own verification.
class CalibrationFailedError : public Error {
public:
    using Error::Error;
};

// A pipeline stage was invoked before the stage it depends on.
class DependencyError : public Error {
public:
    using Error::Error;
};

// An object was used before being put into the required state
// (e.g. digitizing with an unlabeled mixture model).
class InvalidStateError : public Error {
public:
    using Error::Error;
};

// Filesystem trouble (store not writable, rename failed, ...).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace qcal

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>

// Single source of truth for the calibration-engine tuning constants.
//
// Every constant that parameterizes the autoRabi loss, the CNOT angle
// constraint, and the interleaved-benchmarking infidelity formula is defined
// exactly once, here, and referenced by name everywhere else. The constants
// audit in the acceptance suite scans the library sources to keep it that
// way. Runtime overrides flow through LossConfig (autorabi.hpp), which
// defaults to these values.

namespace qcal::tune {

// Probability half-range: the target for both the fitted Rabi amplitude |A|
// and the offset C of a fully contrasted oscillation, and the divisor that
// scales the BIC sigmoid terms.
inline constexpr double kHalfRange = 0.5;

// Tolerance (divisor) on |A| - kHalfRange in the loss vector.
inline constexpr double kAmpTol = 0.03;

// Tolerance (divisor) on C - kHalfRange in the loss vector.
inline constexpr double kOffsetTol = 0.05;

// Target X(90) duration in ns; the Rabi period is tuned to 4x this.
inline constexpr double kX90TargetNs = 32.0;

// Tolerance (divisor) on T_X90 - kX90TargetNs in the loss vector.
inline constexpr double kX90TolNs = 4.0;

// Attenuation divisor applied to BIC differences before the sigmoid.
inline constexpr double kBicScale = 10.0;

// The logistic squashing used by the BIC loss terms.
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// CNOT correction-angle constraint: theta2 + theta3 must equal this.
inline constexpr double kThetaSumTarget = 2.0 * std::numbers::pi;

// Average-gate-infidelity prefactor (d-1)/d. For d = 4 this is the 3/4 in
// the interleaved-benchmarking gate-infidelity formula
// (d-1)/d * (1 - p_IRB / p_SRB).
inline constexpr double irb_prefactor(int dim) {
    return (static_cast<double>(dim) - 1.0) / static_cast<double>(dim);
}

} // namespace qcal::tune

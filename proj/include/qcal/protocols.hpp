// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qcal/fitters.hpp"
#include "qcal/qmatrix.hpp"
#include "qcal/simdev.hpp"

namespace qcal::proto {

// Calibrated single-qubit X(90) drive amplitudes (control, target).
struct GateCal {
    double x90_amp_q0 = 0.0;
    double x90_amp_q1 = 0.0;
};

struct AmpRange {
    double lo = 0.0;
    double hi = 0.0;
    int points = 0;
};

// ---------------------------------------------------------------------------
// Gate stacking (single-qubit fine tune)

struct StackScan {
    sim::GateKind gate = sim::GateKind::X90;
    int qubit = 0;
    int n_stack = 0;
    std::vector<double> amps;
    std::vector<double> p1;
    fit::SineFit fit;
    double optimum_amp = 0.0;
};

// Repeats the gate n_stack times per amplitude from |0>, measures the
// stacked-identity return probability, and takes the sine-fit minimum.
// X90 needs n_stack % 4 == 0, X180 needs it even.
StackScan stack_scan(const sim::Backend& backend, sim::GateKind gate, int qubit,
                     int n_stack, const AmpRange& amps, int shots, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Cross-resonance sweep

// Target-qubit Bloch vector length difference |R| between control 0 and 1,
// from 6 tomography circuits (X/Y/Z x control state).
double cr_tomography(const sim::Backend& backend, const GateCal& cal, double amp,
                     int n_pulses, int shots, std::uint64_t seed);

struct CrSweepStage {
    int n_pulses = 1;
    std::vector<double> amps;
    std::vector<double> r;
};

struct CrSweep {
    CrSweepStage coarse; // 1 pulse
    CrSweepStage fine;   // 3 pulses
    fit::ParabolaFit parabola;
    double optimal_amp = 0.0; // amplitude of a per-pulse pi/2 ZX rotation
};

// Coarse 1-pulse sweep brackets the |R| maximum; a 3-pulse window around it
// is parabola-fitted, the vertex is the optimum.
CrSweep cr_amplitude_sweep(const sim::Backend& backend, const GateCal& cal,
                           const AmpRange& coarse, double fine_halfwidth,
                           int fine_points, int shots, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Full XY-plane CNOT extraction

struct XyCurve {
    std::vector<double> phi;                // measurement-axis angles
    std::vector<std::array<double, 4>> p;   // p00 p01 p10 p11 per phi
    int shots = 0;
};

// The software-corrected CNOT candidate as a gate sequence: IZ correction,
// CR pulse, target X(-90) + control Z(-90) dressing, ZZ corrections, and the
// residual target X rotation.
sim::Circuit candidate_cnot_ops(const GateCal& cal, double cr_amp,
                                const qm::CnotAngles& angles);

// Measures the four basis-state populations vs measurement axis angle phi:
// X(90) both - candidate CNOT - virtual-Z(phi) both - X(90) both - measure.
XyCurve full_xy_measure(const sim::Backend& backend, const GateCal& cal, double cr_amp,
                        int angles_count, int shots, const qm::CnotAngles& current,
                        std::uint64_t seed);

// Matrix-model prediction of the same curve for a candidate whose deviation
// from CNOT is described by `fitted` (the oracle the fitter matches).
std::array<double, 4> xy_model(const qm::CnotAngles& fitted, double phi);

struct XyFit {
    qm::CnotAngles primary;
    qm::CnotAngles secondary;          // the pi/2-global-phase partner
    std::array<double, 3> std_err{};   // theta1, theta2, theta4
    double chi2_ndf = 0.0;
};

// Per-qubit readout assignment error, estimated from |00> and |11>
// reference circuits. eps0 = P(read 1 | prepared 0), eps1 = P(read 0 | 1).
struct ReadoutMitigation {
    std::array<double, 2> eps0{};
    std::array<double, 2> eps1{};
};

ReadoutMitigation measure_readout_mitigation(const sim::Backend& backend, const GateCal& cal,
                                             int shots, std::uint64_t seed);

// Unfolds assignment error from the measured populations (per-point matrix
// inversion, clamped to the probability simplex).
XyCurve apply_mitigation(const XyCurve& curve, const ReadoutMitigation& mit);

// Least squares of (theta1, theta2, theta4) with theta3 = 2pi - theta2
// eliminated; multi-start search, both degenerate branches returned.
XyFit full_xy_fit(const XyCurve& curve);

// Angle update after a fit: init - fitted, rewrapped so the returned set
// keeps theta2 + theta3 = 2pi and theta4 in the primary window.
qm::CnotAngles updated_angles(const qm::CnotAngles& init, const qm::CnotAngles& fitted);

// Wrap an arbitrary angle set onto the constraint surface / primary branch.
qm::CnotAngles normalize_angles(const qm::CnotAngles& raw);

// ---------------------------------------------------------------------------
// End-to-end CNOT calibration

struct CnotOptions {
    AmpRange coarse{0.3, 2.0, 18};
    double fine_halfwidth = 0.22;
    int fine_points = 19;
    double preset_cr_amp = 0.0; // > 0: skip the sweep, use this amplitude
    int tomo_shots = 2000;
    int xy_angles = 24;
    int xy_shots = 2000;
    int mitigation_shots = 20000;
    double verify_tol = 0.03; // max |wrapped fitted angle| accepted at verify
    std::uint64_t seed = 1;
};

struct CnotCalibration {
    CrSweep sweep;
    ReadoutMitigation mitigation;
    XyCurve first_curve;
    XyFit first_fit;
    qm::CnotAngles corrections; // angles applied to the verified candidate
    XyCurve verify_curve;
    XyFit verify_fit;
    double verify_max_abs = 0.0;
};

// sweep -> measure at zero corrections -> fit -> apply update -> verify.
// Throws CalibrationFailedError when the verification refit stays above
// tolerance.
CnotCalibration calibrate_cnot(const sim::Backend& backend, const GateCal& cal,
                               const CnotOptions& options = {});

} // namespace qcal::proto

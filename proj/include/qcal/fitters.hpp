// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

namespace qcal::fit {

// Per-point standard deviation for a binomial proportion estimate, floored
// so that p = 0 or 1 never produces a zero weight.
double binomial_sigma(double p, int shots);

// Damped oscillation y = C + A exp(-tau t) sin(2 pi f t + phi0).
// Canonical form: A >= 0, phi0 in (-pi, pi], tau >= 0, f > 0.
struct RabiFit {
    double c = 0.0;      // offset C
    double a = 0.0;      // amplitude A
    double tau = 0.0;    // envelope decay, 1/ns
    double f = 0.0;      // frequency, 1/ns
    double phi0 = 0.0;   // phase, rad
    double chi2 = 0.0;
    double chi2_ndf = 0.0;
    int ndf = 0;
    double t_x90 = 0.0;  // 1/(4f), ns
};

// Weighted least squares of the damped-oscillation model. t in ns, p1 the
// measured excited-state fraction, sigma the per-point standard deviation
// (same length as t). Throws DegenerateDataError on constant input,
// DegenerateFitError when the optimum is unphysical (A ~ 0 or f <= 0),
// FitFailedError when no restart converges.
RabiFit fit_rabi(std::span<const double> t, std::span<const double> p1,
                 std::span<const double> sigma);

// X(90) duration implied by a Rabi fit: a quarter oscillation period.
double x90_length(const RabiFit& fit);

// Plain sine y = c + a sin(2 pi f x + phi), canonicalized like RabiFit.
struct SineFit {
    double c = 0.0;
    double a = 0.0;
    double f = 0.0;    // cycles per x-unit
    double phi = 0.0;
    double chi2_ndf = 0.0;
};

SineFit fit_sine(std::span<const double> x, std::span<const double> y,
                 std::span<const double> sigma);

// Location of the fitted curve's minimum/maximum inside [lo, hi]. When the
// window spans several periods the extremum closest to the window center is
// returned. Throws BracketFailedError if no interior extremum exists.
double sine_argmin(const SineFit& fit, double lo, double hi);
double sine_argmax(const SineFit& fit, double lo, double hi);

// y = a0 + a1 x + a2 x^2 by weighted normal equations.
struct ParabolaFit {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
    double vertex_x = 0.0;
    double vertex_y = 0.0;
    double curvature = 0.0; // 2 a2
};

ParabolaFit fit_parabola(std::span<const double> x, std::span<const double> y,
                         std::span<const double> sigma);

// Exponential decay y = A p^m over sequence lengths m.
struct DecayFit {
    double amplitude = 0.0;
    double p = 0.0;
    double amplitude_err = 0.0;
    double p_err = 0.0;
    double chi2_ndf = 0.0;
    bool clamped = false; // true when the raw optimum had p > 1 or A > 1
};

DecayFit fit_decay(std::span<const double> m, std::span<const double> y,
                   std::span<const double> sigma);

} // namespace qcal::fit

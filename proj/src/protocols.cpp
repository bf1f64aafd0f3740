// SPDX-License-Identifier: Apache-2.0
#include "qcal/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "qcal/errors.hpp"
#include "qcal/optimizer.hpp"
#include "qcal/rng.hpp"
#include "qcal/tuning.hpp"

namespace qcal::proto {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_pi(double x) { // (-pi, pi]
    double w = std::fmod(x, kTwoPi);
    if (w <= -kPi) w += kTwoPi;
    if (w > kPi) w -= kTwoPi;
    return w;
}

double wrap_two_pi(double x) { // [0, 2pi)
    double w = std::fmod(x, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    if (w >= kTwoPi) w -= kTwoPi;
    return w;
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i)
        out[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    return out;
}

double marginal_p1(const sim::Counts& counts, int qubit) {
    if (qubit == 0) return counts.fraction("10") + counts.fraction("11");
    return counts.fraction("01") + counts.fraction("11");
}

// puts the fitted set on the constraint surface without branch reselection
qm::CnotAngles wrap_onto_constraint(qm::CnotAngles a) {
    a.theta1 = wrap_pi(a.theta1);
    a.theta2 = wrap_two_pi(a.theta2);
    a.theta3 = tune::kThetaSumTarget - a.theta2;
    a.theta4 = wrap_pi(a.theta4);
    return a;
}

bool in_primary_window(double theta4) {
    return theta4 > -kPi / 2.0 - 1e-12 && theta4 <= kPi / 2.0 + 1e-12;
}

// The same-angle XY projection cannot distinguish a candidate from its
// image under shifting every angle by pi (verified: identical curves), so a
// fit result is only defined up to the four-element group generated by the
// global-phase branch map and that shift. Pick the representative whose
// theta4 and theta1 both sit in the primary window; it is unique away from
// the window edges. Gate-changing: only for interpreting fits, never for
// transforming corrections.
qm::CnotAngles canonical_fit_rep(const qm::CnotAngles& raw) {
    const auto all_pi = [](qm::CnotAngles a) {
        a.theta1 += kPi;
        a.theta2 += kPi;
        a.theta3 -= kPi;
        a.theta4 += kPi;
        return a;
    };
    const std::array<qm::CnotAngles, 4> reps = {
        wrap_onto_constraint(raw), wrap_onto_constraint(qm::other_branch(raw)),
        wrap_onto_constraint(all_pi(raw)),
        wrap_onto_constraint(qm::other_branch(all_pi(raw)))};
    for (const qm::CnotAngles& r : reps)
        if (in_primary_window(r.theta4) && in_primary_window(r.theta1)) return r;
    for (const qm::CnotAngles& r : reps)
        if (in_primary_window(r.theta4)) return r;
    return reps[0];
}

} // namespace

qm::CnotAngles normalize_angles(const qm::CnotAngles& raw) {
    qm::CnotAngles a = wrap_onto_constraint(raw);
    qm::CnotAngles b = wrap_onto_constraint(qm::other_branch(a));
    qm::CnotAngles picked = a;
    const bool a_in = in_primary_window(a.theta4);
    const bool b_in = in_primary_window(b.theta4);
    if (a_in && !b_in) {
        picked = a;
    } else if (b_in && !a_in) {
        picked = b;
    } else {
        // degenerate: both or neither inside; prefer the one whose control
        // phase is small, then the original
        picked = in_primary_window(a.theta1) || !in_primary_window(b.theta1) ? a : b;
    }
    picked.branch = qm::Branch::Primary;
    return picked;
}

qm::CnotAngles updated_angles(const qm::CnotAngles& init, const qm::CnotAngles& fitted) {
    qm::CnotAngles raw;
    raw.theta1 = init.theta1 - fitted.theta1;
    raw.theta2 = init.theta2 - fitted.theta2;
    raw.theta3 = init.theta3 - fitted.theta3;
    raw.theta4 = init.theta4 - fitted.theta4;
    return normalize_angles(raw);
}

// ---------------------------------------------------------------------------

StackScan stack_scan(const sim::Backend& backend, sim::GateKind gate, int qubit,
                     int n_stack, const AmpRange& amps, int shots, std::uint64_t seed) {
    if (gate != sim::GateKind::X90 && gate != sim::GateKind::X180)
        throw std::invalid_argument("stack_scan: gate must be X90 or X180");
    if (gate == sim::GateKind::X90 && n_stack % 4 != 0)
        throw std::invalid_argument("stack_scan: X90 stack count must be a multiple of 4");
    if (gate == sim::GateKind::X180 && n_stack % 2 != 0)
        throw std::invalid_argument("stack_scan: X180 stack count must be even");
    if (n_stack <= 0) throw std::invalid_argument("stack_scan: n_stack must be positive");
    if (amps.points < 5 || !(amps.hi > amps.lo))
        throw std::invalid_argument("stack_scan: need at least 5 points and hi > lo");
    if (shots <= 0) throw std::invalid_argument("stack_scan: shots must be positive");

    StackScan out;
    out.gate = gate;
    out.qubit = qubit;
    out.n_stack = n_stack;
    out.amps = linspace(amps.lo, amps.hi, amps.points);
    out.p1.reserve(out.amps.size());

    rng::Stream root(seed);
    for (std::size_t i = 0; i < out.amps.size(); ++i) {
        sim::Circuit circ;
        for (int k = 0; k < n_stack; ++k) {
            circ.push_back(gate == sim::GateKind::X90 ? sim::x90(qubit, out.amps[i])
                                                      : sim::x180(qubit, out.amps[i]));
        }
        circ.push_back(sim::measure());
        const sim::Counts counts = backend.run_circuit(circ, shots, root.fork(i).key());
        out.p1.push_back(marginal_p1(counts, qubit));
    }

    std::vector<double> sigma(out.p1.size());
    for (std::size_t i = 0; i < out.p1.size(); ++i)
        sigma[i] = fit::binomial_sigma(out.p1[i], shots);

    out.fit = fit::fit_sine(out.amps, out.p1, sigma);
    // a perfectly tuned stack returns to |0>, so the optimum is the minimum
    out.optimum_amp = fit::sine_argmin(out.fit, amps.lo, amps.hi);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

// <X>, <Y>, <Z> of the target after the CR pulse, for one control prep
qm::BlochExpectations target_tomography(const sim::Backend& backend, const GateCal& cal,
                                        double amp, int n_pulses, bool control_one,
                                        int shots, rng::Stream& root, std::size_t base) {
    qm::BlochExpectations e;
    for (int basis = 0; basis < 3; ++basis) { // 0=X 1=Y 2=Z
        sim::Circuit circ;
        if (control_one) circ.push_back(sim::x180(0, cal.x90_amp_q0));
        circ.push_back(sim::cr(amp, n_pulses));
        if (basis == 0) {
            circ.push_back(sim::vz(1, kPi / 2.0));
            circ.push_back(sim::x90(1, cal.x90_amp_q1));
        } else if (basis == 1) {
            circ.push_back(sim::x90(1, cal.x90_amp_q1));
        }
        circ.push_back(sim::measure());
        const sim::Counts counts =
            backend.run_circuit(circ, shots, root.fork(base + basis).key());
        const double expct = 1.0 - 2.0 * marginal_p1(counts, 1);
        if (basis == 0) e.x = expct;
        else if (basis == 1) e.y = expct;
        else e.z = expct;
    }
    return e;
}

} // namespace

double cr_tomography(const sim::Backend& backend, const GateCal& cal, double amp,
                     int n_pulses, int shots, std::uint64_t seed) {
    if (n_pulses <= 0) throw std::invalid_argument("cr_tomography: n_pulses must be positive");
    if (shots <= 0) throw std::invalid_argument("cr_tomography: shots must be positive");
    rng::Stream root(seed);
    const qm::BlochExpectations e0 =
        target_tomography(backend, cal, amp, n_pulses, false, shots, root, 0);
    const qm::BlochExpectations e1 =
        target_tomography(backend, cal, amp, n_pulses, true, shots, root, 3);
    return qm::bloch_r_length(e0, e1);
}

CrSweep cr_amplitude_sweep(const sim::Backend& backend, const GateCal& cal,
                           const AmpRange& coarse, double fine_halfwidth,
                           int fine_points, int shots, std::uint64_t seed) {
    if (coarse.points < 4 || !(coarse.hi > coarse.lo))
        throw std::invalid_argument("cr_amplitude_sweep: bad coarse range");
    if (fine_points < 11 || !(fine_halfwidth > 0.0))
        throw std::invalid_argument("cr_amplitude_sweep: bad fine stage");

    CrSweep out;
    rng::Stream root(seed);

    out.coarse.n_pulses = 1;
    out.coarse.amps = linspace(coarse.lo, coarse.hi, coarse.points);
    for (std::size_t i = 0; i < out.coarse.amps.size(); ++i)
        out.coarse.r.push_back(
            cr_tomography(backend, cal, out.coarse.amps[i], 1, shots, root.fork(100 + i).key()));

    const std::size_t imax = static_cast<std::size_t>(
        std::max_element(out.coarse.r.begin(), out.coarse.r.end()) - out.coarse.r.begin());
    if (imax == 0 || imax + 1 == out.coarse.r.size())
        throw BracketFailedError("cr_amplitude_sweep: no interior maximum in coarse sweep");

    const double center = out.coarse.amps[imax];
    const double lo = center - fine_halfwidth;
    const double hi = center + fine_halfwidth;
    out.fine.n_pulses = 3;
    out.fine.amps = linspace(lo, hi, fine_points);
    for (std::size_t i = 0; i < out.fine.amps.size(); ++i)
        out.fine.r.push_back(
            cr_tomography(backend, cal, out.fine.amps[i], 3, shots, root.fork(200 + i).key()));

    // The coarse grid only centers the window to within a step or two, so
    // re-center on the fine arg-max (triple pulses make the peak much
    // sharper) and fit the parabola to the points near it, where the curve
    // is actually quadratic.
    const std::size_t jmax = static_cast<std::size_t>(
        std::max_element(out.fine.r.begin(), out.fine.r.end()) - out.fine.r.begin());
    const double sub_half = 0.45 * fine_halfwidth;
    std::vector<double> sub_a, sub_r;
    for (std::size_t i = 0; i < out.fine.amps.size(); ++i) {
        if (std::abs(out.fine.amps[i] - out.fine.amps[jmax]) <= sub_half + 1e-12) {
            sub_a.push_back(out.fine.amps[i]);
            sub_r.push_back(out.fine.r[i]);
        }
    }
    const std::vector<double> sigma(sub_r.size(), 1.0);
    out.parabola = fit::fit_parabola(sub_a, sub_r, sigma);
    if (!(out.parabola.curvature < 0.0))
        throw BracketFailedError("cr_amplitude_sweep: fine stage is not concave");
    if (out.parabola.vertex_x < lo || out.parabola.vertex_x > hi)
        throw BracketFailedError("cr_amplitude_sweep: fine vertex left the window");
    out.optimal_amp = out.parabola.vertex_x;
    return out;
}

// ---------------------------------------------------------------------------

sim::Circuit candidate_cnot_ops(const GateCal& cal, double cr_amp,
                                const qm::CnotAngles& angles) {
    sim::Circuit circ;
    circ.push_back(sim::vz(1, angles.theta3)); // IZ correction precedes the pulse
    circ.push_back(sim::cr(cr_amp, 1));
    // target X(-90): frame-shifted pi/2 pulse
    circ.push_back(sim::vz(1, -kPi));
    circ.push_back(sim::x90(1, cal.x90_amp_q1));
    circ.push_back(sim::vz(1, kPi));
    // control dressing
    circ.push_back(sim::vz(0, -kPi / 2.0));
    // ZZ corrections
    circ.push_back(sim::vz(0, angles.theta1));
    circ.push_back(sim::vz(1, angles.theta2));
    // residual target X rotation by theta4 as Z-X90-Z-X90-Z
    circ.push_back(sim::vz(1, -kPi / 2.0));
    circ.push_back(sim::x90(1, cal.x90_amp_q1));
    circ.push_back(sim::vz(1, kPi - angles.theta4));
    circ.push_back(sim::x90(1, cal.x90_amp_q1));
    circ.push_back(sim::vz(1, -kPi / 2.0));
    return circ;
}

XyCurve full_xy_measure(const sim::Backend& backend, const GateCal& cal, double cr_amp,
                        int angles_count, int shots, const qm::CnotAngles& current,
                        std::uint64_t seed) {
    if (angles_count < 12)
        throw std::invalid_argument("full_xy_measure: need at least 12 axis angles");
    if (shots <= 0) throw std::invalid_argument("full_xy_measure: shots must be positive");

    XyCurve curve;
    curve.shots = shots;
    const sim::Circuit cnot_ops = candidate_cnot_ops(cal, cr_amp, current);
    rng::Stream root(seed);
    for (int k = 0; k < angles_count; ++k) {
        const double phi = kTwoPi * static_cast<double>(k) / angles_count;
        sim::Circuit circ;
        circ.push_back(sim::x90(0, cal.x90_amp_q0));
        circ.push_back(sim::x90(1, cal.x90_amp_q1));
        circ.insert(circ.end(), cnot_ops.begin(), cnot_ops.end());
        circ.push_back(sim::vz(0, phi));
        circ.push_back(sim::vz(1, phi));
        circ.push_back(sim::x90(0, cal.x90_amp_q0));
        circ.push_back(sim::x90(1, cal.x90_amp_q1));
        circ.push_back(sim::measure());
        const sim::Counts counts = backend.run_circuit(circ, shots, root.fork(k).key());
        curve.phi.push_back(phi);
        curve.p.push_back({counts.fraction("00"), counts.fraction("01"),
                           counts.fraction("10"), counts.fraction("11")});
    }
    return curve;
}

std::array<double, 4> xy_model(const qm::CnotAngles& fitted, double phi) {
    const qm::Unitary x90s = qm::tensor(qm::rot_x(kPi / 2.0), qm::rot_x(kPi / 2.0));
    const qm::Unitary zphi = qm::tensor(qm::rot_z(phi), qm::rot_z(phi));
    const qm::Unitary u = x90s * zphi * qm::cr_from_cnot(fitted) * x90s;
    const qm::PureState s = qm::PureState::ground(4).apply(u);
    return s.probabilities();
}

XyFit full_xy_fit(const XyCurve& curve) {
    const std::size_t n = curve.phi.size();
    if (n < 12 || curve.p.size() != n)
        throw std::invalid_argument("full_xy_fit: need at least 12 curve points");

    std::vector<std::array<double, 4>> sigma(n);
    for (std::size_t i = 0; i < n; ++i)
        for (int b = 0; b < 4; ++b)
            sigma[i][b] = fit::binomial_sigma(curve.p[i][b],
                                              curve.shots > 0 ? curve.shots : 1000000);

    auto chi2 = [&](std::span<const double> x) {
        qm::CnotAngles a;
        a.theta1 = x[0];
        a.theta2 = x[1];
        a.theta3 = tune::kThetaSumTarget - x[1];
        a.theta4 = x[2];
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::array<double, 4> model = xy_model(a, curve.phi[i]);
            for (int b = 0; b < 4; ++b) {
                const double r = (model[b] - curve.p[i][b]) / sigma[i][b];
                acc += r * r;
            }
        }
        return acc;
    };

    opt::OptProblem prob;
    prob.objective = chi2;
    prob.lower = {-kPi - 1.0, -1.0, -kPi - 1.0};
    prob.upper = {kPi + 1.0, kTwoPi + 1.0, kPi + 1.0};
    prob.step = {0.4, 0.4, 0.4};
    prob.max_evals = 500;
    prob.f_tol = 1e-12;
    prob.x_tol = 1e-9;

    double best_f = std::numeric_limits<double>::infinity();
    std::vector<double> best_x;
    for (const double t1 : {-kPi / 2.0, kPi / 2.0})
        for (const double t2 : {kPi / 2.0, 3.0 * kPi / 2.0})
            for (const double t4 : {-kPi / 4.0, kPi / 4.0}) {
                prob.x0 = {t1, t2, t4};
                const opt::OptTrace trace = opt::minimize(prob);
                if (trace.best_f < best_f) {
                    best_f = trace.best_f;
                    best_x = trace.best_x;
                }
            }

    const double ndf = static_cast<double>(3 * n) - 3.0;
    XyFit out;
    out.chi2_ndf = best_f / ndf;
    if (!(out.chi2_ndf < 25.0)) {
        std::ostringstream msg;
        msg << "full_xy_fit: residual chi2/ndf " << out.chi2_ndf
            << " above threshold after multi-start";
        throw FitFailedError(msg.str());
    }

    // standard errors from a finite-difference Hessian of chi2
    const double h = 1e-4;
    double hess[3][3];
    const double f0 = chi2(best_x);
    for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
            std::vector<double> xpp = best_x, xpm = best_x, xmp = best_x, xmm = best_x;
            xpp[i] += h; xpp[j] += h;
            xpm[i] += h; xpm[j] -= h;
            xmp[i] -= h; xmp[j] += h;
            xmm[i] -= h; xmm[j] -= h;
            if (i == j) {
                std::vector<double> xp = best_x, xm = best_x;
                xp[i] += h;
                xm[i] -= h;
                hess[i][i] = (chi2(xp) - 2.0 * f0 + chi2(xm)) / (h * h);
            } else {
                hess[i][j] = hess[j][i] =
                    (chi2(xpp) - chi2(xpm) - chi2(xmp) + chi2(xmm)) / (4.0 * h * h);
            }
        }
    }
    // invert 3x3 via adjugate; cov = 2 * H^-1
    const double det = hess[0][0] * (hess[1][1] * hess[2][2] - hess[1][2] * hess[2][1]) -
                       hess[0][1] * (hess[1][0] * hess[2][2] - hess[1][2] * hess[2][0]) +
                       hess[0][2] * (hess[1][0] * hess[2][1] - hess[1][1] * hess[2][0]);
    for (int i = 0; i < 3; ++i) out.std_err[i] = 1e3; // pessimistic fallback
    if (std::abs(det) > 1e-12) {
        const double inv00 = (hess[1][1] * hess[2][2] - hess[1][2] * hess[2][1]) / det;
        const double inv11 = (hess[0][0] * hess[2][2] - hess[0][2] * hess[2][0]) / det;
        const double inv22 = (hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0]) / det;
        if (inv00 > 0.0) out.std_err[0] = std::sqrt(2.0 * inv00);
        if (inv11 > 0.0) out.std_err[1] = std::sqrt(2.0 * inv11);
        if (inv22 > 0.0) out.std_err[2] = std::sqrt(2.0 * inv22);
    }

    qm::CnotAngles fitted;
    fitted.theta1 = best_x[0];
    fitted.theta2 = best_x[1];
    fitted.theta3 = tune::kThetaSumTarget - best_x[1];
    fitted.theta4 = best_x[2];
    out.primary = canonical_fit_rep(fitted);
    out.primary.branch = qm::Branch::Primary;
    out.secondary = wrap_onto_constraint(qm::other_branch(out.primary));
    out.secondary.branch = qm::Branch::PhasePiHalf;
    return out;
}

// ---------------------------------------------------------------------------

ReadoutMitigation measure_readout_mitigation(const sim::Backend& backend, const GateCal& cal,
                                             int shots, std::uint64_t seed) {
    if (shots <= 0)
        throw std::invalid_argument("measure_readout_mitigation: shots must be positive");
    rng::Stream root(seed);
    ReadoutMitigation mit;

    sim::Circuit ground{sim::measure()};
    const sim::Counts c0 = backend.run_circuit(ground, shots, root.fork(0).key());
    mit.eps0[0] = marginal_p1(c0, 0);
    mit.eps0[1] = marginal_p1(c0, 1);

    sim::Circuit excited{sim::x180(0, cal.x90_amp_q0), sim::x180(1, cal.x90_amp_q1),
                         sim::measure()};
    const sim::Counts c1 = backend.run_circuit(excited, shots, root.fork(1).key());
    mit.eps1[0] = 1.0 - marginal_p1(c1, 0);
    mit.eps1[1] = 1.0 - marginal_p1(c1, 1);
    return mit;
}

XyCurve apply_mitigation(const XyCurve& curve, const ReadoutMitigation& mit) {
    // inverse of the per-qubit confusion matrix [[1-e0, e1], [e0, 1-e1]]
    std::array<std::array<double, 4>, 2> inv; // row-major 2x2 per qubit
    for (int q = 0; q < 2; ++q) {
        const double det = 1.0 - mit.eps0[q] - mit.eps1[q];
        if (det <= 0.1)
            throw DegenerateDataError("apply_mitigation: assignment matrix near singular");
        inv[q] = {(1.0 - mit.eps1[q]) / det, -mit.eps1[q] / det,
                  -mit.eps0[q] / det, (1.0 - mit.eps0[q]) / det};
    }
    XyCurve out = curve;
    for (std::size_t i = 0; i < curve.p.size(); ++i) {
        std::array<double, 4> v{};
        for (int m = 0; m < 4; ++m) {
            for (int t = 0; t < 4; ++t) {
                const double w =
                    inv[0][2 * (t / 2) + (m / 2)] * inv[1][2 * (t % 2) + (m % 2)];
                v[t] += w * curve.p[i][m];
            }
        }
        double total = 0.0;
        for (double& x : v) total += (x = x < 0.0 ? 0.0 : x);
        for (double& x : v) x /= total;
        out.p[i] = v;
    }
    return out;
}

CnotCalibration calibrate_cnot(const sim::Backend& backend, const GateCal& cal,
                               const CnotOptions& options) {
    rng::Stream root(options.seed);
    CnotCalibration out;
    if (options.preset_cr_amp > 0.0) {
        out.sweep.optimal_amp = options.preset_cr_amp;
    } else {
        out.sweep = cr_amplitude_sweep(backend, cal, options.coarse, options.fine_halfwidth,
                                       options.fine_points, options.tomo_shots,
                                       root.fork(1).key());
    }

    out.mitigation =
        measure_readout_mitigation(backend, cal, options.mitigation_shots, root.fork(4).key());

    const qm::CnotAngles init = qm::CnotAngles::zero();
    out.first_curve = full_xy_measure(backend, cal, out.sweep.optimal_amp, options.xy_angles,
                                      options.xy_shots, init, root.fork(2).key());
    out.first_fit = full_xy_fit(apply_mitigation(out.first_curve, out.mitigation));
    out.corrections = updated_angles(init, out.first_fit.primary);

    out.verify_curve = full_xy_measure(backend, cal, out.sweep.optimal_amp, options.xy_angles,
                                       options.xy_shots, out.corrections, root.fork(3).key());
    out.verify_fit = full_xy_fit(apply_mitigation(out.verify_curve, out.mitigation));

    const qm::CnotAngles& v = out.verify_fit.primary;
    out.verify_max_abs = std::max({std::abs(wrap_pi(v.theta1)), std::abs(wrap_pi(v.theta2)),
                                   std::abs(wrap_pi(v.theta4))});
    if (out.verify_max_abs > options.verify_tol) {
        std::ostringstream msg;
        msg << "calibrate_cnot: verification refit residual " << out.verify_max_abs
            << " rad exceeds tolerance " << options.verify_tol;
        throw CalibrationFailedError(msg.str());
    }
    return out;
}

} // namespace qcal::proto

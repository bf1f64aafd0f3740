// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qcal/iq.hpp"

namespace qcal::sim {

// Hidden ground truth for one qubit + its readout resonator, plus the
// two-qubit cross-resonance parameters (stored on the control qubit).
struct DeviceTruth {
    double f_q_true = 5.1;              // GHz
    double f_r_true = 6.45;             // GHz
    double rabi_rate = 18.73;           // MHz per unit drive amplitude
    double tau_decay = 0.0004;          // 1/ns, envelope decay at zero detuning
    double decay_detune = 0.04;         // 1/(ns MHz^2), extra envelope decay per detuning^2
    double resonator_linewidth = 1.2;   // MHz
    IQPoint iq_center_0{0.0, 0.0};
    IQPoint iq_center_1{10.0, 0.0};
    IQPoint iq_center_2{5.0, 7.5};
    double iq_sigma = 1.25;
    double leak_amp_threshold = 0.55;   // unit amplitude
    double leak_rate = 1.2;             // dimensionless
    double readout_floor = 0.015;       // residual assignment error
    double drive_nonlin = 0.03;         // pulsed-gate amplitude nonlinearity
    double pulse_len_ns = 32.0;         // physical length of one shaped drive pulse
    double edge_deficit_ns = 0.8;       // effective drive-time loss of a shaped pulse
    double cr_zx_rate = 1.2;            // rad per unit amplitude per pulse
    std::array<double, 4> cr_spurious{0.0, 0.0, 0.0, 0.0}; // hidden true theta1..4

    void validate() const; // throws std::invalid_argument on bad ranges

    // Amplitude at which a single 32 ns pulse rotates by exactly pi/2
    // (test/oracle helper; the calibration path must find this itself).
    double x90_amp_truth() const;

    static DeviceTruth from_json_text(const std::string& text);
    std::string to_json_text() const;
};

// Operating point chosen by calibration: drive/readout frequencies, scan
// drive amplitude, and the fixed readout amplitude.
struct QubitBias {
    double f_q = 0.0;        // GHz
    double f_r = 0.0;        // GHz
    double a_r = 0.0;        // unit drive amplitude in [0, 1]
    double readout_amp = 0.8; // unit amplitude, fixed per run config

    void validate() const;
};

// One Rabi scan: `shots` IQ points per requested width on one qubit.
struct ShotBatch {
    int qubit = 0;
    std::vector<double> widths_ns;
    std::vector<std::vector<IQPoint>> iq; // iq[w][shot]
    int shots = 0;
    QubitBias bias;
    std::uint64_t seed = 0;
};

enum class GateKind { X90, X180, VZ, CR, Measure };

struct Gate {
    GateKind kind = GateKind::X90;
    int qubit = 0;      // X90 / X180 / VZ target
    double angle = 0.0; // VZ rotation
    double amp = 0.0;   // X90 / X180 / CR drive amplitude
    int n_pulses = 1;   // CR pulse count
};

using Circuit = std::vector<Gate>;

Gate x90(int qubit, double amp);
Gate x180(int qubit, double amp);
Gate vz(int qubit, double angle);
Gate cr(double amp, int n_pulses = 1);
Gate measure();

// Joint outcome histogram, keys "00".."11" (control qubit first).
struct Counts {
    std::map<std::string, int> counts;
    int shots = 0;

    double fraction(const std::string& key) const;
};

// Two-qubit simulated device. Qubit 0 is the CR control, qubit 1 the target.
// Calibration code must only call scan/circuit entry points; the truth is
// reachable only through the _for_test hooks and the constructor/config.
class Backend {
  public:
    Backend(); // default truths, qubit 1 detuned from qubit 0
    Backend(DeviceTruth q0, DeviceTruth q1);

    static Backend from_json_text(const std::string& text);
    static Backend from_json_file(const std::string& path);

    // Operating bias used by run_circuit readout; rabi_scan takes its own.
    void set_bias(int qubit, const QubitBias& bias);
    const QubitBias& bias(int qubit) const;

    ShotBatch rabi_scan(int qubit, const QubitBias& bias,
                        std::span<const double> widths_ns, int shots,
                        std::uint64_t seed) const;

    Counts run_circuit(const Circuit& circuit, int shots, std::uint64_t seed) const;

    const DeviceTruth& truth_for_test(int qubit) const;
    void set_truth_for_test(int qubit, const DeviceTruth& truth);

  private:
    std::array<DeviceTruth, 2> truth_;
    std::array<QubitBias, 2> bias_;

    double assignment_error(int qubit) const;
};

// Analytic pre-readout excited population of the scan model (exposed so
// tests can check sampled data against the closed form).
double rabi_population(const DeviceTruth& truth, const QubitBias& bias, double width_ns);

// Resonator contrast factor: Lorentzian response at the chosen readout
// frequency times the fixed readout amplitude.
double readout_contrast(const DeviceTruth& truth, const QubitBias& bias);

} // namespace qcal::sim

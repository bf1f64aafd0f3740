// SPDX-License-Identifier: Apache-2.0
#include "qcal/simdev.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "qcal/errors.hpp"
#include "qcal/qmatrix.hpp"
#include "qcal/rng.hpp"

namespace qcal::sim {

using qm::build_correction;
using qm::cnot_dressing;
using qm::CorrectionKind;
using qm::PureState;
using qm::rot_x;
using qm::rot_z;
using qm::Unitary;
using qm::zx_rotation;

namespace {

double gauss_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// Rotation angle of one shaped drive pulse at the given amplitude.
double pulse_angle(const DeviceTruth& t, double amp) {
    const double eff_len = t.pulse_len_ns - t.edge_deficit_ns;
    return 2.0 * std::numbers::pi * (t.rabi_rate * 1e-3) * amp *
           (1.0 - t.drive_nonlin * amp * amp) * eff_len;
}

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

} // namespace

void DeviceTruth::validate() const {
    require(f_q_true > 0 && f_r_true > 0, "truth frequencies must be positive");
    require(rabi_rate > 0, "rabi_rate must be positive");
    require(tau_decay >= 0 && decay_detune >= 0, "decay rates must be non-negative");
    require(resonator_linewidth > 0, "resonator_linewidth must be positive");
    require(iq_sigma > 0, "iq_sigma must be positive");
    require(leak_amp_threshold > 0 && leak_amp_threshold <= 1,
            "leak_amp_threshold must be in (0, 1]");
    require(leak_rate >= 0, "leak_rate must be non-negative");
    require(readout_floor >= 0 && readout_floor <= 0.2,
            "readout_floor must be in [0, 0.2]");
    require(cr_zx_rate > 0, "cr_zx_rate must be positive");
    require(pulse_len_ns > 0, "pulse_len_ns must be positive");
    require(edge_deficit_ns >= 0 && edge_deficit_ns < pulse_len_ns,
            "edge_deficit_ns must be shorter than the pulse");
    require(drive_nonlin >= 0 && drive_nonlin < 0.5, "drive_nonlin must be in [0, 0.5)");
}

double DeviceTruth::x90_amp_truth() const {
    // pulse_angle is monotone on [0, 2] for the allowed nonlinearity range
    double lo = 0.0, hi = 2.0;
    const double target = std::numbers::pi / 2.0;
    if (pulse_angle(*this, hi) < target)
        throw std::invalid_argument("x90_amp_truth: pi/2 unreachable below amp 2");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (pulse_angle(*this, mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

void QubitBias::validate() const {
    require(f_q > 0 && f_r > 0, "bias frequencies must be positive");
    require(a_r >= 0 && a_r <= 1, "a_r must be in [0, 1]");
    require(readout_amp > 0 && readout_amp <= 1, "readout_amp must be in (0, 1]");
}

Gate x90(int qubit, double amp) { return Gate{GateKind::X90, qubit, 0.0, amp, 1}; }
Gate x180(int qubit, double amp) { return Gate{GateKind::X180, qubit, 0.0, amp, 1}; }
Gate vz(int qubit, double angle) { return Gate{GateKind::VZ, qubit, angle, 0.0, 1}; }
Gate cr(double amp, int n_pulses) { return Gate{GateKind::CR, 0, 0.0, amp, n_pulses}; }
Gate measure() { return Gate{GateKind::Measure, 0, 0.0, 0.0, 1}; }

double Counts::fraction(const std::string& key) const {
    const auto it = counts.find(key);
    if (it == counts.end()) return 0.0;
    return shots > 0 ? static_cast<double>(it->second) / shots : 0.0;
}

double rabi_population(const DeviceTruth& truth, const QubitBias& bias, double width_ns) {
    const double omega = truth.rabi_rate * bias.a_r;                  // MHz
    const double delta = (bias.f_q - truth.f_q_true) * 1e3;           // MHz
    const double omega_p = std::hypot(omega, delta);                  // MHz
    if (omega_p == 0.0) return 0.0;
    const double tau_eff = truth.tau_decay + truth.decay_detune * delta * delta;
    const double phase = 2.0 * std::numbers::pi * omega_p * 1e-3 * width_ns;
    const double frac = (omega * omega) / (omega_p * omega_p);
    return frac * 0.5 * (1.0 - std::cos(phase)) * std::exp(-tau_eff * width_ns);
}

double readout_contrast(const DeviceTruth& truth, const QubitBias& bias) {
    const double x = (bias.f_r - truth.f_r_true) * 1e3 / truth.resonator_linewidth;
    return bias.readout_amp / (1.0 + x * x);
}

Backend::Backend() : Backend(DeviceTruth{}, DeviceTruth{}) {
    truth_[0].cr_spurious = {0.3, 0.7, 2.0 * std::numbers::pi - 0.7, -0.2};
    truth_[1].f_q_true = 5.27;
    truth_[1].f_r_true = 6.61;
    truth_[1].rabi_rate = 17.9;
    for (int q = 0; q < 2; ++q) {
        bias_[static_cast<size_t>(q)].f_q = truth_[static_cast<size_t>(q)].f_q_true;
        bias_[static_cast<size_t>(q)].f_r = truth_[static_cast<size_t>(q)].f_r_true;
        bias_[static_cast<size_t>(q)].a_r = 0.4;
    }
}

Backend::Backend(DeviceTruth q0, DeviceTruth q1) : truth_{q0, q1} {
    truth_[0].validate();
    truth_[1].validate();
    // device powers up with an on-resonance operating point; calibration
    // replaces it through set_bias
    for (int q = 0; q < 2; ++q) {
        bias_[static_cast<size_t>(q)].f_q = truth_[static_cast<size_t>(q)].f_q_true;
        bias_[static_cast<size_t>(q)].f_r = truth_[static_cast<size_t>(q)].f_r_true;
        bias_[static_cast<size_t>(q)].a_r = 0.4;
    }
}

void Backend::set_bias(int qubit, const QubitBias& bias) {
    require(qubit == 0 || qubit == 1, "qubit index must be 0 or 1");
    bias.validate();
    bias_[static_cast<size_t>(qubit)] = bias;
}

const QubitBias& Backend::bias(int qubit) const {
    require(qubit == 0 || qubit == 1, "qubit index must be 0 or 1");
    return bias_[static_cast<size_t>(qubit)];
}

const DeviceTruth& Backend::truth_for_test(int qubit) const {
    require(qubit == 0 || qubit == 1, "qubit index must be 0 or 1");
    return truth_[static_cast<size_t>(qubit)];
}

void Backend::set_truth_for_test(int qubit, const DeviceTruth& truth) {
    require(qubit == 0 || qubit == 1, "qubit index must be 0 or 1");
    truth.validate();
    truth_[static_cast<size_t>(qubit)] = truth;
}

double Backend::assignment_error(int qubit) const {
    const DeviceTruth& t = truth_[static_cast<size_t>(qubit)];
    const QubitBias& b = bias_[static_cast<size_t>(qubit)];
    const double dx = t.iq_center_1.i - t.iq_center_0.i;
    const double dy = t.iq_center_1.q - t.iq_center_0.q;
    const double sep = std::hypot(dx, dy) * readout_contrast(t, b);
    const double overlap = gauss_tail(sep / (2.0 * t.iq_sigma));
    return std::clamp(t.readout_floor + overlap, 0.0, 0.5);
}

ShotBatch Backend::rabi_scan(int qubit, const QubitBias& bias,
                             std::span<const double> widths_ns, int shots,
                             std::uint64_t seed) const {
    require(qubit == 0 || qubit == 1, "qubit index must be 0 or 1");
    bias.validate();
    require(shots >= 1, "shots must be >= 1");
    require(!widths_ns.empty(), "need at least one width");
    for (double w : widths_ns) {
        require(w >= 0.0, "widths must be non-negative");
        const double r = std::fmod(w, 4.0);
        require(std::min(r, 4.0 - r) < 1e-9, "widths must be multiples of 4 ns");
    }

    const DeviceTruth& t = truth_[static_cast<size_t>(qubit)];
    const double contrast = readout_contrast(t, bias);
    const double over = t.leak_amp_threshold;
    const double p_leak =
        std::min(t.leak_rate * std::pow(std::max(0.0, bias.a_r - over), 2), 0.9);

    const double mid_i = 0.5 * (t.iq_center_0.i + t.iq_center_1.i);
    const double mid_q = 0.5 * (t.iq_center_0.q + t.iq_center_1.q);
    const IQPoint centers[3] = {t.iq_center_0, t.iq_center_1, t.iq_center_2};

    ShotBatch batch;
    batch.qubit = qubit;
    batch.widths_ns.assign(widths_ns.begin(), widths_ns.end());
    batch.shots = shots;
    batch.bias = bias;
    batch.seed = seed;
    batch.iq.resize(widths_ns.size());

    rng::Stream root(seed);
    for (size_t w = 0; w < widths_ns.size(); ++w) {
        const double p1 = rabi_population(t, bias, widths_ns[w]);
        auto& pts = batch.iq[w];
        pts.resize(static_cast<size_t>(shots));
        const rng::Stream wstream = root.fork(static_cast<std::uint64_t>(w));
        for (int s = 0; s < shots; ++s) {
            const rng::Stream ss = wstream.fork(static_cast<std::uint64_t>(s));
            int state;
            if (ss.uniform(0) < p_leak) {
                state = 2;
            } else {
                state = ss.uniform(1) < p1 ? 1 : 0;
                if (ss.uniform(2) < t.readout_floor) state ^= 1;
            }
            double n1, n2;
            ss.normal_pair(3, n1, n2);
            const IQPoint& c = centers[state];
            pts[static_cast<size_t>(s)] = {
                mid_i + (c.i - mid_i) * contrast + t.iq_sigma * n1,
                mid_q + (c.q - mid_q) * contrast + t.iq_sigma * n2};
        }
    }
    return batch;
}

Counts Backend::run_circuit(const Circuit& circuit, int shots, std::uint64_t seed) const {
    require(shots >= 1, "shots must be >= 1");

    PureState state = PureState::ground(4);
    for (size_t g = 0; g < circuit.size(); ++g) {
        const Gate& gate = circuit[g];
        switch (gate.kind) {
        case GateKind::X90:
        case GateKind::X180: {
            require(gate.qubit == 0 || gate.qubit == 1, "gate qubit must be 0 or 1");
            const DeviceTruth& t = truth_[static_cast<size_t>(gate.qubit)];
            double theta = pulse_angle(t, gate.amp);
            if (gate.kind == GateKind::X180) theta *= 2.0; // two stacked pulses
            state = state.apply_single(rot_x(theta), gate.qubit);
            break;
        }
        case GateKind::VZ:
            require(gate.qubit == 0 || gate.qubit == 1, "gate qubit must be 0 or 1");
            state = state.apply_single(rot_z(gate.angle), gate.qubit);
            break;
        case GateKind::CR: {
            require(gate.n_pulses >= 1, "CR needs n_pulses >= 1");
            const DeviceTruth& t = truth_[0];
            const double theta_zx = t.cr_zx_rate * gate.amp * gate.n_pulses;
            const Unitary dress = cnot_dressing();
            const double zz[2] = {t.cr_spurious[0], t.cr_spurious[1]};
            const double ix[1] = {t.cr_spurious[3]};
            const double iz[1] = {t.cr_spurious[2]};
            const Unitary u = dress.dagger() * build_correction(CorrectionKind::ZZ, zz) *
                              build_correction(CorrectionKind::IX, ix) * dress *
                              zx_rotation(theta_zx) * build_correction(CorrectionKind::IZ, iz);
            state = state.apply(u);
            break;
        }
        case GateKind::Measure:
            require(g + 1 == circuit.size(), "measure must be the last gate");
            break;
        }
    }

    const auto probs = state.probabilities();
    double cdf[4];
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
        acc += probs[static_cast<size_t>(i)];
        cdf[i] = acc;
    }
    cdf[3] = 1.0; // guard against rounding

    const double eps0 = assignment_error(0);
    const double eps1 = assignment_error(1);

    Counts out;
    out.shots = shots;
    rng::Stream root(seed);
    for (int s = 0; s < shots; ++s) {
        const rng::Stream ss = root.fork(static_cast<std::uint64_t>(s));
        const double u = ss.uniform(0);
        int outcome = 0;
        while (outcome < 3 && u >= cdf[outcome]) ++outcome;
        int b0 = (outcome >> 1) & 1;
        int b1 = outcome & 1;
        if (ss.uniform(1) < eps0) b0 ^= 1;
        if (ss.uniform(2) < eps1) b1 ^= 1;
        std::string key{static_cast<char>('0' + b0), static_cast<char>('0' + b1)};
        ++out.counts[key];
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON plumbing

namespace {

using nlohmann::json;

DeviceTruth truth_from_json(const json& j) {
    DeviceTruth t;
    auto get = [&](const char* key, double& into) {
        if (j.contains(key)) into = j.at(key).get<double>();
    };
    get("f_q_true", t.f_q_true);
    get("f_r_true", t.f_r_true);
    get("rabi_rate", t.rabi_rate);
    get("tau_decay", t.tau_decay);
    get("decay_detune", t.decay_detune);
    get("resonator_linewidth", t.resonator_linewidth);
    get("iq_sigma", t.iq_sigma);
    get("leak_amp_threshold", t.leak_amp_threshold);
    get("leak_rate", t.leak_rate);
    get("readout_floor", t.readout_floor);
    get("drive_nonlin", t.drive_nonlin);
    get("pulse_len_ns", t.pulse_len_ns);
    get("edge_deficit_ns", t.edge_deficit_ns);
    get("cr_zx_rate", t.cr_zx_rate);
    auto get_pt = [&](const char* key, IQPoint& into) {
        if (j.contains(key)) {
            const auto& a = j.at(key);
            into = {a.at(0).get<double>(), a.at(1).get<double>()};
        }
    };
    get_pt("iq_center_0", t.iq_center_0);
    get_pt("iq_center_1", t.iq_center_1);
    get_pt("iq_center_2", t.iq_center_2);
    if (j.contains("cr_spurious")) {
        const auto& a = j.at("cr_spurious");
        if (a.size() != 4)
            throw std::invalid_argument("cr_spurious must have 4 entries");
        for (int i = 0; i < 4; ++i)
            t.cr_spurious[static_cast<size_t>(i)] = a.at(static_cast<size_t>(i)).get<double>();
    }
    t.validate();
    return t;
}

json truth_to_json(const DeviceTruth& t) {
    json j;
    j["f_q_true"] = t.f_q_true;
    j["f_r_true"] = t.f_r_true;
    j["rabi_rate"] = t.rabi_rate;
    j["tau_decay"] = t.tau_decay;
    j["decay_detune"] = t.decay_detune;
    j["resonator_linewidth"] = t.resonator_linewidth;
    j["iq_center_0"] = {t.iq_center_0.i, t.iq_center_0.q};
    j["iq_center_1"] = {t.iq_center_1.i, t.iq_center_1.q};
    j["iq_center_2"] = {t.iq_center_2.i, t.iq_center_2.q};
    j["iq_sigma"] = t.iq_sigma;
    j["leak_amp_threshold"] = t.leak_amp_threshold;
    j["leak_rate"] = t.leak_rate;
    j["readout_floor"] = t.readout_floor;
    j["drive_nonlin"] = t.drive_nonlin;
    j["pulse_len_ns"] = t.pulse_len_ns;
    j["edge_deficit_ns"] = t.edge_deficit_ns;
    j["cr_zx_rate"] = t.cr_zx_rate;
    j["cr_spurious"] = t.cr_spurious;
    return j;
}

} // namespace

DeviceTruth DeviceTruth::from_json_text(const std::string& text) {
    return truth_from_json(json::parse(text));
}

std::string DeviceTruth::to_json_text() const { return truth_to_json(*this).dump(2); }

Backend Backend::from_json_text(const std::string& text) {
    const json j = json::parse(text);
    DeviceTruth q0 = j.contains("q0") ? truth_from_json(j.at("q0")) : DeviceTruth{};
    DeviceTruth q1 = j.contains("q1") ? truth_from_json(j.at("q1")) : DeviceTruth{};
    return Backend(q0, q1);
}

Backend Backend::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open device config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

} // namespace qcal::sim

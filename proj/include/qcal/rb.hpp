// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include "qcal/fitters.hpp"
#include "qcal/qmatrix.hpp"
#include "qcal/rng.hpp"

namespace qcal::rb {

using cplx = std::complex<double>;

// Gate-attached error channels for benchmarking oracles. Applied after the
// gate's unitary: depolarizing, then amplitude damping, then a coherent
// over-rotation Rx(delta) on every qubit.
struct NoiseSpec {
    double depolarizing = 0.0; // rho -> (1-eps) rho + eps I/d
    double amp_damp = 0.0;     // per-qubit damping probability
    double coherent = 0.0;     // extra Rx(delta) per qubit, radians
    bool any() const { return depolarizing != 0.0 || amp_damp != 0.0 || coherent != 0.0; }
};

// Small exact density-matrix simulator (1 or 2 qubits).
class DensityMatrix {
public:
    static DensityMatrix ground(int dim);

    int dim() const { return dim_; }
    void apply_unitary(const qm::Unitary& u);
    void depolarize(double eps);
    void amplitude_damp(double gamma); // applied to every qubit
    void coherent_overrotate(double delta);
    void apply_noise(const NoiseSpec& n);

    double population(int index) const;
    double purity() const; // Tr rho^2
    // Squared generalized Bloch-vector length: d/(d-1) * (Tr rho^2 - 1/d).
    double bloch_sq() const;

private:
    DensityMatrix(int dim) : dim_(dim) {}
    int dim_ = 2;
    std::array<cplx, 16> r_{};
};

// ---------------------------------------------------------------------------
// Clifford groups

struct CliffOp {
    enum Kind { X90, Vz, Cnot } kind = X90;
    int qubit = 0;
    double angle = 0.0; // Vz only
};
using CliffSeq = std::vector<CliffOp>;

// Recompose a decomposition into its matrix (oracle for the invariant that
// every element's gate list reproduces its unitary up to global phase).
qm::Unitary cliff_to_unitary(const CliffSeq& seq, int n_qubits);

struct CliffordElement {
    qm::Unitary unitary = qm::Unitary::identity(2);
    CliffSeq decomposition;
    int cls = 0; // 2-qubit class: 0 single-qubit, 1 CNOT-like, 2 iSWAP-like, 3 SWAP-like
};

// 24 elements: closure of {X90, Z90} up to global phase.
const std::vector<CliffordElement>& clifford_group_1q();
// All 11520 elements via the four-class decomposition; built on first use.
const std::vector<CliffordElement>& clifford_group_2q();
// Uniform draw from the 2-qubit group.
const CliffordElement& sample_clifford_2q(rng::Sequence& rng);

// ---------------------------------------------------------------------------
// Benchmarking protocols

enum class RbProtocol { Srb, Irb, Xrb };
enum class IrbTarget { X90, Cnot };

struct RbOptions {
    int n_qubits = 1;
    std::vector<int> lengths{2, 4, 8, 16, 32, 64, 128};
    int circuits_per_length = 15;
    int shots = 400; // 0 = exact populations from the density matrix
    std::uint64_t seed = 1;
    NoiseSpec noise;        // attached to every Clifford (and the inversion)
    NoiseSpec target_noise; // IRB: attached to the interleaved target gate
};

struct RbPoint {
    int m = 0;
    double survival = 0.0; // rescaled survival (SRB/IRB) or Bloch length^2 (XRB)
};

struct RbResult {
    RbProtocol protocol = RbProtocol::Srb;
    int n_qubits = 1;
    std::vector<RbPoint> points;
    fit::DecayFit fit;                  // decay p (SRB/IRB) or unitarity u (XRB)
    double process_infidelity = 0.0;    // (d^2-1)/d^2 (1-p), SRB/IRB
    double gate_infidelity = 0.0;       // IRB only
    double gate_infidelity_err = 0.0;   // IRB only
    double p_reference = 0.0;           // IRB: SRB decay used for the ratio
    bool nonphysical = false;           // IRB: p_irb above p_srb beyond errors
};

// Standard RB: random Clifford sequences + inversion; survival rescaled by
// the 1/d floor and fitted to A p^m.
RbResult srb(const RbOptions& options);

// Interleaved RB against a matching SRB decay.
RbResult irb(IrbTarget target, double p_srb, double p_srb_err, const RbOptions& options);

// Unitarity benchmarking: purity decay without inversion, fitted to A u^m.
RbResult xrb(const RbOptions& options);

// Error-budget split from a combined SRB + XRB pair.
struct XrbSplit {
    double e_f = 0.0; // process infidelity from p
    double e_s = 0.0; // stochastic part from u
    double e_u = 0.0; // unitary remainder
};
XrbSplit xrb_split(int n_qubits, double p, double u);

} // namespace qcal::rb

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

namespace qcal::qm {

using cplx = std::complex<double>;

// Dense unitary of dimension 2 or 4, row-major. Construction checks
// unitarity to 1e-12 per entry; products of unitaries stay unitary to
// rounding, so intermediate results never need re-validation.
class Unitary {
public:
    static Unitary identity(int dim);
    // Validating constructor: entries.size() must equal dim*dim.
    static Unitary from_entries(int dim, std::span<const cplx> entries);

    int dim() const { return dim_; }
    cplx at(int row, int col) const { return m_[static_cast<size_t>(row) * dim_ + col]; }
    Unitary dagger() const;

    friend Unitary operator*(const Unitary& a, const Unitary& b);

private:
    Unitary(int dim, std::array<cplx, 16> m) : dim_(dim), m_(m) {}
    int dim_;
    std::array<cplx, 16> m_{};

    friend Unitary unchecked(int, const std::array<cplx, 16>&);
};

// Normalized state vector of dimension 2 or 4. For two qubits the basis
// ordering is |q0 q1> with q0 (the control) as the left tensor factor,
// i.e. index = 2*q0 + q1.
class PureState {
public:
    static PureState ground(int dim);
    static PureState from_amplitudes(int dim, std::span<const cplx> amps);

    int dim() const { return dim_; }
    cplx amp(int i) const { return a_[static_cast<size_t>(i)]; }

    PureState apply(const Unitary& u) const;
    // Apply a 2x2 unitary to one qubit of a 2-qubit state (qubit 0 = left factor).
    PureState apply_single(const Unitary& u2, int qubit) const;

    std::array<double, 4> probabilities() const; // entries past dim are 0

private:
    PureState(int dim, std::array<cplx, 4> a) : dim_(dim), a_(a) {}
    int dim_;
    std::array<cplx, 4> a_{};
};

struct BlochExpectations {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

// Bloch vector of a single qubit state, or of one qubit of a 2-qubit state
// (reduced/partial trace).
BlochExpectations bloch(const PureState& s);
BlochExpectations bloch_of_qubit(const PureState& s, int qubit);

// Elementary rotations. rot_x(t) = cos(t/2) I - i sin(t/2) X;
// rot_z(t) = diag(e^{-it/2}, e^{it/2}).
Unitary rot_x(double theta);
Unitary rot_z(double theta);

// Kronecker product; the first argument is the control (left) factor.
Unitary tensor(const Unitary& a, const Unitary& b);

// Named 4x4 building blocks.
Unitary cnot();
// exp(-i theta/2 Z (x) X): control |0> sees rot_x(theta), control |1> rot_x(-theta).
Unitary zx_rotation(double theta);

enum class CorrectionKind { IX, ZZ, IZ };

// IX(t) = I (x) rot_x(t); IZ(t) = I (x) rot_z(t); ZZ(t1, t2) = rot_z(t1) (x) rot_z(t2).
// angles carries 1 entry (IX, IZ) or 2 entries (ZZ).
Unitary build_correction(CorrectionKind kind, std::span<const double> angles);

enum class Branch { Primary, PhasePiHalf };

// Correction angles wrapping a CR pulse into a CNOT. theta1 multiplies the
// control Z phase, theta2 the target Z phase after the pulse, theta3 the
// target Z phase before it, theta4 the target X rotation. (Some writeups
// swap the theta3/theta4 labels in prose; here they are positional: theta3
// is always the IZ angle, theta4 always the IX angle.)
struct CnotAngles {
    double theta1 = 0.0;
    double theta2 = 0.0;
    double theta3 = 0.0;
    double theta4 = 0.0;
    Branch branch = Branch::Primary;

    static CnotAngles zero(); // (0, 0, 2pi, 0): no correction, constraint satisfied
};

// Assemble the corrected CNOT: IX(t4) * ZZ(t1, t2) * cr * IZ(t3).
Unitary cnot_from_cr(const Unitary& cr, const CnotAngles& angles);

// Model a CR pulse carrying the given residual angles around an ideal CNOT:
// ZZ(t1, t2) * IX(t4) * CNOT * IZ(t3).
Unitary cr_from_cnot(const CnotAngles& angles);

// The fixed single-qubit completion D with CNOT = D * zx_rotation(pi/2);
// D = e^{-i pi/4} (rot_z(-pi/2) (x) rot_x(-pi/2)). D commutes with
// zx_rotation(theta) for every theta.
Unitary cnot_dressing();

// |Tr(A^dag B)| / dim: 1 iff A and B agree up to a global phase.
double trace_overlap(const Unitary& a, const Unitary& b);

// Half the Euclidean distance between two Bloch vectors (the |R| metric:
// 0 for a non-entangling operation, 1 at a maximally entangling one when
// e0/e1 are the target's Bloch vectors for the two control preparations).
double bloch_r_length(const BlochExpectations& e0, const BlochExpectations& e1);

// Map correction angles to the other branch of the fit degeneracy:
// (t1, t2, t3, t4) -> (t1 - pi, t2 - pi, t3 + pi, -t4). The two branches
// produce the same corrected CNOT up to a global phase of pi/2.
CnotAngles other_branch(const CnotAngles& a);

} // namespace qcal::qm

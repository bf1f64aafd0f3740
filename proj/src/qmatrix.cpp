// SPDX-License-Identifier: Apache-2.0
#include "qcal/qmatrix.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qcal/tuning.hpp"

namespace qcal::qm {

namespace {

constexpr double kUnitarityTol = 1e-12;

void check_dim(int dim) {
    if (dim != 2 && dim != 4) throw std::invalid_argument("dimension must be 2 or 4");
}

} // namespace

Unitary unchecked(int dim, const std::array<cplx, 16>& m) { return Unitary(dim, m); }

Unitary Unitary::identity(int dim) {
    check_dim(dim);
    std::array<cplx, 16> m{};
    for (int i = 0; i < dim; ++i) m[static_cast<size_t>(i) * dim + i] = 1.0;
    return Unitary(dim, m);
}

Unitary Unitary::from_entries(int dim, std::span<const cplx> entries) {
    check_dim(dim);
    if (entries.size() != static_cast<size_t>(dim) * dim)
        throw std::invalid_argument("entry count does not match dimension");
    std::array<cplx, 16> m{};
    for (size_t i = 0; i < entries.size(); ++i) m[i] = entries[i];
    // U^dag U == I check
    for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) {
            cplx s = 0.0;
            for (int k = 0; k < dim; ++k)
                s += std::conj(m[static_cast<size_t>(k) * dim + r]) * m[static_cast<size_t>(k) * dim + c];
            const cplx want = (r == c) ? cplx(1.0) : cplx(0.0);
            if (std::abs(s - want) > kUnitarityTol)
                throw std::invalid_argument("matrix is not unitary to 1e-12");
        }
    }
    return Unitary(dim, m);
}

Unitary Unitary::dagger() const {
    std::array<cplx, 16> m{};
    for (int r = 0; r < dim_; ++r)
        for (int c = 0; c < dim_; ++c)
            m[static_cast<size_t>(c) * dim_ + r] = std::conj(m_[static_cast<size_t>(r) * dim_ + c]);
    return Unitary(dim_, m);
}

Unitary operator*(const Unitary& a, const Unitary& b) {
    if (a.dim_ != b.dim_) throw std::invalid_argument("dimension mismatch in product");
    const int n = a.dim_;
    std::array<cplx, 16> m{};
    for (int r = 0; r < n; ++r)
        for (int k = 0; k < n; ++k) {
            const cplx arc = a.m_[static_cast<size_t>(r) * n + k];
            if (arc == cplx(0.0)) continue;
            for (int c = 0; c < n; ++c)
                m[static_cast<size_t>(r) * n + c] += arc * b.m_[static_cast<size_t>(k) * n + c];
        }
    return Unitary(n, m);
}

PureState PureState::ground(int dim) {
    check_dim(dim);
    std::array<cplx, 4> a{};
    a[0] = 1.0;
    return PureState(dim, a);
}

PureState PureState::from_amplitudes(int dim, std::span<const cplx> amps) {
    check_dim(dim);
    if (amps.size() != static_cast<size_t>(dim))
        throw std::invalid_argument("amplitude count does not match dimension");
    double n2 = 0.0;
    std::array<cplx, 4> a{};
    for (size_t i = 0; i < amps.size(); ++i) {
        a[i] = amps[i];
        n2 += std::norm(amps[i]);
    }
    if (std::abs(n2 - 1.0) > 1e-12) throw std::invalid_argument("state is not normalized to 1e-12");
    return PureState(dim, a);
}

PureState PureState::apply(const Unitary& u) const {
    if (u.dim() != dim_) throw std::invalid_argument("dimension mismatch in apply");
    std::array<cplx, 4> out{};
    for (int r = 0; r < dim_; ++r) {
        cplx s = 0.0;
        for (int c = 0; c < dim_; ++c) s += u.at(r, c) * a_[static_cast<size_t>(c)];
        out[static_cast<size_t>(r)] = s;
    }
    return PureState(dim_, out);
}

PureState PureState::apply_single(const Unitary& u2, int qubit) const {
    if (u2.dim() != 2) throw std::invalid_argument("apply_single needs a 2x2 unitary");
    if (dim_ == 2) {
        if (qubit != 0) throw std::invalid_argument("qubit index out of range");
        return apply(u2);
    }
    if (qubit != 0 && qubit != 1) throw std::invalid_argument("qubit index out of range");
    std::array<cplx, 4> out{};
    if (qubit == 0) {
        for (int t = 0; t < 2; ++t) {
            out[static_cast<size_t>(0 + t)] = u2.at(0, 0) * a_[static_cast<size_t>(t)] + u2.at(0, 1) * a_[static_cast<size_t>(2 + t)];
            out[static_cast<size_t>(2 + t)] = u2.at(1, 0) * a_[static_cast<size_t>(t)] + u2.at(1, 1) * a_[static_cast<size_t>(2 + t)];
        }
    } else {
        for (int c = 0; c < 2; ++c) {
            out[static_cast<size_t>(2 * c)] = u2.at(0, 0) * a_[static_cast<size_t>(2 * c)] + u2.at(0, 1) * a_[static_cast<size_t>(2 * c + 1)];
            out[static_cast<size_t>(2 * c + 1)] = u2.at(1, 0) * a_[static_cast<size_t>(2 * c)] + u2.at(1, 1) * a_[static_cast<size_t>(2 * c + 1)];
        }
    }
    return PureState(dim_, out);
}

std::array<double, 4> PureState::probabilities() const {
    std::array<double, 4> p{};
    for (int i = 0; i < dim_; ++i) p[static_cast<size_t>(i)] = std::norm(a_[static_cast<size_t>(i)]);
    return p;
}

BlochExpectations bloch(const PureState& s) {
    if (s.dim() != 2) throw std::invalid_argument("bloch needs a single-qubit state");
    const cplx a = s.amp(0), b = s.amp(1);
    BlochExpectations e;
    e.x = 2.0 * std::real(std::conj(a) * b);
    e.y = 2.0 * std::imag(std::conj(a) * b);
    e.z = std::norm(a) - std::norm(b);
    return e;
}

BlochExpectations bloch_of_qubit(const PureState& s, int qubit) {
    if (s.dim() == 2) return bloch(s);
    if (qubit != 0 && qubit != 1) throw std::invalid_argument("qubit index out of range");
    // reduced density matrix entries rho01 and populations
    cplx rho01 = 0.0;
    double p0 = 0.0, p1 = 0.0;
    for (int other = 0; other < 2; ++other) {
        const int i0 = (qubit == 0) ? other : 2 * other;
        const int i1 = (qubit == 0) ? 2 + other : 2 * other + 1;
        rho01 += s.amp(i0) * std::conj(s.amp(i1));
        p0 += std::norm(s.amp(i0));
        p1 += std::norm(s.amp(i1));
    }
    BlochExpectations e;
    e.x = 2.0 * std::real(rho01);
    e.y = -2.0 * std::imag(rho01); // <Y> = 2 Im(rho10) = -2 Im(rho01)
    e.z = p0 - p1;
    return e;
}

Unitary rot_x(double theta) {
    if (!std::isfinite(theta)) throw std::invalid_argument("rot_x needs a finite angle");
    const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
    std::array<cplx, 16> m{};
    m[0] = c;
    m[1] = cplx(0.0, -s);
    m[2] = cplx(0.0, -s);
    m[3] = c;
    return unchecked(2, m);
}

Unitary rot_z(double theta) {
    if (!std::isfinite(theta)) throw std::invalid_argument("rot_z needs a finite angle");
    std::array<cplx, 16> m{};
    m[0] = std::polar(1.0, -theta / 2.0);
    m[3] = std::polar(1.0, theta / 2.0);
    return unchecked(2, m);
}

Unitary tensor(const Unitary& a, const Unitary& b) {
    if (a.dim() != 2 || b.dim() != 2) throw std::invalid_argument("tensor takes two 2x2 unitaries");
    std::array<cplx, 16> m{};
    for (int ar = 0; ar < 2; ++ar)
        for (int ac = 0; ac < 2; ++ac)
            for (int br = 0; br < 2; ++br)
                for (int bc = 0; bc < 2; ++bc)
                    m[static_cast<size_t>(2 * ar + br) * 4 + (2 * ac + bc)] = a.at(ar, ac) * b.at(br, bc);
    return unchecked(4, m);
}

Unitary cnot() {
    std::array<cplx, 16> m{};
    m[0 * 4 + 0] = 1.0;
    m[1 * 4 + 1] = 1.0;
    m[2 * 4 + 3] = 1.0;
    m[3 * 4 + 2] = 1.0;
    return unchecked(4, m);
}

Unitary zx_rotation(double theta) {
    if (!std::isfinite(theta)) throw std::invalid_argument("zx_rotation needs a finite angle");
    const Unitary rp = rot_x(theta), rm = rot_x(-theta);
    std::array<cplx, 16> m{};
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            m[static_cast<size_t>(r) * 4 + c] = rp.at(r, c);
            m[static_cast<size_t>(2 + r) * 4 + (2 + c)] = rm.at(r, c);
        }
    return unchecked(4, m);
}

Unitary build_correction(CorrectionKind kind, std::span<const double> angles) {
    switch (kind) {
    case CorrectionKind::IX:
        if (angles.size() != 1) throw std::invalid_argument("IX takes one angle");
        return tensor(Unitary::identity(2), rot_x(angles[0]));
    case CorrectionKind::IZ:
        if (angles.size() != 1) throw std::invalid_argument("IZ takes one angle");
        return tensor(Unitary::identity(2), rot_z(angles[0]));
    case CorrectionKind::ZZ:
        if (angles.size() != 2) throw std::invalid_argument("ZZ takes two angles");
        return tensor(rot_z(angles[0]), rot_z(angles[1]));
    }
    throw std::invalid_argument("unknown correction kind");
}

CnotAngles CnotAngles::zero() {
    CnotAngles a;
    a.theta3 = tune::kThetaSumTarget;
    return a;
}

Unitary cnot_from_cr(const Unitary& cr, const CnotAngles& an) {
    if (cr.dim() != 4) throw std::invalid_argument("cr must be 4x4");
    const double zz[2] = {an.theta1, an.theta2};
    return build_correction(CorrectionKind::IX, {&an.theta4, 1}) *
           build_correction(CorrectionKind::ZZ, zz) * cr *
           build_correction(CorrectionKind::IZ, {&an.theta3, 1});
}

Unitary cr_from_cnot(const CnotAngles& an) {
    const double zz[2] = {an.theta1, an.theta2};
    return build_correction(CorrectionKind::ZZ, zz) *
           build_correction(CorrectionKind::IX, {&an.theta4, 1}) * cnot() *
           build_correction(CorrectionKind::IZ, {&an.theta3, 1});
}

Unitary cnot_dressing() {
    const double half = std::numbers::pi / 2.0;
    Unitary d = tensor(rot_z(-half), rot_x(-half));
    const cplx phase = std::polar(1.0, -std::numbers::pi / 4.0);
    std::array<cplx, 16> m{};
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m[static_cast<size_t>(r) * 4 + c] = phase * d.at(r, c);
    return unchecked(4, m);
}

double trace_overlap(const Unitary& a, const Unitary& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("dimension mismatch in trace_overlap");
    cplx tr = 0.0;
    for (int r = 0; r < a.dim(); ++r)
        for (int k = 0; k < a.dim(); ++k) tr += std::conj(a.at(k, r)) * b.at(k, r);
    return std::abs(tr) / a.dim();
}

double bloch_r_length(const BlochExpectations& e0, const BlochExpectations& e1) {
    const double dx = e0.x - e1.x, dy = e0.y - e1.y, dz = e0.z - e1.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz) / 2.0;
}

CnotAngles other_branch(const CnotAngles& a) {
    CnotAngles b;
    b.theta1 = a.theta1 - std::numbers::pi;
    b.theta2 = a.theta2 - std::numbers::pi;
    b.theta3 = a.theta3 + std::numbers::pi;
    b.theta4 = -a.theta4;
    b.branch = (a.branch == Branch::Primary) ? Branch::PhasePiHalf : Branch::Primary;
    return b;
}

} // namespace qcal::qm

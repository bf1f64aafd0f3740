// SPDX-License-Identifier: Apache-2.0
#include "qcal/rb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "qcal/errors.hpp"
#include "qcal/tuning.hpp"

namespace qcal::rb {

namespace {

constexpr double kPi = std::numbers::pi;

int dim_of(int n_qubits) { return n_qubits == 1 ? 2 : 4; }

} // namespace

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix DensityMatrix::ground(int dim) {
    if (dim != 2 && dim != 4) throw std::invalid_argument("DensityMatrix: dim must be 2 or 4");
    DensityMatrix out(dim);
    out.r_[0] = 1.0;
    return out;
}

void DensityMatrix::apply_unitary(const qm::Unitary& u) {
    if (u.dim() != dim_) throw std::invalid_argument("DensityMatrix: dimension mismatch");
    const int d = dim_;
    std::array<cplx, 16> t{};
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            cplx acc = 0.0;
            for (int k = 0; k < d; ++k) acc += u.at(i, k) * r_[k * d + j];
            t[i * d + j] = acc;
        }
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            cplx acc = 0.0;
            for (int k = 0; k < d; ++k) acc += t[i * d + k] * std::conj(u.at(j, k));
            r_[i * d + j] = acc;
        }
}

void DensityMatrix::depolarize(double eps) {
    if (eps < 0.0 || eps > 1.0) throw std::invalid_argument("depolarize: eps outside [0,1]");
    const int d = dim_;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) r_[i * d + j] *= 1.0 - eps;
    for (int i = 0; i < d; ++i) r_[i * d + i] += eps / d;
}

void DensityMatrix::amplitude_damp(double gamma) {
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("amplitude_damp: gamma outside [0,1]");
    const double s = std::sqrt(1.0 - gamma);
    const double g = std::sqrt(gamma);
    const int d = dim_;
    const int n = d == 2 ? 1 : 2;
    for (int q = 0; q < n; ++q) {
        // single-qubit Kraus pair embedded on qubit q (qubit 0 = left factor)
        std::array<cplx, 16> k0{}, k1{};
        for (int i = 0; i < d; ++i) {
            const int bit = n == 1 ? i : (q == 0 ? i >> 1 : i & 1);
            k0[i * d + i] = bit == 0 ? 1.0 : s;
            if (bit == 1) {
                const int j = n == 1 ? 0 : (q == 0 ? i - 2 : i - 1); // the bit lowered
                k1[j * d + i] = g;
            }
        }
        const auto apply_kraus = [&](const std::array<cplx, 16>& k, std::array<cplx, 16>& acc) {
            std::array<cplx, 16> t{};
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    cplx v = 0.0;
                    for (int l = 0; l < d; ++l) v += k[i * d + l] * r_[l * d + j];
                    t[i * d + j] = v;
                }
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    cplx v = 0.0;
                    for (int l = 0; l < d; ++l) v += t[i * d + l] * std::conj(k[j * d + l]);
                    acc[i * d + j] += v;
                }
        };
        std::array<cplx, 16> next{};
        apply_kraus(k0, next);
        apply_kraus(k1, next);
        r_ = next;
    }
}

void DensityMatrix::coherent_overrotate(double delta) {
    const qm::Unitary rx = qm::rot_x(delta);
    if (dim_ == 2) apply_unitary(rx);
    else apply_unitary(qm::tensor(rx, rx));
}

void DensityMatrix::apply_noise(const NoiseSpec& n) {
    if (n.depolarizing != 0.0) depolarize(n.depolarizing);
    if (n.amp_damp != 0.0) amplitude_damp(n.amp_damp);
    if (n.coherent != 0.0) coherent_overrotate(n.coherent);
}

double DensityMatrix::population(int index) const {
    if (index < 0 || index >= dim_) throw std::invalid_argument("population: bad index");
    return r_[index * dim_ + index].real();
}

double DensityMatrix::purity() const {
    double acc = 0.0;
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) acc += std::norm(r_[i * dim_ + j]);
    return acc;
}

double DensityMatrix::bloch_sq() const {
    const double d = dim_;
    return d / (d - 1.0) * (purity() - 1.0 / d);
}

// ---------------------------------------------------------------------------
// Clifford groups

qm::Unitary cliff_to_unitary(const CliffSeq& seq, int n_qubits) {
    const int d = dim_of(n_qubits);
    qm::Unitary u = qm::Unitary::identity(d);
    for (const CliffOp& op : seq) {
        qm::Unitary g = qm::Unitary::identity(d);
        switch (op.kind) {
        case CliffOp::X90:
            g = n_qubits == 1 ? qm::rot_x(kPi / 2.0)
                              : (op.qubit == 0 ? qm::tensor(qm::rot_x(kPi / 2.0), qm::Unitary::identity(2))
                                               : qm::tensor(qm::Unitary::identity(2), qm::rot_x(kPi / 2.0)));
            break;
        case CliffOp::Vz:
            g = n_qubits == 1 ? qm::rot_z(op.angle)
                              : (op.qubit == 0 ? qm::tensor(qm::rot_z(op.angle), qm::Unitary::identity(2))
                                               : qm::tensor(qm::Unitary::identity(2), qm::rot_z(op.angle)));
            break;
        case CliffOp::Cnot:
            if (n_qubits != 2) throw std::invalid_argument("cliff_to_unitary: CNOT needs 2 qubits");
            g = qm::cnot();
            break;
        }
        u = g * u;
    }
    return u;
}

namespace {

// Global-phase-invariant fingerprint: rotate so the first sizable entry is
// real positive, round, and print.
std::string phase_key(const qm::Unitary& u) {
    const int d = u.dim();
    cplx ph(1.0, 0.0);
    for (int i = 0; i < d * d; ++i) {
        const cplx z = u.at(i / d, i % d);
        if (std::abs(z) > 1e-6) {
            ph = std::conj(z) / std::abs(z);
            break;
        }
    }
    std::string key;
    key.reserve(static_cast<std::size_t>(d) * d * 18);
    char buf[40];
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            cplx z = u.at(i, j) * ph;
            double re = std::abs(z.real()) < 5e-7 ? 0.0 : z.real();
            double im = std::abs(z.imag()) < 5e-7 ? 0.0 : z.imag();
            std::snprintf(buf, sizeof buf, "%.5f,%.5f;", re, im);
            key += buf;
        }
    return key;
}

CliffSeq on_qubit(const CliffSeq& seq, int qubit) {
    CliffSeq out = seq;
    for (CliffOp& op : out) op.qubit = qubit;
    return out;
}

void append(CliffSeq& dst, const CliffSeq& src) { dst.insert(dst.end(), src.begin(), src.end()); }

std::vector<CliffordElement> build_group_1q() {
    const struct {
        qm::Unitary u;
        CliffOp op;
    } gens[2] = {{qm::rot_x(kPi / 2.0), {CliffOp::X90, 0, 0.0}},
                 {qm::rot_z(kPi / 2.0), {CliffOp::Vz, 0, kPi / 2.0}}};

    std::vector<CliffordElement> group;
    std::unordered_map<std::string, int> seen;
    group.push_back({qm::Unitary::identity(2), {}, 0});
    seen.emplace(phase_key(group[0].unitary), 0);
    for (std::size_t head = 0; head < group.size(); ++head) {
        const CliffordElement cur = group[head]; // copy: group may reallocate
        for (const auto& gen : gens) {
            const qm::Unitary next = gen.u * cur.unitary;
            std::string key = phase_key(next);
            if (seen.contains(key)) continue;
            CliffordElement elem{next, cur.decomposition, 0};
            elem.decomposition.push_back(gen.op);
            seen.emplace(std::move(key), static_cast<int>(group.size()));
            group.push_back(std::move(elem));
        }
    }
    if (group.size() != 24)
        throw InvalidStateError("clifford_group_1q: closure produced " +
                                std::to_string(group.size()) + " elements, expected 24");
    return group;
}

struct CoreTemplate {
    qm::Unitary unitary = qm::Unitary::identity(4);
    CliffSeq seq;
};

// verified at build: the decomposition recomposes to the intended core
CoreTemplate make_core(const CliffSeq& seq, const qm::Unitary& expect, const char* name) {
    const qm::Unitary got = cliff_to_unitary(seq, 2);
    if (qm::trace_overlap(got, expect) < 1.0 - 1e-9)
        throw InvalidStateError(std::string("clifford_group_2q: bad decomposition for ") + name);
    return {expect, seq};
}

std::vector<CliffordElement> build_group_2q() {
    const std::vector<CliffordElement>& g1 = clifford_group_1q();

    // axis-cycling element: X -> Y -> Z -> X under conjugation
    const qm::Unitary v_u = qm::rot_z(kPi / 2.0) * qm::rot_x(kPi / 2.0);
    const CliffSeq v_seq{{CliffOp::X90, 0, 0.0}, {CliffOp::Vz, 0, kPi / 2.0}};
    struct Axis {
        qm::Unitary u;
        CliffSeq seq;
    };
    std::array<Axis, 3> axis = {Axis{qm::Unitary::identity(2), {}}, Axis{v_u, v_seq}, Axis{v_u * v_u, {}}};
    axis[2].seq = v_seq;
    append(axis[2].seq, v_seq);

    const CliffSeq h0{{CliffOp::Vz, 0, kPi / 2.0}, {CliffOp::X90, 0, 0.0}, {CliffOp::Vz, 0, kPi / 2.0}};
    const CliffSeq h1 = on_qubit(h0, 1);

    // CNOT with control on qubit 1: Hadamards on both sides
    CliffSeq cnot10_seq = h0;
    append(cnot10_seq, h1);
    cnot10_seq.push_back({CliffOp::Cnot, 0, 0.0});
    append(cnot10_seq, h0);
    append(cnot10_seq, h1);

    const cplx i1(0.0, 1.0);
    const std::array<cplx, 16> iswap_e = {1, 0, 0, 0, 0, 0, i1, 0, 0, i1, 0, 0, 0, 0, 0, 1};
    const qm::Unitary iswap_u = qm::Unitary::from_entries(4, iswap_e);
    // iSWAP = (S (x) S) (H (x) I) CNOT01 CNOT10 (I (x) H), two CNOTs
    CliffSeq iswap_seq = h1;
    append(iswap_seq, cnot10_seq);
    iswap_seq.push_back({CliffOp::Cnot, 0, 0.0});
    append(iswap_seq, h0);
    iswap_seq.push_back({CliffOp::Vz, 0, kPi / 2.0});
    iswap_seq.push_back({CliffOp::Vz, 1, kPi / 2.0});

    const std::array<cplx, 16> swap_e = {1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 1};
    const qm::Unitary swap_u = qm::Unitary::from_entries(4, swap_e);
    CliffSeq swap_seq{{CliffOp::Cnot, 0, 0.0}};
    append(swap_seq, cnot10_seq);
    swap_seq.push_back({CliffOp::Cnot, 0, 0.0});

    const std::array<CoreTemplate, 4> cores = {
        CoreTemplate{qm::Unitary::identity(4), {}},
        make_core({{CliffOp::Cnot, 0, 0.0}}, qm::cnot(), "CNOT core"),
        make_core(iswap_seq, iswap_u, "iSWAP core"),
        make_core(swap_seq, swap_u, "SWAP core"),
    };

    std::vector<CliffordElement> group;
    group.reserve(11520);
    std::unordered_set<std::string> seen;
    seen.reserve(16384);
    for (int cls = 0; cls < 4; ++cls) {
        const int n_axis = (cls == 1 || cls == 2) ? 3 : 1;
        for (int c0 = 0; c0 < 24; ++c0)
            for (int c1 = 0; c1 < 24; ++c1) {
                const qm::Unitary outer = qm::tensor(g1[c0].unitary, g1[c1].unitary);
                for (int v0 = 0; v0 < n_axis; ++v0)
                    for (int v1 = 0; v1 < n_axis; ++v1) {
                        qm::Unitary u = outer * cores[cls].unitary;
                        if (n_axis > 1)
                            u = u * qm::tensor(axis[v0].u, axis[v1].u);
                        CliffSeq seq;
                        if (n_axis > 1) {
                            append(seq, on_qubit(axis[v0].seq, 0));
                            append(seq, on_qubit(axis[v1].seq, 1));
                        }
                        append(seq, cores[cls].seq);
                        append(seq, on_qubit(g1[c0].decomposition, 0));
                        append(seq, on_qubit(g1[c1].decomposition, 1));
                        if (!seen.insert(phase_key(u)).second)
                            throw InvalidStateError(
                                "clifford_group_2q: duplicate element in class " +
                                std::to_string(cls));
                        group.push_back({u, std::move(seq), cls});
                    }
            }
    }
    if (group.size() != 11520)
        throw InvalidStateError("clifford_group_2q: expected 11520 elements");
    return group;
}

} // namespace

const std::vector<CliffordElement>& clifford_group_1q() {
    static const std::vector<CliffordElement> group = build_group_1q();
    return group;
}

const std::vector<CliffordElement>& clifford_group_2q() {
    static const std::vector<CliffordElement> group = build_group_2q();
    return group;
}

const CliffordElement& sample_clifford_2q(rng::Sequence& rng) {
    const auto& group = clifford_group_2q();
    return group[rng.uniform_int(static_cast<int>(group.size()))];
}

// ---------------------------------------------------------------------------
// Protocols

namespace {

// |Tr(A B)| / d — 1 iff B inverts A up to global phase
double inv_overlap(const qm::Unitary& a, const qm::Unitary& b) {
    const int d = a.dim();
    cplx tr = 0.0;
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) tr += a.at(i, k) * b.at(k, i);
    return std::abs(tr) / d;
}

const CliffordElement& find_inverse(const std::vector<CliffordElement>& group,
                                    const qm::Unitary& u_total) {
    for (const CliffordElement& e : group)
        if (inv_overlap(e.unitary, u_total) >= 1.0 - 1e-9) return e;
    throw InvalidStateError("rb: sequence inverse not found in Clifford group");
}

double sample_survival(double p0, int shots, rng::Sequence& rng) {
    int hits = 0;
    for (int s = 0; s < shots; ++s)
        if (rng.uniform() < p0) ++hits;
    return static_cast<double>(hits) / shots;
}

void validate_options(const RbOptions& o) {
    if (o.n_qubits != 1 && o.n_qubits != 2)
        throw std::invalid_argument("rb: n_qubits must be 1 or 2");
    if (o.lengths.size() < 3)
        throw std::invalid_argument("rb: need at least 3 sequence lengths");
    for (int m : o.lengths)
        if (m < 1) throw std::invalid_argument("rb: lengths must be positive");
    if (o.circuits_per_length < 2)
        throw std::invalid_argument("rb: need at least 2 circuits per length");
    if (o.shots < 0) throw std::invalid_argument("rb: shots must be >= 0");
}

struct SurvivalData {
    std::vector<double> m, s, sigma;
    std::vector<RbPoint> points;
};

// Shared SRB/IRB loop; `target` empty for plain SRB.
SurvivalData run_survival_protocol(const RbOptions& o, const qm::Unitary* target) {
    const int d = dim_of(o.n_qubits);
    const auto& group = o.n_qubits == 1 ? clifford_group_1q() : clifford_group_2q();
    rng::Stream root(o.seed);
    SurvivalData out;

    for (std::size_t li = 0; li < o.lengths.size(); ++li) {
        const int m = o.lengths[li];
        for (int ci = 0; ci < o.circuits_per_length; ++ci) {
            const std::uint64_t circuit_tag = (li << 20) | static_cast<std::uint64_t>(ci);
            rng::Sequence pick(root.fork(circuit_tag).key());
            DensityMatrix rho = DensityMatrix::ground(d);
            qm::Unitary u_total = qm::Unitary::identity(d);
            for (int k = 0; k < m; ++k) {
                const CliffordElement& e =
                    group[pick.uniform_int(static_cast<int>(group.size()))];
                rho.apply_unitary(e.unitary);
                rho.apply_noise(o.noise);
                u_total = e.unitary * u_total;
                if (target != nullptr) {
                    rho.apply_unitary(*target);
                    rho.apply_noise(o.target_noise);
                    u_total = *target * u_total;
                }
            }
            const CliffordElement& inv = find_inverse(group, u_total);
            if (inv_overlap(inv.unitary, u_total) < 1.0 - 1e-9)
                throw InvalidStateError("rb: inversion does not close the sequence");
            rho.apply_unitary(inv.unitary);
            rho.apply_noise(o.noise);

            double p0 = rho.population(0);
            double sig;
            if (o.shots > 0) {
                rng::Sequence shot_rng(root.fork(circuit_tag | (1ull << 40)).key());
                p0 = sample_survival(p0, o.shots, shot_rng);
                sig = fit::binomial_sigma(p0, o.shots);
            } else {
                sig = 1e-3;
            }
            const double floor = 1.0 / d;
            const double rescaled = (p0 - floor) / (1.0 - floor);
            out.m.push_back(m);
            out.s.push_back(rescaled);
            out.sigma.push_back(sig / (1.0 - floor));
            out.points.push_back({m, rescaled});
        }
    }
    return out;
}

double process_infidelity_of(int d, double p) {
    const double dd = static_cast<double>(d) * d;
    const double e = (dd - 1.0) / dd * (1.0 - p);
    return e < 0.0 ? 0.0 : e;
}

} // namespace

RbResult srb(const RbOptions& options) {
    validate_options(options);
    SurvivalData data = run_survival_protocol(options, nullptr);
    RbResult out;
    out.protocol = RbProtocol::Srb;
    out.n_qubits = options.n_qubits;
    out.points = std::move(data.points);
    out.fit = fit::fit_decay(data.m, data.s, data.sigma);
    out.process_infidelity = process_infidelity_of(dim_of(options.n_qubits), out.fit.p);
    return out;
}

RbResult irb(IrbTarget target, double p_srb, double p_srb_err, const RbOptions& options) {
    validate_options(options);
    if (target == IrbTarget::X90 && options.n_qubits != 1)
        throw std::invalid_argument("irb: X90 target needs n_qubits == 1");
    if (target == IrbTarget::Cnot && options.n_qubits != 2)
        throw std::invalid_argument("irb: CNOT target needs n_qubits == 2");
    if (!(p_srb > 0.0) || p_srb > 1.0)
        throw std::invalid_argument("irb: reference decay must be in (0,1]");

    const qm::Unitary target_u = target == IrbTarget::X90 ? qm::rot_x(kPi / 2.0) : qm::cnot();
    SurvivalData data = run_survival_protocol(options, &target_u);

    RbResult out;
    out.protocol = RbProtocol::Irb;
    out.n_qubits = options.n_qubits;
    out.points = std::move(data.points);
    out.fit = fit::fit_decay(data.m, data.s, data.sigma);
    out.p_reference = p_srb;
    out.process_infidelity = process_infidelity_of(dim_of(options.n_qubits), out.fit.p);

    const double d = dim_of(options.n_qubits);
    const double ratio = out.fit.p / p_srb;
    const double raw = tune::irb_prefactor(d) * (1.0 - ratio);
    out.gate_infidelity = raw < 0.0 ? 0.0 : raw;
    const double rel =
        std::sqrt(std::pow(out.fit.p_err / out.fit.p, 2) + std::pow(p_srb_err / p_srb, 2));
    out.gate_infidelity_err = tune::irb_prefactor(d) * ratio * rel;
    const double comb = std::sqrt(out.fit.p_err * out.fit.p_err + p_srb_err * p_srb_err);
    out.nonphysical = out.fit.p > p_srb + 2.0 * comb;
    return out;
}

RbResult xrb(const RbOptions& options) {
    validate_options(options);
    const int d = dim_of(options.n_qubits);
    const auto& group = options.n_qubits == 1 ? clifford_group_1q() : clifford_group_2q();
    rng::Stream root(options.seed);

    RbResult out;
    out.protocol = RbProtocol::Xrb;
    out.n_qubits = options.n_qubits;
    std::vector<double> ms, bs, sigma;
    for (std::size_t li = 0; li < options.lengths.size(); ++li) {
        const int m = options.lengths[li];
        for (int ci = 0; ci < options.circuits_per_length; ++ci) {
            rng::Sequence pick(root.fork((li << 20) | static_cast<std::uint64_t>(ci)).key());
            DensityMatrix rho = DensityMatrix::ground(d);
            for (int k = 0; k < m; ++k) {
                rho.apply_unitary(group[pick.uniform_int(static_cast<int>(group.size()))].unitary);
                rho.apply_noise(options.noise);
            }
            const double b = rho.bloch_sq(); // purity computed exactly
            ms.push_back(m);
            bs.push_back(b);
            sigma.push_back(1e-3);
            out.points.push_back({m, b});
        }
    }
    out.fit = fit::fit_decay(ms, bs, sigma);
    return out;
}

XrbSplit xrb_split(int n_qubits, double p, double u) {
    const double d = dim_of(n_qubits);
    const double scale = (d * d - 1.0) / (d * d);
    XrbSplit out;
    out.e_f = scale * (1.0 - p);
    out.e_s = scale * (1.0 - std::sqrt(u < 0.0 ? 0.0 : u));
    out.e_u = out.e_f - out.e_s;
    if (out.e_u < 0.0) out.e_u = 0.0;
    if (out.e_f < 0.0) out.e_f = 0.0;
    if (out.e_s < 0.0) out.e_s = 0.0;
    return out;
}

} // namespace qcal::rb

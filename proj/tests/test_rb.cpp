// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "qcal/rb.hpp"
#include "qcal/tuning.hpp"

using namespace qcal;

TEST_CASE("single-qubit clifford group: size, closure, decompositions") {
    const auto& g = rb::clifford_group_1q();
    REQUIRE(g.size() == 24);

    // every stored gate list reproduces its element up to global phase
    for (const auto& e : g) {
        const qm::Unitary u = rb::cliff_to_unitary(e.decomposition, 1);
        CHECK(qm::trace_overlap(u, e.unitary) == doctest::Approx(1.0).epsilon(1e-9));
    }

    // closure: any product lands back in the group
    auto in_group = [&](const qm::Unitary& u) {
        for (const auto& e : g)
            if (qm::trace_overlap(u, e.unitary) > 1.0 - 1e-9) return true;
        return false;
    };
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); j += 5)
            CHECK(in_group(g[i].unitary * g[j].unitary));

    // no duplicates up to phase
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = i + 1; j < g.size(); ++j)
            CHECK(qm::trace_overlap(g[i].unitary, g[j].unitary) < 1.0 - 1e-6);
}

TEST_CASE("two-qubit clifford group: size and class census") {
    const auto& g = rb::clifford_group_2q();
    REQUIRE(g.size() == 11520);
    int census[4] = {0, 0, 0, 0};
    for (const auto& e : g) {
        REQUIRE(e.cls >= 0);
        REQUIRE(e.cls <= 3);
        ++census[e.cls];
    }
    CHECK(census[0] == 576);   // purely local
    CHECK(census[1] == 5184);  // CNOT-like
    CHECK(census[2] == 5184);  // iSWAP-like
    CHECK(census[3] == 576);   // SWAP-like

    // spot-check decompositions across all classes
    for (std::size_t i = 0; i < g.size(); i += 487) {
        const qm::Unitary u = rb::cliff_to_unitary(g[i].decomposition, 2);
        CHECK(qm::trace_overlap(u, g[i].unitary) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("uniform sampling hits each class at its group proportion") {
    rng::Sequence rng(42);
    const int n = 20000;
    int census[4] = {0, 0, 0, 0};
    for (int i = 0; i < n; ++i) ++census[rb::sample_clifford_2q(rng).cls];
    const double probs[4] = {0.05, 0.45, 0.45, 0.05};
    for (int c = 0; c < 4; ++c) {
        const double mean = n * probs[c];
        const double sigma = std::sqrt(n * probs[c] * (1.0 - probs[c]));
        CHECK(std::fabs(census[c] - mean) < 3.5 * sigma);
    }
}

TEST_CASE("density matrix channels behave like their definitions") {
    rb::DensityMatrix rho = rb::DensityMatrix::ground(2);
    CHECK(rho.population(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(rho.purity() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(rho.bloch_sq() == doctest::Approx(1.0).epsilon(1e-12));

    // full depolarizing -> maximally mixed
    rho.depolarize(1.0);
    CHECK(rho.population(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(rho.purity() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(rho.bloch_sq() == doctest::Approx(0.0).epsilon(1e-12));

    // damping pulls the excited state back to ground
    rb::DensityMatrix ex = rb::DensityMatrix::ground(2);
    ex.apply_unitary(qm::rot_x(std::numbers::pi));
    CHECK(ex.population(1) == doctest::Approx(1.0).epsilon(1e-12));
    ex.amplitude_damp(0.25);
    CHECK(ex.population(1) == doctest::Approx(0.75).epsilon(1e-12));
    ex.amplitude_damp(1.0);
    CHECK(ex.population(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ex.purity() == doctest::Approx(1.0).epsilon(1e-12));

    // a coherent over-rotation is unitary: purity is untouched
    rb::DensityMatrix co = rb::DensityMatrix::ground(4);
    co.coherent_overrotate(0.3);
    CHECK(co.purity() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(co.population(0) < 1.0);

    // two-qubit depolarizing mixes toward 1/4
    rb::DensityMatrix r4 = rb::DensityMatrix::ground(4);
    r4.depolarize(0.5);
    CHECK(r4.population(0) == doctest::Approx(0.5 + 0.5 / 4.0).epsilon(1e-12));
    CHECK(r4.bloch_sq() == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("exact-mode depolarizing decay is geometric in sequence length") {
    const double eps = 0.02;
    rb::RbOptions opt;
    opt.n_qubits = 1;
    opt.lengths = {2, 4, 8, 16};
    opt.circuits_per_length = 4;
    opt.shots = 0; // exact populations
    opt.seed = 5;
    opt.noise.depolarizing = eps;

    const rb::RbResult r = rb::srb(opt);
    for (const rb::RbPoint& pt : r.points) {
        // m Cliffords + the inversion each depolarize once
        const double expect = std::pow(1.0 - eps, pt.m + 1);
        CHECK(pt.survival == doctest::Approx(expect).epsilon(1e-10));
    }
    CHECK(r.fit.p == doctest::Approx(1.0 - eps).epsilon(1e-6));
    CHECK(r.process_infidelity ==
          doctest::Approx((3.0 / 4.0) * eps).epsilon(1e-4));

    // two-qubit version obeys the same law with d = 4
    rb::RbOptions opt2 = opt;
    opt2.n_qubits = 2;
    opt2.lengths = {2, 4, 8};
    opt2.circuits_per_length = 2;
    const rb::RbResult r2 = rb::srb(opt2);
    for (const rb::RbPoint& pt : r2.points)
        CHECK(pt.survival == doctest::Approx(std::pow(1.0 - eps, pt.m + 1)).epsilon(1e-10));
}

TEST_CASE("interleaved comparison recovers the planted target error") {
    const double eps_g = 0.03;
    rb::RbOptions opt;
    opt.n_qubits = 1;
    opt.lengths = {2, 4, 8, 16, 32};
    opt.circuits_per_length = 6;
    opt.shots = 0;
    opt.seed = 11;
    opt.noise.depolarizing = 0.01;
    const rb::RbResult s = rb::srb(opt);

    rb::RbOptions iopt = opt;
    iopt.target_noise.depolarizing = eps_g;
    const rb::RbResult i = rb::irb(rb::IrbTarget::X90, s.fit.p, s.fit.p_err, iopt);
    CHECK(i.protocol == rb::RbProtocol::Irb);
    CHECK_FALSE(i.nonphysical);
    // exact mode: p_i/p_s = (1-eps_g), so the estimate is (d-1)/d * eps_g
    CHECK(i.gate_infidelity ==
          doctest::Approx(0.5 * eps_g).epsilon(0.02));

    // an interleaved decay faster than the reference allows is flagged
    const rb::RbResult bad = rb::irb(rb::IrbTarget::X90, 0.9, 1e-4, iopt);
    CHECK(bad.nonphysical);
    CHECK(bad.gate_infidelity == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("unitarity separates coherent from stochastic error") {
    rb::RbOptions opt;
    opt.n_qubits = 1;
    opt.lengths = {2, 4, 8, 16};
    opt.circuits_per_length = 5;
    opt.shots = 0;
    opt.seed = 13;

    // purely coherent noise: purity never decays, u = 1
    opt.noise.coherent = 0.05;
    const rb::RbResult co = rb::xrb(opt);
    CHECK(co.fit.p == doctest::Approx(1.0).epsilon(1e-9));

    // depolarizing: u = (1 - eps)^2 exactly
    opt.noise.coherent = 0.0;
    opt.noise.depolarizing = 0.03;
    const rb::RbResult dep = rb::xrb(opt);
    CHECK(dep.fit.p == doctest::Approx((1.0 - 0.03) * (1.0 - 0.03)).epsilon(1e-9));
}

TEST_CASE("error-budget split: hand values") {
    // all-stochastic case: u = p^2 makes the unitary part vanish
    const rb::XrbSplit s1 = rb::xrb_split(1, 0.99, 0.99 * 0.99);
    CHECK(s1.e_f == doctest::Approx((3.0 / 4.0) * 0.01).epsilon(1e-12));
    CHECK(s1.e_s == doctest::Approx(s1.e_f).epsilon(1e-9));
    CHECK(s1.e_u == doctest::Approx(0.0).epsilon(1e-9));

    // all-coherent case: u = 1 puts everything in the unitary part
    const rb::XrbSplit s2 = rb::xrb_split(1, 0.99, 1.0);
    CHECK(s2.e_s == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s2.e_u == doctest::Approx(s2.e_f).epsilon(1e-9));

    // two-qubit prefactor is 15/16
    const rb::XrbSplit s3 = rb::xrb_split(2, 0.98, 1.0);
    CHECK(s3.e_f == doctest::Approx((15.0 / 16.0) * 0.02).epsilon(1e-12));
}

TEST_CASE("sampled shots converge on the exact survivals") {
    rb::RbOptions exact;
    exact.n_qubits = 1;
    exact.lengths = {2, 8, 32};
    exact.circuits_per_length = 8;
    exact.shots = 0;
    exact.seed = 3;
    exact.noise.depolarizing = 0.02;
    const rb::RbResult e = rb::srb(exact);

    rb::RbOptions sampled = exact;
    sampled.shots = 2000;
    const rb::RbResult s = rb::srb(sampled);
    REQUIRE(e.points.size() == s.points.size());
    for (std::size_t k = 0; k < e.points.size(); ++k) {
        const double sd = fit::binomial_sigma(e.points[k].survival, 2000) /
                          (1.0 - 0.5); // rescale stretches the binomial noise
        CHECK(std::fabs(s.points[k].survival - e.points[k].survival) < 4.0 * sd + 1e-9);
    }
}

// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "qcal/autorabi.hpp"

using namespace qcal;

namespace {

// fit that scores a perfect calibration: chi2_ndf 1, half-range
// amplitude and offset, nominal quarter-turn duration.
fit::RabiFit ideal_fit() {
    fit::RabiFit f;
    f.c = 0.5;
    f.a = 0.5;
    f.t_x90 = 32.0;
    f.chi2_ndf = 1.0;
    f.ndf = 45;
    return f;
}

// decisive two-cluster evidence: every k != 2 sigmoid saturates at 0,
// so the cluster term contributes nothing
cluster::ClusterReport two_cluster_report() {
    cluster::ClusterReport r;
    r.bic_by_k = {{1, 1e9}, {2, 0.0}, {3, 1e9}, {4, 1e9}};
    r.best_k = 2;
    return r;
}

} // namespace

TEST_CASE("loss terms: hand-checkable unit contributions") {
    const ar::LossConfig cfg{};

    // perfect fit: only the chi-squared entry survives, delta = sqrt(1) -> +1
    ar::LossBreakdown l = ar::loss_total(ideal_fit(), two_cluster_report(), cfg);
    CHECK(l.l_f == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(l.l_ac == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(l.l_t == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(l.l_bic == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(l.l_tot == doctest::Approx(1.0).epsilon(1e-12));

    // |A| off by exactly one amplitude tolerance adds one unit
    fit::RabiFit f2 = ideal_fit();
    f2.a = 0.53;
    l = ar::loss_total(f2, two_cluster_report(), cfg);
    CHECK(l.l_tot == doctest::Approx(2.0).epsilon(1e-12));

    // quarter-turn length off by one duration tolerance adds one unit
    fit::RabiFit f3 = ideal_fit();
    f3.t_x90 = 36.0;
    l = ar::loss_total(f3, two_cluster_report(), cfg);
    CHECK(l.l_tot == doctest::Approx(2.0).epsilon(1e-12));

    // offset term: C = 0.55 is one offset tolerance away from 0.5
    fit::RabiFit f4 = ideal_fit();
    f4.c = 0.55;
    l = ar::loss_total(f4, two_cluster_report(), cfg);
    CHECK(l.l_tot == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(l.l_ac == doctest::Approx(1.0).epsilon(1e-12));

    // negative amplitude counts by magnitude
    fit::RabiFit f5 = ideal_fit();
    f5.a = -0.5;
    l = ar::loss_total(f5, two_cluster_report(), cfg);
    CHECK(l.l_tot == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("loss terms: cluster-count evidence enters through scaled sigmoids") {
    // one cluster decisively beating two saturates that sigmoid at 1:
    // the entry becomes 1/0.5 = 2, adding 4 to the loss
    cluster::ClusterReport one;
    one.bic_by_k = {{1, 0.0}, {2, 1e9}, {3, 2e9}, {4, 2e9}};
    one.best_k = 1;
    ar::LossBreakdown l = ar::loss_total(ideal_fit(), one, ar::LossConfig{});
    CHECK(l.l_bic == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(l.l_tot == doctest::Approx(5.0).epsilon(1e-12));

    // evidence exactly tied: every sigmoid sits at 1/2, each entry is 1
    cluster::ClusterReport tied;
    tied.bic_by_k = {{1, 0.0}, {2, 0.0}, {3, 0.0}, {4, 0.0}};
    tied.best_k = 1;
    l = ar::loss_total(ideal_fit(), tied, ar::LossConfig{});
    CHECK(l.l_bic == doctest::Approx(3.0).epsilon(1e-12));

    // moderate evidence: BIC gap of 10*ln(3) puts the sigmoid at exactly 1/4
    cluster::ClusterReport mid;
    mid.bic_by_k = {{1, 10.0 * std::log(3.0)}, {2, 0.0}, {3, 1e9}, {4, 1e9}};
    mid.best_k = 2;
    l = ar::loss_total(ideal_fit(), mid, ar::LossConfig{});
    CHECK(l.l_bic == doctest::Approx(0.25).epsilon(1e-9));

    // a report missing a k is rejected
    cluster::ClusterReport missing;
    missing.bic_by_k = {{1, 0.0}, {2, 0.0}};
    CHECK_THROWS_AS(ar::loss_total(ideal_fit(), missing, ar::LossConfig{}),
                    std::invalid_argument);
}

TEST_CASE("evaluate_bias: on-resonance scan fits and scores near-ideal") {
    const sim::Backend b;
    sim::QubitBias bias = b.bias(0); // power-up point is on resonance
    ar::ScanConfig scan = ar::ScanConfig::defaults();
    const ar::Evaluation ev = ar::evaluate_bias(bias, b, scan, 3);
    REQUIRE(ev.fit_ok);
    CHECK(ev.loss.l_tot < 8.0);
    CHECK(ev.clusters.best_k == 2);
    CHECK(ev.fit.t_x90 > 10.0);
    CHECK(ev.p1_by_width.size() == scan.widths_ns.size());

    // same seed, same result including bits of the loss
    const ar::Evaluation ev2 = ar::evaluate_bias(bias, b, scan, 3);
    CHECK(ev.loss.l_tot == ev2.loss.l_tot);
    CHECK(ev.fit.f == ev2.fit.f);
}

TEST_CASE("evaluate_bias: bad operating points score badly but keep the loop alive") {
    const sim::Backend b;

    // dead drive: the trace is pure readout noise, which still fits (as a
    // near-zero-amplitude wiggle) -- the loss, not an exception, steers the
    // optimizer away, two orders of magnitude above a good point
    sim::QubitBias dead = b.bias(0);
    dead.a_r = 0.0;
    const ar::Evaluation ev = ar::evaluate_bias(dead, b, ar::ScanConfig::defaults(), 3);
    CHECK(ev.fit_ok);
    CHECK(ev.loss.l_tot > 100.0);

    // a scan with no width variation carries no frequency information at
    // all; the fit fails and is mapped onto the sentinel instead of throwing
    ar::ScanConfig flat = ar::ScanConfig::defaults();
    flat.widths_ns.assign(12, 16.0);
    const ar::Evaluation bad = ar::evaluate_bias(b.bias(0), b, flat, 3);
    CHECK_FALSE(bad.fit_ok);
    CHECK_FALSE(bad.failure.empty());
    CHECK(bad.loss.l_tot == ar::kSentinelLoss);
}

TEST_CASE("autorabi: budget 1 evaluates only the start; iterates stay bracketed") {
    const sim::Backend b;
    sim::QubitBias start = b.bias(0);
    start.f_q += 0.0008;
    start.a_r = 0.5;

    ar::AutoRabiOptions opt;
    opt.budget = 1;
    opt.seed = 21;
    ar::AutoRabiResult r1 = ar::autorabi(start, b, opt);
    CHECK(r1.iterations.size() == 1);
    CHECK(r1.final_bias.f_q == start.f_q);
    CHECK(r1.final_loss.l_tot == r1.initial_loss.l_tot);

    opt.budget = 12;
    int archived = 0;
    opt.archive = [&](const ar::IterationRecord& rec) {
        ++archived;
        CHECK(rec.evaluation == archived);
    };
    ar::AutoRabiResult r = ar::autorabi(start, b, opt);
    CHECK(static_cast<int>(r.iterations.size()) <= 12);
    CHECK(archived == static_cast<int>(r.iterations.size()));
    for (const ar::IterationRecord& it : r.iterations) {
        CHECK(std::fabs(it.bias.f_q - start.f_q) <= opt.brackets.f_q_ghz + 1e-12);
        CHECK(std::fabs(it.bias.f_r - start.f_r) <= opt.brackets.f_r_ghz + 1e-12);
        CHECK(std::fabs(it.bias.a_r - start.a_r) <= opt.brackets.a_r + 1e-12);
    }
    CHECK(r.final_loss.l_tot <= r.initial_loss.l_tot + 1e-12);

    // determinism end to end
    ar::AutoRabiOptions opt2 = opt;
    opt2.archive = nullptr;
    const ar::AutoRabiResult ra = ar::autorabi(start, b, opt2);
    const ar::AutoRabiResult rb = ar::autorabi(start, b, opt2);
    CHECK(ra.final_bias.f_q == rb.final_bias.f_q);
    CHECK(ra.final_bias.a_r == rb.final_bias.a_r);
    CHECK(ra.final_loss.l_tot == rb.final_loss.l_tot);
}

// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qcal/clustering.hpp"
#include "qcal/rng.hpp"

using namespace qcal;

namespace {

// Box-Muller-free gaussian via Irwin-Hall: adequate for cluster archetypes.
double gauss(rng::Sequence& rng) {
    double g = 0.0;
    for (int k = 0; k < 12; ++k) g += rng.uniform();
    return g - 6.0;
}

std::vector<IQPoint> blobs(int n, const std::vector<std::array<double, 3>>& spec,
                           std::uint64_t seed) {
    // spec entries: {weight, cx, cy}
    std::vector<IQPoint> pts;
    rng::Sequence rng(seed);
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        double acc = 0.0;
        std::size_t pick = 0;
        for (std::size_t j = 0; j < spec.size(); ++j) {
            acc += spec[j][0];
            if (u < acc) {
                pick = j;
                break;
            }
            pick = j;
        }
        pts.push_back({spec[pick][1] + 1.25 * gauss(rng), spec[pick][2] + 1.25 * gauss(rng)});
    }
    return pts;
}

} // namespace

TEST_CASE("gmm fit separates two well-spaced blobs") {
    const auto pts = blobs(2000, {{0.6, 0.0, 0.0}, {0.4, 10.0, 0.0}}, 11);
    const cluster::GmmModel m = cluster::gmm_fit(pts, 2, 1);
    CHECK(m.converged);
    CHECK(m.k == 2);
    // means land on the two centers, in some order
    const double lo = std::min(m.means[0][0], m.means[1][0]);
    const double hi = std::max(m.means[0][0], m.means[1][0]);
    CHECK(lo == doctest::Approx(0.0).epsilon(0.15));
    CHECK(hi == doctest::Approx(10.0).epsilon(0.15));
    const double w_hi = m.means[0][0] > m.means[1][0] ? m.weights[0] : m.weights[1];
    CHECK(w_hi == doctest::Approx(0.4).epsilon(0.1));
}

TEST_CASE("model order selection picks the true cluster count") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto one = blobs(2000, {{1.0, 0.0, 0.0}}, seed);
        CHECK(cluster::cluster_report(one, seed).best_k == 1);
        const auto two = blobs(2000, {{0.6, 0.0, 0.0}, {0.4, 10.0, 0.0}}, seed + 100);
        CHECK(cluster::cluster_report(two, seed).best_k == 2);
        const auto three =
            blobs(2000, {{0.55, 0.0, 0.0}, {0.35, 10.0, 0.0}, {0.1, 5.0, 7.5}}, seed + 200);
        CHECK(cluster::cluster_report(three, seed).best_k == 3);
    }
}

TEST_CASE("delta_bic is zero at k = 2 by definition") {
    const auto pts = blobs(2000, {{0.6, 0.0, 0.0}, {0.4, 10.0, 0.0}}, 3);
    const cluster::ClusterReport rep = cluster::cluster_report(pts, 3);
    CHECK(rep.delta_bic(2) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(rep.bic_by_k.size() == 4);
    // two real clusters: k = 1 fits much worse
    CHECK(rep.delta_bic(1) > 0.0);
}

TEST_CASE("labeling by reference centroid is order-independent") {
    const auto pts = blobs(2400, {{0.5, 0.0, 0.0}, {0.5, 10.0, 0.0}}, 17);
    const cluster::GmmModel m = cluster::gmm_fit(pts, 2, 9);
    const int g = cluster::label_by_reference(m, IQPoint{0.0, 0.0});
    CHECK(std::hypot(m.means[static_cast<std::size_t>(g)][0],
                     m.means[static_cast<std::size_t>(g)][1]) < 2.0);
    // digitized excited fraction ~ the far blob's weight
    const cluster::Digitized d = cluster::digitize(pts, m, g);
    CHECK(d.bits.size() == pts.size());
    CHECK(d.p1 == doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("cluster report is deterministic in the seed") {
    const auto pts = blobs(2000, {{0.6, 0.0, 0.0}, {0.4, 10.0, 0.0}}, 23);
    const cluster::ClusterReport a = cluster::cluster_report(pts, 5);
    const cluster::ClusterReport b = cluster::cluster_report(pts, 5);
    CHECK(a.best_k == b.best_k);
    for (const auto& [k, v] : a.bic_by_k) CHECK(v == b.bic_by_k.at(k));
}

TEST_CASE("digitize posterior ties resolve to ground") {
    // two identical overlapping components: every point is a tie
    const auto pts = blobs(200, {{1.0, 0.0, 0.0}}, 31);
    cluster::GmmModel m = cluster::gmm_fit(pts, 1, 1);
    cluster::GmmModel twin = m;
    twin.k = 2;
    twin.weights = {0.5, 0.5};
    twin.means = {m.means[0], m.means[0]};
    twin.covs = {m.covs[0], m.covs[0]};
    const cluster::Digitized d = cluster::digitize(pts, twin, 0);
    CHECK(d.p1 == doctest::Approx(0.0).epsilon(1e-15));
}

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "qcal/iq.hpp"
#include "qcal/tuning.hpp"

namespace qcal::cluster {

// Gaussian mixture over the IQ plane, full 2x2 covariances.
// covs entries are packed as {c_ii, c_iq, c_qq}.
struct GmmModel {
    int k = 0;
    std::vector<double> weights;
    std::vector<std::array<double, 2>> means;
    std::vector<std::array<double, 3>> covs;
    double log_likelihood = 0.0;
    int n_iters = 0;
    bool converged = false;

    int n_params() const { return 6 * k - 1; }
    // log density of the mixture at a point
    double log_pdf(const IQPoint& p) const;
    // per-component posteriors at a point (sums to 1)
    std::vector<double> posteriors(const IQPoint& p) const;
};

// Fit a k-component mixture by EM with k-means++ seeding; `restarts`
// independent starts, best log-likelihood wins. Deterministic in `seed`.
GmmModel gmm_fit(std::span<const IQPoint> points, int k, std::uint64_t seed,
                 int restarts = 5);

// Bayesian information criterion for a fitted mixture over n points.
double bic(const GmmModel& model, std::size_t n);

// Mixture-order study: fits k = 1..4, keeps every BIC and the k = 2 model.
struct ClusterReport {
    std::map<int, double> bic_by_k;
    int best_k = 0;
    GmmModel gmm2;

    // attenuated BIC contrast, positive when k fits worse than 2
    double delta_bic(int k) const {
        return (bic_by_k.at(k) - bic_by_k.at(2)) / tune::kBicScale;
    }
};

ClusterReport cluster_report(std::span<const IQPoint> points, std::uint64_t seed);

// Index of the gmm2 component whose mean lies closest to a ground-state
// reference centroid (the blob to be labeled "0").
int label_by_reference(const GmmModel& gmm2, const IQPoint& ground_ref);

// Hard state assignment of each point under a 2-component mixture.
struct Digitized {
    std::vector<int> bits;
    double p1 = 0.0;
};

// ground_component selects which mixture component counts as 0; posterior
// ties resolve to 0.
Digitized digitize(std::span<const IQPoint> points, const GmmModel& gmm2,
                   int ground_component);

} // namespace qcal::cluster

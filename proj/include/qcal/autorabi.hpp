// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qcal/clustering.hpp"
#include "qcal/fitters.hpp"
#include "qcal/optimizer.hpp"
#include "qcal/simdev.hpp"
#include "qcal/tuning.hpp"

namespace qcal::ar {

// Normalization constants of the loss vector. Defaults come from the single
// tuning header; runs may override them through config.
struct LossConfig {
    double half_range = tune::kHalfRange;    // target for |A| and C, sigmoid divisor
    double amp_tol = tune::kAmpTol;
    double offset_tol = tune::kOffsetTol;
    double x90_target_ns = tune::kX90TargetNs;
    double x90_tol_ns = tune::kX90TolNs;
};

// The seven-entry loss vector and its partial sums.
struct LossBreakdown {
    std::array<double, 7> delta{}; // sqrt(chi2_ndf), amp, offset, duration, 3x BIC
    double l_f = 0.0;              // chi-squared term
    double l_ac = 0.0;             // amplitude + offset terms
    double l_t = 0.0;              // duration term
    double l_bic = 0.0;            // cluster-count terms
    double l_tot = 0.0;            // sum of all squared entries
};

// Sentinel returned when a scan produced no fittable oscillation; large
// enough to dominate, finite enough to keep the optimizer moving.
inline constexpr double kSentinelLoss = 1e4;

LossBreakdown loss_total(const fit::RabiFit& fit, const cluster::ClusterReport& clusters,
                         const LossConfig& cfg = {});

// One Rabi-scan evaluation: widths/shots to drive, and how many pooled IQ
// points at most feed the mixture-order study (stride-subsampled; the
// per-width digitization always uses every shot).
struct ScanConfig {
    int qubit = 0;
    std::vector<double> widths_ns;
    int shots = 400;
    int report_max_points = 6000;

    static ScanConfig defaults(); // 50 widths, 4..200 ns, 400 shots
};

struct Evaluation {
    fit::RabiFit fit;
    cluster::ClusterReport clusters;
    LossBreakdown loss;
    std::vector<double> p1_by_width;
    bool fit_ok = false;
    std::string failure; // set when fit_ok is false
};

// scan -> cluster -> digitize -> fit -> loss. Fit failures do not throw:
// they yield the sentinel loss so a surrounding search can keep going.
Evaluation evaluate_bias(const sim::QubitBias& bias, const sim::Backend& backend,
                         const ScanConfig& scan, std::uint64_t seed,
                         const LossConfig& cfg = {});

struct Brackets {
    double f_q_ghz = 0.002;
    double f_r_ghz = 0.002;
    double a_r = 0.3;
};

struct IterationRecord {
    int evaluation = 0;
    sim::QubitBias bias;
    Evaluation eval;
};

struct AutoRabiOptions {
    ScanConfig scan = ScanConfig::defaults();
    LossConfig loss{};
    Brackets brackets{};
    int budget = 40;        // iterations; 1 means "evaluate the start only"
    std::uint64_t seed = 1; // master seed: scan seeds fork from it per evaluation
    // optional per-evaluation sink (archival)
    std::function<void(const IterationRecord&)> archive;
};

struct AutoRabiResult {
    sim::QubitBias initial_bias;
    sim::QubitBias final_bias;
    LossBreakdown initial_loss;
    LossBreakdown final_loss;
    Evaluation final_eval;
    opt::OptTrace trace;
    std::vector<IterationRecord> iterations;
    std::string started_at;
    std::string finished_at;
};

// The calibration loop: bound-constrained search over (f_q, f_r, a_r) in
// normalized coordinates, fresh scan seed per evaluation, best evaluation
// (including the initial one) wins.
AutoRabiResult autorabi(const sim::QubitBias& initial, const sim::Backend& backend,
                        const AutoRabiOptions& options);

// UTC timestamp "YYYY-MM-DDTHH:MM:SSZ" (shared by archival writers).
std::string utc_now();

} // namespace qcal::ar

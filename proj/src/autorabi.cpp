// SPDX-License-Identifier: Apache-2.0
#include "qcal/autorabi.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <stdexcept>

#include "qcal/errors.hpp"
#include "qcal/rng.hpp"

namespace qcal::ar {

LossBreakdown loss_total(const fit::RabiFit& fit, const cluster::ClusterReport& clusters,
                         const LossConfig& cfg) {
    for (int k = 1; k <= 4; ++k)
        if (!clusters.bic_by_k.count(k))
            throw std::invalid_argument("loss_total: cluster report is missing a k");
    if (fit.ndf <= 0) throw std::invalid_argument("loss_total: fit has no degrees of freedom");

    LossBreakdown out;
    out.delta[0] = std::sqrt(std::max(fit.chi2_ndf, 0.0));
    out.delta[1] = (std::abs(fit.a) - cfg.half_range) / cfg.amp_tol;
    out.delta[2] = (fit.c - cfg.half_range) / cfg.offset_tol;
    out.delta[3] = (fit.t_x90 - cfg.x90_target_ns) / cfg.x90_tol_ns;
    // the sigmoid is fed -delta_bic so the term vanishes when the
    // two-cluster hypothesis wins (smallest BIC)
    out.delta[4] = tune::sigmoid(-clusters.delta_bic(1)) / cfg.half_range;
    out.delta[5] = tune::sigmoid(-clusters.delta_bic(3)) / cfg.half_range;
    out.delta[6] = tune::sigmoid(-clusters.delta_bic(4)) / cfg.half_range;

    out.l_f = out.delta[0] * out.delta[0];
    out.l_ac = out.delta[1] * out.delta[1] + out.delta[2] * out.delta[2];
    out.l_t = out.delta[3] * out.delta[3];
    out.l_bic = out.delta[4] * out.delta[4] + out.delta[5] * out.delta[5] +
                out.delta[6] * out.delta[6];
    out.l_tot = out.l_f + out.l_ac + out.l_t + out.l_bic;
    return out;
}

ScanConfig ScanConfig::defaults() {
    ScanConfig cfg;
    cfg.widths_ns.reserve(50);
    for (int i = 1; i <= 50; ++i) cfg.widths_ns.push_back(4.0 * i);
    return cfg;
}

Evaluation evaluate_bias(const sim::QubitBias& bias, const sim::Backend& backend,
                         const ScanConfig& scan, std::uint64_t seed,
                         const LossConfig& cfg) {
    if (scan.widths_ns.empty()) throw std::invalid_argument("evaluate_bias: no widths");
    if (scan.shots < 1) throw std::invalid_argument("evaluate_bias: shots must be >= 1");

    const sim::ShotBatch batch =
        backend.rabi_scan(scan.qubit, bias, scan.widths_ns, scan.shots, seed);

    // Pool every shot, then stride-subsample for the mixture-order study.
    std::vector<IQPoint> pooled;
    pooled.reserve(batch.widths_ns.size() * static_cast<size_t>(batch.shots));
    for (const auto& w : batch.iq) pooled.insert(pooled.end(), w.begin(), w.end());

    std::vector<IQPoint> study;
    const size_t cap = std::max<size_t>(static_cast<size_t>(scan.report_max_points), 100);
    const size_t stride = pooled.size() > cap ? (pooled.size() + cap - 1) / cap : 1;
    study.reserve(pooled.size() / stride + 1);
    for (size_t i = 0; i < pooled.size(); i += stride) study.push_back(pooled[i]);

    Evaluation ev;
    ev.clusters = cluster::cluster_report(study, rng::combine(seed, 0x5eedc10d));

    // the shortest width is overwhelmingly ground state: use its centroid
    // as the reference that labels the mixture components
    size_t shortest = 0;
    for (size_t w = 1; w < batch.widths_ns.size(); ++w)
        if (batch.widths_ns[w] < batch.widths_ns[shortest]) shortest = w;
    IQPoint ref{0.0, 0.0};
    for (const auto& p : batch.iq[shortest]) {
        ref.i += p.i;
        ref.q += p.q;
    }
    ref.i /= static_cast<double>(batch.iq[shortest].size());
    ref.q /= static_cast<double>(batch.iq[shortest].size());
    const int ground = cluster::label_by_reference(ev.clusters.gmm2, ref);

    std::vector<double> sigma;
    ev.p1_by_width.reserve(batch.widths_ns.size());
    sigma.reserve(batch.widths_ns.size());
    for (const auto& w : batch.iq) {
        const auto d = cluster::digitize(w, ev.clusters.gmm2, ground);
        ev.p1_by_width.push_back(d.p1);
        sigma.push_back(fit::binomial_sigma(d.p1, batch.shots));
    }

    try {
        ev.fit = fit::fit_rabi(batch.widths_ns, ev.p1_by_width, sigma);
        ev.fit_ok = true;
        ev.loss = loss_total(ev.fit, ev.clusters, cfg);
    } catch (const Error& e) {
        ev.fit_ok = false;
        ev.failure = e.what();
        ev.loss = LossBreakdown{};
        ev.loss.l_tot = kSentinelLoss;
    }
    return ev;
}

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(
        std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

AutoRabiResult autorabi(const sim::QubitBias& initial, const sim::Backend& backend,
                        const AutoRabiOptions& options) {
    initial.validate();
    if (options.budget < 1) throw std::invalid_argument("autorabi: budget must be >= 1");

    AutoRabiResult res;
    res.started_at = utc_now();
    res.initial_bias = initial;

    rng::Stream seeds(options.seed);
    int eval_counter = 0;

    auto record = [&](const sim::QubitBias& bias, const Evaluation& ev) {
        IterationRecord rec;
        rec.evaluation = eval_counter;
        rec.bias = bias;
        rec.eval = ev;
        if (options.archive) options.archive(rec);
        res.iterations.push_back(std::move(rec));
    };

    const Evaluation first = evaluate_bias(
        initial, backend, options.scan,
        seeds.fork(static_cast<std::uint64_t>(eval_counter)).key(), options.loss);
    ++eval_counter;
    record(initial, first);
    res.initial_loss = first.loss;
    if (!first.fit_ok)
        throw InitFailedError("autorabi: no recognizable oscillation at the initial bias: " +
                              first.failure);

    if (options.budget > 1) {
        // search in normalized coordinates so the optimizer sees a
        // well-scaled box regardless of the physical bracket sizes
        const double lo[3] = {initial.f_q - options.brackets.f_q_ghz,
                              initial.f_r - options.brackets.f_r_ghz,
                              std::max(0.0, initial.a_r - options.brackets.a_r)};
        const double hi[3] = {initial.f_q + options.brackets.f_q_ghz,
                              initial.f_r + options.brackets.f_r_ghz,
                              std::min(1.0, initial.a_r + options.brackets.a_r)};
        for (int i = 0; i < 3; ++i)
            if (!(lo[i] < hi[i]))
                throw std::invalid_argument("autorabi: empty bracket");

        auto to_bias = [&](std::span<const double> u) {
            sim::QubitBias b = initial;
            b.f_q = lo[0] + (hi[0] - lo[0]) * u[0];
            b.f_r = lo[1] + (hi[1] - lo[1]) * u[1];
            b.a_r = lo[2] + (hi[2] - lo[2]) * u[2];
            return b;
        };

        opt::OptProblem prob;
        prob.lower = {0.0, 0.0, 0.0};
        prob.upper = {1.0, 1.0, 1.0};
        prob.x0 = {(initial.f_q - lo[0]) / (hi[0] - lo[0]),
                   (initial.f_r - lo[1]) / (hi[1] - lo[1]),
                   (initial.a_r - lo[2]) / (hi[2] - lo[2])};
        prob.step = {0.25, 0.25, 0.25};
        prob.max_evals = options.budget - 1;
        prob.objective = [&](std::span<const double> u) {
            const sim::QubitBias b = to_bias(u);
            const Evaluation ev = evaluate_bias(
                b, backend, options.scan,
                seeds.fork(static_cast<std::uint64_t>(eval_counter)).key(), options.loss);
            ++eval_counter;
            record(b, ev);
            return ev.loss.l_tot;
        };
        res.trace = opt::minimize(prob);
    }

    // best evaluation wins, the initial one included, so the result can
    // never be worse than the starting point
    size_t best = 0;
    for (size_t i = 1; i < res.iterations.size(); ++i)
        if (res.iterations[i].eval.loss.l_tot < res.iterations[best].eval.loss.l_tot)
            best = i;
    res.final_bias = res.iterations[best].bias;
    res.final_loss = res.iterations[best].eval.loss;
    res.final_eval = res.iterations[best].eval;
    res.finished_at = utc_now();
    return res;
}

} // namespace qcal::ar

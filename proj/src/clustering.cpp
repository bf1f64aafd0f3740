// SPDX-License-Identifier: Apache-2.0
#include "qcal/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "qcal/errors.hpp"
#include "qcal/rng.hpp"

namespace qcal::cluster {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Precomputed per-component quantities for fast density evaluation.
struct CompCache {
    double logw, mx, my;
    double ixx, ixy, iyy; // inverse covariance
    double norm;          // -log(2 pi) - 0.5 log det
};

CompCache make_cache(double w, const std::array<double, 2>& mean,
                     const std::array<double, 3>& cov) {
    const double det = cov[0] * cov[2] - cov[1] * cov[1];
    CompCache c;
    c.logw = std::log(std::max(w, 1e-300));
    c.mx = mean[0];
    c.my = mean[1];
    c.ixx = cov[2] / det;
    c.ixy = -cov[1] / det;
    c.iyy = cov[0] / det;
    c.norm = -kLog2Pi - 0.5 * std::log(det);
    return c;
}

inline double log_gauss(const CompCache& c, double x, double y) {
    const double dx = x - c.mx, dy = y - c.my;
    return c.norm - 0.5 * (c.ixx * dx * dx + 2.0 * c.ixy * dx * dy + c.iyy * dy * dy);
}

struct EmRun {
    GmmModel model;
    bool ok = false;
};

// One EM run from a k-means++/Lloyd start.
EmRun em_once(std::span<const IQPoint> pts, int k, double reg, rng::Sequence& rnd,
              double rel_tol, int max_iters) {
    const int n = static_cast<int>(pts.size());

    // --- k-means++ seeding
    std::vector<std::array<double, 2>> centers;
    centers.reserve(static_cast<size_t>(k));
    {
        const auto& first = pts[rnd.uniform_int(static_cast<std::uint64_t>(n))];
        centers.push_back({first.i, first.q});
        std::vector<double> d2(static_cast<size_t>(n), 0.0);
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (int i = 0; i < n; ++i) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& ctr : centers) {
                    const double dx = pts[static_cast<size_t>(i)].i - ctr[0];
                    const double dy = pts[static_cast<size_t>(i)].q - ctr[1];
                    best = std::min(best, dx * dx + dy * dy);
                }
                d2[static_cast<size_t>(i)] = best;
                total += best;
            }
            if (total <= 0.0) {
                centers.push_back(centers.back());
                continue;
            }
            double target = rnd.uniform() * total, acc = 0.0;
            int pick = n - 1;
            for (int i = 0; i < n; ++i) {
                acc += d2[static_cast<size_t>(i)];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
            centers.push_back({pts[static_cast<size_t>(pick)].i, pts[static_cast<size_t>(pick)].q});
        }
    }

    // --- a few Lloyd iterations to settle the seeding
    std::vector<int> assign(static_cast<size_t>(n), 0);
    for (int it = 0; it < 10; ++it) {
        bool moved = false;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int bj = 0;
            for (int j = 0; j < k; ++j) {
                const double dx = pts[static_cast<size_t>(i)].i - centers[static_cast<size_t>(j)][0];
                const double dy = pts[static_cast<size_t>(i)].q - centers[static_cast<size_t>(j)][1];
                const double d = dx * dx + dy * dy;
                if (d < best) {
                    best = d;
                    bj = j;
                }
            }
            if (assign[static_cast<size_t>(i)] != bj) {
                assign[static_cast<size_t>(i)] = bj;
                moved = true;
            }
        }
        std::vector<double> cx(static_cast<size_t>(k), 0.0), cy(static_cast<size_t>(k), 0.0);
        std::vector<int> cnt(static_cast<size_t>(k), 0);
        for (int i = 0; i < n; ++i) {
            const int j = assign[static_cast<size_t>(i)];
            cx[static_cast<size_t>(j)] += pts[static_cast<size_t>(i)].i;
            cy[static_cast<size_t>(j)] += pts[static_cast<size_t>(i)].q;
            ++cnt[static_cast<size_t>(j)];
        }
        for (int j = 0; j < k; ++j) {
            if (cnt[static_cast<size_t>(j)] == 0) continue; // keep old center
            centers[static_cast<size_t>(j)] = {cx[static_cast<size_t>(j)] / cnt[static_cast<size_t>(j)],
                                               cy[static_cast<size_t>(j)] / cnt[static_cast<size_t>(j)]};
        }
        if (!moved) break;
    }

    // --- initialize mixture from the Lloyd partition
    GmmModel m;
    m.k = k;
    m.weights.assign(static_cast<size_t>(k), 0.0);
    m.means.assign(static_cast<size_t>(k), {0.0, 0.0});
    m.covs.assign(static_cast<size_t>(k), {0.0, 0.0, 0.0});
    {
        std::vector<double> sx(static_cast<size_t>(k), 0.0), sy(static_cast<size_t>(k), 0.0),
            sxx(static_cast<size_t>(k), 0.0), sxy(static_cast<size_t>(k), 0.0),
            syy(static_cast<size_t>(k), 0.0);
        std::vector<int> cnt(static_cast<size_t>(k), 0);
        for (int i = 0; i < n; ++i) {
            const auto j = static_cast<size_t>(assign[static_cast<size_t>(i)]);
            const double x = pts[static_cast<size_t>(i)].i, y = pts[static_cast<size_t>(i)].q;
            sx[j] += x;
            sy[j] += y;
            sxx[j] += x * x;
            sxy[j] += x * y;
            syy[j] += y * y;
            ++cnt[j];
        }
        for (int j = 0; j < k; ++j) {
            const auto ju = static_cast<size_t>(j);
            const double c = std::max(cnt[ju], 1);
            m.weights[ju] = std::max(cnt[ju] / static_cast<double>(n), 1e-8);
            m.means[ju] = {sx[ju] / c, sy[ju] / c};
            m.covs[ju] = {sxx[ju] / c - m.means[ju][0] * m.means[ju][0] + reg,
                          sxy[ju] / c - m.means[ju][0] * m.means[ju][1],
                          syy[ju] / c - m.means[ju][1] * m.means[ju][1] + reg};
            if (m.covs[ju][0] <= 0 || m.covs[ju][0] * m.covs[ju][2] - m.covs[ju][1] * m.covs[ju][1] <= 0)
                m.covs[ju] = {reg, 0.0, reg};
        }
        double wsum = 0.0;
        for (double w : m.weights) wsum += w;
        for (auto& w : m.weights) w /= wsum;
    }

    // --- EM
    std::vector<CompCache> cache(static_cast<size_t>(k));
    std::vector<double> r(static_cast<size_t>(k));
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= max_iters; ++iter) {
        for (int j = 0; j < k; ++j)
            cache[static_cast<size_t>(j)] =
                make_cache(m.weights[static_cast<size_t>(j)], m.means[static_cast<size_t>(j)],
                           m.covs[static_cast<size_t>(j)]);

        std::vector<double> nj(static_cast<size_t>(k), 0.0), sx(static_cast<size_t>(k), 0.0),
            sy(static_cast<size_t>(k), 0.0), sxx(static_cast<size_t>(k), 0.0),
            sxy(static_cast<size_t>(k), 0.0), syy(static_cast<size_t>(k), 0.0);
        double ll = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = pts[static_cast<size_t>(i)].i, y = pts[static_cast<size_t>(i)].q;
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < k; ++j) {
                r[static_cast<size_t>(j)] = cache[static_cast<size_t>(j)].logw +
                                            log_gauss(cache[static_cast<size_t>(j)], x, y);
                mx = std::max(mx, r[static_cast<size_t>(j)]);
            }
            double sum = 0.0;
            for (int j = 0; j < k; ++j) {
                r[static_cast<size_t>(j)] = std::exp(r[static_cast<size_t>(j)] - mx);
                sum += r[static_cast<size_t>(j)];
            }
            ll += mx + std::log(sum);
            for (int j = 0; j < k; ++j) {
                const double rj = r[static_cast<size_t>(j)] / sum;
                const auto ju = static_cast<size_t>(j);
                nj[ju] += rj;
                sx[ju] += rj * x;
                sy[ju] += rj * y;
                sxx[ju] += rj * x * x;
                sxy[ju] += rj * x * y;
                syy[ju] += rj * y * y;
            }
        }

        m.log_likelihood = ll;
        m.n_iters = iter;
        if (std::abs(ll - prev_ll) <= rel_tol * std::abs(ll)) {
            m.converged = true;
            break;
        }
        prev_ll = ll;

        for (int j = 0; j < k; ++j) {
            const auto ju = static_cast<size_t>(j);
            const double njv = std::max(nj[ju], 1e-8);
            m.weights[ju] = std::max(njv / n, 1e-8);
            m.means[ju] = {sx[ju] / njv, sy[ju] / njv};
            m.covs[ju] = {sxx[ju] / njv - m.means[ju][0] * m.means[ju][0] + reg,
                          sxy[ju] / njv - m.means[ju][0] * m.means[ju][1],
                          syy[ju] / njv - m.means[ju][1] * m.means[ju][1] + reg};
            if (m.covs[ju][0] <= 0 || m.covs[ju][0] * m.covs[ju][2] - m.covs[ju][1] * m.covs[ju][1] <= 0)
                m.covs[ju] = {reg, 0.0, reg};
        }
        double wsum = 0.0;
        for (double w : m.weights) wsum += w;
        for (auto& w : m.weights) w /= wsum;
    }

    EmRun out;
    out.model = std::move(m);
    out.ok = std::isfinite(out.model.log_likelihood);
    return out;
}

double data_reg(std::span<const IQPoint> pts) {
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        mx += p.i;
        my += p.q;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double v = 0.0;
    for (const auto& p : pts)
        v += (p.i - mx) * (p.i - mx) + (p.q - my) * (p.q - my);
    v /= (2.0 * static_cast<double>(pts.size()));
    return std::max(1e-6 * v, 1e-12);
}

} // namespace

double GmmModel::log_pdf(const IQPoint& p) const {
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(static_cast<size_t>(k));
    for (int j = 0; j < k; ++j) {
        const auto c = make_cache(weights[static_cast<size_t>(j)], means[static_cast<size_t>(j)],
                                  covs[static_cast<size_t>(j)]);
        terms[static_cast<size_t>(j)] = c.logw + log_gauss(c, p.i, p.q);
        mx = std::max(mx, terms[static_cast<size_t>(j)]);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - mx);
    return mx + std::log(s);
}

std::vector<double> GmmModel::posteriors(const IQPoint& p) const {
    std::vector<double> t(static_cast<size_t>(k));
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
        const auto c = make_cache(weights[static_cast<size_t>(j)], means[static_cast<size_t>(j)],
                                  covs[static_cast<size_t>(j)]);
        t[static_cast<size_t>(j)] = c.logw + log_gauss(c, p.i, p.q);
        mx = std::max(mx, t[static_cast<size_t>(j)]);
    }
    double s = 0.0;
    for (auto& v : t) {
        v = std::exp(v - mx);
        s += v;
    }
    for (auto& v : t) v /= s;
    return t;
}

GmmModel gmm_fit(std::span<const IQPoint> points, int k, std::uint64_t seed, int restarts) {
    if (k < 1 || k > 8) throw std::invalid_argument("gmm_fit: k must be in [1, 8]");
    if (points.size() < static_cast<size_t>(3 * k))
        throw std::invalid_argument("gmm_fit: too few points for requested k");
    if (restarts < 1) throw std::invalid_argument("gmm_fit: restarts must be >= 1");

    const double reg = data_reg(points);
    if (reg <= 1e-12 * 1.0000001) {
        // all points identical (variance ~ 0)
        double v = 0.0;
        for (const auto& p : points)
            v += std::abs(p.i - points[0].i) + std::abs(p.q - points[0].q);
        if (v == 0.0) throw DegenerateDataError("gmm_fit: all points identical");
    }

    // k = 1 has a closed form: single weighted Gaussian.
    if (k == 1) {
        GmmModel m;
        m.k = 1;
        m.weights = {1.0};
        double mx = 0.0, my = 0.0;
        for (const auto& p : points) {
            mx += p.i;
            my += p.q;
        }
        const auto n = static_cast<double>(points.size());
        mx /= n;
        my /= n;
        double cxx = 0.0, cxy = 0.0, cyy = 0.0;
        for (const auto& p : points) {
            cxx += (p.i - mx) * (p.i - mx);
            cxy += (p.i - mx) * (p.q - my);
            cyy += (p.q - my) * (p.q - my);
        }
        m.means = {{mx, my}};
        m.covs = {{cxx / n + reg, cxy / n, cyy / n + reg}};
        m.converged = true;
        m.n_iters = 0;
        const auto cache = make_cache(1.0, m.means[0], m.covs[0]);
        double ll = 0.0;
        for (const auto& p : points) ll += log_gauss(cache, p.i, p.q);
        m.log_likelihood = ll;
        return m;
    }

    rng::Stream stream(seed);
    EmRun best;
    int best_restart = -1;
    for (int rs = 0; rs < restarts; ++rs) {
        rng::Sequence rnd(stream.fork(static_cast<std::uint64_t>(rs)).key());
        EmRun run = em_once(points, k, reg, rnd, 1e-5, 80);
        if (run.ok && (best_restart < 0 || run.model.log_likelihood > best.model.log_likelihood)) {
            best = run;
            best_restart = rs;
        }
    }
    if (best_restart < 0) throw DegenerateDataError("gmm_fit: every EM start collapsed");

    // polish the winning start to full tolerance
    rng::Sequence rnd(stream.fork(static_cast<std::uint64_t>(best_restart)).key());
    EmRun polished = em_once(points, k, reg, rnd, 1e-7, 300);
    return polished.ok ? polished.model : best.model;
}

double bic(const GmmModel& model, std::size_t n) {
    if (n < 2) throw std::invalid_argument("bic: need n >= 2");
    return model.n_params() * std::log(static_cast<double>(n)) - 2.0 * model.log_likelihood;
}

ClusterReport cluster_report(std::span<const IQPoint> points, std::uint64_t seed) {
    if (points.size() < 12)
        throw std::invalid_argument("cluster_report: need at least 12 points");
    rng::Stream stream(seed);
    ClusterReport rep;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 4; ++k) {
        GmmModel m = gmm_fit(points, k, stream.fork(static_cast<std::uint64_t>(k)).key());
        const double b = bic(m, points.size());
        rep.bic_by_k[k] = b;
        if (b < best) {
            best = b;
            rep.best_k = k;
        }
        if (k == 2) rep.gmm2 = std::move(m);
    }
    return rep;
}

int label_by_reference(const GmmModel& gmm2, const IQPoint& ground_ref) {
    if (gmm2.k < 2) throw std::invalid_argument("label_by_reference: need k >= 2");
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int j = 0; j < gmm2.k; ++j) {
        const double dx = gmm2.means[static_cast<size_t>(j)][0] - ground_ref.i;
        const double dy = gmm2.means[static_cast<size_t>(j)][1] - ground_ref.q;
        const double d = dx * dx + dy * dy;
        if (d < bd) {
            bd = d;
            best = j;
        }
    }
    return best;
}

Digitized digitize(std::span<const IQPoint> points, const GmmModel& gmm2,
                   int ground_component) {
    if (gmm2.k != 2) throw std::invalid_argument("digitize: model must have k = 2");
    if (ground_component < 0 || ground_component > 1)
        throw std::invalid_argument("digitize: ground_component must be 0 or 1");

    const int other = 1 - ground_component;
    const auto cg = make_cache(gmm2.weights[static_cast<size_t>(ground_component)],
                               gmm2.means[static_cast<size_t>(ground_component)],
                               gmm2.covs[static_cast<size_t>(ground_component)]);
    const auto ce = make_cache(gmm2.weights[static_cast<size_t>(other)],
                               gmm2.means[static_cast<size_t>(other)],
                               gmm2.covs[static_cast<size_t>(other)]);

    Digitized out;
    out.bits.reserve(points.size());
    long ones = 0;
    for (const auto& p : points) {
        const int bit = log_gauss(ce, p.i, p.q) + ce.logw > log_gauss(cg, p.i, p.q) + cg.logw ? 1 : 0;
        out.bits.push_back(bit);
        ones += bit;
    }
    out.p1 = points.empty() ? 0.0 : static_cast<double>(ones) / static_cast<double>(points.size());
    return out;
}

} // namespace qcal::cluster

// SPDX-License-Identifier: Apache-2.0
#include "qcal/fitters.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>

#include "qcal/errors.hpp"

namespace qcal::fit {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_pi(double a) {
    a = std::fmod(a + std::numbers::pi, kTwoPi);
    if (a < 0) a += kTwoPi;
    return a - std::numbers::pi;
}

// Solve A x = b in place for n <= 8, partial pivoting. Returns false when
// the system is numerically singular.
bool gauss_solve(int n, double* a, double* b) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (std::abs(a[piv * n + col]) < 1e-300) return false;
        if (piv != col) {
            for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
            std::swap(b[col], b[piv]);
        }
        const double d = a[col * n + col];
        for (int r = col + 1; r < n; ++r) {
            const double m = a[r * n + col] / d;
            if (m == 0.0) continue;
            for (int c = col; c < n; ++c) a[r * n + c] -= m * a[col * n + c];
            b[r] -= m * b[col];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= a[r * n + c] * b[c];
        b[r] = s / a[r * n + r];
    }
    return true;
}

struct LmOutcome {
    std::vector<double> p;
    double chi2 = std::numeric_limits<double>::infinity();
    bool converged = false;
    std::vector<double> cov_diag; // diagonal of (J^T W J)^-1 at the optimum
};

// Generic Levenberg-Marquardt. model(p, x, grad) writes d(model)/d(p_j) into
// grad and returns the model value. project() pulls parameters back into
// their valid region after every trial step.
LmOutcome levmar(std::span<const double> x, std::span<const double> y,
                 std::span<const double> sigma, std::vector<double> p,
                 const std::function<double(const std::vector<double>&, double, double*)>& model,
                 const std::function<void(std::vector<double>&)>& project,
                 int max_iter = 300) {
    const int npar = static_cast<int>(p.size());
    const int npts = static_cast<int>(x.size());
    std::vector<double> grad(static_cast<size_t>(npar));

    auto chi2_of = [&](const std::vector<double>& q) {
        double s = 0.0;
        for (int i = 0; i < npts; ++i) {
            const double r = (y[static_cast<size_t>(i)] -
                              model(q, x[static_cast<size_t>(i)], grad.data())) /
                             sigma[static_cast<size_t>(i)];
            s += r * r;
        }
        return s;
    };

    project(p);
    double chi2 = chi2_of(p);
    double lambda = 1e-3;
    int stable = 0;

    std::vector<double> jtj(static_cast<size_t>(npar) * npar);
    std::vector<double> jtr(static_cast<size_t>(npar));
    std::vector<double> a(static_cast<size_t>(npar) * npar), b(static_cast<size_t>(npar));

    for (int iter = 0; iter < max_iter; ++iter) {
        std::fill(jtj.begin(), jtj.end(), 0.0);
        std::fill(jtr.begin(), jtr.end(), 0.0);
        for (int i = 0; i < npts; ++i) {
            const double s = sigma[static_cast<size_t>(i)];
            const double v = model(p, x[static_cast<size_t>(i)], grad.data());
            const double r = (y[static_cast<size_t>(i)] - v) / s;
            for (int j = 0; j < npar; ++j) {
                const double gj = grad[static_cast<size_t>(j)] / s;
                jtr[static_cast<size_t>(j)] += gj * r;
                for (int k = 0; k <= j; ++k)
                    jtj[static_cast<size_t>(j) * npar + k] += gj * grad[static_cast<size_t>(k)] / s;
            }
        }
        for (int j = 0; j < npar; ++j)
            for (int k = j + 1; k < npar; ++k)
                jtj[static_cast<size_t>(j) * npar + k] = jtj[static_cast<size_t>(k) * npar + j];

        bool improved = false;
        for (int attempt = 0; attempt < 12 && !improved; ++attempt) {
            a = jtj;
            for (int j = 0; j < npar; ++j) {
                double d = a[static_cast<size_t>(j) * npar + j];
                if (d <= 0) d = 1e-12;
                a[static_cast<size_t>(j) * npar + j] = d * (1.0 + lambda);
            }
            b = jtr;
            if (gauss_solve(npar, a.data(), b.data())) {
                std::vector<double> trial = p;
                for (int j = 0; j < npar; ++j) trial[static_cast<size_t>(j)] += b[static_cast<size_t>(j)];
                project(trial);
                const double c2 = chi2_of(trial);
                if (std::isfinite(c2) && c2 <= chi2) {
                    const double drop = chi2 - c2;
                    p = std::move(trial);
                    chi2 = c2;
                    lambda = std::max(lambda / 3.0, 1e-12);
                    improved = true;
                    stable = (drop < 1e-12 * std::max(1.0, chi2)) ? stable + 1 : 0;
                }
            }
            if (!improved) lambda *= 4.0;
            if (lambda > 1e14) break;
        }
        if (!improved || stable >= 2) {
            LmOutcome out;
            out.p = p;
            out.chi2 = chi2;
            out.converged = improved || stable >= 2 || iter > 0;
            // covariance diagonal from (J^T W J)^-1 via full solves
            out.cov_diag.assign(static_cast<size_t>(npar), 0.0);
            for (int col = 0; col < npar; ++col) {
                a = jtj;
                std::fill(b.begin(), b.end(), 0.0);
                b[static_cast<size_t>(col)] = 1.0;
                if (gauss_solve(npar, a.data(), b.data()))
                    out.cov_diag[static_cast<size_t>(col)] = std::max(0.0, b[static_cast<size_t>(col)]);
            }
            return out;
        }
    }
    LmOutcome out;
    out.p = p;
    out.chi2 = chi2;
    out.converged = true; // ran out of iterations while still improving: accept
    out.cov_diag.assign(static_cast<size_t>(npar), 0.0);
    return out;
}

// Coarse periodogram peak of weighted, mean-subtracted data.
double periodogram_peak(std::span<const double> x, std::span<const double> y,
                        std::span<const double> sigma) {
    const int n = static_cast<int>(x.size());
    double wsum = 0.0, ymean = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = 1.0 / (sigma[static_cast<size_t>(i)] * sigma[static_cast<size_t>(i)]);
        wsum += w;
        ymean += w * y[static_cast<size_t>(i)];
    }
    ymean /= wsum;

    const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
    const double span = *xmax_it - *xmin_it;
    double dmin = span;
    std::vector<double> xs(x.begin(), x.end());
    std::sort(xs.begin(), xs.end());
    for (size_t i = 1; i < xs.size(); ++i)
        if (xs[i] - xs[i - 1] > 1e-12) dmin = std::min(dmin, xs[i] - xs[i - 1]);

    const double flo = 0.4 / span;
    const double fhi = 0.5 / dmin;
    const int ngrid = 1600;
    double best_f = flo, best_p = -1.0;
    for (int g = 0; g <= ngrid; ++g) {
        const double f = flo + (fhi - flo) * g / ngrid;
        double cs = 0.0, sn = 0.0;
        for (int i = 0; i < n; ++i) {
            const double w = 1.0 / (sigma[static_cast<size_t>(i)] * sigma[static_cast<size_t>(i)]);
            const double ph = kTwoPi * f * x[static_cast<size_t>(i)];
            const double d = w * (y[static_cast<size_t>(i)] - ymean);
            cs += d * std::cos(ph);
            sn += d * std::sin(ph);
        }
        const double pw = cs * cs + sn * sn;
        if (pw > best_p) {
            best_p = pw;
            best_f = f;
        }
    }
    return best_f;
}

void check_inputs(std::span<const double> x, std::span<const double> y,
                  std::span<const double> sigma, size_t min_points) {
    if (x.size() != y.size() || x.size() != sigma.size())
        throw std::invalid_argument("x, y, sigma must have equal length");
    if (x.size() < min_points)
        throw std::invalid_argument("too few points for this fit");
    for (double s : sigma)
        if (!(s > 0.0)) throw std::invalid_argument("sigma entries must be positive");
    for (size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw std::invalid_argument("non-finite data");
}

double weighted_mean(std::span<const double> y, std::span<const double> sigma) {
    double wsum = 0.0, m = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        const double w = 1.0 / (sigma[i] * sigma[i]);
        wsum += w;
        m += w * y[i];
    }
    return m / wsum;
}

double spread(std::span<const double> y) {
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    return *hi - *lo;
}

} // namespace

double binomial_sigma(double p, int shots) {
    if (shots < 1) throw std::invalid_argument("shots must be >= 1");
    const double v = std::max(p * (1.0 - p), 0.0) / shots;
    return std::max(std::sqrt(v), 1e-3);
}

RabiFit fit_rabi(std::span<const double> t, std::span<const double> p1,
                 std::span<const double> sigma) {
    check_inputs(t, p1, sigma, 8);
    if (spread(p1) < 1e-12)
        throw DegenerateDataError("constant p1 trace: no oscillation to fit");

    const double f0 = periodogram_peak(t, p1, sigma);
    const double c0 = weighted_mean(p1, sigma);

    // crude envelope decay estimate from first/last third of |detrended|
    const int n = static_cast<int>(t.size());
    std::vector<size_t> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = static_cast<size_t>(i);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return t[a] < t[b]; });
    const int third = std::max(n / 3, 2);
    double e1 = 0.0, e2 = 0.0, t1 = 0.0, t2 = 0.0;
    for (int i = 0; i < third; ++i) {
        e1 += std::abs(p1[order[static_cast<size_t>(i)]] - c0);
        t1 += t[order[static_cast<size_t>(i)]];
        e2 += std::abs(p1[order[static_cast<size_t>(n - 1 - i)]] - c0);
        t2 += t[order[static_cast<size_t>(n - 1 - i)]];
    }
    double tau0 = 0.0;
    if (e1 > 0 && e2 > 0 && t2 > t1)
        tau0 = std::clamp(std::log(e1 / e2) / ((t2 - t1) / third), 0.0, 0.05);

    double a0 = 0.0;
    for (int i = 0; i < n; ++i) a0 = std::max(a0, std::abs(p1[static_cast<size_t>(i)] - c0));

    auto model = [](const std::vector<double>& q, double x, double* g) {
        const double env = std::exp(-q[2] * x);
        const double ph = kTwoPi * q[3] * x + q[4];
        const double s = std::sin(ph), c = std::cos(ph);
        g[0] = 1.0;
        g[1] = env * s;
        g[2] = -x * q[1] * env * s;
        g[3] = q[1] * env * c * kTwoPi * x;
        g[4] = q[1] * env * c;
        return q[0] + q[1] * env * s;
    };
    // frequencies beyond the sampling Nyquist are meaningless: cap them
    std::vector<double> ts(t.begin(), t.end());
    std::sort(ts.begin(), ts.end());
    double dmin = ts.back() - ts.front();
    for (size_t i = 1; i < ts.size(); ++i)
        if (ts[i] - ts[i - 1] > 1e-12) dmin = std::min(dmin, ts[i] - ts[i - 1]);
    const double f_cap = 0.5 / dmin;
    auto project = [f_cap](std::vector<double>& q) {
        q[2] = std::max(q[2], 0.0);
        q[3] = std::clamp(q[3], 1e-6, f_cap);
    };

    LmOutcome best;
    for (double phi : {-std::numbers::pi / 2.0, 0.0, std::numbers::pi / 2.0, std::numbers::pi}) {
        for (double tau : {tau0, 0.0}) {
            LmOutcome r = levmar(t, p1, sigma, {c0, a0, tau, f0, phi}, model, project);
            if (r.converged && r.chi2 < best.chi2) best = r;
        }
    }
    if (!std::isfinite(best.chi2)) throw FitFailedError("Rabi fit did not converge");

    RabiFit out;
    out.c = best.p[0];
    out.a = best.p[1];
    out.tau = best.p[2];
    out.f = best.p[3];
    out.phi0 = best.p[4];
    if (out.a < 0) {
        out.a = -out.a;
        out.phi0 += std::numbers::pi;
    }
    out.phi0 = wrap_pi(out.phi0);
    out.ndf = n - 5;
    out.chi2 = best.chi2;
    out.chi2_ndf = best.chi2 / out.ndf;

    std::vector<double> sig_sorted(sigma.begin(), sigma.end());
    std::nth_element(sig_sorted.begin(), sig_sorted.begin() + sig_sorted.size() / 2, sig_sorted.end());
    const double med_sigma = sig_sorted[sig_sorted.size() / 2];
    if (out.a < 3.0 * med_sigma / std::sqrt(static_cast<double>(n)))
        throw DegenerateFitError("fitted amplitude indistinguishable from zero");
    if (!(out.f > 0.0)) throw DegenerateFitError("fitted frequency is not positive");
    out.t_x90 = 1.0 / (4.0 * out.f);
    return out;
}

double x90_length(const RabiFit& fit) {
    if (!(fit.f > 0.0)) throw std::invalid_argument("x90_length needs f > 0");
    return 1.0 / (4.0 * fit.f);
}

SineFit fit_sine(std::span<const double> x, std::span<const double> y,
                 std::span<const double> sigma) {
    check_inputs(x, y, sigma, 5);
    if (spread(y) < 1e-12)
        throw DegenerateDataError("constant trace: no oscillation to fit");

    const double f0 = periodogram_peak(x, y, sigma);
    const double c0 = weighted_mean(y, sigma);
    double a0 = 0.0;
    for (size_t i = 0; i < y.size(); ++i) a0 = std::max(a0, std::abs(y[i] - c0));

    auto model = [](const std::vector<double>& q, double xv, double* g) {
        const double ph = kTwoPi * q[2] * xv + q[3];
        const double s = std::sin(ph), c = std::cos(ph);
        g[0] = 1.0;
        g[1] = s;
        g[2] = q[1] * c * kTwoPi * xv;
        g[3] = q[1] * c;
        return q[0] + q[1] * s;
    };
    std::vector<double> xs(x.begin(), x.end());
    std::sort(xs.begin(), xs.end());
    double dmin = xs.back() - xs.front();
    for (size_t i = 1; i < xs.size(); ++i)
        if (xs[i] - xs[i - 1] > 1e-12) dmin = std::min(dmin, xs[i] - xs[i - 1]);
    const double f_cap = 0.5 / dmin;
    auto project = [f_cap](std::vector<double>& q) { q[2] = std::clamp(q[2], 1e-12, f_cap); };

    LmOutcome best;
    for (double phi : {-std::numbers::pi / 2.0, 0.0, std::numbers::pi / 2.0, std::numbers::pi}) {
        LmOutcome r = levmar(x, y, sigma, {c0, a0, f0, phi}, model, project);
        if (r.converged && r.chi2 < best.chi2) best = r;
    }
    if (!std::isfinite(best.chi2)) throw FitFailedError("sine fit did not converge");

    SineFit out;
    out.c = best.p[0];
    out.a = best.p[1];
    out.f = best.p[2];
    out.phi = best.p[3];
    if (out.a < 0) {
        out.a = -out.a;
        out.phi += std::numbers::pi;
    }
    out.phi = wrap_pi(out.phi);
    const int ndf = static_cast<int>(x.size()) - 4;
    out.chi2_ndf = best.chi2 / std::max(ndf, 1);

    std::vector<double> sig_sorted(sigma.begin(), sigma.end());
    std::nth_element(sig_sorted.begin(), sig_sorted.begin() + sig_sorted.size() / 2, sig_sorted.end());
    const double med_sigma = sig_sorted[sig_sorted.size() / 2];
    if (out.a < 3.0 * med_sigma / std::sqrt(static_cast<double>(x.size())))
        throw DegenerateFitError("fitted amplitude indistinguishable from zero");
    return out;
}

namespace {

double sine_extremum(const SineFit& fit, double lo, double hi, double target_phase) {
    if (!(hi > lo)) throw std::invalid_argument("empty search window");
    // 2 pi f x + phi = target_phase + 2 pi k
    const double center = (lo + hi) / 2.0;
    const double x_of = [&] {
        return (target_phase - fit.phi) / (kTwoPi * fit.f);
    }();
    const double period = 1.0 / fit.f;
    const double k0 = std::floor((lo - x_of) / period);
    double best = std::numeric_limits<double>::quiet_NaN();
    for (double k = k0 - 1; k <= (hi - x_of) / period + 1; k += 1.0) {
        const double xx = x_of + k * period;
        if (xx < lo - 1e-12 || xx > hi + 1e-12) continue;
        if (!std::isfinite(best) || std::abs(xx - center) < std::abs(best - center)) best = xx;
    }
    if (!std::isfinite(best))
        throw BracketFailedError("no sine extremum inside the scanned range");
    return std::clamp(best, lo, hi);
}

} // namespace

double sine_argmin(const SineFit& fit, double lo, double hi) {
    return sine_extremum(fit, lo, hi, -std::numbers::pi / 2.0);
}

double sine_argmax(const SineFit& fit, double lo, double hi) {
    return sine_extremum(fit, lo, hi, std::numbers::pi / 2.0);
}

ParabolaFit fit_parabola(std::span<const double> x, std::span<const double> y,
                         std::span<const double> sigma) {
    check_inputs(x, y, sigma, 3);
    std::set<double> distinct(x.begin(), x.end());
    if (distinct.size() < 3)
        throw std::invalid_argument("parabola fit needs at least 3 distinct x");

    double m[9] = {0}, b[3] = {0};
    for (size_t i = 0; i < x.size(); ++i) {
        const double w = 1.0 / (sigma[i] * sigma[i]);
        const double p[3] = {1.0, x[i], x[i] * x[i]};
        for (int r = 0; r < 3; ++r) {
            b[r] += w * p[r] * y[i];
            for (int c = 0; c < 3; ++c) m[r * 3 + c] += w * p[r] * p[c];
        }
    }
    if (!gauss_solve(3, m, b))
        throw DegenerateDataError("singular normal equations in parabola fit");

    ParabolaFit out;
    out.a0 = b[0];
    out.a1 = b[1];
    out.a2 = b[2];
    out.curvature = 2.0 * out.a2;
    if (out.a2 != 0.0) {
        out.vertex_x = -out.a1 / (2.0 * out.a2);
        out.vertex_y = out.a0 - out.a1 * out.a1 / (4.0 * out.a2);
    } else {
        out.vertex_x = std::numeric_limits<double>::quiet_NaN();
        out.vertex_y = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

DecayFit fit_decay(std::span<const double> m, std::span<const double> y,
                   std::span<const double> sigma) {
    check_inputs(m, y, sigma, 3);

    // log-linear initialization from the positive points
    double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int npos = 0;
    for (size_t i = 0; i < m.size(); ++i) {
        if (y[i] <= 0.0) continue;
        ++npos;
        const double w = (y[i] * y[i]) / (sigma[i] * sigma[i]);
        const double ly = std::log(y[i]);
        sw += w;
        sx += w * m[i];
        sy += w * ly;
        sxx += w * m[i] * m[i];
        sxy += w * m[i] * ly;
    }
    if (npos < 2) throw FitFailedError("decay fit needs at least 2 positive survivals");
    const double det = sw * sxx - sx * sx;
    if (std::abs(det) < 1e-300) throw DegenerateDataError("decay fit: degenerate lengths");
    double slope = (sw * sxy - sx * sy) / det;
    double intercept = (sxx * sy - sx * sxy) / det;
    double p0 = std::clamp(std::exp(slope), 1e-6, 1.5);
    double a0 = std::clamp(std::exp(intercept), 1e-6, 1.5);

    auto model = [](const std::vector<double>& q, double xv, double* g) {
        const double pw = std::pow(q[1], xv);
        g[0] = pw;
        g[1] = (xv > 0) ? q[0] * xv * std::pow(q[1], xv - 1.0) : 0.0;
        return q[0] * pw;
    };
    auto project = [](std::vector<double>& q) {
        q[0] = std::clamp(q[0], 1e-9, 2.0);
        q[1] = std::clamp(q[1], 1e-9, 1.2);
    };

    LmOutcome r = levmar(m, y, sigma, {a0, p0}, model, project);
    if (!r.converged || !std::isfinite(r.chi2))
        throw FitFailedError("decay fit did not converge");

    DecayFit out;
    out.amplitude = r.p[0];
    out.p = r.p[1];
    out.amplitude_err = std::sqrt(r.cov_diag[0]);
    out.p_err = std::sqrt(r.cov_diag[1]);
    const int ndf = static_cast<int>(m.size()) - 2;
    out.chi2_ndf = r.chi2 / std::max(ndf, 1);
    if (out.p > 1.0) {
        out.p = 1.0;
        out.clamped = true;
    }
    if (out.amplitude > 1.0) {
        out.amplitude = 1.0;
        out.clamped = true;
    }
    return out;
}

} // namespace qcal::fit

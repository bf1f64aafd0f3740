// SPDX-License-Identifier: Apache-2.0
#include "qcal/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qcal/errors.hpp"

namespace qcal::opt {

namespace {

struct Vertex {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
};

// internal control-flow signal: the evaluation budget ran out mid-step
struct BudgetExhausted {};

} // namespace

OptTrace minimize(const OptProblem& problem) {
    const size_t n = problem.x0.size();
    if (n == 0) throw std::invalid_argument("minimize: empty starting point");
    if (problem.lower.size() != n || problem.upper.size() != n)
        throw std::invalid_argument("minimize: bounds must match dimension");
    if (!problem.objective) throw std::invalid_argument("minimize: missing objective");
    for (size_t i = 0; i < n; ++i)
        if (!(problem.lower[i] < problem.upper[i]))
            throw std::invalid_argument("minimize: lower bound must be below upper bound");
    if (!problem.step.empty() && problem.step.size() != n)
        throw std::invalid_argument("minimize: step size list must match dimension");
    if (problem.max_evals < 1)
        throw std::invalid_argument("minimize: max_evals must be >= 1");

    auto clamp = [&](std::vector<double>& x) {
        for (size_t i = 0; i < n; ++i)
            x[i] = std::clamp(x[i], problem.lower[i], problem.upper[i]);
    };

    OptTrace trace;
    auto eval = [&](const std::vector<double>& x) {
        if (trace.n_evals() >= problem.max_evals) throw BudgetExhausted{};
        double v;
        try {
            v = problem.objective(x);
        } catch (...) {
            v = std::numeric_limits<double>::infinity();
        }
        if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
        trace.evals.push_back({x, v});
        return v;
    };

    // adaptive parameters (scale with dimension)
    const double nd = static_cast<double>(n);
    const double alpha = 1.0;
    const double beta = 1.0 + 2.0 / nd;
    const double gamma = 0.75 - 1.0 / (2.0 * nd);
    const double delta = 1.0 - 1.0 / nd;

    // starting point must evaluate cleanly
    std::vector<Vertex> simplex;
    simplex.reserve(n + 1);
    {
        Vertex v0;
        v0.x = problem.x0;
        clamp(v0.x);
        try {
            v0.f = problem.objective(v0.x);
        } catch (const std::exception& e) {
            throw InitFailedError(std::string("objective failed at the starting point: ") + e.what());
        }
        if (!std::isfinite(v0.f))
            throw InitFailedError("objective is not finite at the starting point");
        trace.evals.push_back({v0.x, v0.f});
        simplex.push_back(std::move(v0));
    }

    auto order = [&]() {
        std::stable_sort(simplex.begin(), simplex.end(),
                         [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
    };

    try {
        for (size_t i = 0; i < n; ++i) {
            Vertex v;
            v.x = simplex[0].x;
            double h = problem.step.empty() ? 0.1 * (problem.upper[i] - problem.lower[i])
                                            : problem.step[i];
            if (h <= 0) h = 0.1 * (problem.upper[i] - problem.lower[i]);
            if (v.x[i] + h > problem.upper[i]) h = -h;
            v.x[i] += h;
            clamp(v.x);
            v.f = eval(v.x);
            simplex.push_back(std::move(v));
        }
        order();

        std::vector<double> centroid(n), cand(n);
        while (trace.n_evals() < problem.max_evals) {
            ++trace.n_iters;

            // centroid of all but the worst vertex
            std::fill(centroid.begin(), centroid.end(), 0.0);
            for (size_t v = 0; v < n; ++v)
                for (size_t i = 0; i < n; ++i) centroid[i] += simplex[v].x[i] / nd;

            const Vertex& worst = simplex[n];
            auto step_point = [&](double coef) {
                for (size_t i = 0; i < n; ++i)
                    cand[i] = centroid[i] + coef * (centroid[i] - worst.x[i]);
                clamp(cand);
                return eval(cand);
            };

            const double fr = step_point(alpha); // reflection
            std::vector<double> xr = cand;

            if (fr < simplex[0].f) {
                const double fe = step_point(alpha * beta); // expansion
                if (fe < fr) {
                    simplex[n].x = cand;
                    simplex[n].f = fe;
                } else {
                    simplex[n].x = std::move(xr);
                    simplex[n].f = fr;
                }
            } else if (fr < simplex[n - 1].f) {
                simplex[n].x = std::move(xr);
                simplex[n].f = fr;
            } else {
                bool shrink = false;
                if (fr < worst.f) {
                    const double fc = step_point(alpha * gamma); // outside contraction
                    if (fc <= fr) {
                        simplex[n].x = cand;
                        simplex[n].f = fc;
                    } else {
                        shrink = true;
                    }
                } else {
                    const double fc = step_point(-gamma); // inside contraction
                    if (fc < worst.f) {
                        simplex[n].x = cand;
                        simplex[n].f = fc;
                    } else {
                        shrink = true;
                    }
                }
                if (shrink) {
                    for (size_t v = 1; v <= n; ++v) {
                        for (size_t i = 0; i < n; ++i)
                            simplex[v].x[i] =
                                simplex[0].x[i] + delta * (simplex[v].x[i] - simplex[0].x[i]);
                        clamp(simplex[v].x);
                        simplex[v].f = eval(simplex[v].x);
                    }
                }
            }
            order();

            // convergence: simplex collapsed in both f and x
            double fspread = 0.0, xspread = 0.0;
            for (size_t v = 1; v <= n; ++v) {
                fspread = std::max(fspread, std::abs(simplex[v].f - simplex[0].f));
                for (size_t i = 0; i < n; ++i)
                    xspread = std::max(xspread, std::abs(simplex[v].x[i] - simplex[0].x[i]));
            }
            if (fspread <= problem.f_tol * (1.0 + std::abs(simplex[0].f)) &&
                xspread <= problem.x_tol) {
                trace.converged = true;
                break;
            }
        }
    } catch (const BudgetExhausted&) {
        // a candidate evaluated just before the cutoff may beat the simplex;
        // the argmin below is taken over the full trace either way
    }

    size_t best = 0;
    for (size_t i = 1; i < trace.evals.size(); ++i)
        if (trace.evals[i].f < trace.evals[best].f) best = i;
    trace.best_x = trace.evals[best].x;
    trace.best_f = trace.evals[best].f;
    trace.termination = trace.converged ? "tolerance" : "budget";
    return trace;
}

} // namespace qcal::opt

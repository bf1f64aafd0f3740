// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qcal::opt {

// Derivative-free minimization problem over a box.
struct OptProblem {
    std::function<double(std::span<const double>)> objective;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<double> x0;
    // initial simplex displacement per dimension; empty = 10% of box width
    std::vector<double> step;
    // hard cap on objective evaluations, the starting point included
    int max_evals = 200;
    double f_tol = 1e-10;
    double x_tol = 1e-10;
};

// one objective evaluation: where, and what it returned
struct OptEval {
    std::vector<double> x;
    double f = 0.0;
};

struct OptTrace {
    // every evaluation in order; never longer than max_evals
    std::vector<OptEval> evals;
    std::vector<double> best_x; // argmin over evals
    double best_f = 0.0;        // min over evals
    int n_iters = 0;            // simplex update rounds completed
    bool converged = false;     // step tolerances met before the budget ran out
    std::string termination;    // "tolerance" or "budget"
    int n_evals() const { return static_cast<int>(evals.size()); }
};

// Adaptive Nelder-Mead with hard componentwise clamping to [lower, upper].
// Deterministic. Throws InitFailedError when the starting point cannot be
// evaluated; later objective failures are treated as +inf.
OptTrace minimize(const OptProblem& problem);

} // namespace qcal::opt

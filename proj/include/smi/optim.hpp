#pragma once

#include <functional>
#include <vector>

namespace smi {

struct SimplexResult {
    std::vector<double> x;
    double fval = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::vector<double> best_history; // best-so-far value per iteration, non-increasing
};

struct SimplexOptions {
    int max_iterations = 400;
    double f_tol = 1e-12;  // absolute spread of simplex values
    double x_tol = 1e-10;  // simplex diameter
    int restarts = 1;      // re-seed around the best point after convergence
};

/// Nelder-Mead downhill simplex with optional restart from the best vertex.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          const std::vector<double>& x0, const std::vector<double>& step,
                          const SimplexOptions& opt = {});

struct LmResult {
    std::vector<double> x;
    double chi2 = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct LmOptions {
    int max_iterations = 200;
    double f_tol = 1e-12;    // relative chi2 improvement
    double lambda0 = 1e-3;
    std::vector<double> jacobian_step; // per-parameter relative FD step (default 1e-7)
};

/// Levenberg-Marquardt on a residual vector with forward-difference Jacobian.
LmResult levenberg_marquardt(
    const std::function<std::vector<double>(const std::vector<double>&)>& residuals,
    const std::vector<double>& x0, const LmOptions& opt = {});

} // namespace smi

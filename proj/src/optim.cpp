#include "smi/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace smi {

namespace {

SimplexResult simplex_once(const std::function<double(const std::vector<double>&)>& f,
                           const std::vector<double>& x0, const std::vector<double>& step,
                           const SimplexOptions& opt, int& evals) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> pts(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step[i];

    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        fv[i] = f(pts[i]);
        ++evals;
    }

    SimplexResult res;
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        // Order vertices by value.
        std::vector<std::size_t> ord(n + 1);
        std::iota(ord.begin(), ord.end(), 0);
        std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = ord.front(), worst = ord.back(), second = ord[n - 1];
        res.best_history.push_back(fv[best]);
        res.iterations = iter + 1;

        double diam = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            diam = std::max(diam, std::abs(pts[worst][i] - pts[best][i]));
        }
        if (std::abs(fv[worst] - fv[best]) < opt.f_tol && diam < opt.x_tol) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t k = 0; k <= n; ++k) {
            if (k == worst) continue;
            for (std::size_t i = 0; i < n; ++i) centroid[i] += pts[k][i] / static_cast<double>(n);
        }

        auto blend = [&](double coef) {
            std::vector<double> p(n);
            for (std::size_t i = 0; i < n; ++i) {
                p[i] = centroid[i] + coef * (pts[worst][i] - centroid[i]);
            }
            return p;
        };

        const auto refl = blend(-1.0);
        const double f_refl = f(refl);
        ++evals;
        if (f_refl < fv[ord[0]]) {
            const auto expa = blend(-2.0);
            const double f_expa = f(expa);
            ++evals;
            if (f_expa < f_refl) {
                pts[worst] = expa;
                fv[worst] = f_expa;
            } else {
                pts[worst] = refl;
                fv[worst] = f_refl;
            }
        } else if (f_refl < fv[second]) {
            pts[worst] = refl;
            fv[worst] = f_refl;
        } else {
            const auto contr = blend(f_refl < fv[worst] ? -0.5 : 0.5);
            const double f_contr = f(contr);
            ++evals;
            if (f_contr < std::min(f_refl, fv[worst])) {
                pts[worst] = contr;
                fv[worst] = f_contr;
            } else {
                // Shrink towards the best vertex.
                for (std::size_t k = 0; k <= n; ++k) {
                    if (k == best) continue;
                    for (std::size_t i = 0; i < n; ++i) {
                        pts[k][i] = pts[best][i] + 0.5 * (pts[k][i] - pts[best][i]);
                    }
                    fv[k] = f(pts[k]);
                    ++evals;
                }
            }
        }
    }

    const auto best_it = std::min_element(fv.begin(), fv.end());
    res.x = pts[static_cast<std::size_t>(best_it - fv.begin())];
    res.fval = *best_it;
    return res;
}

} // namespace

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          const std::vector<double>& x0, const std::vector<double>& step,
                          const SimplexOptions& opt) {
    if (x0.size() != step.size() || x0.empty()) {
        throw std::invalid_argument("nelder_mead: x0/step size mismatch");
    }
    int evals = 0;
    SimplexResult best = simplex_once(f, x0, step, opt, evals);
    for (int r = 0; r < opt.restarts; ++r) {
        std::vector<double> shrunk(step.size());
        for (std::size_t i = 0; i < step.size(); ++i) shrunk[i] = 0.1 * step[i];
        SimplexResult again = simplex_once(f, best.x, shrunk, opt, evals);
        again.best_history.insert(again.best_history.begin(), best.best_history.begin(),
                                  best.best_history.end());
        again.iterations += best.iterations;
        if (again.fval <= best.fval) {
            best = std::move(again);
        }
    }
    best.evaluations = evals;
    // History is reported as best-so-far, so enforce monotonicity across restarts.
    for (std::size_t i = 1; i < best.best_history.size(); ++i) {
        best.best_history[i] = std::min(best.best_history[i], best.best_history[i - 1]);
    }
    return best;
}

LmResult levenberg_marquardt(
    const std::function<std::vector<double>(const std::vector<double>&)>& residuals,
    const std::vector<double>& x0, const LmOptions& opt) {
    const std::size_t np = x0.size();
    std::vector<double> x = x0;
    std::vector<double> r = residuals(x);
    const std::size_t nr = r.size();
    if (nr < np) throw std::invalid_argument("levenberg_marquardt: fewer residuals than parameters");

    auto chi2_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double e : v) s += e * e;
        return s;
    };

    double chi2 = chi2_of(r);
    double lambda = opt.lambda0;

    LmResult res;
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        res.iterations = iter + 1;

        // Forward-difference Jacobian.
        std::vector<std::vector<double>> jac(np, std::vector<double>(nr));
        for (std::size_t j = 0; j < np; ++j) {
            const double rel = opt.jacobian_step.empty() ? 1e-7 : opt.jacobian_step[j];
            const double h = rel * std::max(1.0, std::abs(x[j]));
            auto xp = x;
            xp[j] += h;
            const auto rp = residuals(xp);
            for (std::size_t i = 0; i < nr; ++i) jac[j][i] = (rp[i] - r[i]) / h;
        }

        // Normal equations JtJ + lambda diag(JtJ), Jtr.
        std::vector<std::vector<double>> a(np, std::vector<double>(np, 0.0));
        std::vector<double> g(np, 0.0);
        for (std::size_t j = 0; j < np; ++j) {
            for (std::size_t k = j; k < np; ++k) {
                double s = 0.0;
                for (std::size_t i = 0; i < nr; ++i) s += jac[j][i] * jac[k][i];
                a[j][k] = a[k][j] = s;
            }
            double s = 0.0;
            for (std::size_t i = 0; i < nr; ++i) s += jac[j][i] * r[i];
            g[j] = s;
        }

        bool improved = false;
        for (int attempt = 0; attempt < 12 && !improved; ++attempt) {
            auto m = a;
            for (std::size_t j = 0; j < np; ++j) m[j][j] += lambda * std::max(a[j][j], 1e-30);

            // Gaussian elimination with partial pivoting on m * dx = g.
            std::vector<double> rhs = g;
            std::vector<double> dx(np, 0.0);
            bool singular = false;
            for (std::size_t col = 0; col < np && !singular; ++col) {
                std::size_t piv = col;
                for (std::size_t row = col + 1; row < np; ++row) {
                    if (std::abs(m[row][col]) > std::abs(m[piv][col])) piv = row;
                }
                if (std::abs(m[piv][col]) < 1e-300) {
                    singular = true;
                    break;
                }
                std::swap(m[piv], m[col]);
                std::swap(rhs[piv], rhs[col]);
                for (std::size_t row = col + 1; row < np; ++row) {
                    const double fct = m[row][col] / m[col][col];
                    for (std::size_t k = col; k < np; ++k) m[row][k] -= fct * m[col][k];
                    rhs[row] -= fct * rhs[col];
                }
            }
            if (!singular) {
                for (std::size_t col = np; col-- > 0;) {
                    double s = rhs[col];
                    for (std::size_t k = col + 1; k < np; ++k) s -= m[col][k] * dx[k];
                    dx[col] = s / m[col][col];
                }
                auto xt = x;
                for (std::size_t j = 0; j < np; ++j) xt[j] -= dx[j];
                const auto rt = residuals(xt);
                const double ct = chi2_of(rt);
                if (ct < chi2) {
                    const double rel = (chi2 - ct) / std::max(chi2, 1e-300);
                    x = xt;
                    r = rt;
                    chi2 = ct;
                    lambda = std::max(lambda * 0.3, 1e-12);
                    improved = true;
                    if (rel < opt.f_tol) {
                        res.converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if (!improved || res.converged) {
            res.converged = res.converged || !improved;
            break;
        }
    }

    res.x = x;
    res.chi2 = chi2;
    return res;
}

} // namespace smi

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace smi::testutil {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    LinearFit f;
    const double den = n * sxx - sx * sx;
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (f.slope * x[i] + f.intercept);
        ss_res += e * e;
    }
    const double ss_tot = syy - sy * sy / n;
    f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return f;
}

struct CircleFit {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
    double rms_residual = 0.0;
};

/// Kasa algebraic circle fit: least squares of x^2+y^2 = 2cx*x + 2cy*y + d.
inline CircleFit fit_circle(const std::vector<std::complex<double>>& pts) {
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, sxz = 0, syz = 0, sz = 0;
    const auto n = static_cast<double>(pts.size());
    for (const auto& p : pts) {
        const double x = p.real(), y = p.imag(), z = x * x + y * y;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
        sxz += x * z;
        syz += y * z;
        sz += z;
    }
    // Solve the 3x3 normal system for (2cx, 2cy, d) by Cramer's rule.
    const double a11 = sxx, a12 = sxy, a13 = sx;
    const double a21 = sxy, a22 = syy, a23 = sy;
    const double a31 = sx, a32 = sy, a33 = n;
    const double b1 = sxz, b2 = syz, b3 = sz;
    auto det3 = [](double m11, double m12, double m13, double m21, double m22, double m23,
                   double m31, double m32, double m33) {
        return m11 * (m22 * m33 - m23 * m32) - m12 * (m21 * m33 - m23 * m31) +
               m13 * (m21 * m32 - m22 * m31);
    };
    const double d0 = det3(a11, a12, a13, a21, a22, a23, a31, a32, a33);
    const double du = det3(b1, a12, a13, b2, a22, a23, b3, a32, a33);
    const double dv = det3(a11, b1, a13, a21, b2, a23, a31, b3, a33);
    const double dw = det3(a11, a12, b1, a21, a22, b2, a31, a32, b3);

    CircleFit f;
    const double u = du / d0, v = dv / d0, w = dw / d0;
    f.cx = 0.5 * u;
    f.cy = 0.5 * v;
    f.radius = std::sqrt(w + f.cx * f.cx + f.cy * f.cy);
    double ss = 0.0;
    for (const auto& p : pts) {
        const double d = std::abs(p - std::complex<double>(f.cx, f.cy)) - f.radius;
        ss += d * d;
    }
    f.rms_residual = std::sqrt(ss / n);
    return f;
}

inline double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

} // namespace smi::testutil

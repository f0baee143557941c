#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <functional>

#include "error.hpp"

namespace wormsim {

namespace detail {

// Bisect until each panel's Kronrod error estimate meets its share of the
// absolute budget; flat panels stop immediately instead of chasing noise.
inline double gk_adapt(const std::function<double(double)>& f, double a, double b, double budget, int depth,
                       double& err_total) {
    double err = 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, a, b, 0, 0.0, &err);
    if (err <= budget || depth == 0) {
        err_total += err;
        return v;
    }
    double m = 0.5 * (a + b);
    return gk_adapt(f, a, m, 0.5 * budget, depth - 1, err_total) +
           gk_adapt(f, m, b, 0.5 * budget, depth - 1, err_total);
}

}  // namespace detail

// Adaptive Gauss-Kronrod with a mixed tolerance abs_tol + rel_tol * |value|.
// Oriented: integrate(f, b, a) == -integrate(f, a, b).
inline double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-10,
                        double abs_tol = 1e-13) {
    if (a == b) return 0.0;
    double err0 = 0.0;
    double coarse = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, a, b, 0, 0.0, &err0);
    double budget = abs_tol + rel_tol * std::abs(coarse);
    double err = 0.0;
    double v = err0 <= budget ? (err = err0, coarse) : detail::gk_adapt(f, a, b, budget, 30, err);
    if (!std::isfinite(v)) throw NumericalError("quadrature produced a non-finite value");
    if (err > 1e-6 * std::max(1.0, std::abs(v))) throw NumericalError("quadrature did not converge");
    return v;
}

}  // namespace wormsim

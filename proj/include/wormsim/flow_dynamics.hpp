#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "quadrature.hpp"
#include "topology.hpp"

namespace wormsim {

using LinkLaw = std::function<double(double)>;

// Path rates of all sources, concatenated in source order.
struct FlowState {
    double t = 0.0;
    std::vector<double> r;
};

struct PathDelays {
    std::vector<double> q;             // flat, aligned with FlowState::r
    std::vector<std::size_t> argmin;   // per source, local path index
};

inline std::size_t min_delay_path(std::span<const double> q) {
    if (q.empty()) throw InputError("no paths");
    std::size_t best = 0;
    for (std::size_t p = 1; p < q.size(); ++p)
        if (q[p] < q[best]) best = p;
    return best;
}

inline PathDelays path_delays(const NetworkSpec& spec, const IncidenceMatrix& A,
                              const std::vector<double>& link_delay) {
    if (link_delay.size() != A.rows) throw InputError("link delay vector length mismatch");
    PathDelays out;
    out.q.assign(A.cols, 0.0);
    for (std::size_t p = 0; p < A.cols; ++p)
        for (std::size_t l = 0; l < A.rows; ++l)
            if (A.at(l, p)) out.q[p] += link_delay[l];
    for (std::size_t i = 0; i < spec.sources.size(); ++i) {
        std::span<const double> qi(out.q.data() + spec.path_offset(i), spec.sources[i].paths.size());
        out.argmin.push_back(min_delay_path(qi));
    }
    return out;
}

// Right-hand side of the flow dynamics: every non-minimal path sheds flow at
// the rate of its delay excess (unless already empty), the minimal path absorbs it.
inline std::vector<double> wardrop_derivative(const NetworkSpec& spec, const std::vector<double>& r,
                                              const std::vector<double>& q) {
    std::vector<double> rd(r.size(), 0.0);
    for (std::size_t i = 0; i < spec.sources.size(); ++i) {
        std::size_t off = spec.path_offset(i);
        std::size_t m = spec.sources[i].paths.size();
        std::size_t pmin = off + min_delay_path(std::span<const double>(q.data() + off, m));
        double absorbed = 0.0;
        for (std::size_t p = off; p < off + m; ++p) {
            if (p == pmin) continue;
            double excess = q[p] - q[pmin];
            rd[p] = (excess > 0 && r[p] <= 0) ? 0.0 : -excess;
            absorbed -= rd[p];
        }
        rd[pmin] = absorbed;
    }
    return rd;
}

inline FlowState wardrop_step(const NetworkSpec& spec, const FlowState& state, const PathDelays& q, double dt) {
    if (!(dt > 0)) throw InputError("dt must be > 0");
    auto rd = wardrop_derivative(spec, state.r, q.q);
    FlowState next{state.t + dt, state.r};
    for (std::size_t i = 0; i < spec.sources.size(); ++i) {
        std::size_t off = spec.path_offset(i);
        std::size_t m = spec.sources[i].paths.size();
        double sum = 0.0;
        for (std::size_t p = off; p < off + m; ++p) {
            next.r[p] = std::max(0.0, state.r[p] + dt * rd[p]);
            sum += next.r[p];
        }
        double target = spec.sources[i].rate;
        if (sum > 0) {
            for (std::size_t p = off; p < off + m; ++p) next.r[p] *= target / sum;
        } else {
            for (std::size_t p = off; p < off + m; ++p) next.r[p] = target / m;
        }
    }
    return next;
}

inline bool is_wardrop(const NetworkSpec& spec, const FlowState& state, const PathDelays& q, double tol) {
    for (std::size_t i = 0; i < spec.sources.size(); ++i) {
        std::size_t off = spec.path_offset(i);
        std::size_t m = spec.sources[i].paths.size();
        double qmin = *std::min_element(q.q.begin() + off, q.q.begin() + off + m);
        for (std::size_t p = off; p < off + m; ++p)
            if (state.r[p] > tol && q.q[p] > qmin + tol) return false;
    }
    return true;
}

inline bool feasible(const NetworkSpec& spec, const std::vector<double>& r, double rel_tol = 1e-9) {
    for (std::size_t i = 0; i < spec.sources.size(); ++i) {
        std::size_t off = spec.path_offset(i);
        double sum = 0.0;
        for (std::size_t p = off; p < off + spec.sources[i].paths.size(); ++p) {
            if (r[p] < 0) return false;
            sum += r[p];
        }
        if (std::abs(sum - spec.sources[i].rate) > rel_tol * spec.sources[i].rate) return false;
    }
    return true;
}

// Euclidean projection onto {x >= 0, sum x = total}.
inline std::vector<double> project_simplex(const std::vector<double>& v, double total) {
    std::vector<double> u(v);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        cum += u[k];
        double t = (cum - total) / static_cast<double>(k + 1);
        if (u[k] - t > 0) theta = t;
    }
    std::vector<double> out(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = std::max(0.0, v[k] - theta);
    return out;
}

inline double link_potential(const LinkLaw& f, double r) {
    return integrate(f, 0.0, r);
}

// Sum over links of the integral of the delay law up to the link rate.
inline double potential(const IncidenceMatrix& A, const std::vector<LinkLaw>& laws, const std::vector<double>& r) {
    auto rl = link_rates(A, r);
    double s = 0.0;
    for (std::size_t l = 0; l < rl.size(); ++l) s += link_potential(laws[l], rl[l]);
    return s;
}

inline void check_nondecreasing(const LinkLaw& f, double upper, const std::string& what, std::size_t grid = 1000) {
    double prev = f(0.0);
    for (std::size_t k = 1; k <= grid; ++k) {
        double v = f(upper * static_cast<double>(k) / static_cast<double>(grid));
        if (v < prev - 1e-12 * std::max(1.0, std::abs(prev)))
            throw ModelError(what + ": delay law decreases with load");
        prev = v;
    }
}

struct OracleOptions {
    double tol = 1e-10;        // stop when the projected-gradient residual falls below this
    std::size_t max_iter = 2000000;
    double step0 = 0.0;        // 0 = derive from a slope estimate of the laws
    double half_life = 1e5;    // step_k = step0 / (1 + k / half_life)
};

struct OracleResult {
    std::vector<double> r;
    std::vector<double> link_rates;
    std::vector<double> q;
    double objective = 0.0;
    std::size_t iterations = 0;
};

// Independent route to the equilibrium: minimise the potential over the
// product of simplices by projected gradient descent.
inline OracleResult equilibrium_oracle(const NetworkSpec& spec, const std::vector<LinkLaw>& laws,
                                       const OracleOptions& opt = {}) {
    validate(spec);
    auto A = build_incidence(spec);
    if (laws.size() != A.rows) throw InputError("one delay law per link required");

    double total = 0.0;
    for (const auto& s : spec.sources) total += s.rate;
    double slope = 0.0;
    for (std::size_t l = 0; l < laws.size(); ++l) {
        check_nondecreasing(laws[l], total, "link " + std::to_string(spec.links[l].id));
        const std::size_t n = 1000;
        double prev = laws[l](0.0);
        for (std::size_t k = 1; k <= n; ++k) {
            double x = total * static_cast<double>(k) / n;
            double v = laws[l](x);
            slope = std::max(slope, (v - prev) / (total / n));
            prev = v;
        }
    }
    std::size_t max_len = 1, max_share = 1;
    for (std::size_t p = 0; p < A.cols; ++p) {
        std::size_t c = 0;
        for (std::size_t l = 0; l < A.rows; ++l) c += A.at(l, p);
        max_len = std::max(max_len, c);
    }
    for (std::size_t l = 0; l < A.rows; ++l) {
        std::size_t c = 0;
        for (std::size_t p = 0; p < A.cols; ++p) c += A.at(l, p);
        max_share = std::max(max_share, c);
    }
    double step0 = opt.step0 > 0 ? opt.step0 : 0.5 / std::max(1e-9, slope * max_len * max_share);

    FlowState s;
    for (const auto& src : spec.sources)
        for (std::size_t p = 0; p < src.paths.size(); ++p) s.r.push_back(src.rate / src.paths.size());

    auto delays_at = [&](const std::vector<double>& r) {
        auto rl = link_rates(A, r);
        std::vector<double> d(rl.size());
        for (std::size_t l = 0; l < rl.size(); ++l) d[l] = laws[l](rl[l]);
        return path_delays(spec, A, d);
    };

    for (std::size_t k = 0; k < opt.max_iter; ++k) {
        double eta = step0 / (1.0 + static_cast<double>(k) / opt.half_life);
        auto q = delays_at(s.r);
        std::vector<double> next(s.r.size());
        double resid = 0.0;
        for (std::size_t i = 0; i < spec.sources.size(); ++i) {
            std::size_t off = spec.path_offset(i);
            std::size_t m = spec.sources[i].paths.size();
            std::vector<double> v(m);
            for (std::size_t p = 0; p < m; ++p) v[p] = s.r[off + p] - eta * q.q[off + p];
            auto proj = project_simplex(v, spec.sources[i].rate);
            for (std::size_t p = 0; p < m; ++p) {
                next[off + p] = proj[p];
                resid = std::max(resid, std::abs(proj[p] - s.r[off + p]) / eta);
            }
        }
        s.r = std::move(next);
        if (resid < opt.tol) {
            OracleResult out;
            out.r = s.r;
            out.link_rates = link_rates(A, s.r);
            out.q = delays_at(s.r).q;
            out.objective = potential(A, laws, s.r);
            out.iterations = k + 1;
            return out;
        }
    }
    throw NumericalError("equilibrium oracle did not converge within the iteration budget");
}

}  // namespace wormsim

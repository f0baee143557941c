#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "composition.hpp"
#include "error.hpp"
#include "flow_dynamics.hpp"
#include "quadrature.hpp"

namespace wormsim {

struct StorageEval {
    std::string block;
    std::vector<double> t;
    std::vector<double> V;
    std::vector<double> supply;  // cumulative integral of u^T y
    double max_violation = -std::numeric_limits<double>::infinity();  // max of dV/dt - u^T y
    std::size_t violations = 0;
    double min_storage = std::numeric_limits<double>::infinity();
    double min_margin = std::numeric_limits<double>::infinity();      // dissipation, NaN when not tracked
    double tol = 0.0;

    bool passed() const { return violations == 0; }
};

inline double v1_storage(const std::vector<double>& q_star, const std::vector<double>& r,
                         const std::vector<double>& r_star) {
    if (q_star.size() != r.size() || r.size() != r_star.size()) throw InputError("storage vectors differ in length");
    double v = 0.0;
    for (std::size_t p = 0; p < r.size(); ++p) v += q_star[p] * (r[p] - r_star[p]);
    return v;
}

inline double v2_storage(const LinkLaw& f, double z, double z_star) {
    double fs = f(z_star);
    return integrate([&](double s) { return f(s + z_star) - fs; }, 0.0, z - z_star);
}

// Storage of the leash block; `added` maps a link rate to the leash delay.
inline double v3_storage(const LinkLaw& added, double r, double r_star) {
    double ms = added(r_star);
    return integrate([&](double s) { return added(s) - ms; }, r_star, r);
}

// In-band tunnel storage: a rate integral at the current tunnel length plus
// a compromise integral weighted by the equilibrium potential.
inline double vl_inband_storage(const BetaCurve& curve, const LinkLaw& f, double r, double r_star, double x,
                                double x_star, double penalty_now = 0.0, double penalty_star = 0.0) {
    double bx = beta_at(curve, x);
    double bs = beta_at(curve, x_star);
    double fs = f(r_star);
    double dk = penalty_now - penalty_star;
    double first = integrate([&](double s) { return bx * f(s) - bs * fs + dk; }, r_star, r);
    double h_star = integrate(f, 0.0, r_star);
    // Inner integral of beta' along the piecewise-linear fit is a difference of values.
    double second = h_star * (bx - bs);
    return first + second;
}

// Discrete passivity check: (V[k+1] - V[k]) - s[k] <= tol * dt for every step,
// with s[k] the supply delivered over the step.
inline StorageEval audit_trajectory(const std::string& block, const std::vector<double>& t,
                                    const std::vector<double>& V, const std::vector<double>& step_supply,
                                    double tol) {
    if (t.size() != V.size() || (V.size() > 0 && step_supply.size() + 1 != V.size()))
        throw AuditError(block + ": storage and supply series are misaligned");
    StorageEval ev;
    ev.block = block;
    ev.t = t;
    ev.V = V;
    ev.tol = tol;
    ev.supply.assign(V.size(), 0.0);
    for (double v : V) {
        if (!std::isfinite(v)) throw AuditError(block + ": non-finite storage value");
        ev.min_storage = std::min(ev.min_storage, v);
    }
    for (std::size_t k = 0; k + 1 < V.size(); ++k) {
        double dt = t[k + 1] - t[k];
        if (!(dt > 0)) throw AuditError(block + ": timestamps are not increasing");
        ev.supply[k + 1] = ev.supply[k] + step_supply[k];
        double rate = (V[k + 1] - V[k] - step_supply[k]) / dt;
        ev.max_violation = std::max(ev.max_violation, rate);
        if (rate > tol) ++ev.violations;
    }
    if (V.size() < 2) ev.max_violation = 0.0;
    return ev;
}

struct AuditEquilibrium {
    std::vector<double> r;        // path rates
    std::vector<double> z;        // link rates
    std::vector<double> q;        // path delays
    std::vector<double> x;        // per link limiting compromise fraction (0 elsewhere)
    std::vector<char> indicator;  // per link converged detection indicator
};

namespace detail {

inline LinkLaw base_law(const SystemAssembly& as, std::size_t l) {
    const double ceiling = as.sim.delay_ceiling;
    if (auto* v = std::get_if<ValidBranch>(&as.models[l])) {
        auto law = v->law;
        return [law, ceiling](double r) { return std::min(valid_link_delay(r, law), ceiling); };
    }
    if (auto* o = std::get_if<OobBranch>(&as.models[l])) {
        auto law = o->law;
        return [law, ceiling](double r) {
            double phi = drop_fraction(law.profile, r);
            return phi < 1.0 ? std::min(law.alpha / (1.0 - phi), ceiling) : ceiling;
        };
    }
    auto law = std::get<IbBranch>(as.models[l]).advertised;
    return [law](double r) { return valid_link_delay(r, law); };
}

inline LinkLaw leash_law(const SystemAssembly& as, std::size_t l) {
    auto base = base_law(as, l);
    const auto& ls = as.spec.links[l];
    auto policy = as.leash;
    auto kind = ls.kind;
    double alpha = ls.alpha, slack = ls.slack, ceiling = as.sim.delay_ceiling;
    return [=](double r) {
        double b = base(r);
        double p = leash_drop_prob(kind, r, policy, alpha, slack);
        if (p >= 1.0) return ceiling - b;
        return std::min(b + leash_added_delay(p, b), ceiling) - b;
    };
}

inline const BetaMode* beta_mode(const SystemAssembly& as, std::size_t l) {
    auto* ibm = std::get_if<IbBranch>(&as.models[l]);
    return ibm ? std::get_if<BetaMode>(&ibm->mode) : nullptr;
}

inline std::vector<double> nominal_rates(const SystemAssembly& as, const TraceRow& row) {
    return link_rates(as.A, row.r);
}

}  // namespace detail

// Equilibrium the audit shifts around: the oracle on the deterministic total
// laws, with detection indicators frozen at their final trace values.
inline AuditEquilibrium audit_equilibrium(const SystemAssembly& as, const SimTrace& tr) {
    if (tr.rows.empty()) throw AuditError("empty trace");
    const auto L = as.spec.links.size();
    AuditEquilibrium eq;
    eq.x.assign(L, 0.0);
    eq.indicator.assign(L, 0);
    const auto& last = tr.rows.back();
    if (last.detect.size() != L) throw AuditError("trace link columns do not match the scenario");
    std::vector<LinkLaw> laws;
    for (std::size_t l = 0; l < L; ++l) {
        SystemAssembly plain = as;
        plain.detect_on[l] = 0;
        auto law = total_link_law(plain, l);
        if (as.detect_on[l] && last.detect[l]) {
            eq.indicator[l] = 1;
            double k = as.detector.penalty;
            laws.push_back([law, k](double r) { return law(r) + k; });
        } else {
            laws.push_back(law);
        }
        if (auto* bm = detail::beta_mode(as, l)) eq.x[l] = compromise_limit(*bm, as.sim.dt);
    }
    auto o = equilibrium_oracle(as.spec, laws);
    eq.r = o.r;
    eq.z = o.link_rates;
    eq.q = o.q;
    return eq;
}

// Supply over a step whose input is constant: the output is integrated
// against the state increment with Simpson's rule.
inline double simpson_supply(double y0, double ymid, double y1, double dz) {
    return dz * (y0 + 4.0 * ymid + y1) / 6.0;
}

inline std::vector<double> row_times(const SimTrace& tr) {
    std::vector<double> t;
    for (const auto& row : tr.rows) t.push_back(row.t);
    return t;
}

// Flow allocation block: input q* - q, output rdot.
inline StorageEval audit_flow_block(const SystemAssembly&, const SimTrace& tr, const AuditEquilibrium& eq,
                                    double tol) {
    std::vector<double> V, s;
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < tr.rows.size(); ++k) {
        const auto& row = tr.rows[k];
        if (row.r.size() != eq.r.size()) throw AuditError("trace path columns do not match the scenario");
        V.push_back(v1_storage(eq.q, row.r, eq.r));
        if (k + 1 < tr.rows.size()) {
            const auto& nx = tr.rows[k + 1];
            double sup = 0.0, diss = 0.0;
            for (std::size_t p = 0; p < row.r.size(); ++p) {
                double dr = nx.r[p] - row.r[p];
                sup += (eq.q[p] - row.q[p]) * dr;
                diss -= row.q[p] * dr;
            }
            s.push_back(sup);
            margin = std::min(margin, diss / (nx.t - row.t));
        }
    }
    auto ev = audit_trajectory("flow", row_times(tr), V, s, tol);
    ev.min_margin = tr.rows.size() > 1 ? margin : 0.0;
    return ev;
}

// Link delay block over valid and out-of-band links: input zdot, output f(z) - f(z*).
inline StorageEval audit_link_block(const SystemAssembly& as, const SimTrace& tr, const AuditEquilibrium& eq,
                                    double tol) {
    const auto L = as.spec.links.size();
    std::vector<LinkLaw> f(L);
    std::vector<char> use(L, 0);
    for (std::size_t l = 0; l < L; ++l) {
        if (std::holds_alternative<IbBranch>(as.models[l])) continue;
        f[l] = detail::base_law(as, l);
        use[l] = 1;
    }
    std::vector<double> V, s;
    std::vector<double> prev_z, prev_y;
    for (std::size_t k = 0; k < tr.rows.size(); ++k) {
        auto z = detail::nominal_rates(as, tr.rows[k]);
        std::vector<double> y(L, 0.0);
        double v = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            if (!use[l]) continue;
            v += v2_storage(f[l], z[l], eq.z[l]);
            y[l] = f[l](z[l]) - f[l](eq.z[l]);
        }
        V.push_back(v);
        if (k > 0) {
            double sup = 0.0;
            for (std::size_t l = 0; l < L; ++l) {
                if (!use[l]) continue;
                double ym = f[l](0.5 * (z[l] + prev_z[l])) - f[l](eq.z[l]);
                sup += simpson_supply(prev_y[l], ym, y[l], z[l] - prev_z[l]);
            }
            s.push_back(sup);
        }
        prev_z = std::move(z);
        prev_y = std::move(y);
    }
    auto ev = audit_trajectory("link", row_times(tr), V, s, tol);
    ev.min_margin = std::numeric_limits<double>::quiet_NaN();
    return ev;
}

// Leash block over links carrying a leash: input rdot_l, output added(r) - added(r*).
inline StorageEval audit_leash_block(const SystemAssembly& as, const SimTrace& tr, const AuditEquilibrium& eq,
                                     double tol) {
    const auto L = as.spec.links.size();
    std::vector<LinkLaw> m(L);
    for (std::size_t l = 0; l < L; ++l)
        if (as.leash_on[l]) m[l] = detail::leash_law(as, l);
    std::vector<double> V, s;
    std::vector<double> prev_z, prev_y;
    for (std::size_t k = 0; k < tr.rows.size(); ++k) {
        auto z = detail::nominal_rates(as, tr.rows[k]);
        std::vector<double> y(L, 0.0);
        double v = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            if (!as.leash_on[l]) continue;
            v += v3_storage(m[l], z[l], eq.z[l]);
            y[l] = m[l](z[l]) - m[l](eq.z[l]);
        }
        V.push_back(v);
        if (k > 0) {
            double sup = 0.0;
            for (std::size_t l = 0; l < L; ++l) {
                if (!as.leash_on[l]) continue;
                double ym = m[l](0.5 * (z[l] + prev_z[l])) - m[l](eq.z[l]);
                sup += simpson_supply(prev_y[l], ym, y[l], z[l] - prev_z[l]);
            }
            s.push_back(sup);
        }
        prev_z = std::move(z);
        prev_y = std::move(y);
    }
    auto ev = audit_trajectory("leash", row_times(tr), V, s, tol);
    ev.min_margin = std::numeric_limits<double>::quiet_NaN();
    return ev;
}

// In-band tunnels driven by a beta curve.
inline StorageEval audit_inband_block(const SystemAssembly& as, const SimTrace& tr, const AuditEquilibrium& eq,
                                      double tol) {
    const auto L = as.spec.links.size();
    std::vector<std::size_t> links;
    for (std::size_t l = 0; l < L; ++l)
        if (detail::beta_mode(as, l)) links.push_back(l);
    if (links.size() > 1) throw AuditError("trace records one compromise fraction; audit supports one in-band tunnel");
    std::vector<double> V, s;
    double prev_y = 0.0, prev_z = 0.0, prev_x = 0.0;
    for (std::size_t k = 0; k < tr.rows.size(); ++k) {
        const auto& row = tr.rows[k];
        double v = 0.0, y = 0.0, z = 0.0, ym = 0.0;
        if (!links.empty()) {
            auto l = links.front();
            const auto& bm = *detail::beta_mode(as, l);
            auto f = detail::base_law(as, l);
            z = detail::nominal_rates(as, row)[l];
            double pen = row.detect[l] ? as.detector.penalty : 0.0;
            double pen_star = eq.indicator[l] ? as.detector.penalty : 0.0;
            double ref = beta_at(bm.curve, eq.x[l]) * f(eq.z[l]) - pen_star;
            v = vl_inband_storage(bm.curve, f, z, eq.z[l], row.x_compromise, eq.x[l], pen, pen_star);
            y = beta_at(bm.curve, row.x_compromise) * f(z) + pen - ref;
            if (k > 0) {
                // Indicator held over the step, as the simulator does.
                double pen_prev = tr.rows[k - 1].detect[l] ? as.detector.penalty : 0.0;
                double xm = 0.5 * (row.x_compromise + prev_x), zm = 0.5 * (z + prev_z);
                ym = beta_at(bm.curve, xm) * f(zm) + pen_prev - ref;
                double y_end = beta_at(bm.curve, row.x_compromise) * f(z) + pen_prev - ref;
                s.push_back(simpson_supply(prev_y, ym, y_end, z - prev_z));
            }
            prev_x = row.x_compromise;
        } else if (k > 0) {
            s.push_back(0.0);
        }
        V.push_back(v);
        prev_y = y;
        prev_z = z;
    }
    auto ev = audit_trajectory("inband", row_times(tr), V, s, tol);
    ev.min_margin = std::numeric_limits<double>::quiet_NaN();
    return ev;
}

// Sum of block storages must not increase (beyond tol * dt per step).
inline StorageEval audit_composite(const std::vector<StorageEval>& blocks, double tol) {
    if (blocks.empty()) throw AuditError("no blocks to compose");
    std::vector<double> V(blocks.front().V.size(), 0.0);
    for (const auto& b : blocks) {
        if (b.V.size() != V.size()) throw AuditError("block storages have different lengths");
        for (std::size_t k = 0; k < V.size(); ++k) V[k] += b.V[k];
    }
    std::vector<double> zero(V.empty() ? 0 : V.size() - 1, 0.0);
    auto ev = audit_trajectory("composite", blocks.front().t, V, zero, tol);
    ev.min_margin = std::numeric_limits<double>::quiet_NaN();
    return ev;
}

inline bool has_inband_beta(const SystemAssembly& as) {
    for (std::size_t l = 0; l < as.models.size(); ++l)
        if (detail::beta_mode(as, l)) return true;
    return false;
}

// Every block the scenario contains, followed by the composite storage.
inline std::vector<StorageEval> audit_all(const SystemAssembly& as, const SimTrace& tr, double tol) {
    for (std::size_t l = 0; l < as.models.size(); ++l) {
        auto* ibm = std::get_if<IbBranch>(&as.models[l]);
        if (ibm && std::holds_alternative<RerouteMode>(ibm->mode))
            throw AuditError("rerouting tunnels have no storage function to audit");
    }
    auto eq = audit_equilibrium(as, tr);
    std::vector<StorageEval> out;
    out.push_back(audit_flow_block(as, tr, eq, tol));
    out.push_back(audit_link_block(as, tr, eq, tol));
    if (std::any_of(as.leash_on.begin(), as.leash_on.end(), [](char c) { return c != 0; }))
        out.push_back(audit_leash_block(as, tr, eq, tol));
    if (has_inband_beta(as)) out.push_back(audit_inband_block(as, tr, eq, tol));
    out.push_back(audit_composite(out, tol));
    return out;
}

}  // namespace wormsim

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "topology.hpp"

namespace wormsim {

// Overflow probability of an M/M/1/K queue at utilization rho.
inline double mm1k_drop(double rho, int queue_capacity) {
    if (rho < 0 || std::isnan(rho)) throw InputError("utilization must be >= 0");
    if (queue_capacity < 1) throw InputError("queue_capacity must be >= 1");
    const int K = queue_capacity;
    if (rho == 0) return 0.0;
    if (std::isinf(rho)) return 1.0;
    if (rho == 1.0) return 1.0 / (K + 1);
    // rho^K (1 - rho) / (1 - rho^(K+1)), written to stay accurate near rho = 1.
    double lr = std::log1p(rho - 1.0);
    if (rho > 1.0) {
        double inv = -lr;  // log(1/rho) < 0
        return (1.0 - 1.0 / rho) / -std::expm1((K + 1) * inv);
    }
    return std::exp(K * lr) * (1.0 - rho) / -std::expm1((K + 1) * lr);
}

struct ValidLinkLaw {
    double capacity = 1.0;
    double alpha = 1.0;
    int queue_capacity = 5;

    double operator()(double r) const;
};

inline double valid_link_delay(double r, const ValidLinkLaw& law) {
    if (r < 0) throw InputError("link rate must be >= 0");
    double pd = mm1k_drop(r / law.capacity, law.queue_capacity);
    if (pd >= 1.0) return std::numeric_limits<double>::infinity();
    return law.alpha / (1.0 - pd);
}

inline double ValidLinkLaw::operator()(double r) const { return valid_link_delay(r, *this); }

inline double sim_drop_profile(double r) {
    if (r < 0) throw InputError("link rate must be >= 0");
    return r > 1.0 ? 1.0 - 1.0 / r : 0.0;
}

struct NoDrop {};
struct SimProfile {};
struct ConstantDrop {
    double phi = 0.0;
};
// Low-latency until the carried flow exceeds `threshold`, then drops with `prob`.
struct ThresholdDrop {
    double threshold = 5.0;
    double prob = 0.9;
};

using DropProfile = std::variant<NoDrop, SimProfile, ConstantDrop, ThresholdDrop>;

inline double drop_fraction(const DropProfile& profile, double r) {
    struct V {
        double r;
        double operator()(const NoDrop&) const { return 0.0; }
        double operator()(const SimProfile&) const { return sim_drop_profile(r); }
        double operator()(const ConstantDrop& c) const { return c.phi; }
        double operator()(const ThresholdDrop& t) const { return r > t.threshold ? t.prob : 0.0; }
    };
    return std::visit(V{r}, profile);
}

struct OobWormholeLaw {
    double alpha = 2.0;
    DropProfile profile = SimProfile{};

    double operator()(double r) const;
};

inline double oob_delay(double r, const OobWormholeLaw& law) {
    if (r < 0) throw InputError("link rate must be >= 0");
    double phi = drop_fraction(law.profile, r);
    if (phi >= 1.0) throw SaturationError("wormhole drop fraction reached 1");
    return law.alpha / (1.0 - phi);
}

inline double OobWormholeLaw::operator()(double r) const { return oob_delay(r, *this); }

// Delay saving the wormhole W1->W2 offers source i over its shortest legitimate route.
inline double delta_margin(const NetworkSpec& spec, std::size_t source, const std::string& w1,
                           const std::string& w2) {
    const auto& s = spec.sources.at(source);
    auto d_sd = shortest_path_len(spec, s.node, s.dest, false);
    auto d_sw = shortest_path_len(spec, s.node, w1, false);
    auto d_wd = shortest_path_len(spec, w2, s.dest, false);
    if (!d_sd || !d_sw || !d_wd) throw InputError("wormhole margin needs reachable nodes");
    return spec.hop_delay * (*d_sd - (*d_sw + *d_wd));
}

struct AffineUtility {
    double intercept = 0.0;
    double slope = 0.0;
    double operator()(double r) const { return intercept + slope * r; }
};

struct AdversaryPlan {
    std::vector<double> margins;     // sorted, descending
    std::vector<double> rates;       // aligned with margins
    std::vector<double> candidates;  // gamma_i (negative ones kept but never chosen)
    std::vector<double> objectives;  // NaN for discarded candidates
    double alpha = 0.0;
    double epsilon = 0.01;
    AffineUtility utility;
    double phi_star = 0.0;
    double flow_star = 0.0;
};

// Steady-state flow the wormhole attracts when it drops a fraction phi:
// every source whose margin beats the inflated tunnel delay.
inline double attracted_flow(const std::vector<double>& margins, const std::vector<double>& rates, double alpha,
                             double phi) {
    if (phi >= 1.0) return 0.0;
    double p = alpha / (1.0 - phi);
    double total = 0.0;
    for (std::size_t k = 0; k < margins.size(); ++k)
        if (p < margins[k]) total += rates[k];
    return total;
}

inline double plan_objective(const AdversaryPlan& plan, double phi) {
    double r = attracted_flow(plan.margins, plan.rates, plan.alpha, phi);
    return r * phi + plan.utility(r);
}

inline AdversaryPlan optimal_drop_rate(std::vector<double> margins, std::vector<double> rates, double alpha,
                                       AffineUtility utility = {}, double epsilon = 0.01) {
    if (margins.size() != rates.size()) throw InputError("margins and rates differ in length");
    if (!(alpha > 0)) throw InputError("alpha must be > 0");
    if (!(epsilon > 0)) throw InputError("epsilon must be > 0");
    for (double r : rates)
        if (r < 0) throw InputError("negative source rate");

    std::vector<std::size_t> order(margins.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return margins[a] > margins[b]; });

    AdversaryPlan plan;
    plan.alpha = alpha;
    plan.epsilon = epsilon;
    plan.utility = utility;
    for (auto k : order) {
        plan.margins.push_back(margins[k]);
        plan.rates.push_back(rates[k]);
    }

    double best = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (double d : plan.margins) {
        double g = d > 0 ? 1.0 - alpha / d - epsilon : -std::numeric_limits<double>::infinity();
        plan.candidates.push_back(g);
        if (!(g >= 0 && g < 1)) {
            plan.objectives.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        double obj = plan_objective(plan, g);
        plan.objectives.push_back(obj);
        double tie = 1e-12 * std::max(1.0, std::abs(best));
        if (!any || obj > best + tie || (std::abs(obj - best) <= tie && g > plan.phi_star)) {
            best = obj;
            plan.phi_star = g;
            any = true;
        }
    }
    if (!any) {
        plan.phi_star = 0.0;
        plan.flow_star = 0.0;
        return plan;
    }
    plan.flow_star = attracted_flow(plan.margins, plan.rates, alpha, plan.phi_star);
    return plan;
}

}  // namespace wormsim

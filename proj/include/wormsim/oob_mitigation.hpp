#pragma once

#include <cmath>
#include <limits>
#include <variant>

#include "error.hpp"
#include "topology.hpp"

namespace wormsim {

struct ConstantDmax {
    double value = 0.1;
};

// Expiry window shrinking with load: reference - 1 + 1/r.
struct AdaptiveDmax {
    double reference_delay = 2.0;
};

using DmaxPolicy = std::variant<ConstantDmax, AdaptiveDmax>;

struct LeashPolicy {
    double skew_mean = 1.0;  // mean of the exponential clock skew
    DmaxPolicy dmax = AdaptiveDmax{};
};

inline double dmax_at(const DmaxPolicy& policy, double r) {
    if (auto c = std::get_if<ConstantDmax>(&policy)) return c->value;
    const auto& a = std::get<AdaptiveDmax>(policy);
    if (r <= 0) return std::numeric_limits<double>::infinity();
    return a.reference_delay - 1.0 + 1.0 / r;
}

inline double leash_drop_prob(LinkKind kind, double r, const LeashPolicy& policy, double alpha, double slack) {
    if (r < 0) throw InputError("link rate must be >= 0");
    if (!(policy.skew_mean > 0)) throw InputError("skew mean must be > 0");
    double threshold = dmax_at(policy.dmax, r);
    if (kind != LinkKind::valid) threshold += slack - alpha;
    if (threshold < 0) return 1.0;
    if (std::isinf(threshold)) return 0.0;
    return std::exp(-threshold / policy.skew_mean);
}

inline double leash_added_delay(double drop_prob, double base_delay) {
    if (drop_prob >= 1.0) throw SaturationError("leash drops every packet");
    if (drop_prob < 0) throw InputError("drop probability must be >= 0");
    return (1.0 / (1.0 - drop_prob) - 1.0) * base_delay;
}

}  // namespace wormsim

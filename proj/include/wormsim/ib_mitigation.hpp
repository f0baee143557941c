#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace wormsim {

// Observed per-packet delay: exponential around the link's true mean delay.
inline double sample_observed_delay(double true_mean, Stream& rng) {
    if (!(true_mean > 0)) throw InputError("mean delay must be > 0");
    return rng.exponential(true_mean);
}

inline bool detect(double observed, double expected) {
    if (!(observed > 0) || !(expected > 0)) throw InputError("delays must be > 0");
    return std::log(observed / expected) > 0.0;
}

// Per-link belief that the link is a wormhole. Each test outcome moves the
// belief by `smoothing`; smoothing = 1 makes the belief the latest outcome.
struct DetectorState {
    std::vector<double> belief;
    std::vector<char> detected;
    double threshold = 0.5;
    double penalty = 10.0;
    double smoothing = 1.0;

    DetectorState() = default;
    DetectorState(std::size_t links, double threshold_, double penalty_, double smoothing_)
        : belief(links, 0.0), detected(links, 0), threshold(threshold_), penalty(penalty_), smoothing(smoothing_) {
        if (!(threshold > 0 && threshold < 1)) throw InputError("belief threshold must be in (0,1)");
        if (penalty < 0) throw InputError("penalty must be >= 0");
        if (!(smoothing > 0 && smoothing <= 1)) throw InputError("smoothing must be in (0,1]");
    }
};

inline void update_detector(DetectorState& s, std::size_t link, bool outcome) {
    double& w = s.belief.at(link);
    w = (1.0 - s.smoothing) * w + s.smoothing * (outcome ? 1.0 : 0.0);
    s.detected[link] = w > s.threshold;
}

inline double penalty_term(const DetectorState& s, std::size_t link) {
    return s.detected.at(link) ? s.penalty : 0.0;
}

// Delay of traffic a tunnel secretly splits: share lambda over the first
// path, the rest over the second; q maps a path load to that path's delay.
inline double rerouted_path_delay(double lambda, double r1, double r2, double r3,
                                  const std::function<double(double)>& q1,
                                  const std::function<double(double)>& q2) {
    if (lambda < 0 || lambda > 1) throw InputError("split must be in [0,1]");
    if (r1 < 0 || r2 < 0 || r3 < 0) throw InputError("rates must be >= 0");
    return lambda * q1(r1 + lambda * r3) + (1.0 - lambda) * q2(r2 + (1.0 - lambda) * r3);
}

inline double rerouted_path_delay(double lambda, double r1, double r2, double r3,
                                  const std::function<double(double)>& q) {
    return rerouted_path_delay(lambda, r1, r2, r3, q, q);
}

}  // namespace wormsim

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <variant>
#include <vector>

#include "composition.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace wormsim {

using PlantConfig = PlantSettings;

// Threshold-triggered dropping on an out-of-band tunnel.
struct AdversaryPolicy {
    int link = 9;
    double low_latency = 0.1;
    double threshold = 5.0;
    double prob = 0.9;
};

inline double plant_step(double x, double u_held, double disturbance, double h, double sigma = 1.0) {
    if (!(h > 0)) throw InputError("sampling period must be > 0");
    return x + h * u_held + std::sqrt(h) * sigma * disturbance;
}

struct NetworkSample {
    double tau = 0.0;
    bool dropped = false;
    std::size_t path = 0;  // flat path index
};

// Pick a path of `source` in proportion to its flow; the packet inherits
// that path's delay and may be dropped by a triggered adversary.
inline NetworkSample sample_network_delay(const Simulator& sim, std::size_t source,
                                          const std::optional<AdversaryPolicy>& policy, Stream& path_rng,
                                          Stream& drop_rng) {
    const auto& spec = sim.assembly().spec;
    if (source >= spec.sources.size()) throw InputError("plant source out of range");
    const auto off = spec.path_offset(source);
    const auto n = spec.sources[source].paths.size();
    const auto& r = sim.state().r;
    double total = 0.0;
    for (std::size_t p = off; p < off + n; ++p) total += r[p];
    NetworkSample s;
    s.path = off;
    double u = path_rng.uniform() * total;
    for (std::size_t p = off; p < off + n; ++p) {
        s.path = p;
        if (u < r[p]) break;
        u -= r[p];
    }
    // Fall back to the last positive-flow path when rounding overshoots.
    if (!(r[s.path] > 0))
        for (std::size_t p = off + n; p-- > off;)
            if (r[p] > 0) {
                s.path = p;
                break;
            }
    s.tau = sim.experienced_path_delay(s.path);
    double u_drop = drop_rng.uniform();
    if (policy && policy->prob > 0) {
        if (policy->prob > 1) throw InputError("drop probability must be in [0,1]");
        const auto& path = spec.flat_path(s.path);
        bool through = false;
        for (int id : path) through = through || id == policy->link;
        if (through) {
            double flow = sim.links().rate[spec.link_index(policy->link)];
            if (flow > policy->threshold) s.dropped = u_drop < policy->prob;
        }
    }
    return s;
}

// Threshold policy implied by the first out-of-band adversary using one.
inline std::optional<AdversaryPolicy> threshold_policy(const SystemAssembly& as) {
    for (std::size_t l = 0; l < as.models.size(); ++l) {
        auto* o = std::get_if<OobBranch>(&as.models[l]);
        if (!o) continue;
        if (auto* t = std::get_if<ThresholdDrop>(&o->law.profile))
            return AdversaryPolicy{as.spec.links[l].id, o->law.alpha, t->threshold, t->prob};
    }
    return std::nullopt;
}

struct CoSimStats {
    std::size_t samples = 0;
    std::size_t drops = 0;
    std::size_t late = 0;  // tau_k >= h
};

struct CoSimResult {
    SimTrace trace;
    CoSimStats stats;
};

inline CoSimResult co_simulate(const SystemAssembly& as, const PlantConfig& pc,
                               const std::optional<AdversaryPolicy>& policy, double T) {
    const double dt = as.sim.dt;
    if (!(pc.period > 0)) throw InputError("sampling period must be > 0");
    if (!(pc.gain > 0)) throw InputError("control gain must be > 0");
    if (pc.noise_std < 0) throw InputError("disturbance std must be >= 0");
    const auto per = static_cast<std::size_t>(std::llround(pc.period / dt));
    if (per == 0 || std::abs(static_cast<double>(per) * dt - pc.period) > 1e-9 * pc.period)
        throw InputError("network dt must divide the sampling period");
    const std::size_t src = [&] {
        for (std::size_t i = 0; i < as.spec.sources.size(); ++i)
            if (as.spec.sources[i].id == pc.source) return i;
        throw InputError("plant source id not found");
    }();

    const auto seed = as.sim.seed;
    Stream noise(seed, "disturbance", 0), path_rng(seed, "path", 0), drop_rng(seed, "drop", 0);

    struct Pending {
        double at;
        double u;
        std::size_t k;
    };
    std::deque<Pending> queue;
    std::size_t applied_k = 0;
    bool any_applied = false;

    double x = pc.x0, u = 0.0, tau = 0.0;
    int dropped = 0;

    CoSimResult out;
    out.trace = empty_trace(as);
    out.trace.has_plant = true;
    const std::size_t n = step_count(T, dt);
    Simulator sim(as);

    auto record = [&](double t) {
        TraceRow row = sim.row();
        row.t = t;
        row.has_plant = true;
        row.x_plant = x;
        row.u = u;
        row.tau = tau;
        row.dropped = dropped;
        out.trace.rows.push_back(std::move(row));
    };

    auto sample = [&](std::size_t k, double t) {
        auto s = sample_network_delay(sim, src, policy, path_rng, drop_rng);
        ++out.stats.samples;
        tau = s.tau;
        dropped = s.dropped ? 1 : 0;
        if (s.dropped) {
            ++out.stats.drops;
            return;
        }
        if (s.tau >= pc.period) {
            ++out.stats.late;
            out.trace.events.push_back({t, -1, "control applied after the next sample"});
        }
        queue.push_back({t + s.tau, -pc.gain * x, k});
    };

    sample(0, 0.0);
    record(0.0);
    for (std::size_t step = 0; step < n; ++step) {
        const double t0 = static_cast<double>(step) * dt;
        const double t1 = static_cast<double>(step + 1) * dt;
        // Integrate the held control exactly, switching at each arrival.
        double t = t0;
        std::vector<Pending> due;
        for (auto it = queue.begin(); it != queue.end();) {
            if (it->at < t1) {
                due.push_back(*it);
                it = queue.erase(it);
            } else {
                ++it;
            }
        }
        std::sort(due.begin(), due.end(), [](const Pending& a, const Pending& b) { return a.at < b.at; });
        for (const auto& d : due) {
            if (any_applied && d.k < applied_k) continue;  // stale: a newer control already landed
            double ta = std::max(d.at, t);
            x += u * (ta - t);
            t = ta;
            u = d.u;
            applied_k = d.k;
            any_applied = true;
        }
        x += u * (t1 - t) + std::sqrt(dt) * pc.noise_std * noise.normal();
        sim.advance(dt);
        if ((step + 1) % per == 0) sample((step + 1) / per, t1);
        record(t1);
    }
    for (const auto& e : sim.events()) out.trace.events.push_back(e);
    return out;
}

inline CoSimResult co_simulate(const SystemAssembly& as, const PlantConfig& pc, double T) {
    return co_simulate(as, pc, threshold_policy(as), T);
}

inline double final_third_variance(const SimTrace& tr) {
    if (!tr.has_plant) throw InputError("trace has no plant columns");
    const std::size_t n = tr.rows.size();
    const std::size_t start = n - n / 3;
    if (n - start < 2) throw InputError("trace too short for a variance");
    double mean = 0.0;
    for (std::size_t k = start; k < n; ++k) mean += tr.rows[k].x_plant;
    mean /= static_cast<double>(n - start);
    double ss = 0.0;
    for (std::size_t k = start; k < n; ++k) ss += (tr.rows[k].x_plant - mean) * (tr.rows[k].x_plant - mean);
    return ss / static_cast<double>(n - start - 1);
}

}  // namespace wormsim

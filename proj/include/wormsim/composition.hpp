#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "flow_dynamics.hpp"
#include "ib_mitigation.hpp"
#include "ib_wormhole.hpp"
#include "link_models.hpp"
#include "oob_mitigation.hpp"
#include "rng.hpp"
#include "topology.hpp"

namespace wormsim {

// In-band tunnel that splits what it carries over two legitimate routes.
struct RerouteMode {
    double lambda = 0.3;
    std::vector<int> first;
    std::vector<int> second;
};

// In-band tunnel whose length follows the adversary's compromise fraction.
struct BetaMode {
    BetaCurve curve;
    double x0 = 0.0;
    double cost = 1.0;
};

struct ValidBranch {
    ValidLinkLaw law;
};
struct OobBranch {
    OobWormholeLaw law;
};
struct IbBranch {
    ValidLinkLaw advertised;
    std::variant<RerouteMode, BetaMode> mode;
};
using LinkModel = std::variant<ValidBranch, OobBranch, IbBranch>;

struct OobAdversary {
    int link = 0;
    DropProfile profile = SimProfile{};
    std::optional<AdversaryPlan> plan;  // set when the drop rate came from the plan
};

struct IbAdversary {
    int link = 0;
    std::variant<RerouteMode, BetaMode> mode;
};

struct LeashSettings {
    bool enabled = false;
    LeashPolicy policy;
    std::vector<int> links;  // empty: every valid and out-of-band link
};

struct DetectorSettings {
    bool enabled = false;
    double penalty = 10.0;
    double threshold = 0.5;
    double smoothing = 0.01;
    std::vector<int> links;  // empty: every valid and in-band link
};

struct SimSettings {
    double dt = 0.01;
    double horizon = 100.0;
    std::uint64_t seed = 1;
    std::size_t window = 500;
    double tol = 1e-6;
    double delay_ceiling = 1e3;
};

struct PlantSettings {
    double period = 0.3;
    double gain = 2.0;
    double noise_std = 1.0;
    double x0 = 0.0;
    int source = 1;  // source id carrying the sensor packets
};

struct Scenario {
    std::string name;
    NetworkSpec network;
    std::vector<std::vector<double>> initial;  // per source; empty entry: uniform split
    std::vector<OobAdversary> oob;
    std::vector<IbAdversary> ib;
    LeashSettings leash;
    DetectorSettings detector;
    SimSettings sim;
    std::optional<PlantSettings> plant;
};

struct SystemAssembly {
    NetworkSpec spec;
    IncidenceMatrix A;
    std::vector<LinkModel> models;
    std::vector<char> leash_on;
    std::vector<char> detect_on;
    LeashPolicy leash;
    DetectorSettings detector;
    SimSettings sim;
    FlowState initial;
    std::vector<std::optional<AdversaryPlan>> plans;  // per link
};

namespace detail {

inline std::vector<char> mitigation_mask(const NetworkSpec& spec, bool enabled, const std::vector<int>& listed,
                                         LinkKind allowed_wormhole, const char* what) {
    std::vector<char> on(spec.links.size(), 0);
    if (!enabled) return on;
    if (listed.empty()) {
        for (std::size_t l = 0; l < spec.links.size(); ++l) {
            auto k = spec.links[l].kind;
            on[l] = k == LinkKind::valid || k == allowed_wormhole;
        }
        return on;
    }
    for (int id : listed) {
        if (!spec.has_link(id)) throw ConfigError(std::string(what) + ": unknown link " + std::to_string(id));
        auto l = spec.link_index(id);
        auto k = spec.links[l].kind;
        if (k != LinkKind::valid && k != allowed_wormhole)
            throw ConfigError(std::string(what) + " cannot apply to " + to_string(k) + " link " + std::to_string(id));
        on[l] = 1;
    }
    return on;
}

}  // namespace detail

inline SystemAssembly assemble(const Scenario& sc) {
    try {
        validate(sc.network);
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }
    const auto& spec = sc.network;
    SystemAssembly as;
    as.spec = spec;
    as.A = build_incidence(spec);
    as.leash = sc.leash.policy;
    as.detector = sc.detector;
    as.sim = sc.sim;
    as.plans.assign(spec.links.size(), std::nullopt);
    if (!(sc.sim.dt > 0)) throw ConfigError("sim.dt must be > 0");
    if (sc.sim.horizon < 0) throw ConfigError("sim.horizon must be >= 0");
    if (!(sc.sim.delay_ceiling > 0)) throw ConfigError("sim.delay_ceiling must be > 0");

    std::vector<const OobAdversary*> oob(spec.links.size(), nullptr);
    std::vector<const IbAdversary*> ib(spec.links.size(), nullptr);
    for (const auto& a : sc.oob) {
        if (!spec.has_link(a.link)) throw ConfigError("oob adversary: unknown link " + std::to_string(a.link));
        auto l = spec.link_index(a.link);
        if (spec.links[l].kind != LinkKind::oob_wormhole)
            throw ConfigError("oob adversary on link " + std::to_string(a.link) + " which is not oob_wormhole");
        oob[l] = &a;
    }
    for (const auto& a : sc.ib) {
        if (!spec.has_link(a.link)) throw ConfigError("ib adversary: unknown link " + std::to_string(a.link));
        auto l = spec.link_index(a.link);
        if (spec.links[l].kind != LinkKind::ib_wormhole)
            throw ConfigError("ib adversary on link " + std::to_string(a.link) + " which is not ib_wormhole");
        ib[l] = &a;
    }

    for (std::size_t l = 0; l < spec.links.size(); ++l) {
        const auto& ls = spec.links[l];
        ValidLinkLaw law{ls.capacity, ls.alpha, ls.queue_capacity};
        switch (ls.kind) {
            case LinkKind::valid: as.models.emplace_back(ValidBranch{law}); break;
            case LinkKind::oob_wormhole: {
                OobWormholeLaw w{ls.alpha, NoDrop{}};
                if (oob[l]) {
                    w.profile = oob[l]->profile;
                    as.plans[l] = oob[l]->plan;
                }
                as.models.emplace_back(OobBranch{w});
                break;
            }
            case LinkKind::ib_wormhole: {
                if (!ib[l]) throw ConfigError("ib_wormhole link " + std::to_string(ls.id) + " has no adversary mode");
                if (auto* rm = std::get_if<RerouteMode>(&ib[l]->mode)) {
                    if (rm->lambda < 0 || rm->lambda > 1) throw ConfigError("reroute lambda must be in [0,1]");
                    for (int id : rm->first) {
                        if (!spec.has_link(id) || spec.links[spec.link_index(id)].kind != LinkKind::valid)
                            throw ConfigError("reroute route link " + std::to_string(id) + " must be a valid link");
                    }
                    for (int id : rm->second) {
                        if (!spec.has_link(id) || spec.links[spec.link_index(id)].kind != LinkKind::valid)
                            throw ConfigError("reroute route link " + std::to_string(id) + " must be a valid link");
                    }
                } else {
                    const auto& bm = std::get<BetaMode>(ib[l]->mode);
                    if (bm.curve.x.size() < 2) throw ConfigError("beta curve needs at least two points");
                    if (bm.x0 < bm.curve.x.front() || bm.x0 > bm.curve.x.back())
                        throw ConfigError("initial compromise fraction outside the beta curve range");
                    if (!(bm.cost > 0)) throw ConfigError("compromise cost must be > 0");
                }
                as.models.emplace_back(IbBranch{law, ib[l]->mode});
                break;
            }
        }
    }

    as.leash_on = detail::mitigation_mask(spec, sc.leash.enabled, sc.leash.links, LinkKind::oob_wormhole, "leash");
    as.detect_on =
        detail::mitigation_mask(spec, sc.detector.enabled, sc.detector.links, LinkKind::ib_wormhole, "detector");
    if (sc.leash.enabled && !(sc.leash.policy.skew_mean > 0)) throw ConfigError("leash skew mean must be > 0");
    if (sc.detector.enabled) {
        try {
            DetectorState probe(1, sc.detector.threshold, sc.detector.penalty, sc.detector.smoothing);
        } catch (const InputError& e) {
            throw ConfigError(std::string("detector: ") + e.what());
        }
    }

    as.initial.t = 0.0;
    for (std::size_t i = 0; i < spec.sources.size(); ++i) {
        const auto& s = spec.sources[i];
        std::size_t m = s.paths.size();
        if (i < sc.initial.size() && !sc.initial[i].empty()) {
            const auto& init = sc.initial[i];
            if (init.size() != m)
                throw ConfigError("source " + std::to_string(s.id) + ": initial allocation length differs from path count");
            double sum = 0.0;
            for (double v : init) {
                if (v < 0) throw ConfigError("source " + std::to_string(s.id) + ": negative initial rate");
                sum += v;
            }
            if (std::abs(sum - s.rate) > 1e-9 * s.rate)
                throw ConfigError("source " + std::to_string(s.id) + ": initial allocation does not sum to the rate");
            for (double v : init) as.initial.r.push_back(v * s.rate / sum);
        } else {
            for (std::size_t p = 0; p < m; ++p) as.initial.r.push_back(s.rate / static_cast<double>(m));
        }
    }
    return as;
}

struct LinkEval {
    std::vector<double> rate;         // physical load, including tunnelled traffic
    std::vector<double> base;         // delay-law output
    std::vector<double> mitigation;   // leash retransmission delay + detection penalty
    std::vector<double> experienced;  // base + leash delay, capped
    std::vector<double> drop;         // probability a transmission on the link is lost
    std::vector<char> detected;       // penalty active
    std::vector<double> expected;     // delay the detector expects from the advertised law
    std::vector<double> total;        // routing price per link
};

struct SaturationEvent {
    double t = 0.0;
    int link = 0;
    std::string what;
};

struct TraceRow {
    double t = 0.0;
    std::vector<double> r, q, rl, delay, mit, drop;
    std::vector<char> detect;
    double x_compromise = 0.0;
    bool has_plant = false;
    double x_plant = 0.0, u = 0.0, tau = 0.0;
    int dropped = 0;
};

struct SimTrace {
    std::vector<int> source_ids;
    std::vector<std::size_t> paths_per_source;
    std::vector<int> link_ids;
    bool has_plant = false;
    std::vector<TraceRow> rows;
    std::vector<SaturationEvent> events;
};

class Simulator {
public:
    explicit Simulator(const SystemAssembly& as) : as_(as), state_(as.initial) {
        const auto L = as.spec.links.size();
        detector_ = DetectorState(L, as.detector.threshold, as.detector.penalty, as.detector.smoothing);
        saturated_.assign(L, 0);
        x_.assign(L, 0.0);
        for (std::size_t l = 0; l < L; ++l) {
            streams_.emplace_back(as.sim.seed, "detector", static_cast<std::uint64_t>(as.spec.links[l].id));
            if (auto* ibm = std::get_if<IbBranch>(&as.models[l]))
                if (auto* bm = std::get_if<BetaMode>(&ibm->mode)) x_[l] = bm->x0;
        }
        evaluate();
    }

    const FlowState& state() const { return state_; }
    const LinkEval& links() const { return eval_; }
    const PathDelays& delays() const { return q_; }
    const std::vector<SaturationEvent>& events() const { return events_; }
    const SystemAssembly& assembly() const { return as_; }
    double time() const { return state_.t; }

    // Compromise fraction of the first in-band tunnel driven by a beta curve.
    double compromise() const {
        for (std::size_t l = 0; l < as_.models.size(); ++l)
            if (auto* ibm = std::get_if<IbBranch>(&as_.models[l]))
                if (std::holds_alternative<BetaMode>(ibm->mode)) return x_[l];
        return 0.0;
    }

    // Delay a packet on path p (flat index) actually sees.
    double experienced_path_delay(std::size_t p) const {
        double s = 0.0;
        for (std::size_t l = 0; l < as_.A.rows; ++l)
            if (as_.A.at(l, p)) s += eval_.experienced[l];
        return s;
    }

    void advance(double dt) {
        state_ = wardrop_step(as_.spec, state_, q_, dt);
        for (std::size_t l = 0; l < as_.models.size(); ++l) {
            auto* ibm = std::get_if<IbBranch>(&as_.models[l]);
            if (!ibm) continue;
            auto* bm = std::get_if<BetaMode>(&ibm->mode);
            if (!bm) continue;
            CompromiseState cs{x_[l], bm->cost};
            cs = compromise_step(cs, beta_derivative(bm->curve, x_[l]), dt);
            x_[l] = std::clamp(cs.x, bm->curve.x.front(), bm->curve.x.back());
        }
        for (std::size_t l = 0; l < as_.detect_on.size(); ++l) {
            if (!as_.detect_on[l]) continue;
            double obs = sample_observed_delay(eval_.base[l], streams_[l]);
            update_detector(detector_, l, detect(obs, eval_.expected[l]));
        }
        evaluate();
    }

    TraceRow row() const {
        TraceRow row;
        row.t = state_.t;
        row.r = state_.r;
        row.q = q_.q;
        row.rl = eval_.rate;
        row.delay = eval_.base;
        row.mit = eval_.mitigation;
        row.drop = eval_.drop;
        row.detect = eval_.detected;
        row.x_compromise = compromise();
        return row;
    }

private:
    void note(std::size_t l, bool saturated, const char* what) {
        if (saturated && !saturated_[l]) events_.push_back({state_.t, as_.spec.links[l].id, what});
        saturated_[l] = saturated;
    }

    void evaluate() {
        const auto& spec = as_.spec;
        const auto L = spec.links.size();
        const double ceiling = as_.sim.delay_ceiling;
        auto nominal = link_rates(as_.A, state_.r);

        std::vector<double> load = nominal;
        for (std::size_t l = 0; l < L; ++l) {
            auto* ibm = std::get_if<IbBranch>(&as_.models[l]);
            if (!ibm) continue;
            if (auto* rm = std::get_if<RerouteMode>(&ibm->mode)) {
                for (int id : rm->first) load[spec.link_index(id)] += rm->lambda * nominal[l];
                for (int id : rm->second) load[spec.link_index(id)] += (1.0 - rm->lambda) * nominal[l];
            }
        }

        eval_.rate = load;
        eval_.base.assign(L, 0.0);
        eval_.mitigation.assign(L, 0.0);
        eval_.experienced.assign(L, 0.0);
        eval_.drop.assign(L, 0.0);
        eval_.detected.assign(L, 0);
        eval_.expected.assign(L, 0.0);
        eval_.total.assign(L, 0.0);

        std::vector<double> loss(L, 0.0);
        std::vector<char> sat(L, 0);
        // Plain links first; rerouting tunnels read their route delays.
        for (std::size_t l = 0; l < L; ++l) {
            const auto& m = as_.models[l];
            if (auto* v = std::get_if<ValidBranch>(&m)) {
                double b = valid_link_delay(load[l], v->law);
                loss[l] = mm1k_drop(load[l] / v->law.capacity, v->law.queue_capacity);
                if (!(b < ceiling)) {
                    b = ceiling;
                    sat[l] = 1;
                }
                eval_.base[l] = b;
                eval_.expected[l] = b;
            } else if (auto* o = std::get_if<OobBranch>(&m)) {
                double phi = drop_fraction(o->law.profile, load[l]);
                loss[l] = phi;
                double b = phi < 1.0 ? o->law.alpha / (1.0 - phi) : ceiling;
                if (!(b < ceiling)) {
                    b = ceiling;
                    sat[l] = 1;
                }
                eval_.base[l] = b;
                eval_.expected[l] = b;
            }
        }
        for (std::size_t l = 0; l < L; ++l) {
            auto* ibm = std::get_if<IbBranch>(&as_.models[l]);
            if (!ibm) continue;
            double adv = valid_link_delay(load[l], ibm->advertised);
            double b;
            if (auto* rm = std::get_if<RerouteMode>(&ibm->mode)) {
                double s1 = 0.0, s2 = 0.0;
                for (int id : rm->first) s1 += eval_.base[spec.link_index(id)];
                for (int id : rm->second) s2 += eval_.base[spec.link_index(id)];
                b = rm->lambda * s1 + (1.0 - rm->lambda) * s2;
            } else {
                b = beta_at(std::get<BetaMode>(ibm->mode).curve, x_[l]) * adv;
            }
            if (!(b < ceiling)) {
                b = ceiling;
                sat[l] = 1;
            }
            eval_.base[l] = b;
            eval_.expected[l] = std::min(adv, ceiling);
        }

        for (std::size_t l = 0; l < L; ++l) {
            const auto& ls = spec.links[l];
            double added = 0.0;
            double pl = 0.0;
            if (as_.leash_on[l]) {
                pl = leash_drop_prob(ls.kind, load[l], as_.leash, ls.alpha, ls.slack);
                added = pl < 1.0 ? leash_added_delay(pl, eval_.base[l]) : ceiling;
            }
            double exp_delay = eval_.base[l] + added;
            if (!(exp_delay < ceiling)) {
                exp_delay = ceiling;
                added = ceiling - eval_.base[l];
                sat[l] = 1;
            }
            double pen = as_.detect_on[l] ? penalty_term(detector_, l) : 0.0;
            eval_.experienced[l] = exp_delay;
            eval_.mitigation[l] = added + pen;
            eval_.detected[l] = as_.detect_on[l] ? detector_.detected[l] : 0;
            eval_.drop[l] = 1.0 - (1.0 - loss[l]) * (1.0 - pl);
            eval_.total[l] = exp_delay + pen;
            note(l, sat[l], "delay capped at ceiling");
        }
        q_ = path_delays(spec, as_.A, eval_.total);
    }

    SystemAssembly as_;
    FlowState state_;
    DetectorState detector_;
    std::vector<Stream> streams_;
    std::vector<double> x_;
    std::vector<char> saturated_;
    std::vector<SaturationEvent> events_;
    LinkEval eval_;
    PathDelays q_;
};

inline SimTrace empty_trace(const SystemAssembly& as) {
    SimTrace tr;
    for (const auto& s : as.spec.sources) {
        tr.source_ids.push_back(s.id);
        tr.paths_per_source.push_back(s.paths.size());
    }
    for (const auto& l : as.spec.links) tr.link_ids.push_back(l.id);
    return tr;
}

inline std::size_t step_count(double T, double dt) {
    if (!(dt > 0)) throw InputError("dt must be > 0");
    if (T < 0) throw InputError("horizon must be >= 0");
    return static_cast<std::size_t>(std::llround(T / dt));
}

inline SimTrace simulate(const SystemAssembly& as, double T, double dt) {
    std::size_t n = step_count(T, dt);
    SimTrace tr = empty_trace(as);
    tr.rows.reserve(n + 1);
    Simulator sim(as);
    tr.rows.push_back(sim.row());
    for (std::size_t k = 0; k < n; ++k) {
        sim.advance(dt);
        tr.rows.push_back(sim.row());
        tr.rows.back().t = static_cast<double>(k + 1) * dt;
    }
    tr.events = sim.events();
    return tr;
}

inline SimTrace simulate(const SystemAssembly& as) { return simulate(as, as.sim.horizon, as.sim.dt); }

inline bool converged(const SimTrace& tr, std::size_t window, double tol) {
    if (window == 0 || window > tr.rows.size()) throw InputError("window exceeds trace length");
    const std::size_t start = tr.rows.size() - window;
    const std::size_t P = tr.rows.front().r.size();
    for (std::size_t p = 0; p < P; ++p) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t k = start; k < tr.rows.size(); ++k) {
            lo = std::min(lo, tr.rows[k].r[p]);
            hi = std::max(hi, tr.rows[k].r[p]);
        }
        if (!(hi - lo < tol)) return false;
    }
    return true;
}

// Mean of each path rate over the last `window` rows.
inline std::vector<double> trailing_mean(const SimTrace& tr, std::size_t window) {
    window = std::clamp<std::size_t>(window, 1, tr.rows.size());
    std::vector<double> m(tr.rows.front().r.size(), 0.0);
    for (std::size_t k = tr.rows.size() - window; k < tr.rows.size(); ++k)
        for (std::size_t p = 0; p < m.size(); ++p) m[p] += tr.rows[k].r[p];
    for (auto& v : m) v /= static_cast<double>(window);
    return m;
}

// Flow on paths that use any wormhole link, summed across sources.
inline double wormhole_path_flow(const NetworkSpec& spec, const std::vector<double>& r) {
    double s = 0.0;
    for (std::size_t p = 0; p < r.size(); ++p) {
        const auto& path = spec.flat_path(p);
        bool worm = std::any_of(path.begin(), path.end(),
                                [&](int id) { return is_wormhole(spec.links[spec.link_index(id)].kind); });
        if (worm) s += r[p];
    }
    return s;
}

// Per-path totals across sources, keyed by position in each source's list.
inline std::vector<double> path_totals(const NetworkSpec& spec, const std::vector<double>& r) {
    std::size_t m = 0;
    for (const auto& s : spec.sources) m = std::max(m, s.paths.size());
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < spec.sources.size(); ++i) {
        std::size_t off = spec.path_offset(i);
        for (std::size_t p = 0; p < spec.sources[i].paths.size(); ++p) out[p] += r[off + p];
    }
    return out;
}

// Physical delay of a link in a trace row: detection penalties are a routing
// price, not time spent in the network.
inline double row_experienced_delay(const SystemAssembly& as, const TraceRow& row, std::size_t l) {
    double pen = row.detect[l] ? as.detector.penalty : 0.0;
    return row.delay[l] + row.mit[l] - pen;
}

// Flow-weighted physical delay of source i in one row.
inline double source_delay(const SystemAssembly& as, const TraceRow& row, std::size_t i) {
    const auto& s = as.spec.sources.at(i);
    std::size_t off = as.spec.path_offset(i);
    double acc = 0.0;
    for (std::size_t p = off; p < off + s.paths.size(); ++p) {
        double d = 0.0;
        for (std::size_t l = 0; l < as.A.rows; ++l)
            if (as.A.at(l, p)) d += row_experienced_delay(as, row, l);
        acc += row.r[p] * d;
    }
    return acc / s.rate;
}

inline double mean_source_delay(const SystemAssembly& as, const SimTrace& tr, std::size_t i, std::size_t from = 0) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t k = from; k < tr.rows.size(); ++k, ++n) acc += source_delay(as, tr.rows[k], i);
    return n ? acc / static_cast<double>(n) : 0.0;
}

// Fixed point of the compromise dynamics; they do not depend on the flows.
inline double compromise_limit(const BetaMode& bm, double dt = 0.01, std::size_t max_steps = 1000000) {
    CompromiseState cs{bm.x0, bm.cost};
    for (std::size_t k = 0; k < max_steps; ++k) {
        auto next = compromise_step(cs, beta_derivative(bm.curve, cs.x), dt);
        next.x = std::clamp(next.x, bm.curve.x.front(), bm.curve.x.back());
        if (next.x == cs.x) return cs.x;
        cs = next;
    }
    return cs.x;
}

// Deterministic per-link total delay law (base + leash), as the oracle and
// audits see it. In-band tunnels use the limiting compromise fraction.
inline LinkLaw total_link_law(const SystemAssembly& as, std::size_t l) {
    if (as.detect_on[l]) throw ModelError("link " + std::to_string(as.spec.links[l].id) + " has a stochastic penalty");
    const auto& ls = as.spec.links[l];
    const double ceiling = as.sim.delay_ceiling;
    LinkLaw base;
    if (auto* v = std::get_if<ValidBranch>(&as.models[l])) {
        auto law = v->law;
        base = [law](double r) { return valid_link_delay(r, law); };
    } else if (auto* o = std::get_if<OobBranch>(&as.models[l])) {
        auto law = o->law;
        base = [law](double r) {
            double phi = drop_fraction(law.profile, r);
            return phi < 1.0 ? law.alpha / (1.0 - phi) : std::numeric_limits<double>::infinity();
        };
    } else {
        const auto& ibm = std::get<IbBranch>(as.models[l]);
        auto* bm = std::get_if<BetaMode>(&ibm.mode);
        if (!bm) throw ModelError("rerouting tunnel " + std::to_string(ls.id) + " has no per-link delay law");
        double beta = beta_at(bm->curve, compromise_limit(*bm, as.sim.dt));
        auto law = ibm.advertised;
        base = [law, beta](double r) { return beta * valid_link_delay(r, law); };
    }
    if (!as.leash_on[l]) return [base, ceiling](double r) { return std::min(base(r), ceiling); };
    auto policy = as.leash;
    auto kind = ls.kind;
    double alpha = ls.alpha, slack = ls.slack;
    return [base, ceiling, policy, kind, alpha, slack](double r) {
        double b = std::min(base(r), ceiling);
        double p = leash_drop_prob(kind, r, policy, alpha, slack);
        if (p >= 1.0) return ceiling;
        return std::min(b + leash_added_delay(p, b), ceiling);
    };
}

inline std::vector<LinkLaw> total_link_laws(const SystemAssembly& as) {
    std::vector<LinkLaw> out;
    for (std::size_t l = 0; l < as.spec.links.size(); ++l) out.push_back(total_link_law(as, l));
    return out;
}

// Same scenario with every wormhole link, the paths through it, and its
// adversary removed; initial allocations are kept on the surviving paths.
inline Scenario remove_wormholes(const Scenario& sc) {
    Scenario out = sc;
    out.oob.clear();
    out.ib.clear();
    out.network.links.clear();
    std::vector<int> gone;
    for (const auto& l : sc.network.links) {
        if (is_wormhole(l.kind))
            gone.push_back(l.id);
        else
            out.network.links.push_back(l);
    }
    auto uses_gone = [&](const std::vector<int>& path) {
        return std::any_of(path.begin(), path.end(),
                           [&](int id) { return std::find(gone.begin(), gone.end(), id) != gone.end(); });
    };
    out.initial.assign(sc.network.sources.size(), {});
    for (std::size_t i = 0; i < sc.network.sources.size(); ++i) {
        auto& src = out.network.sources[i];
        src.paths.clear();
        std::vector<double> init;
        const auto& orig = sc.network.sources[i];
        bool has_init = i < sc.initial.size() && !sc.initial[i].empty();
        for (std::size_t p = 0; p < orig.paths.size(); ++p) {
            if (uses_gone(orig.paths[p])) continue;
            src.paths.push_back(orig.paths[p]);
            if (has_init) init.push_back(sc.initial[i][p]);
        }
        if (src.paths.empty()) throw ConfigError("source " + std::to_string(src.id) + " has only wormhole paths");
        double sum = 0.0;
        for (double v : init) sum += v;
        if (has_init && sum > 0) {
            for (auto& v : init) v *= src.rate / sum;
            out.initial[i] = init;
        }
    }
    auto strip = [&](std::vector<int>& ids) {
        ids.erase(std::remove_if(ids.begin(), ids.end(),
                                 [&](int id) { return std::find(gone.begin(), gone.end(), id) != gone.end(); }),
                  ids.end());
    };
    strip(out.leash.links);
    strip(out.detector.links);
    return out;
}

}  // namespace wormsim

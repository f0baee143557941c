#include <wormsim/wormsim.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace wormsim;

namespace {

const std::string kConfigs = WORMSIM_CONFIG_DIR;

namespace tol {
constexpr double oob_flow = 0.2;
constexpr double oob_drop = 0.05;
constexpr double leash_flow = 0.2;
constexpr double negligible = 0.1;
constexpr double ib_path = 0.1;
constexpr double oracle = 1e-2;
constexpr double feasible_rel = 1e-9;
constexpr double audit_factor = 10.0;  // times dt
constexpr double sign_alpha = 0.05;
constexpr double runtime_oob_s = 10.0;
constexpr double runtime_plant_s = 60.0;
}  // namespace tol

struct Outcome {
    bool pass = false;
    std::string detail;
};

Scenario load(const std::string& name) { return resolve(load_config(kConfigs + "/" + name)); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Every trace produced below, re-checked for feasibility in criterion 6.
std::vector<std::pair<std::string, std::pair<SystemAssembly, SimTrace>>> g_traces;

void keep(const std::string& name, const SystemAssembly& as, const SimTrace& tr) {
    g_traces.push_back({name, {as, tr}});
}

double rate_weighted_delay(const SystemAssembly& as, const TraceRow& row) {
    double acc = 0.0, total = 0.0;
    for (std::size_t i = 0; i < as.spec.sources.size(); ++i) {
        acc += as.spec.sources[i].rate * source_delay(as, row, i);
        total += as.spec.sources[i].rate;
    }
    return acc / total;
}

struct Equilibrium {
    SystemAssembly as;
    SimTrace tr;
    std::vector<double> r;
};

Equilibrium run_to_equilibrium(const std::string& config) {
    auto as = assemble(load(config));
    auto tr = simulate(as);
    auto r = trailing_mean(tr, as.sim.window);
    keep(config, as, tr);
    return {as, std::move(tr), std::move(r)};
}

Outcome c1_oob_flow() {
    auto t0 = std::chrono::steady_clock::now();
    auto e = run_to_equilibrium("fig5b.yaml");
    double secs = seconds_since(t0);
    double flow = wormhole_path_flow(e.as.spec, e.r);
    double drop = e.tr.rows.back().drop[e.as.spec.link_index(9)];
    bool ok = std::abs(flow - 2.0) <= tol::oob_flow && std::abs(drop - 0.5) <= tol::oob_drop &&
              secs < tol::runtime_oob_s;
    return {ok, fmt("wormhole flow %.4f", flow) + fmt(", drop %.4f", drop) + fmt(", %.2f s", secs)};
}

Outcome c2_leash() {
    auto plain = run_to_equilibrium("fig5b.yaml");
    auto leash = run_to_equilibrium("fig5c.yaml");
    double flow = wormhole_path_flow(leash.as.spec, leash.r);
    double d0 = rate_weighted_delay(plain.as, plain.tr.rows.back());
    double d1 = rate_weighted_delay(leash.as, leash.tr.rows.back());
    bool ok = std::abs(flow - 1.3) <= tol::leash_flow && d1 > d0;
    return {ok, fmt("wormhole flow %.4f", flow) + fmt(", mean delay %.4f", d1) + fmt(" vs %.4f unmitigated", d0)};
}

Outcome c3_degenerate() {
    auto e = run_to_equilibrium("fig5a.yaml");
    double flow = 0.0;
    for (std::size_t p = 0; p < e.r.size(); ++p) {
        const auto& path = e.as.spec.flat_path(p);
        if (path.size() == 1 && path[0] == 9) flow += e.r[p];
    }
    return {flow <= tol::negligible, fmt("link-9 path flow %.5f", flow)};
}

Outcome c4_inband() {
    auto plain_sc = load("fig6a.yaml");
    auto det_sc = load("fig6b.yaml");
    auto plain = assemble(plain_sc), det = assemble(det_sc);
    auto tr0 = simulate(plain), tr1 = simulate(det);
    keep("fig6a.yaml", plain, tr0);
    keep("fig6b.yaml", det, tr1);
    auto got = path_totals(det.spec, trailing_mean(tr1, det.sim.window));
    auto clean_sc = remove_wormholes(det_sc);
    clean_sc.detector.enabled = false;
    auto clean = assemble(clean_sc);
    auto want = path_totals(clean.spec, equilibrium_oracle(clean.spec, total_link_laws(clean)).r);
    double worst = got.size() > want.size() ? got[want.size()] : 0.0;
    for (std::size_t p = 0; p < want.size(); ++p) worst = std::max(worst, std::abs(got[p] - want[p]));
    double d0 = mean_source_delay(plain, tr0, 0), d1 = mean_source_delay(det, tr1, 0);
    bool ok = worst <= tol::ib_path && d1 < d0;
    return {ok, fmt("max path deviation %.4f", worst) + fmt(", source-1 delay %.4f", d1) +
                    fmt(" vs %.4f unmitigated", d0)};
}

Outcome c5_oracle() {
    const std::vector<std::string> eligible{"two_parallel.yaml", "fig5a.yaml", "fig5b.yaml", "fig5c.yaml",
                                            "joint.yaml"};
    double worst = 0.0;
    int runs = 0;
    for (const auto& name : eligible) {
        auto sc = load(name);
        auto base = assemble(sc);
        auto o = equilibrium_oracle(base.spec, total_link_laws(base));
        auto want_p = path_totals(base.spec, o.r);
        Stream rng(2024, "starts", static_cast<std::uint64_t>(runs));
        for (int trial = 0; trial < 5; ++trial, ++runs) {
            for (std::size_t i = 0; i < sc.network.sources.size(); ++i) {
                const auto& s = sc.network.sources[i];
                std::vector<double> w(s.paths.size());
                double sum = 0.0;
                for (auto& v : w) sum += (v = 0.05 + rng.uniform());
                for (auto& v : w) v *= s.rate / sum;
                if (sc.initial.size() <= i) sc.initial.resize(i + 1);
                sc.initial[i] = w;
            }
            auto as = assemble(sc);
            auto tr = simulate(as);
            keep(name + " random start", as, tr);
            auto m = trailing_mean(tr, as.sim.window);
            auto got_p = path_totals(as.spec, m);
            auto got_l = link_rates(as.A, m);
            for (std::size_t p = 0; p < got_p.size(); ++p) worst = std::max(worst, std::abs(got_p[p] - want_p[p]));
            for (std::size_t l = 0; l < got_l.size(); ++l)
                worst = std::max(worst, std::abs(got_l[l] - o.link_rates[l]));
        }
    }
    return {worst <= tol::oracle, std::to_string(runs) + " runs" + fmt(", max deviation %.2e", worst)};
}

Outcome c6_feasibility() {
    for (const char* name : {"fig5d.yaml", "fig6c.yaml", "two_parallel.yaml"}) {
        auto as = assemble(load(name));
        keep(name, as, simulate(as));
    }
    std::size_t rows = 0, bad = 0;
    for (const auto& [name, at] : g_traces) {
        const auto& [as, tr] = at;
        std::stringstream ss;
        write_trace(ss, tr);
        auto back = trace_from_table(as, read_trace_table(ss));
        for (const auto& row : back.rows) {
            ++rows;
            if (!feasible(as.spec, row.r, tol::feasible_rel)) ++bad;
        }
    }
    return {bad == 0 && rows > 0,
            std::to_string(g_traces.size()) + " traces, " + std::to_string(rows) + " rows, " + std::to_string(bad) +
                " infeasible"};
}

Outcome c7_passivity() {
    bool ok = true;
    std::string detail;
    bool saw_leash = false, saw_inband = false;
    for (const char* name : {"fig5b.yaml", "fig5c.yaml", "joint.yaml"}) {
        auto as = assemble(load(name));
        auto tr = simulate(as);
        for (const auto& b : audit_all(as, tr, tol::audit_factor * as.sim.dt)) {
            ok = ok && b.passed();
            saw_leash |= b.block == "leash";
            saw_inband |= b.block == "inband";
            if (!b.passed()) detail += std::string(" ") + name + ":" + b.block;
        }
    }
    ok = ok && saw_leash && saw_inband;
    return {ok, detail.empty() ? "flow, link, leash, inband and composite clean on 3 runs" : "violations in" + detail};
}

Outcome c8_drop_rate() {
    Stream rng(8, "drop-plan");
    double worst = -INFINITY;
    for (int inst = 0; inst < 50; ++inst) {
        std::size_t n = 1 + rng.below(6);
        std::vector<double> d(n), r(n);
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            d[k] = 0.5 + 9.5 * rng.uniform();
            r[k] = 0.1 + 10 * rng.uniform();
            total += r[k];
        }
        const double eps = 0.01;
        auto plan = optimal_drop_rate(d, r, 0.5 + 2 * rng.uniform(), {}, eps);
        double best = plan_objective(plan, plan.phi_star);
        for (int g = 0; g < 1000; ++g)
            worst = std::max(worst, (plan_objective(plan, g / 1000.0) - best) / (eps * total));
    }
    return {worst <= 1.0, fmt("worst grid gain %.3f of eps*sum(r)", worst)};
}

Outcome c9_beta() {
    const std::vector<double> xs{0.2, 0.4, 0.6, 0.8, 1.0};
    int mono = 0, convex = 0, exact = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Graph g = random_connected_graph(20, 0.2, seed);
        auto [w1, w2] = diameter_pair(g);
        auto c = beta_curve(g, w1, w2, xs, 4000, seed, -1.0, 4);
        bool m = true, v = true;
        for (std::size_t k = 0; k + 1 < xs.size(); ++k)
            m = m && c.beta[k + 1] <= c.beta[k] + 2 * std::hypot(c.se[k], c.se[k + 1]);
        for (std::size_t k = 1; k + 1 < xs.size(); ++k) {
            double d2 = c.beta[k - 1] - 2 * c.beta[k] + c.beta[k + 1];
            v = v && d2 >= -2 * std::sqrt(c.se[k - 1] * c.se[k - 1] + 4 * c.se[k] * c.se[k] + c.se[k + 1] * c.se[k + 1]);
        }
        mono += m;
        convex += v;
        exact += c.beta.back() == beta_exhaustive(g, w1, w2);
    }
    return {mono == 20 && convex == 20 && exact == 20,
            "nonincreasing " + std::to_string(mono) + "/20, convex " + std::to_string(convex) + "/20, exact " +
                std::to_string(exact) + "/20"};
}

// One-sided sign test: P(X >= wins) under Binomial(n, 1/2).
double sign_test_p(int wins, int n) {
    double p = 0.0;
    for (int k = wins; k <= n; ++k) p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
    return p;
}

Outcome c10_plant() {
    auto t0 = std::chrono::steady_clock::now();
    const int seeds = 20;
    auto none = load("fig7a.yaml"), tight = load("fig7b.yaml"), loose = load("fig7c.yaml");
    int beat_none = 0, beat_tight = 0;
    double worst_flow = 0.0;
    for (int s = 1; s <= seeds; ++s) {
        auto var_of = [&](Scenario sc, bool track) {
            sc.sim.seed = static_cast<std::uint64_t>(s);
            auto as = assemble(sc);
            auto res = co_simulate(as, *sc.plant, as.sim.horizon);
            if (s == 1) keep(sc.name + " plant", as, res.trace);
            if (track) worst_flow = std::max(worst_flow, wormhole_path_flow(as.spec, res.trace.rows.back().r));
            return final_third_variance(res.trace);
        };
        double v_none = var_of(none, false), v_tight = var_of(tight, false), v_loose = var_of(loose, true);
        beat_none += v_loose < v_none;
        beat_tight += v_loose < v_tight;
    }
    double secs = seconds_since(t0);
    double p_none = sign_test_p(beat_none, seeds), p_tight = sign_test_p(beat_tight, seeds);
    bool ok = p_none <= tol::sign_alpha && p_tight <= tol::sign_alpha && worst_flow <= tol::negligible &&
              secs < tol::runtime_plant_s;
    return {ok, "var(0.1)<var(none) " + std::to_string(beat_none) + "/20" + fmt(" p=%.3g", p_none) +
                    ", var(0.1)<var(0.04) " + std::to_string(beat_tight) + "/20" + fmt(" p=%.3g", p_tight) +
                    fmt(", wormhole flow %.4f", worst_flow) + fmt(", %.1f s", secs)};
}

std::string trace_bytes(const SimTrace& tr) {
    std::stringstream ss;
    write_trace(ss, tr);
    return ss.str();
}

Outcome c11_determinism() {
    int same = 0, total = 0;
    for (const char* name : {"fig5b.yaml", "fig5c.yaml", "fig6b.yaml", "joint.yaml"}) {
        auto as = assemble(load(name));
        ++total;
        same += trace_bytes(simulate(as)) == trace_bytes(simulate(as));
    }
    auto sc = load("fig7a.yaml");
    auto as = assemble(sc);
    ++total;
    same += trace_bytes(co_simulate(as, *sc.plant, as.sim.horizon).trace) ==
            trace_bytes(co_simulate(as, *sc.plant, as.sim.horizon).trace);
    return {same == total, std::to_string(same) + "/" + std::to_string(total) + " repeated runs byte-identical"};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"oob equilibrium flow", c1_oob_flow},
        {"leash mitigation", c2_leash},
        {"degenerate link", c3_degenerate},
        {"in-band mitigation equivalence", c4_inband},
        {"oracle equivalence", c5_oracle},
        {"feasibility", c6_feasibility},
        {"passivity", c7_passivity},
        {"optimal drop rate", c8_drop_rate},
        {"beta statistics", c9_beta},
        {"plant study", c10_plant},
        {"determinism", c11_determinism},
    };
    // feasibility runs last so it sees every trace the others produced
    const std::size_t feasibility = 5;
    std::vector<Outcome> out(criteria.size());
    auto eval = [&](std::size_t k) {
        try {
            out[k] = criteria[k].second();
        } catch (const std::exception& e) {
            out[k] = {false, std::string("exception: ") + e.what()};
        }
    };
    for (std::size_t k = 0; k < criteria.size(); ++k)
        if (k != feasibility) eval(k);
    eval(feasibility);
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto& o = out[k];
        failed += !o.pass;
        std::printf("%s %2zu %-32s %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed == 0 ? 0 : 1;
}

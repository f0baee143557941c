#include <CLI11.hpp>

#include <wormsim/wormsim.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace wormsim;

namespace {

struct Options {
    std::string config;
    std::string out = "out";
    std::string trace;
    std::optional<std::uint64_t> seed;
    std::optional<double> dt, horizon;
    bool no_plots = false;
    double tol = -1.0;
};

enum Exit { ok = 0, config_error = 1, numerical_error = 2, audit_failure = 3 };

ScenarioConfig load(const Options& o) {
    auto cfg = load_config(o.config);
    auto& sim = cfg.scenario.sim;
    if (o.seed) sim.seed = *o.seed;
    if (o.dt) {
        if (!(*o.dt > 0)) throw ConfigError("--dt must be > 0");
        sim.dt = *o.dt;
    }
    if (o.horizon) {
        if (*o.horizon < 0) throw ConfigError("--horizon must be >= 0");
        sim.horizon = *o.horizon;
    }
    return cfg;
}

void prepare_out(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

void write_summary(const std::string& dir, const std::string& text) {
    std::ofstream os(dir + "/summary.txt");
    if (!os) throw IoError("cannot write " + dir + "/summary.txt");
    os << text;
    std::cout << text;
}

std::string join(const std::vector<double>& v) {
    std::ostringstream os;
    os << std::setprecision(6);
    for (std::size_t k = 0; k < v.size(); ++k) os << (k ? " " : "") << v[k];
    return os.str();
}

bool has_kind(const Scenario& sc, LinkKind kind) {
    return std::any_of(sc.network.links.begin(), sc.network.links.end(),
                       [&](const LinkSpec& l) { return l.kind == kind; });
}

std::size_t feasible_rows(const SystemAssembly& as, const SimTrace& tr) {
    std::size_t n = 0;
    for (const auto& row : tr.rows) n += feasible(as.spec, row.r);
    return n;
}

int run_network(const std::string& cmd, const Options& o) {
    auto cfg = load(o);
    const auto& raw = cfg.scenario;
    bool oob = has_kind(raw, LinkKind::oob_wormhole), ib = has_kind(raw, LinkKind::ib_wormhole);
    if (cmd == "run-oob" && !oob) throw ConfigError(o.config + ": run-oob needs an oob_wormhole link");
    if (cmd == "run-ib" && !ib) throw ConfigError(o.config + ": run-ib needs an ib_wormhole link");
    if (cmd == "run-plant" && !raw.plant) throw ConfigError(o.config + ": run-plant needs a plant section");

    auto sc = resolve(cfg);
    auto as = assemble(sc);
    prepare_out(o.out);

    SimTrace tr;
    std::optional<CoSimStats> stats;
    if (cmd == "run-plant") {
        auto res = co_simulate(as, *sc.plant, sc.sim.horizon);
        tr = std::move(res.trace);
        stats = res.stats;
    } else {
        tr = simulate(as);
    }
    emit_trace(tr, o.out + "/trace.csv");
    if (!o.no_plots) plot_trace(tr, o.out);

    std::ostringstream s;
    s << std::setprecision(6);
    s << "scenario: " << sc.name << "\n";
    s << "command: " << cmd << "\n";
    s << "seed: " << sc.sim.seed << "  dt: " << sc.sim.dt << "  horizon: " << sc.sim.horizon << "\n";
    s << "rows: " << tr.rows.size() << "\n";
    std::size_t window = std::min(sc.sim.window, tr.rows.size());
    bool conv = window > 0 && converged(tr, window, sc.sim.tol);
    s << "converged: " << (conv ? "yes" : "no") << " (window " << window << ", tol " << sc.sim.tol << ")\n";
    auto mean = trailing_mean(tr, window);
    const auto& last = tr.rows.back();
    for (std::size_t i = 0; i < as.spec.sources.size(); ++i) {
        auto off = as.spec.path_offset(i);
        std::vector<double> r(mean.begin() + static_cast<std::ptrdiff_t>(off),
                              mean.begin() + static_cast<std::ptrdiff_t>(off + as.spec.sources[i].paths.size()));
        s << "source " << as.spec.sources[i].id << " path rates: " << join(r) << "\n";
    }
    s << "path totals: " << join(path_totals(as.spec, mean)) << "\n";
    s << "wormhole path flow: " << wormhole_path_flow(as.spec, mean) << "\n";
    for (std::size_t l = 0; l < as.spec.links.size(); ++l) {
        const auto& ls = as.spec.links[l];
        if (!is_wormhole(ls.kind)) continue;
        s << "link " << ls.id << " (" << to_string(ls.kind) << "): rate " << last.rl[l] << ", drop " << last.drop[l]
          << ", delay " << last.delay[l] << ", mitigation " << last.mit[l]
          << (last.detect[l] ? ", detected" : "") << "\n";
        if (as.plans[l]) s << "link " << ls.id << " planned drop rate: " << as.plans[l]->phi_star << "\n";
    }
    for (std::size_t i = 0; i < as.spec.sources.size(); ++i)
        s << "source " << as.spec.sources[i].id << " mean delay: " << mean_source_delay(as, tr, i) << "\n";
    if (has_inband_beta(as)) s << "compromise fraction: " << last.x_compromise << "\n";
    std::size_t feas = feasible_rows(as, tr);
    s << "feasible rows: " << feas << "/" << tr.rows.size() << "\n";
    s << "saturation events: " << std::count_if(tr.events.begin(), tr.events.end(), [](const auto& e) {
        return e.link >= 0;
    }) << "\n";
    if (stats) {
        s << "plant samples: " << stats->samples << "  dropped: " << stats->drops << "  late: " << stats->late << "\n";
        s << "plant final-third variance: " << final_third_variance(tr) << "\n";
    }
    write_summary(o.out, s.str());
    if (feas != tr.rows.size()) throw NumericalError("trace left the feasible set");
    return ok;
}

int run_oracle(const Options& o) {
    auto cfg = load(o);
    auto as = assemble(resolve(cfg));
    prepare_out(o.out);
    auto res = equilibrium_oracle(as.spec, total_link_laws(as));
    as.initial.r = res.r;
    auto tr = simulate(as, 0.0, as.sim.dt);
    emit_trace(tr, o.out + "/trace.csv");

    std::ostringstream s;
    s << std::setprecision(9);
    s << "scenario: " << cfg.scenario.name << "\n";
    s << "command: oracle\n";
    for (std::size_t i = 0; i < as.spec.sources.size(); ++i) {
        auto off = as.spec.path_offset(i);
        auto n = as.spec.sources[i].paths.size();
        std::vector<double> r(res.r.begin() + static_cast<std::ptrdiff_t>(off),
                              res.r.begin() + static_cast<std::ptrdiff_t>(off + n));
        std::vector<double> q(res.q.begin() + static_cast<std::ptrdiff_t>(off),
                              res.q.begin() + static_cast<std::ptrdiff_t>(off + n));
        s << "source " << as.spec.sources[i].id << " path rates: " << join(r) << "\n";
        s << "source " << as.spec.sources[i].id << " path delays: " << join(q) << "\n";
    }
    s << "link rates: " << join(res.link_rates) << "\n";
    s << "path totals: " << join(path_totals(as.spec, res.r)) << "\n";
    s << "wormhole path flow: " << wormhole_path_flow(as.spec, res.r) << "\n";
    s << "potential: " << res.objective << "\n";
    s << "iterations: " << res.iterations << "\n";
    write_summary(o.out, s.str());
    return ok;
}

int run_audit(const Options& o) {
    auto cfg = load(o);
    auto as = assemble(resolve(cfg));
    std::string trace_path = o.trace.empty() ? o.out + "/trace.csv" : o.trace;
    auto tr = trace_from_table(as, read_trace_table(trace_path));
    if (tr.rows.size() < 2) throw AuditError("trace needs at least two rows");
    double dt = tr.rows[1].t - tr.rows[0].t;
    double tol = o.tol > 0 ? o.tol : 10.0 * dt;
    auto blocks = audit_all(as, tr, tol);
    prepare_out(o.out);

    std::ofstream csv(o.out + "/audit.csv");
    if (!csv) throw IoError("cannot write " + o.out + "/audit.csv");
    csv << "block,violations,max_violation,min_storage,min_margin,tol,passed\n";
    std::ostringstream s;
    s << std::setprecision(6);
    s << "scenario: " << cfg.scenario.name << "\n";
    s << "command: audit (" << trace_path << ")\n";
    bool all = true;
    for (const auto& b : blocks) {
        csv << b.block << ',' << b.violations << ',' << format_double(b.max_violation) << ','
            << format_double(b.min_storage) << ',' << format_double(b.min_margin) << ',' << format_double(b.tol) << ','
            << (b.passed() ? 1 : 0) << '\n';
        s << std::left << std::setw(10) << b.block << (b.passed() ? " PASS" : " FAIL") << "  violations "
          << b.violations << "  max " << b.max_violation << "\n";
        all = all && b.passed();
    }
    write_summary(o.out, s.str());
    return all ? ok : audit_failure;
}

int run_beta(const Options& o) {
    auto cfg = load(o);
    std::optional<BetaSpec> bs = cfg.beta_study;
    if (!bs && !cfg.ib_beta.empty()) bs = cfg.ib_beta.front().second;
    if (!bs) throw ConfigError(o.config + ": beta needs a beta section or an in-band beta adversary");
    if (!bs->px.empty()) throw ConfigError(o.config + ": beta estimates a curve; tabulated points given");
    prepare_out(o.out);
    Graph g = beta_graph(bs->graph);
    auto [d1, d2] = diameter_pair(g);
    std::size_t w1 = bs->w1.value_or(d1), w2 = bs->w2.value_or(d2);
    auto seed = bs->seed.value_or(cfg.scenario.sim.seed);
    auto curve = beta_curve(g, w1, w2, bs->grid, bs->trials, seed, bs->fallback, bs->threads);

    std::ofstream csv(o.out + "/beta.csv");
    if (!csv) throw IoError("cannot write " + o.out + "/beta.csv");
    csv << "x,beta,se,fit\n";
    for (std::size_t k = 0; k < curve.x.size(); ++k)
        csv << format_double(curve.x[k]) << ',' << format_double(curve.beta[k]) << ',' << format_double(curve.se[k])
            << ',' << format_double(curve.fit[k]) << '\n';
    if (!o.no_plots) {
        write_line_chart(o.out + "/beta.svg", "beta(x)", curve.x, {{"estimate", curve.beta}, {"fit", curve.fit}});
    }

    std::ostringstream s;
    s << std::setprecision(6);
    s << "scenario: " << cfg.scenario.name << "\n";
    s << "command: beta\n";
    s << "graph nodes: " << g.size() << "  tunnel ends: " << w1 << " " << w2 << "\n";
    s << "trials: " << bs->trials << "  seed: " << seed << "\n";
    for (std::size_t k = 0; k < curve.x.size(); ++k)
        s << "x " << curve.x[k] << "  beta " << curve.beta[k] << " +- " << curve.se[k] << "  fit " << curve.fit[k]
          << "\n";
    s << "exhaustive beta(1): " << beta_exhaustive(g, w1, w2, curve.fallback) << "\n";
    write_summary(o.out, s.str());
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wormhole routing simulator"};
    app.require_subcommand(1);
    Options o;
    std::string chosen;
    auto add = [&](const std::string& name, const std::string& help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", o.config, "scenario file (YAML)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", o.seed, "override sim.seed");
        sub->add_option("--dt", o.dt, "override sim.dt");
        sub->add_option("--horizon", o.horizon, "override sim.horizon");
        sub->add_flag("--no-plots", o.no_plots, "skip SVG plots");
        sub->callback([&chosen, name] { chosen = name; });
        return sub;
    };
    add("run-oob", "simulate an out-of-band wormhole scenario");
    add("run-ib", "simulate an in-band wormhole scenario");
    add("run-joint", "simulate any combination of wormholes");
    add("run-plant", "co-simulate the integrator plant over the network");
    add("oracle", "equilibrium by potential minimisation");
    auto* audit = add("audit", "passivity report on an existing trace");
    audit->add_option("--trace", o.trace, "trace to audit (default <out>/trace.csv)");
    audit->add_option("--tol", o.tol, "violation tolerance (default 10*dt)");
    add("beta", "estimate the tunnel-length curve beta(x)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : config_error;
    }

    try {
        if (chosen.rfind("run-", 0) == 0) return run_network(chosen, o);
        if (chosen == "oracle") return run_oracle(o);
        if (chosen == "audit") return run_audit(o);
        if (chosen == "beta") return run_beta(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const InputError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const AuditError& e) {
        std::cerr << "audit error: " << e.what() << "\n";
        return audit_failure;
    } catch (const Error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return numerical_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return numerical_error;
    }
    return config_error;
}

#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "composition.hpp"
#include "error.hpp"
#include "ib_wormhole.hpp"
#include "link_models.hpp"
#include "topology.hpp"

namespace wormsim {

// Graph the beta statistic is estimated on.
struct BetaGraphSpec {
    std::size_t nodes = 20;
    double edge_prob = 0.2;
    std::uint64_t seed = 1;
    std::vector<std::pair<std::size_t, std::size_t>> edges;  // explicit graph when non-empty
};

struct BetaSpec {
    BetaGraphSpec graph;
    std::optional<std::size_t> w1, w2;  // default: a diameter pair
    std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::size_t trials = 2000;
    std::optional<std::uint64_t> seed;  // default: sim seed
    double fallback = -1.0;
    unsigned threads = 1;
    double x0 = 0.1;
    double cost = 0.5;
    std::vector<double> px, pbeta;  // tabulated curve instead of estimation
};

struct ScenarioConfig {
    Scenario scenario;
    std::vector<std::pair<int, BetaSpec>> ib_beta;  // link id, curve recipe
    std::optional<BetaSpec> beta_study;
    std::string path;
};

namespace detail {

inline std::string where(const YAML::Node& n) {
    auto m = n.Mark();
    if (m.line < 0) return "config";
    return "line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1);
}

[[noreturn]] inline void fail(const YAML::Node& n, const std::string& msg) { throw ConfigError(where(n) + ": " + msg); }

class Section {
public:
    Section(YAML::Node node, std::string name) : node_(std::move(node)), name_(std::move(name)) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) fail(node_, name_ + " must be a mapping");
    }

    const YAML::Node& node() const { return node_; }
    bool present() const { return node_ && !node_.IsNull(); }
    bool has(const char* key) const { return present() && node_[key]; }

    void allow(std::initializer_list<const char*> keys) const {
        if (!present()) return;
        std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& kv : node_) {
            auto k = kv.first.as<std::string>();
            if (!ok.count(k)) fail(kv.first, "unknown key '" + k + "' in " + name_);
        }
    }

    template <class T>
    T get(const char* key, T fallback) const {
        if (!has(key)) return fallback;
        return as<T>(node_[key], std::string(name_) + "." + key);
    }

    template <class T>
    T need(const char* key) const {
        if (!has(key)) fail(node_, "missing key '" + std::string(key) + "' in " + name_);
        return as<T>(node_[key], std::string(name_) + "." + key);
    }

    Section sub(const char* key) const {
        return Section(present() ? node_[key] : YAML::Node(), name_ + "." + key);
    }

    template <class T>
    static T as(const YAML::Node& n, const std::string& what) {
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            fail(n, "bad value for " + what);
        }
    }

private:
    YAML::Node node_;
    std::string name_;
};

template <class T>
std::vector<T> list_of(const YAML::Node& n, const std::string& what) {
    if (!n.IsSequence()) fail(n, what + " must be a list");
    std::vector<T> out;
    for (const auto& e : n) out.push_back(Section::as<T>(e, what));
    return out;
}

inline LinkKind parse_kind(const YAML::Node& n) {
    auto s = Section::as<std::string>(n, "kind");
    if (s == "valid") return LinkKind::valid;
    if (s == "oob" || s == "oob_wormhole") return LinkKind::oob_wormhole;
    if (s == "ib" || s == "ib_wormhole") return LinkKind::ib_wormhole;
    fail(n, "unknown link kind '" + s + "'");
}

inline NetworkSpec parse_network(const Section& net, std::vector<std::vector<double>>& initial) {
    net.allow({"hop_delay", "nodes", "access", "links", "sources"});
    NetworkSpec spec;
    spec.hop_delay = net.get<double>("hop_delay", 1.0);
    if (!net.has("nodes")) fail(net.node(), "missing key 'nodes' in network");
    spec.nodes = list_of<std::string>(net.node()["nodes"], "network.nodes");
    if (net.has("access")) {
        for (const auto& a : net.node()["access"]) {
            Section s(a, "access link");
            s.allow({"id", "from", "to"});
            spec.access.push_back({s.need<int>("id"), s.need<std::string>("from"), s.need<std::string>("to")});
        }
    }
    if (!net.has("links")) fail(net.node(), "missing key 'links' in network");
    for (const auto& l : net.node()["links"]) {
        Section s(l, "link");
        s.allow({"id", "kind", "from", "to", "capacity", "alpha", "queue_capacity", "slack"});
        LinkSpec ls;
        ls.id = s.need<int>("id");
        ls.kind = s.has("kind") ? parse_kind(l["kind"]) : LinkKind::valid;
        ls.from = s.need<std::string>("from");
        ls.to = s.need<std::string>("to");
        ls.capacity = s.get<double>("capacity", 1.0);
        ls.alpha = s.get<double>("alpha", 1.0);
        ls.queue_capacity = s.get<int>("queue_capacity", 5);
        ls.slack = s.get<double>("slack", ls.kind == LinkKind::valid ? 0.0 : 1.0);
        spec.links.push_back(ls);
    }
    if (!net.has("sources")) fail(net.node(), "missing key 'sources' in network");
    for (const auto& src : net.node()["sources"]) {
        Section s(src, "source");
        s.allow({"id", "node", "dest", "rate", "paths", "initial"});
        SourceSpec ss;
        ss.id = s.need<int>("id");
        ss.node = s.need<std::string>("node");
        ss.dest = s.need<std::string>("dest");
        ss.rate = s.need<double>("rate");
        if (!s.has("paths")) fail(src, "missing key 'paths' in source");
        for (const auto& p : src["paths"]) ss.paths.push_back(list_of<int>(p, "path"));
        initial.push_back(s.has("initial") ? list_of<double>(src["initial"], "source.initial")
                                           : std::vector<double>{});
        spec.sources.push_back(std::move(ss));
    }
    try {
        validate(spec);
    } catch (const InputError& e) {
        fail(net.node(), e.what());
    }
    return spec;
}

inline DropProfile parse_profile(const YAML::Node& n) {
    if (n.IsScalar()) {
        auto s = Section::as<std::string>(n, "profile");
        if (s == "sim") return SimProfile{};
        if (s == "none") return NoDrop{};
        fail(n, "unknown drop profile '" + s + "'");
    }
    Section s(n, "profile");
    s.allow({"constant", "threshold", "prob"});
    if (s.has("constant")) return ConstantDrop{s.need<double>("constant")};
    if (s.has("threshold")) {
        ThresholdDrop t{s.need<double>("threshold"), s.get<double>("prob", 0.9)};
        if (t.prob < 0 || t.prob > 1) fail(n, "drop probability must be in [0,1]");
        return t;
    }
    fail(n, "profile needs 'constant' or 'threshold'");
}

inline std::vector<int> id_list(const Section& s, const char* key) {
    if (!s.has(key)) return {};
    return list_of<int>(s.node()[key], key);
}

inline BetaSpec parse_beta(const Section& b) {
    b.allow({"graph", "w1", "w2", "grid", "trials", "seed", "fallback", "threads", "x0", "cost", "points"});
    BetaSpec bs;
    auto g = b.sub("graph");
    g.allow({"nodes", "edge_prob", "seed", "edges"});
    bs.graph.nodes = g.get<std::size_t>("nodes", bs.graph.nodes);
    bs.graph.edge_prob = g.get<double>("edge_prob", bs.graph.edge_prob);
    bs.graph.seed = g.get<std::uint64_t>("seed", bs.graph.seed);
    if (g.has("edges"))
        for (const auto& e : g.node()["edges"]) {
            auto v = list_of<std::size_t>(e, "edge");
            if (v.size() != 2) fail(e, "edge needs two endpoints");
            if (v[0] >= bs.graph.nodes || v[1] >= bs.graph.nodes) fail(e, "edge endpoint out of range");
            bs.graph.edges.emplace_back(v[0], v[1]);
        }
    for (const char* k : {"w1", "w2"}) {
        if (!b.has(k)) continue;
        auto n = b.node()[k];
        if (n.IsScalar() && n.Scalar() == "auto") continue;
        (std::string(k) == "w1" ? bs.w1 : bs.w2) = Section::as<std::size_t>(n, k);
    }
    if (b.has("grid")) bs.grid = list_of<double>(b.node()["grid"], "beta.grid");
    bs.trials = b.get<std::size_t>("trials", bs.trials);
    if (b.has("seed")) bs.seed = b.need<std::uint64_t>("seed");
    bs.fallback = b.get<double>("fallback", bs.fallback);
    bs.threads = b.get<unsigned>("threads", bs.threads);
    bs.x0 = b.get<double>("x0", bs.x0);
    bs.cost = b.get<double>("cost", bs.cost);
    if (b.has("points")) {
        auto p = b.sub("points");
        p.allow({"x", "beta"});
        bs.px = list_of<double>(p.node()["x"], "points.x");
        bs.pbeta = list_of<double>(p.node()["beta"], "points.beta");
        if (bs.px.size() != bs.pbeta.size() || bs.px.size() < 2)
            fail(p.node(), "points.x and points.beta need equal length >= 2");
    }
    if (bs.trials == 0) fail(b.node(), "trials must be >= 1");
    return bs;
}

}  // namespace detail

inline Graph beta_graph(const BetaGraphSpec& g) {
    if (g.edges.empty()) return random_connected_graph(g.nodes, g.edge_prob, g.seed);
    Graph out(g.nodes);
    for (auto [a, b] : g.edges) out.add_edge(a, b);
    return out;
}

// Lexicographically first pair of nodes at maximum hop distance.
inline std::pair<std::size_t, std::size_t> diameter_pair(const Graph& g) {
    std::pair<std::size_t, std::size_t> best{0, g.size() > 1 ? 1 : 0};
    int far = -1;
    for (std::size_t a = 0; a < g.size(); ++a) {
        auto d = g.bfs(a);
        for (std::size_t b = a + 1; b < g.size(); ++b)
            if (d[b] > far) {
                far = d[b];
                best = {a, b};
            }
    }
    return best;
}

inline BetaCurve build_beta_curve(const BetaSpec& bs, std::uint64_t default_seed) {
    if (!bs.px.empty()) return make_beta_curve(bs.px, bs.pbeta);
    Graph g = beta_graph(bs.graph);
    auto [d1, d2] = diameter_pair(g);
    std::size_t w1 = bs.w1.value_or(d1), w2 = bs.w2.value_or(d2);
    return beta_curve(g, w1, w2, bs.grid, bs.trials, bs.seed.value_or(default_seed), bs.fallback, bs.threads);
}

inline ScenarioConfig parse_config(const YAML::Node& root, const std::string& origin = "config") {
    using detail::Section;
    ScenarioConfig cfg;
    cfg.path = origin;
    Section top(root, "config");
    top.allow({"name", "network", "adversary", "mitigation", "sim", "plant", "beta"});
    auto& sc = cfg.scenario;
    sc.name = top.get<std::string>("name", "scenario");

    auto sim = top.sub("sim");
    sim.allow({"dt", "horizon", "seed", "window", "tol", "delay_ceiling"});
    sc.sim.dt = sim.get<double>("dt", sc.sim.dt);
    sc.sim.horizon = sim.get<double>("horizon", sc.sim.horizon);
    sc.sim.seed = sim.get<std::uint64_t>("seed", sc.sim.seed);
    sc.sim.window = sim.get<std::size_t>("window", sc.sim.window);
    sc.sim.tol = sim.get<double>("tol", sc.sim.tol);
    sc.sim.delay_ceiling = sim.get<double>("delay_ceiling", sc.sim.delay_ceiling);
    if (!(sc.sim.dt > 0)) detail::fail(sim.node()["dt"], "dt must be > 0");
    if (sc.sim.horizon < 0) detail::fail(sim.node()["horizon"], "horizon must be >= 0");

    if (top.has("beta")) cfg.beta_study = detail::parse_beta(top.sub("beta"));
    if (!top.has("network")) {
        if (cfg.beta_study) return cfg;
        detail::fail(root, "missing key 'network'");
    }
    sc.network = detail::parse_network(top.sub("network"), sc.initial);

    auto adv = top.sub("adversary");
    adv.allow({"oob", "ib"});
    if (adv.has("oob"))
        for (const auto& n : adv.node()["oob"]) {
            Section s(n, "adversary.oob");
            s.allow({"link", "profile", "plan"});
            OobAdversary a;
            a.link = s.need<int>("link");
            if (!sc.network.has_link(a.link)) detail::fail(n, "unknown link " + std::to_string(a.link));
            if (s.has("profile") && s.has("plan")) detail::fail(n, "give either profile or plan, not both");
            if (s.has("profile")) a.profile = detail::parse_profile(n["profile"]);
            if (s.has("plan")) {
                auto p = s.sub("plan");
                p.allow({"epsilon", "intercept", "slope"});
                const auto& ls = sc.network.links[sc.network.link_index(a.link)];
                std::vector<double> margins, rates;
                for (std::size_t i = 0; i < sc.network.sources.size(); ++i) {
                    margins.push_back(delta_margin(sc.network, i, ls.from, ls.to));
                    rates.push_back(sc.network.sources[i].rate);
                }
                AffineUtility u{p.get<double>("intercept", 0.0), p.get<double>("slope", 0.0)};
                try {
                    a.plan = optimal_drop_rate(margins, rates, ls.alpha, u, p.get<double>("epsilon", 0.01));
                } catch (const InputError& e) {
                    detail::fail(p.node(), e.what());
                }
                a.profile = ConstantDrop{a.plan->phi_star};
            }
            sc.oob.push_back(std::move(a));
        }
    if (adv.has("ib"))
        for (const auto& n : adv.node()["ib"]) {
            Section s(n, "adversary.ib");
            s.allow({"link", "reroute", "beta"});
            int link = s.need<int>("link");
            if (!sc.network.has_link(link)) detail::fail(n, "unknown link " + std::to_string(link));
            if (s.has("reroute") == s.has("beta")) detail::fail(n, "in-band adversary needs exactly one of reroute, beta");
            if (s.has("reroute")) {
                auto r = s.sub("reroute");
                r.allow({"lambda", "first", "second"});
                RerouteMode m{r.get<double>("lambda", 0.3), detail::id_list(r, "first"), detail::id_list(r, "second")};
                if (m.lambda < 0 || m.lambda > 1) detail::fail(r.node(), "lambda must be in [0,1]");
                sc.ib.push_back({link, m});
            } else {
                cfg.ib_beta.emplace_back(link, detail::parse_beta(s.sub("beta")));
            }
        }

    auto mit = top.sub("mitigation");
    mit.allow({"leash", "detector"});
    if (mit.has("leash")) {
        auto l = mit.sub("leash");
        l.allow({"enabled", "skew_mean", "dmax", "links"});
        sc.leash.enabled = l.get<bool>("enabled", true);
        sc.leash.policy.skew_mean = l.get<double>("skew_mean", 1.0);
        if (!(sc.leash.policy.skew_mean > 0)) detail::fail(l.node(), "skew_mean must be > 0");
        if (l.has("dmax")) {
            auto d = l.sub("dmax");
            d.allow({"constant", "adaptive"});
            if (d.has("constant") == d.has("adaptive")) detail::fail(d.node(), "dmax needs exactly one of constant, adaptive");
            if (d.has("constant"))
                sc.leash.policy.dmax = ConstantDmax{d.need<double>("constant")};
            else
                sc.leash.policy.dmax = AdaptiveDmax{d.need<double>("adaptive")};
        }
        sc.leash.links = detail::id_list(l, "links");
    }
    if (mit.has("detector")) {
        auto d = mit.sub("detector");
        d.allow({"enabled", "penalty", "threshold", "smoothing", "links"});
        sc.detector.enabled = d.get<bool>("enabled", true);
        sc.detector.penalty = d.get<double>("penalty", sc.detector.penalty);
        sc.detector.threshold = d.get<double>("threshold", sc.detector.threshold);
        sc.detector.smoothing = d.get<double>("smoothing", sc.detector.smoothing);
        if (!(sc.detector.smoothing > 0 && sc.detector.smoothing <= 1))
            detail::fail(d.node(), "smoothing must be in (0,1]");
        sc.detector.links = detail::id_list(d, "links");
    }

    if (top.has("plant")) {
        auto p = top.sub("plant");
        p.allow({"period", "gain", "noise_std", "x0", "source"});
        PlantSettings ps;
        ps.period = p.get<double>("period", ps.period);
        ps.gain = p.get<double>("gain", ps.gain);
        ps.noise_std = p.get<double>("noise_std", ps.noise_std);
        ps.x0 = p.get<double>("x0", ps.x0);
        ps.source = p.get<int>("source", ps.source);
        if (!(ps.period > 0)) detail::fail(p.node(), "period must be > 0");
        if (!(ps.gain > 0)) detail::fail(p.node(), "gain must be > 0");
        sc.plant = ps;
    }
    return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw ConfigError(path + ": cannot read file");
    } catch (const YAML::ParserException& e) {
        throw ConfigError(path + ": line " + std::to_string(e.mark.line + 1) + ", column " +
                          std::to_string(e.mark.column + 1) + ": " + e.msg);
    }
    try {
        return parse_config(root, path);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

// Estimate any beta curves and hand back a scenario ready for assemble().
inline Scenario resolve(const ScenarioConfig& cfg) {
    Scenario sc = cfg.scenario;
    for (const auto& [link, bs] : cfg.ib_beta) {
        BetaMode m;
        m.curve = build_beta_curve(bs, sc.sim.seed);
        m.x0 = bs.x0;
        m.cost = bs.cost;
        if (m.x0 < m.curve.x.front() || m.x0 > m.curve.x.back())
            throw ConfigError(cfg.path + ": beta.x0 must lie inside the grid");
        sc.ib.push_back({link, m});
    }
    return sc;
}

}  // namespace wormsim

#pragma once

#include <wormsim/composition.hpp>

namespace fixtures {

inline constexpr double kValidCapacity = 3.306292545673027;

// Two sources sharing paths {4,5}, {6,7}, {9} towards D; links 1-3 and 8
// are zero-delay access stubs.
inline wormsim::NetworkSpec canonical_network(wormsim::LinkKind link9 = wormsim::LinkKind::oob_wormhole,
                                              double c9 = 1.0, double a9 = 2.0, double g9 = 1.0) {
    using wormsim::LinkKind;
    wormsim::NetworkSpec n;
    n.nodes = {"S1", "S2", "H", "G", "A", "B", "D"};
    n.access = {{1, "S1", "H"}, {2, "S2", "H"}, {3, "H", "G"}, {8, "A", "B"}};
    auto valid = [](int id, const char* a, const char* b) {
        return wormsim::LinkSpec{id, LinkKind::valid, a, b, kValidCapacity, 1.0, 5, 0.0};
    };
    n.links = {valid(4, "G", "A"), valid(5, "A", "D"), valid(6, "G", "B"), valid(7, "B", "D"),
               wormsim::LinkSpec{9, link9, "G", "D", c9, a9, 5, g9}};
    std::vector<std::vector<int>> paths = {{4, 5}, {6, 7}, {9}};
    n.sources = {{1, "S1", "D", 10.0, paths}, {2, "S2", "D", 5.0, paths}};
    return n;
}

inline wormsim::Scenario canonical_oob() {
    wormsim::Scenario sc;
    sc.name = "oob";
    sc.network = canonical_network();
    sc.initial = {{5, 2, 3}, {2, 2, 1}};
    sc.oob = {{9, wormsim::SimProfile{}, std::nullopt}};
    sc.sim.horizon = 100.0;
    return sc;
}

inline wormsim::Scenario canonical_leash() {
    auto sc = canonical_oob();
    sc.name = "leash";
    sc.leash.enabled = true;
    sc.leash.policy = {1.0, wormsim::AdaptiveDmax{2.0}};
    return sc;
}

inline wormsim::Scenario degenerate_link() {
    auto sc = canonical_oob();
    sc.name = "degenerate";
    sc.network = canonical_network(wormsim::LinkKind::valid, 0.01, 1.0, 0.0);
    sc.oob.clear();
    sc.sim.dt = 0.005;
    sc.sim.window = 1000;
    return sc;
}

inline wormsim::Scenario canonical_ib(bool detection) {
    wormsim::Scenario sc;
    sc.name = "ib";
    sc.network = canonical_network(wormsim::LinkKind::ib_wormhole, 15.0, 1.0, 0.0);
    sc.initial = {{0.5, 0.5, 9}, {0.5, 0.5, 4}};
    sc.ib = {{9, wormsim::RerouteMode{0.3, {4, 5}, {6, 7}}}};
    sc.detector.enabled = detection;
    sc.sim.horizon = 30.0;
    return sc;
}

// Integrator loop closed over source 1; optional constant-window leash.
inline wormsim::Scenario plant_study(std::optional<double> dmax, std::uint64_t seed = 1) {
    using wormsim::LinkKind;
    wormsim::Scenario sc;
    sc.name = "plant";
    sc.network = canonical_network(LinkKind::oob_wormhole, 1.0, 0.1, 0.01);
    for (auto& l : sc.network.links)
        if (l.kind == LinkKind::valid) l.alpha = 0.05;
    sc.initial = {{5, 2, 3}, {2, 2, 1}};
    sc.oob = {{9, wormsim::ThresholdDrop{5.0, 0.9}, std::nullopt}};
    if (dmax) {
        sc.leash.enabled = true;
        sc.leash.policy = {0.05, wormsim::ConstantDmax{*dmax}};
    }
    sc.sim.horizon = 60.0;
    sc.sim.seed = seed;
    sc.plant = wormsim::PlantSettings{};
    return sc;
}

}  // namespace fixtures

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <thread>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "topology.hpp"

namespace wormsim {

// A third colluder W3 keeps the tunnel W1 -> W3 -> W2 from looping back.
inline bool collapse_safe(int d13, int d23) {
    if (d13 < 0 || d23 < 0) throw InputError("hop counts must be >= 0");
    return d13 < d23 + 3;
}

struct BetaPoint {
    double x = 0.0;
    double beta = 0.0;
    double se = 0.0;
    std::size_t trials = 0;
};

struct BetaCurve {
    std::vector<double> x;     // increasing
    std::vector<double> beta;  // raw estimates
    std::vector<double> se;
    std::vector<double> fit;   // convex, nonincreasing
    std::size_t trials = 0;
    double fallback = 0.0;
};

namespace detail {

struct TunnelTable {
    std::vector<int> length;  // d(W1,v) + d(v,W2), or -1 when v is unusable
};

inline TunnelTable tunnel_table(const Graph& g, std::size_t w1, std::size_t w2) {
    auto d1 = g.bfs(w1);
    auto d2 = g.bfs(w2);
    TunnelTable t;
    t.length.assign(g.size(), -1);
    for (std::size_t v = 0; v < g.size(); ++v) {
        if (v == w1 || v == w2 || d1[v] < 0 || d2[v] < 0) continue;
        if (collapse_safe(d1[v], d2[v])) t.length[v] = d1[v] + d2[v];
    }
    return t;
}

inline std::size_t subset_size(std::size_t n, double x) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * x + 1e-9));
}

}  // namespace detail

// Shortest collapse-safe tunnel over all nodes (the x = 1 value).
inline double beta_exhaustive(const Graph& g, std::size_t w1, std::size_t w2, double fallback = -1.0) {
    if (fallback < 0) fallback = static_cast<double>(g.size());
    auto t = detail::tunnel_table(g, w1, w2);
    int best = -1;
    for (int len : t.length)
        if (len >= 0 && (best < 0 || len < best)) best = len;
    return best < 0 ? fallback : best;
}

// Each trial draws its subset from a stream keyed by (seed, trial), so the
// estimate is identical for any thread count.
inline BetaPoint beta_estimate(const Graph& g, std::size_t w1, std::size_t w2, double x, std::size_t trials,
                               std::uint64_t seed, double fallback = -1.0, unsigned threads = 1) {
    const std::size_t n = g.size();
    if (w1 >= n || w2 >= n) throw InputError("wormhole endpoint out of range");
    if (!(x > 0 && x <= 1)) throw InputError("compromise fraction must be in (0,1]");
    if (trials == 0) throw InputError("trials must be >= 1");
    std::size_t k = detail::subset_size(n, x);
    if (k == 0) throw InputError("compromised subset is empty at this fraction");
    if (fallback < 0) fallback = static_cast<double>(n);

    auto table = detail::tunnel_table(g, w1, w2);
    std::vector<double> value(trials);
    auto run = [&](std::size_t lo, std::size_t hi) {
        std::vector<std::size_t> perm(n);
        for (std::size_t t = lo; t < hi; ++t) {
            Stream rng(seed, "beta", t);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            int best = -1;
            for (std::size_t j = 0; j < k; ++j) {
                auto pick = j + static_cast<std::size_t>(rng.below(n - j));
                std::swap(perm[j], perm[pick]);
                int len = table.length[perm[j]];
                if (len >= 0 && (best < 0 || len < best)) best = len;
            }
            value[t] = best < 0 ? fallback : best;
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(trials)));
    if (threads == 1) {
        run(0, trials);
    } else {
        std::vector<std::jthread> pool;
        std::size_t chunk = (trials + threads - 1) / threads;
        for (unsigned w = 0; w < threads; ++w) {
            std::size_t lo = w * chunk, hi = std::min(trials, lo + chunk);
            if (lo < hi) pool.emplace_back(run, lo, hi);
        }
    }

    double mean = 0.0;
    for (double v : value) mean += v;
    mean /= static_cast<double>(trials);
    double ss = 0.0;
    for (double v : value) ss += (v - mean) * (v - mean);
    double se = trials > 1 ? std::sqrt(ss / static_cast<double>(trials - 1) / static_cast<double>(trials)) : 0.0;
    return {x, mean, se, trials};
}

// Least-squares-style convex, nonincreasing fit: pool adjacent slope
// violators (weighted by interval length), cap slopes at zero, re-anchor.
inline std::vector<double> convexify(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size()) throw InputError("curve arrays differ in length");
    if (n < 2) return y;
    struct Block {
        double slope, weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        double w = x[k + 1] - x[k];
        if (!(w > 0)) throw InputError("curve abscissae must be strictly increasing");
        blocks.push_back({(y[k + 1] - y[k]) / w, w, 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].slope > blocks.back().slope) {
            auto b = blocks.back();
            blocks.pop_back();
            auto& a = blocks.back();
            a.slope = (a.slope * a.weight + b.slope * b.weight) / (a.weight + b.weight);
            a.weight += b.weight;
            a.count += b.count;
        }
    }
    std::vector<double> slope;
    for (const auto& b : blocks)
        for (std::size_t c = 0; c < b.count; ++c) slope.push_back(std::min(0.0, b.slope));
    std::vector<double> fit(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) fit[k] = fit[k - 1] + slope[k - 1] * (x[k] - x[k - 1]);
    double shift = 0.0;
    for (std::size_t k = 0; k < n; ++k) shift += y[k] - fit[k];
    shift /= static_cast<double>(n);
    for (auto& v : fit) v += shift;
    return fit;
}

inline BetaCurve make_beta_curve(std::vector<double> x, std::vector<double> beta, std::vector<double> se = {},
                                 std::size_t trials = 0, double fallback = 0.0) {
    if (x.size() < 2) throw InputError("beta curve needs at least two points");
    if (se.empty()) se.assign(x.size(), 0.0);
    BetaCurve c;
    c.fit = convexify(x, beta);
    c.x = std::move(x);
    c.beta = std::move(beta);
    c.se = std::move(se);
    c.trials = trials;
    c.fallback = fallback;
    return c;
}

inline BetaCurve beta_curve(const Graph& g, std::size_t w1, std::size_t w2, const std::vector<double>& xs,
                            std::size_t trials, std::uint64_t seed, double fallback = -1.0, unsigned threads = 1) {
    if (fallback < 0) fallback = static_cast<double>(g.size());
    std::vector<double> b, se;
    for (double x : xs) {
        auto p = beta_estimate(g, w1, w2, x, trials, seed, fallback, threads);
        b.push_back(p.beta);
        se.push_back(p.se);
    }
    return make_beta_curve(xs, b, se, trials, fallback);
}

inline double beta_at(const BetaCurve& c, double x) {
    const auto& y = c.fit.empty() ? c.beta : c.fit;
    if (c.x.empty()) throw InputError("empty beta curve");
    if (x < c.x.front() - 1e-12 || x > c.x.back() + 1e-12) throw InputError("beta curve evaluated outside its range");
    x = std::clamp(x, c.x.front(), c.x.back());
    auto it = std::upper_bound(c.x.begin(), c.x.end(), x);
    std::size_t k = it == c.x.end() ? c.x.size() - 1 : static_cast<std::size_t>(it - c.x.begin());
    if (k == 0) k = 1;
    double w = (x - c.x[k - 1]) / (c.x[k] - c.x[k - 1]);
    return y[k - 1] + w * (y[k] - y[k - 1]);
}

// Central difference on the piecewise-linear fit (one-sided at the ends).
inline double beta_derivative(const BetaCurve& c, double x) {
    if (c.x.size() < 2) throw InputError("beta curve needs at least two points");
    if (x < c.x.front() - 1e-12 || x > c.x.back() + 1e-12) throw InputError("beta curve evaluated outside its range");
    double h = 1e-6 * (c.x.back() - c.x.front());
    double lo = std::max(c.x.front(), x - h);
    double hi = std::min(c.x.back(), x + h);
    return (beta_at(c, hi) - beta_at(c, lo)) / (hi - lo);
}

struct CompromiseState {
    double x = 0.0;
    double cost = 1.0;  // c_A
};

inline CompromiseState compromise_step(const CompromiseState& s, double beta_slope, double dt) {
    if (!(dt > 0)) throw InputError("dt must be > 0");
    CompromiseState n = s;
    n.x = std::clamp(s.x + dt * std::max(0.0, -beta_slope - s.cost), 0.0, 1.0);
    return n;
}

inline double ib_delay(double r, double x, const BetaCurve& c, const std::function<double(double)>& f) {
    if (r < 0) throw InputError("link rate must be >= 0");
    return beta_at(c, x) * f(r);
}

}  // namespace wormsim

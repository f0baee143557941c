#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace wormsim {

enum class LinkKind { valid, oob_wormhole, ib_wormhole };

inline const char* to_string(LinkKind k) {
    switch (k) {
        case LinkKind::valid: return "valid";
        case LinkKind::oob_wormhole: return "oob_wormhole";
        case LinkKind::ib_wormhole: return "ib_wormhole";
    }
    return "?";
}

inline bool is_wormhole(LinkKind k) { return k != LinkKind::valid; }

struct LinkSpec {
    int id = 0;
    LinkKind kind = LinkKind::valid;
    std::string from;
    std::string to;
    double capacity = 1.0;   // flow units
    double alpha = 1.0;      // propagation delay, time units
    int queue_capacity = 5;  // M/M/1/K buffer size
    double slack = 0.0;      // leash geometric slack g_l, time units
};

// Zero-delay stub: contributes to hop distances and walk connectivity only.
struct AccessLink {
    int id = 0;
    std::string from;
    std::string to;
};

struct SourceSpec {
    int id = 0;
    std::string node;
    std::string dest;
    double rate = 0.0;
    std::vector<std::vector<int>> paths;  // link ids, in traversal order
};

struct NetworkSpec {
    std::vector<std::string> nodes;
    std::vector<LinkSpec> links;
    std::vector<AccessLink> access;
    std::vector<SourceSpec> sources;
    double hop_delay = 1.0;  // zeta

    std::size_t node_index(const std::string& name) const {
        auto it = std::find(nodes.begin(), nodes.end(), name);
        if (it == nodes.end()) throw InputError("unknown node '" + name + "'");
        return static_cast<std::size_t>(it - nodes.begin());
    }

    bool has_link(int id) const {
        return std::any_of(links.begin(), links.end(), [&](const LinkSpec& l) { return l.id == id; });
    }

    std::size_t link_index(int id) const {
        for (std::size_t k = 0; k < links.size(); ++k)
            if (links[k].id == id) return k;
        throw InputError("unknown link " + std::to_string(id));
    }

    std::size_t path_count() const {
        std::size_t n = 0;
        for (const auto& s : sources) n += s.paths.size();
        return n;
    }

    // Start of source i's block in the flat path vector.
    std::size_t path_offset(std::size_t i) const {
        std::size_t n = 0;
        for (std::size_t k = 0; k < i; ++k) n += sources[k].paths.size();
        return n;
    }

    const std::vector<int>& flat_path(std::size_t p) const {
        for (const auto& s : sources) {
            if (p < s.paths.size()) return s.paths[p];
            p -= s.paths.size();
        }
        throw InputError("path index out of range");
    }
};

// Undirected adjacency over node indices.
class Graph {
public:
    Graph() = default;
    explicit Graph(std::size_t n) : adj_(n) {}

    std::size_t size() const { return adj_.size(); }

    void add_edge(std::size_t a, std::size_t b) {
        if (a >= adj_.size() || b >= adj_.size()) throw InputError("edge endpoint out of range");
        if (a == b) return;
        if (std::find(adj_[a].begin(), adj_[a].end(), b) != adj_[a].end()) return;
        adj_[a].push_back(b);
        adj_[b].push_back(a);
    }

    const std::vector<std::size_t>& neighbors(std::size_t v) const { return adj_.at(v); }

    // Hop distances from src; -1 marks unreachable.
    std::vector<int> bfs(std::size_t src) const {
        if (src >= adj_.size()) throw InputError("node index out of range");
        std::vector<int> d(adj_.size(), -1);
        std::deque<std::size_t> q{src};
        d[src] = 0;
        while (!q.empty()) {
            auto v = q.front();
            q.pop_front();
            for (auto w : adj_[v]) {
                if (d[w] < 0) {
                    d[w] = d[v] + 1;
                    q.push_back(w);
                }
            }
        }
        return d;
    }

    bool connected() const {
        if (adj_.empty()) return true;
        auto d = bfs(0);
        return std::none_of(d.begin(), d.end(), [](int x) { return x < 0; });
    }

private:
    std::vector<std::vector<std::size_t>> adj_;
};

inline Graph undirected_graph(const NetworkSpec& spec, bool include_wormholes = true) {
    Graph g(spec.nodes.size());
    for (const auto& l : spec.links) {
        if (!include_wormholes && is_wormhole(l.kind)) continue;
        g.add_edge(spec.node_index(l.from), spec.node_index(l.to));
    }
    for (const auto& a : spec.access) g.add_edge(spec.node_index(a.from), spec.node_index(a.to));
    return g;
}

inline std::optional<int> shortest_path_len(const NetworkSpec& spec, const std::string& i,
                                            const std::string& j, bool include_wormholes = true) {
    auto a = spec.node_index(i);
    auto b = spec.node_index(j);
    int d = undirected_graph(spec, include_wormholes).bfs(a)[b];
    if (d < 0) return std::nullopt;
    return d;
}

namespace detail {

// Nodes reachable from v using access stubs only.
inline std::vector<std::size_t> access_closure(const NetworkSpec& spec, std::size_t v) {
    Graph g(spec.nodes.size());
    for (const auto& a : spec.access) g.add_edge(spec.node_index(a.from), spec.node_index(a.to));
    auto d = g.bfs(v);
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < d.size(); ++k)
        if (d[k] >= 0) out.push_back(k);
    return out;
}

inline bool walk_ok(const NetworkSpec& spec, const std::vector<int>& path, std::size_t start,
                    const std::vector<std::size_t>& ends) {
    std::size_t at = start;
    for (int id : path) {
        const auto& l = spec.links[spec.link_index(id)];
        auto a = spec.node_index(l.from);
        auto b = spec.node_index(l.to);
        if (at == a)
            at = b;
        else if (at == b)
            at = a;
        else
            return false;
    }
    return std::find(ends.begin(), ends.end(), at) != ends.end();
}

}  // namespace detail

inline void validate(const NetworkSpec& spec) {
    if (spec.nodes.empty()) throw InputError("network has no nodes");
    std::unordered_set<std::string> names;
    for (const auto& n : spec.nodes)
        if (!names.insert(n).second) throw InputError("duplicate node '" + n + "'");
    if (spec.hop_delay < 0) throw InputError("hop_delay must be >= 0");
    std::unordered_set<int> ids;
    for (const auto& l : spec.links) {
        std::string tag = "link " + std::to_string(l.id);
        if (!ids.insert(l.id).second) throw InputError("duplicate " + tag);
        if (!(l.capacity > 0)) throw InputError(tag + ": capacity must be > 0");
        if (!(l.alpha > 0)) throw InputError(tag + ": alpha must be > 0");
        if (l.queue_capacity < 1) throw InputError(tag + ": queue_capacity must be >= 1");
        if (l.slack < 0) throw InputError(tag + ": slack must be >= 0");
        spec.node_index(l.from);
        spec.node_index(l.to);
        if (l.from == l.to) throw InputError(tag + ": self-loop");
    }
    for (const auto& a : spec.access) {
        if (!ids.insert(a.id).second) throw InputError("duplicate link " + std::to_string(a.id));
        spec.node_index(a.from);
        spec.node_index(a.to);
    }
    if (spec.sources.empty()) throw InputError("network has no sources");
    for (const auto& s : spec.sources) {
        std::string tag = "source " + std::to_string(s.id);
        if (!(s.rate > 0)) throw InputError(tag + ": rate must be > 0");
        if (s.paths.empty()) throw InputError(tag + ": no paths");
        auto starts = detail::access_closure(spec, spec.node_index(s.node));
        auto ends = detail::access_closure(spec, spec.node_index(s.dest));
        for (std::size_t p = 0; p < s.paths.size(); ++p) {
            const auto& path = s.paths[p];
            std::string ptag = tag + " path " + std::to_string(p + 1);
            if (path.empty()) throw InputError(ptag + ": empty");
            for (int id : path)
                if (!spec.has_link(id)) throw InputError(ptag + ": unknown link " + std::to_string(id));
            bool ok = std::any_of(starts.begin(), starts.end(),
                                  [&](std::size_t v) { return detail::walk_ok(spec, path, v, ends); });
            if (!ok) throw InputError(ptag + ": links do not form a walk from " + s.node + " to " + s.dest);
        }
    }
}

struct IncidenceMatrix {
    std::size_t rows = 0;  // links
    std::size_t cols = 0;  // paths, all sources concatenated
    std::vector<std::uint8_t> a;

    std::uint8_t at(std::size_t l, std::size_t p) const { return a[l * cols + p]; }
};

inline IncidenceMatrix build_incidence(const NetworkSpec& spec) {
    IncidenceMatrix m;
    m.rows = spec.links.size();
    m.cols = spec.path_count();
    m.a.assign(m.rows * m.cols, 0);
    std::size_t p = 0;
    for (const auto& s : spec.sources)
        for (const auto& path : s.paths) {
            for (int id : path) m.a[spec.link_index(id) * m.cols + p] = 1;
            ++p;
        }
    return m;
}

inline std::vector<double> link_rates(const IncidenceMatrix& A, const std::vector<double>& r) {
    if (r.size() != A.cols) throw InputError("rate vector length does not match incidence columns");
    for (double v : r)
        if (v < 0) throw InputError("negative path rate");
    std::vector<double> out(A.rows, 0.0);
    for (std::size_t l = 0; l < A.rows; ++l)
        for (std::size_t p = 0; p < A.cols; ++p)
            if (A.at(l, p)) out[l] += r[p];
    return out;
}

// True when no path column is a combination of others, so per-path
// equilibrium rates are unique given unique link rates.
inline bool full_column_rank(const IncidenceMatrix& A) {
    std::vector<std::vector<double>> m(A.rows, std::vector<double>(A.cols));
    for (std::size_t l = 0; l < A.rows; ++l)
        for (std::size_t p = 0; p < A.cols; ++p) m[l][p] = A.at(l, p);
    std::size_t rank = 0;
    for (std::size_t c = 0; c < A.cols && rank < A.rows; ++c) {
        std::size_t piv = rank;
        for (std::size_t r = rank; r < A.rows; ++r)
            if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
        if (std::abs(m[piv][c]) < 1e-12) continue;
        std::swap(m[piv], m[rank]);
        for (std::size_t r = 0; r < A.rows; ++r) {
            if (r == rank) continue;
            double f = m[r][c] / m[rank][c];
            for (std::size_t k = c; k < A.cols; ++k) m[r][k] -= f * m[rank][k];
        }
        ++rank;
    }
    return rank == A.cols;
}

// Erdos-Renyi graph conditioned on connectivity (rejection sampling).
inline Graph random_connected_graph(std::size_t n, double edge_prob, std::uint64_t seed) {
    if (n == 0) throw InputError("graph needs at least one node");
    if (!(edge_prob > 0 && edge_prob <= 1)) throw InputError("edge probability must be in (0,1]");
    for (std::uint64_t attempt = 0; attempt < 10000; ++attempt) {
        Stream rng(seed, "graph", attempt);
        Graph g(n);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (rng.bernoulli(edge_prob)) g.add_edge(a, b);
        if (g.connected()) return g;
    }
    throw NumericalError("could not draw a connected graph; raise edge probability");
}

}  // namespace wormsim

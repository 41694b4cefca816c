#pragma once

#include "gendice/common.hpp"
#include "gendice/dataset.hpp"
#include "gendice/markov.hpp"
#include "gendice/random.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace gendice {

/// Directed graph with dense 0-based vertex ids. `original_ids[v]` keeps the label a
/// loaded vertex had in its source file.
struct Graph {
    std::size_t n_vertices = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<double> weights;  ///< empty for unweighted graphs
    std::vector<std::string> original_ids;

    bool weighted() const noexcept { return !weights.empty(); }

    std::vector<std::size_t> out_degrees() const {
        std::vector<std::size_t> d(n_vertices, 0);
        for (const auto& e : edges) ++d[e.first];
        return d;
    }
    std::vector<std::size_t> in_degrees() const {
        std::vector<std::size_t> d(n_vertices, 0);
        for (const auto& e : edges) ++d[e.second];
        return d;
    }

    std::string label(std::size_t v) const { return original_ids.empty() ? std::to_string(v) : original_ids[v]; }
};

/// Barabasi-Albert preferential attachment. The seed network is a clique on m0 vertices;
/// every later vertex links to m distinct existing vertices drawn with probability
/// proportional to their current degree. Links point from the newer to the older vertex.
/// With `weighted`, each edge carries |N(0, 1)|.
inline Graph generate_ba(std::size_t n, std::size_t m, std::size_t m0, std::uint64_t seed, bool weighted = false) {
    detail::require(m >= 1 && m <= m0 && m0 < n, "generate_ba: need 1 <= m <= m0 < n");
    Rng rng(seed);
    Graph g;
    g.n_vertices = n;
    std::vector<double> degree(n, 0.0);
    auto link = [&](std::size_t from, std::size_t to) {
        g.edges.emplace_back(from, to);
        degree[from] += 1.0;
        degree[to] += 1.0;
    };
    for (std::size_t i = 1; i < m0; ++i)
        for (std::size_t j = 0; j < i; ++j) link(i, j);

    std::vector<double> w;
    std::vector<std::size_t> chosen;
    for (std::size_t v = m0; v < n; ++v) {
        w.assign(degree.begin(), degree.begin() + static_cast<std::ptrdiff_t>(v));
        chosen.clear();
        for (std::size_t k = 0; k < m; ++k) {
            double total = 0.0;
            for (double x : w) total += x;
            std::size_t pick;
            if (total <= 0.0) {
                // Seed network without links (m0 == 1): attach uniformly among the remaining.
                std::vector<std::size_t> free;
                for (std::size_t u = 0; u < v; ++u)
                    if (std::find(chosen.begin(), chosen.end(), u) == chosen.end()) free.push_back(u);
                pick = free[uniform_index(rng, free.size())];
            } else {
                pick = sample_categorical(rng, w);
            }
            chosen.push_back(pick);
            w[pick] = 0.0;
        }
        for (auto u : chosen) link(v, u);
    }
    if (weighted) {
        g.weights.resize(g.edges.size());
        for (auto& x : g.weights) {
            do {
                x = std::abs(standard_normal(rng));
            } while (x == 0.0);
        }
    }
    return g;
}

/// Parses "src dst [weight]" lines; '#' lines and blank lines are skipped. Vertex labels are
/// remapped to dense ids in order of first appearance; repeated (src, dst) pairs are merged
/// (weights added).
inline Graph load_edge_list(std::istream& in, const std::string& source = "<stream>") {
    Graph g;
    std::unordered_map<std::string, std::size_t> ids;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> seen;
    auto id_of = [&](const std::string& label) {
        auto [it, inserted] = ids.emplace(label, g.original_ids.size());
        if (inserted) g.original_ids.push_back(label);
        return it->second;
    };
    std::vector<double> weights;
    bool any_weight = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        std::string a, b, c, extra;
        ss >> a >> b;
        if (b.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'src dst [weight]'");
        double w = 1.0;
        if (ss >> c) {
            try {
                std::size_t used = 0;
                w = std::stod(c, &used);
                if (used != c.size()) throw std::invalid_argument(c);
            } catch (const std::exception&) {
                throw ConfigError(source + ":" + std::to_string(lineno) + ": bad weight '" + c + "'");
            }
            if (!(w > 0.0) || !std::isfinite(w))
                throw ConfigError(source + ":" + std::to_string(lineno) + ": weight must be positive");
            any_weight = true;
        }
        if (ss >> extra) throw ConfigError(source + ":" + std::to_string(lineno) + ": trailing field '" + extra + "'");
        const auto src = id_of(a);
        const auto e = std::make_pair(src, id_of(b));
        if (auto it = seen.find(e); it != seen.end()) {
            weights[it->second] += w;
            continue;
        }
        seen.emplace(e, g.edges.size());
        g.edges.push_back(e);
        weights.push_back(w);
    }
    if (g.edges.empty()) throw ConfigError(source + ": edge list is empty");
    g.n_vertices = g.original_ids.size();
    if (any_weight) g.weights = std::move(weights);
    return g;
}

inline Graph load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open edge list '" + path + "'");
    return load_edge_list(in, path);
}

inline void save_edge_list(const Graph& g, std::ostream& out) {
    out.precision(17);
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        out << g.label(g.edges[i].first) << ' ' << g.label(g.edges[i].second);
        if (g.weighted()) out << ' ' << g.weights[i];
        out << '\n';
    }
}

inline void save_edge_list(const Graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write edge list '" + path + "'");
    save_edge_list(g, out);
}

/// CSV "original_id,dense_id" remap table.
inline void write_id_map(const Graph& g, std::ostream& out) {
    out << "original_id,dense_id\n";
    for (std::size_t v = 0; v < g.n_vertices; ++v) out << g.label(v) << ',' << v << '\n';
}

/// Random surfer with teleportation:
/// P(u|v) = (1 - eta) w(v,u) / sum_u' w(v,u') + eta / |V|, and a uniform row for dangling v.
inline MarkovChain pagerank_chain(const Graph& g, double eta) {
    detail::require(eta >= 0.0 && eta < 1.0, "pagerank_chain: eta must lie in [0, 1)");
    detail::require(g.n_vertices > 0, "pagerank_chain: empty graph");
    const auto n = g.n_vertices;
    std::vector<double> out_mass(n, 0.0);
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        detail::require(g.edges[i].first < n && g.edges[i].second < n, "pagerank_chain: edge index out of range");
        out_mass[g.edges[i].first] += g.weighted() ? g.weights[i] : 1.0;
    }
    std::vector<Triplet> trips;
    trips.reserve(g.edges.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const auto [v, u] = g.edges[i];
        const double w = g.weighted() ? g.weights[i] : 1.0;
        trips.emplace_back(static_cast<int>(v), static_cast<int>(u), (1.0 - eta) * w / out_mass[v]);
    }
    SparseRowMat S(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    S.setFromTriplets(trips.begin(), trips.end());
    std::vector<double> tw(n);
    for (std::size_t v = 0; v < n; ++v) tw[v] = out_mass[v] > 0.0 ? eta : 1.0;
    return MarkovChain(std::move(S), std::move(tw), Distribution::uniform(n), Distribution::uniform(n), 1.0);
}

/// One walk of `n_samples` steps from mu0; records are (v, 0, 0, u) pairs.
inline TransitionDataset random_walk_dataset(const MarkovChain& chain, std::size_t n_samples, std::uint64_t seed) {
    detail::require(n_samples >= 1, "random_walk_dataset: n_samples must be at least 1");
    Rng rng(seed);
    std::vector<Transition> records;
    records.reserve(n_samples);
    const std::size_t start = sample_categorical(rng, chain.mu0().probs());
    std::size_t v = start;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const std::size_t u = detail::sample_next_state(rng, chain, v);
        records.push_back({v, 0, 0.0, u});
        v = u;
    }
    return TransitionDataset(chain.n_states(), 1, std::move(records), {start}, {0});
}

}  // namespace gendice

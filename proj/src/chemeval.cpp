#include "g3dgen/chemeval.hpp"

#include "g3dgen/elements.hpp"

#include <algorithm>
#include <bitset>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace g3dgen {

namespace {

constexpr double kBondTolerance = 0.45; // Angstrom beyond covalent radii sum

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

} // namespace

std::vector<std::vector<std::pair<int, int>>> BondGraph::adjacency() const {
    std::vector<std::vector<std::pair<int, int>>> adj(n_atoms);
    for (const Bond& bond : bonds) {
        adj[bond.a].emplace_back(bond.b, bond.order);
        adj[bond.b].emplace_back(bond.a, bond.order);
    }
    return adj;
}

int BondGraph::order_sum(int atom) const {
    int s = 0;
    for (const Bond& bond : bonds) {
        if (bond.a == atom || bond.b == atom)
            s += bond.order;
    }
    return s;
}

bool BondGraph::connected() const {
    if (n_atoms <= 1)
        return n_atoms == 1;
    auto adj = adjacency();
    std::vector<bool> seen(n_atoms, false);
    std::vector<int> stack{0};
    seen[0] = true;
    int visited = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (auto [u, o] : adj[v]) {
            if (!seen[u]) {
                seen[u] = true;
                ++visited;
                stack.push_back(u);
            }
        }
    }
    return visited == n_atoms;
}

PerceptionResult perceive_bonds(const MoleculeRecord& structure) {
    PerceptionResult res;
    int n = structure.n_atoms();
    if (n == 0) {
        res.reason = "no atoms";
        return res;
    }
    std::vector<const ElementInfo*> info(n);
    for (int i = 0; i < n; ++i) {
        info[i] = find_element(structure.elements[i]);
        if (!info[i]) {
            res.reason = "unsupported element " + structure.elements[i];
            return res;
        }
    }

    std::vector<Bond> cand;
    std::vector<int> degree(n, 0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double d = (structure.positions[i] - structure.positions[j]).norm();
            if (d <= info[i]->covalent_radius + info[j]->covalent_radius + kBondTolerance) {
                cand.push_back(Bond{i, j, 0});
                ++degree[i];
                ++degree[j];
            }
        }
    }
    // Most constrained endpoints first keeps the search shallow.
    std::sort(cand.begin(), cand.end(), [&](const Bond& x, const Bond& y) {
        int dx = degree[x.a] + degree[x.b];
        int dy = degree[y.a] + degree[y.b];
        return std::tie(dx, x.a, x.b) < std::tie(dy, y.a, y.b);
    });

    std::vector<int> rem(n), open(n); // remaining valence, unassigned incident edges
    for (int i = 0; i < n; ++i) {
        rem[i] = info[i]->valence;
        open[i] = degree[i];
    }
    // Each unassigned edge must carry 1..3 order units.
    auto feasible = [&](int v) { return rem[v] >= open[v] && rem[v] <= 3 * open[v]; };
    for (int i = 0; i < n; ++i) {
        if (!feasible(i)) {
            res.reason = "atom " + std::to_string(i) + " (" + structure.elements[i] +
                         ") cannot reach valence " + std::to_string(info[i]->valence) + " with " +
                         std::to_string(degree[i]) + " candidate bonds";
            return res;
        }
    }

    std::vector<int> orders(cand.size(), 0);
    std::function<bool(size_t)> assign = [&](size_t k) -> bool {
        if (k == cand.size())
            return true; // feasibility kept rem == 0 for saturated atoms
        int a = cand[k].a, b = cand[k].b;
        --open[a];
        --open[b];
        for (int o = 1; o <= 3; ++o) {
            if (o > rem[a] || o > rem[b])
                break;
            rem[a] -= o;
            rem[b] -= o;
            if (feasible(a) && feasible(b) && assign(k + 1)) {
                orders[k] = o;
                return true;
            }
            rem[a] += o;
            rem[b] += o;
        }
        ++open[a];
        ++open[b];
        return false;
    };
    if (!assign(0)) {
        res.reason = "no bond-order assignment matches all valences";
        return res;
    }

    res.ok = true;
    res.graph.n_atoms = n;
    res.graph.elements = structure.elements;
    for (size_t k = 0; k < cand.size(); ++k)
        res.graph.bonds.push_back(Bond{cand[k].a, cand[k].b, orders[k]});
    std::sort(res.graph.bonds.begin(), res.graph.bonds.end(),
              [](const Bond& x, const Bond& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
    return res;
}

PerceptionResult resolve_bonds(const MoleculeRecord& structure) {
    if (!structure.bonds)
        return perceive_bonds(structure);
    PerceptionResult res;
    int n = structure.n_atoms();
    std::set<std::pair<int, int>> seen;
    for (const Bond& bond : *structure.bonds) {
        if (bond.a < 0 || bond.b >= n || bond.a >= bond.b || bond.order < 1 || bond.order > 3) {
            res.reason = "malformed bond annotation";
            return res;
        }
        if (!seen.insert({bond.a, bond.b}).second) {
            res.reason = "duplicate bond annotation " + std::to_string(bond.a) + "-" +
                         std::to_string(bond.b);
            return res;
        }
    }
    res.ok = true;
    res.graph.n_atoms = n;
    res.graph.elements = structure.elements;
    res.graph.bonds = *structure.bonds;
    std::sort(res.graph.bonds.begin(), res.graph.bonds.end(),
              [](const Bond& x, const Bond& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
    return res;
}

Validity check_validity(const MoleculeRecord& structure) {
    Validity v;
    PerceptionResult pr = perceive_bonds(structure);
    if (!pr.ok) {
        v.reason = pr.reason;
        return v;
    }
    if (!pr.graph.connected()) {
        v.reason = "disconnected bond graph";
        return v;
    }
    v.valid = true;
    return v;
}

namespace {

using EdgeBits = std::bitset<256>;

// Reduced basis over GF(2); rows keyed by leading (highest) set bit.
class CycleBasis {
public:
    // Residual of c against the basis; zero means dependent.
    EdgeBits reduce(EdgeBits c) const {
        for (const auto& [lead, row] : rows_) {
            if (c.test(lead))
                c ^= row;
        }
        return c;
    }

    void insert(EdgeBits c) {
        c = reduce(c);
        if (c.none())
            return;
        int lead = highest_bit(c);
        rows_.emplace_back(lead, c);
        std::sort(rows_.begin(), rows_.end(),
                  [](const auto& x, const auto& y) { return x.first > y.first; });
    }

    int rank() const { return static_cast<int>(rows_.size()); }

private:
    static int highest_bit(const EdgeBits& c) {
        for (int i = 255; i >= 0; --i)
            if (c.test(i))
                return i;
        return -1;
    }

    std::vector<std::pair<int, EdgeBits>> rows_;
};

// All simple cycles with exactly s vertices, as edge bitsets. Each cycle is
// produced once: rooted at its smallest vertex, second vertex below the last.
std::vector<EdgeBits> cycles_of_size(const BondGraph& g, int s,
                                     const std::vector<std::vector<int>>& nbr,
                                     const std::vector<std::vector<int>>& edge_id) {
    std::vector<EdgeBits> out;
    int n = g.n_atoms;
    std::vector<int> path;
    std::vector<bool> on_path(n, false);

    std::function<void(int, int)> extend = [&](int root, int v) {
        if (static_cast<int>(path.size()) == s) {
            if (edge_id[v][root] >= 0 && path[1] < path.back()) {
                EdgeBits bits;
                for (size_t i = 0; i + 1 < path.size(); ++i)
                    bits.set(edge_id[path[i]][path[i + 1]]);
                bits.set(edge_id[v][root]);
                out.push_back(bits);
            }
            return;
        }
        for (int u : nbr[v]) {
            if (u <= root || on_path[u])
                continue;
            path.push_back(u);
            on_path[u] = true;
            extend(root, u);
            on_path[u] = false;
            path.pop_back();
        }
    };

    for (int root = 0; root < n; ++root) {
        path = {root};
        on_path[root] = true;
        extend(root, root);
        on_path[root] = false;
    }
    return out;
}

} // namespace

RingCounts ring_counts(const BondGraph& g) {
    RingCounts rc;
    int n = g.n_atoms;
    int m = static_cast<int>(g.bonds.size());
    if (m > 256)
        throw std::invalid_argument("ring_counts: too many bonds");

    std::vector<std::vector<int>> nbr(n);
    std::vector<std::vector<int>> edge_id(n, std::vector<int>(n, -1));
    for (int e = 0; e < m; ++e) {
        const Bond& bond = g.bonds[e];
        nbr[bond.a].push_back(bond.b);
        nbr[bond.b].push_back(bond.a);
        edge_id[bond.a][bond.b] = e;
        edge_id[bond.b][bond.a] = e;
    }

    int components = 0;
    {
        std::vector<bool> seen(n, false);
        for (int v = 0; v < n; ++v) {
            if (seen[v])
                continue;
            ++components;
            std::vector<int> stack{v};
            seen[v] = true;
            while (!stack.empty()) {
                int x = stack.back();
                stack.pop_back();
                for (int u : nbr[x])
                    if (!seen[u]) {
                        seen[u] = true;
                        stack.push_back(u);
                    }
            }
        }
    }
    int dim = m - n + components;
    if (dim <= 0)
        return rc;

    CycleBasis basis;
    for (int s = 3; s <= n && basis.rank() < dim; ++s) {
        auto candidates = cycles_of_size(g, s, nbr, edge_id);
        std::vector<EdgeBits> survivors;
        for (const EdgeBits& c : candidates) {
            // Independence is judged against strictly smaller cycles only, so
            // same-size alternatives tied by symmetry all count.
            if (basis.reduce(c).any())
                survivors.push_back(c);
        }
        for (const EdgeBits& c : survivors)
            basis.insert(c);
        int cnt = static_cast<int>(survivors.size());
        switch (s) {
        case 3: rc.r3 += cnt; break;
        case 4: rc.r4 += cnt; break;
        case 5: rc.r5 += cnt; break;
        case 6: rc.r6 += cnt; break;
        default: rc.r7_plus += cnt; break;
        }
    }
    return rc;
}

void Histogram::add(double x) {
    if (counts.empty())
        return;
    double pos = (x - lo) / width;
    long idx = static_cast<long>(std::floor(pos));
    long n = static_cast<long>(counts.size());
    if (idx == n && x <= lo + width * static_cast<double>(n) + 1e-12)
        idx = n - 1; // inclusive upper edge
    if (idx < 0 || idx >= n)
        return;
    ++counts[idx];
    ++total;
}

std::vector<double> Histogram::density() const {
    std::vector<double> d(counts.size(), 0.0);
    if (total == 0)
        return d;
    for (size_t i = 0; i < counts.size(); ++i)
        d[i] = static_cast<double>(counts[i]) / (static_cast<double>(total) * width);
    return d;
}

std::string Histogram::to_two_column() const {
    std::string out;
    auto d = density();
    for (size_t i = 0; i < counts.size(); ++i)
        out += fmt("%.6f", center(i)) + " " + fmt("%.9g", d[i]) + "\n";
    return out;
}

Histogram rdf(const std::vector<MoleculeRecord>& structures, const std::string& elem_a,
              const std::string& elem_b, double bin_width, double range) {
    if (bin_width <= 0.0 || range <= 0.0)
        throw std::invalid_argument("rdf: bin width and range must be positive");
    int n_bins = static_cast<int>(std::ceil(range / bin_width - 1e-9));
    Histogram h(0.0, bin_width, n_bins);
    for (const MoleculeRecord& rec : structures) {
        int n = rec.n_atoms();
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                bool match = (rec.elements[i] == elem_a && rec.elements[j] == elem_b) ||
                             (rec.elements[i] == elem_b && rec.elements[j] == elem_a);
                if (match)
                    h.add((rec.positions[i] - rec.positions[j]).norm());
            }
        }
    }
    return h;
}

Histogram adf(const std::vector<MoleculeRecord>& structures, const std::string& elem_a,
              const std::string& elem_b, const std::string& elem_c, double bin_width) {
    if (bin_width <= 0.0)
        throw std::invalid_argument("adf: bin width must be positive");
    int n_bins = static_cast<int>(std::ceil(180.0 / bin_width - 1e-9));
    Histogram h(0.0, bin_width, n_bins);
    for (const MoleculeRecord& rec : structures) {
        PerceptionResult pr = resolve_bonds(rec);
        if (!pr.ok)
            continue;
        auto adj = pr.graph.adjacency();
        for (int m = 0; m < rec.n_atoms(); ++m) {
            if (rec.elements[m] != elem_b)
                continue;
            const auto& nb = adj[m];
            for (size_t x = 0; x < nb.size(); ++x) {
                for (size_t y = x + 1; y < nb.size(); ++y) {
                    int i = nb[x].first, j = nb[y].first;
                    bool match = (rec.elements[i] == elem_a && rec.elements[j] == elem_c) ||
                                 (rec.elements[i] == elem_c && rec.elements[j] == elem_a);
                    if (!match)
                        continue;
                    Vec3 u = rec.positions[i] - rec.positions[m];
                    Vec3 v = rec.positions[j] - rec.positions[m];
                    double cosang = u.dot(v) / (u.norm() * v.norm());
                    cosang = std::clamp(cosang, -1.0, 1.0);
                    h.add(std::acos(cosang) * 180.0 / M_PI);
                }
            }
        }
    }
    return h;
}

namespace {

struct NodeSignature {
    int color;
    std::vector<std::pair<int, int>> neighbors; // (order, neighbor color), sorted

    bool operator<(const NodeSignature& other) const {
        return std::tie(color, neighbors) < std::tie(other.color, other.neighbors);
    }
    bool operator==(const NodeSignature& other) const {
        return color == other.color && neighbors == other.neighbors;
    }
};

// One pass of neighborhood refinement; returns true if the coloring changed.
bool refine_once(const BondGraph& g, const std::vector<std::vector<std::pair<int, int>>>& adj,
                 std::vector<int>& colors) {
    int n = g.n_atoms;
    std::vector<NodeSignature> sigs(n);
    for (int v = 0; v < n; ++v) {
        sigs[v].color = colors[v];
        for (auto [u, o] : adj[v])
            sigs[v].neighbors.emplace_back(o, colors[u]);
        std::sort(sigs[v].neighbors.begin(), sigs[v].neighbors.end());
    }
    std::vector<NodeSignature> uniq = sigs;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<int> next(n);
    for (int v = 0; v < n; ++v)
        next[v] = static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), sigs[v]) -
                                   uniq.begin());
    bool changed = next != colors;
    colors = std::move(next);
    return changed;
}

void refine(const BondGraph& g, const std::vector<std::vector<std::pair<int, int>>>& adj,
            std::vector<int>& colors) {
    while (refine_once(g, adj, colors)) {
    }
}

std::string encode_discrete(const BondGraph& g, const std::vector<int>& colors) {
    int n = g.n_atoms;
    std::vector<int> pos(n); // node -> canonical position
    for (int v = 0; v < n; ++v)
        pos[v] = colors[v];
    std::string out = "n" + std::to_string(n) + ";E:";
    std::vector<std::string> elems(n);
    for (int v = 0; v < n; ++v)
        elems[pos[v]] = g.elements[v];
    for (int p = 0; p < n; ++p)
        out += (p ? "," : "") + elems[p];
    std::vector<std::array<int, 3>> edges;
    for (const Bond& bond : g.bonds) {
        int x = pos[bond.a], y = pos[bond.b];
        edges.push_back({std::min(x, y), std::max(x, y), bond.order});
    }
    std::sort(edges.begin(), edges.end());
    out += ";B:";
    for (size_t i = 0; i < edges.size(); ++i)
        out += (i ? "," : "") + std::to_string(edges[i][0]) + "-" + std::to_string(edges[i][1]) +
               ":" + std::to_string(edges[i][2]);
    return out;
}

std::string canon_search(const BondGraph& g,
                         const std::vector<std::vector<std::pair<int, int>>>& adj,
                         std::vector<int> colors) {
    refine(g, adj, colors);
    int n = g.n_atoms;
    std::vector<int> class_size(n, 0);
    for (int v = 0; v < n; ++v)
        ++class_size[colors[v]];
    int target = -1;
    for (int c = 0; c < n; ++c) {
        if (class_size[c] > 1) {
            target = c;
            break;
        }
    }
    if (target < 0)
        return encode_discrete(g, colors);

    // Break the tie every possible way; the smallest encoding is canonical.
    std::string best;
    for (int v = 0; v < n; ++v) {
        if (colors[v] != target)
            continue;
        std::vector<int> child(n);
        for (int u = 0; u < n; ++u)
            child[u] = colors[u] * 2 + 1;
        child[v] -= 1;
        std::string s = canon_search(g, adj, std::move(child));
        if (best.empty() || s < best)
            best = s;
    }
    return best;
}

} // namespace

std::string canonical_hash(const BondGraph& g) {
    if (g.n_atoms == 0)
        return "n0;E:;B:";
    auto adj = g.adjacency();
    // Initial colors: element, degree, sorted incident orders.
    struct Key {
        std::string elem;
        int degree;
        std::vector<int> orders;
        bool operator<(const Key& o) const {
            return std::tie(elem, degree, orders) < std::tie(o.elem, o.degree, o.orders);
        }
        bool operator==(const Key& o) const {
            return elem == o.elem && degree == o.degree && orders == o.orders;
        }
    };
    std::vector<Key> keys(g.n_atoms);
    for (int v = 0; v < g.n_atoms; ++v) {
        keys[v].elem = g.elements[v];
        keys[v].degree = static_cast<int>(adj[v].size());
        for (auto [u, o] : adj[v])
            keys[v].orders.push_back(o);
        std::sort(keys[v].orders.begin(), keys[v].orders.end());
    }
    std::vector<Key> uniq = keys;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<int> colors(g.n_atoms);
    for (int v = 0; v < g.n_atoms; ++v)
        colors[v] =
            static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), keys[v]) - uniq.begin());
    return canon_search(g, adj, std::move(colors));
}

double best_match_rmsd(const MoleculeRecord& a, const BondGraph& ga, const MoleculeRecord& b,
                       const BondGraph& gb) {
    double best = std::numeric_limits<double>::infinity();
    int n = a.n_atoms();
    if (n == 0 || n != b.n_atoms() || ga.bonds.size() != gb.bonds.size())
        return best;

    std::vector<std::vector<int>> order_a(n, std::vector<int>(n, 0));
    std::vector<std::vector<int>> order_b(n, std::vector<int>(n, 0));
    for (const Bond& bond : ga.bonds)
        order_a[bond.a][bond.b] = order_a[bond.b][bond.a] = bond.order;
    for (const Bond& bond : gb.bonds)
        order_b[bond.a][bond.b] = order_b[bond.b][bond.a] = bond.order;

    std::vector<int> map(n, -1);
    std::vector<bool> used(n, false);
    std::vector<Vec3> pa = a.positions;
    std::vector<Vec3> pb(n);

    std::function<void(int)> extend = [&](int i) {
        if (i == n) {
            for (int v = 0; v < n; ++v)
                pb[v] = b.positions[map[v]];
            best = std::min(best, kabsch_rmsd(pa, pb));
            return;
        }
        for (int u = 0; u < n; ++u) {
            if (used[u] || ga.elements[i] != gb.elements[u])
                continue;
            bool ok = true;
            for (int j = 0; j < i && ok; ++j)
                ok = order_a[i][j] == order_b[u][map[j]];
            if (!ok)
                continue;
            map[i] = u;
            used[u] = true;
            extend(i + 1);
            used[u] = false;
            map[i] = -1;
        }
    };
    extend(0);
    return best;
}

Vec3 center_of_mass(const MoleculeRecord& record) {
    if (record.n_atoms() == 0)
        throw std::invalid_argument("center_of_mass: empty record");
    Vec3 acc = Vec3::Zero();
    double total = 0.0;
    for (int i = 0; i < record.n_atoms(); ++i) {
        double m = element_info(record.elements[i]).mass;
        acc += m * record.positions[i];
        total += m;
    }
    return acc / total;
}

StatsReport statistics_report(const std::vector<MoleculeRecord>& generated,
                              const std::vector<MoleculeRecord>& train_set,
                              const std::vector<MoleculeRecord>& reference_set) {
    StatsReport rep;
    rep.n_generated = static_cast<long>(generated.size());

    std::vector<const MoleculeRecord*> valid;
    std::vector<BondGraph> graphs;
    for (const MoleculeRecord& rec : generated) {
        PerceptionResult pr = perceive_bonds(rec);
        if (pr.ok && pr.graph.connected()) {
            valid.push_back(&rec);
            graphs.push_back(std::move(pr.graph));
        }
    }
    rep.n_valid = static_cast<long>(valid.size());

    auto hash_corpus = [](const std::vector<MoleculeRecord>& recs) {
        std::set<std::string> out;
        for (const MoleculeRecord& rec : recs) {
            PerceptionResult pr = resolve_bonds(rec);
            if (pr.ok)
                out.insert(canonical_hash(pr.graph));
        }
        return out;
    };
    std::set<std::string> train_hashes = hash_corpus(train_set);
    std::set<std::string> reference_hashes = hash_corpus(reference_set);

    std::set<std::string> seen;
    for (size_t i = 0; i < graphs.size(); ++i) {
        std::string h = canonical_hash(graphs[i]);
        if (!seen.insert(h).second)
            continue;
        ++rep.n_unique;
        if (!reference_hashes.count(h))
            ++rep.n_novel;
        if (!train_hashes.count(h))
            ++rep.n_unseen;
    }

    if (rep.n_generated > 0)
        rep.pct_valid = 100.0 * static_cast<double>(rep.n_valid) / rep.n_generated;
    if (rep.n_valid > 0)
        rep.pct_unique = 100.0 * static_cast<double>(rep.n_unique) / rep.n_valid;
    if (rep.n_unique > 0) {
        rep.pct_novel = 100.0 * static_cast<double>(rep.n_novel) / rep.n_unique;
        rep.pct_unseen = 100.0 * static_cast<double>(rep.n_unseen) / rep.n_unique;
    }

    if (!valid.empty()) {
        double nv = static_cast<double>(valid.size());
        std::map<std::string, long> atom_totals;
        std::map<int, long> bond_totals;
        long ring_totals[5] = {0, 0, 0, 0, 0};
        for (size_t i = 0; i < valid.size(); ++i) {
            for (const std::string& e : valid[i]->elements)
                ++atom_totals[e];
            for (const Bond& bond : graphs[i].bonds)
                ++bond_totals[bond.order];
            RingCounts rc = ring_counts(graphs[i]);
            ring_totals[0] += rc.r3;
            ring_totals[1] += rc.r4;
            ring_totals[2] += rc.r5;
            ring_totals[3] += rc.r6;
            ring_totals[4] += rc.r7_plus;
        }
        for (const auto& [e, c] : atom_totals)
            rep.mean_atoms[e] = static_cast<double>(c) / nv;
        for (int o = 1; o <= 3; ++o)
            rep.mean_bonds[o] = static_cast<double>(bond_totals[o]) / nv;
        const char* ring_names[5] = {"R3", "R4", "R5", "R6", "R7+"};
        for (int r = 0; r < 5; ++r)
            rep.mean_rings[ring_names[r]] = static_cast<double>(ring_totals[r]) / nv;

        std::vector<MoleculeRecord> valid_recs;
        valid_recs.reserve(valid.size());
        for (const MoleculeRecord* p : valid)
            valid_recs.push_back(*p);

        // Element order fixed for stable report layout.
        const std::vector<std::string> element_order{"H", "C", "N", "O", "F"};
        std::vector<std::string> present;
        for (const std::string& e : element_order)
            if (atom_totals.count(e))
                present.push_back(e);
        for (size_t i = 0; i < present.size(); ++i) {
            for (size_t j = i; j < present.size(); ++j) {
                Histogram h = rdf(valid_recs, present[i], present[j], 0.1, 10.0);
                if (h.total > 0)
                    rep.rdfs.emplace_back(present[i] + "-" + present[j], std::move(h));
            }
        }

        std::set<std::array<std::string, 3>> triples;
        auto elem_rank = [&](const std::string& e) {
            return std::find(element_order.begin(), element_order.end(), e) -
                   element_order.begin();
        };
        for (size_t i = 0; i < valid.size(); ++i) {
            auto adj = graphs[i].adjacency();
            for (int m = 0; m < graphs[i].n_atoms; ++m) {
                const auto& nb = adj[m];
                for (size_t x = 0; x < nb.size(); ++x) {
                    for (size_t y = x + 1; y < nb.size(); ++y) {
                        std::string ea = valid[i]->elements[nb[x].first];
                        std::string ec = valid[i]->elements[nb[y].first];
                        if (elem_rank(ec) < elem_rank(ea))
                            std::swap(ea, ec);
                        triples.insert({ea, valid[i]->elements[m], ec});
                    }
                }
            }
        }
        for (const auto& t : triples) {
            Histogram h = adf(valid_recs, t[0], t[1], t[2], 2.0);
            if (h.total > 0)
                rep.adfs.emplace_back(t[0] + "-" + t[1] + "-" + t[2], std::move(h));
        }
    }
    return rep;
}

std::string StatsReport::to_table() const {
    std::string out;
    out += "structures generated   " + std::to_string(n_generated) + "\n";
    out += "valid                  " + std::to_string(n_valid) + " (" + fmt("%.3f", pct_valid) +
           "%)\n";
    out += "unique among valid     " + std::to_string(n_unique) + " (" + fmt("%.3f", pct_unique) +
           "%)\n";
    out += "novel vs reference     " + std::to_string(n_novel) + " (" + fmt("%.3f", pct_novel) +
           "%)\n";
    out += "unseen vs train        " + std::to_string(n_unseen) + " (" + fmt("%.3f", pct_unseen) +
           "%)\n";
    out += "mean atoms per valid molecule:";
    for (const auto& [e, v] : mean_atoms)
        out += " " + e + "=" + fmt("%.3f", v);
    out += "\nmean bonds per valid molecule:";
    for (const auto& [o, v] : mean_bonds)
        out += " B" + std::to_string(o) + "=" + fmt("%.3f", v);
    out += "\nmean rings per valid molecule:";
    for (const auto& [r, v] : mean_rings)
        out += " " + r + "=" + fmt("%.3f", v);
    out += "\n";
    return out;
}

std::string StatsReport::to_key_values() const {
    std::string out;
    out += "n_generated=" + std::to_string(n_generated) + "\n";
    out += "n_valid=" + std::to_string(n_valid) + "\n";
    out += "n_unique=" + std::to_string(n_unique) + "\n";
    out += "n_novel=" + std::to_string(n_novel) + "\n";
    out += "n_unseen=" + std::to_string(n_unseen) + "\n";
    out += "pct_valid=" + fmt("%.9g", pct_valid) + "\n";
    out += "pct_unique=" + fmt("%.9g", pct_unique) + "\n";
    out += "pct_novel=" + fmt("%.9g", pct_novel) + "\n";
    out += "pct_unseen=" + fmt("%.9g", pct_unseen) + "\n";
    for (const auto& [e, v] : mean_atoms)
        out += "mean_atoms." + e + "=" + fmt("%.9g", v) + "\n";
    for (const auto& [o, v] : mean_bonds)
        out += "mean_bonds.B" + std::to_string(o) + "=" + fmt("%.9g", v) + "\n";
    for (const auto& [r, v] : mean_rings)
        out += "mean_rings." + r + "=" + fmt("%.9g", v) + "\n";
    return out;
}

} // namespace g3dgen

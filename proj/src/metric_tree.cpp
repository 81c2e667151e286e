#include "treedirac/metric_tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

namespace treedirac {

int MetricTree::vertex_index(const std::string& v) const {
    for (std::size_t i = 0; i < vertices.size(); ++i)
        if (vertices[i] == v) return int(i);
    throw StageError("metric-tree", "unknown vertex '" + v + "'");
}

int MetricTree::edge_index(const std::string& id) const {
    for (std::size_t i = 0; i < edges.size(); ++i)
        if (edges[i].id == id) return int(i);
    throw StageError("metric-tree", "unknown edge '" + id + "'");
}

std::vector<int> MetricTree::incident_edges(const std::string& v) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < edges.size(); ++i)
        if (edges[i].start == v || edges[i].end == v) out.push_back(int(i));
    return out;
}

int MetricTree::degree(const std::string& v) const {
    return int(incident_edges(v).size());
}

int MetricTree::boundary_index(const std::string& v) const {
    for (std::size_t i = 0; i < boundary.size(); ++i)
        if (boundary[i] == v) return int(i);
    return -1;
}

int MetricTree::boundary_sign(const std::string& v) const {
    auto inc = incident_edges(v);
    if (inc.size() != 1)
        throw StageError("metric-tree", "'" + v + "' is not a degree-1 vertex");
    return edges[inc[0]].start == v ? +1 : -1;
}

double MetricTree::total_length() const {
    double s = 0;
    for (const auto& e : edges) s += e.length;
    return s;
}

double interp_cubic(const std::vector<double>& samples, double h, double x) {
    const int n = int(samples.size());
    if (n == 1) return samples[0];
    if (n < 4) {
        // linear / quadratic fallback for very short edges
        double u = std::clamp(x / h, 0.0, double(n - 1));
        int k = std::min(int(u), n - 2);
        double t = u - k;
        return samples[k] * (1 - t) + samples[k + 1] * t;
    }
    double u = x / h;
    int k = int(std::floor(u));
    k = std::clamp(k, 1, n - 3);
    double t = u - k;
    const double fm = samples[k - 1], f0 = samples[k], f1 = samples[k + 1],
                 f2 = samples[k + 2];
    // Lagrange on nodes -1,0,1,2
    return fm * (-t * (t - 1) * (t - 2) / 6.0) +
           f0 * ((t + 1) * (t - 1) * (t - 2) / 2.0) +
           f1 * (-(t + 1) * t * (t - 2) / 2.0) +
           f2 * ((t + 1) * t * (t - 1) / 6.0);
}

double EdgePotential::p_at(double x) const { return interp_cubic(p, h, x); }
double EdgePotential::q_at(double x) const { return interp_cubic(q, h, x); }

EdgePotential EdgePotential::flipped() const {
    EdgePotential out = *this;
    std::reverse(out.p.begin(), out.p.end());
    std::reverse(out.q.begin(), out.q.end());
    for (auto& v : out.q) v = -v;
    return out;
}

EdgePotential EdgePotential::zero(const std::string& id, double length,
                                  double h) {
    EdgePotential out;
    out.edge_id = id;
    out.h = h;
    int n = int(std::lround(length / h));
    out.p.assign(n + 1, 0.0);
    out.q.assign(n + 1, 0.0);
    return out;
}

namespace {

// adjacency as vertex -> (neighbor, edge index)
std::map<std::string, std::vector<std::pair<std::string, int>>> adjacency(
    const MetricTree& t) {
    std::map<std::string, std::vector<std::pair<std::string, int>>> adj;
    for (const auto& v : t.vertices) adj[v];
    for (std::size_t i = 0; i < t.edges.size(); ++i) {
        adj[t.edges[i].start].push_back({t.edges[i].end, int(i)});
        adj[t.edges[i].end].push_back({t.edges[i].start, int(i)});
    }
    return adj;
}

// hop depth from clamped vertex, -1 where unreachable
std::map<std::string, int> hop_depths(const MetricTree& t) {
    std::map<std::string, int> depth;
    auto adj = adjacency(t);
    std::deque<std::string> queue{t.clamped};
    depth[t.clamped] = 0;
    while (!queue.empty()) {
        auto v = queue.front();
        queue.pop_front();
        for (auto& [w, e] : adj[v])
            if (!depth.count(w)) {
                depth[w] = depth[v] + 1;
                queue.push_back(w);
            }
    }
    return depth;
}

}  // namespace

ValidationReport validate(const MetricTree& tree) {
    ValidationReport rep;
    auto fail = [&](const std::string& msg) {
        rep.valid = false;
        rep.violations.push_back(msg);
    };

    std::set<std::string> vset(tree.vertices.begin(), tree.vertices.end());
    if (vset.size() != tree.vertices.size()) fail("duplicate vertex names");
    std::set<std::string> eset;
    for (const auto& e : tree.edges) {
        if (!eset.insert(e.id).second) fail("duplicate edge id '" + e.id + "'");
        if (!vset.count(e.start) || !vset.count(e.end))
            fail("edge '" + e.id + "' references unknown vertex");
        if (!(e.length > 0))
            fail("edge '" + e.id + "' has non-positive length");
    }
    if (tree.edges.size() + 1 != tree.vertices.size())
        fail("acyclicity: edge count must equal vertex count - 1");
    if (!rep.valid) return rep;

    // connectivity
    auto depth = hop_depths(tree);
    if (!vset.count(tree.clamped)) {
        fail("clamped vertex unknown");
        return rep;
    }
    if (depth.size() != tree.vertices.size()) fail("graph is not connected");

    if (tree.degree(tree.clamped) != 1) fail("clamped vertex degree must be 1");
    std::set<std::string> bset;
    for (const auto& v : tree.boundary) {
        if (!bset.insert(v).second) fail("boundary vertex listed twice");
        if (!vset.count(v)) {
            fail("boundary vertex '" + v + "' unknown");
            continue;
        }
        if (tree.degree(v) != 1)
            fail("boundary vertex '" + v + "' must have degree 1");
        if (v == tree.clamped) fail("clamped vertex may not appear in boundary");
    }
    for (const auto& v : tree.vertices) {
        int d = tree.degree(v);
        bool is_leaf = d == 1;
        bool listed = bset.count(v) || v == tree.clamped;
        if (is_leaf && !listed)
            fail("degree-1 vertex '" + v + "' is neither boundary nor clamped");
        if (!is_leaf && listed)
            fail("vertex '" + v + "' is listed as exterior but has degree " +
                 std::to_string(d));
        if (!is_leaf && d < 3)
            fail("internal vertex '" + v + "' has degree 2 (forbidden)");
    }

    // orientation: internal vertices uniform, clamped is a start
    for (const auto& v : tree.vertices) {
        if (tree.degree(v) <= 1) continue;
        int starts = 0, ends = 0;
        for (int e : tree.incident_edges(v)) {
            if (tree.edges[e].start == v)
                ++starts;
            else
                ++ends;
        }
        if (starts != 0 && ends != 0)
            fail("orientation: internal vertex '" + v +
                 "' mixes start and end roles");
    }
    if (rep.valid && tree.boundary_sign(tree.clamped) != +1)
        fail("orientation: clamped vertex must be the start of its edge");
    return rep;
}

MetricTree orient_edges(const MetricTree& tree) {
    MetricTree out = tree;
    auto depth = hop_depths(tree);
    for (auto& e : out.edges) {
        int ds = depth.at(e.start), de = depth.at(e.end);
        // edges run from even depth to odd depth
        bool start_even = (std::min(ds, de) % 2) == 0;
        const std::string& shallow = ds < de ? e.start : e.end;
        const std::string& deep = ds < de ? e.end : e.start;
        std::string s = start_even ? shallow : deep;
        std::string t = start_even ? deep : shallow;
        e.start = s;
        e.end = t;
    }
    return out;
}

double path_distance(const MetricTree& tree, const std::string& a,
                     const std::string& b) {
    tree.vertex_index(a);
    tree.vertex_index(b);
    if (a == b) return 0.0;
    auto adj = adjacency(tree);
    std::map<std::string, std::pair<std::string, int>> parent;
    std::deque<std::string> queue{a};
    parent[a] = {a, -1};
    while (!queue.empty()) {
        auto v = queue.front();
        queue.pop_front();
        if (v == b) break;
        for (auto& [w, e] : adj[v])
            if (!parent.count(w)) {
                parent[w] = {v, e};
                queue.push_back(w);
            }
    }
    double d = 0;
    for (std::string v = b; v != a; v = parent.at(v).first)
        d += tree.edges[parent.at(v).second].length;
    return d;
}

namespace {

// random trig polynomial with max-amplitude close to `amp` on [0, l]
std::vector<double> trig_samples(Rng& rng, double amp, double l, double h) {
    int n = int(std::lround(l / h));
    double a0 = rng.uniform(-1, 1);
    double a1 = rng.uniform(-1, 1), b1 = rng.uniform(-1, 1);
    double a2 = rng.uniform(-1, 1), b2 = rng.uniform(-1, 1);
    double w = rng.uniform(0.5, 1.5) * M_PI / std::max(l, 0.2);
    std::vector<double> out(n + 1);
    double peak = 0;
    for (int k = 0; k <= n; ++k) {
        double x = k * h;
        out[k] = a0 + a1 * std::cos(w * x) + b1 * std::sin(w * x) +
                 a2 * std::cos(2 * w * x) + b2 * std::sin(2 * w * x);
        peak = std::max(peak, std::abs(out[k]));
    }
    double target = amp * rng.uniform(0.6, 1.0);
    double scale = peak > 1e-12 ? target / peak : 0.0;
    for (auto& v : out) v *= scale;
    return out;
}

}  // namespace

Instance generate_instance(std::uint64_t seed, const GenerateOptions& opt) {
    if (opt.max_edges < 1)
        throw StageError("generate", "edge bound must be >= 1");
    Rng rng(seed * 0x9e3779b97f4a7c15ull + 0x12345);

    MetricTree t;
    int next_internal = 0, next_leaf = 0, next_edge = 0;
    auto new_internal = [&] { return "c" + std::to_string(next_internal++); };
    auto new_leaf = [&] { return "v" + std::to_string(next_leaf++); };
    auto new_edge_id = [&] { return "e" + std::to_string(next_edge++); };

    t.clamped = "vm";
    t.vertices.push_back(t.clamped);
    if (opt.max_edges == 1 || opt.max_edges == 2) {
        // a 2-edge tree would need a degree-2 internal vertex; fall back to 1
        std::string leaf = new_leaf();
        t.vertices.push_back(leaf);
        t.edges.push_back({new_edge_id(), t.clamped, leaf, 1.0});
    } else {
        // grow from the clamped edge; every internal vertex gets >= 2
        // children, so with its parent edge the degree is >= 3
        std::string root = new_internal();
        t.vertices.push_back(root);
        t.edges.push_back({new_edge_id(), t.clamped, root, 1.0});
        int budget = opt.max_edges - 1;
        struct Pending {
            std::string vertex;
        };
        std::deque<Pending> open{{root}};
        while (!open.empty()) {
            auto [v] = open.front();
            open.pop_front();
            int reserve = int(open.size()) * 2;  // children owed elsewhere
            int avail = budget - reserve;
            int max_children = std::min(opt.max_degree - 1, avail);
            int nc = max_children <= 2 ? 2 : rng.uniform_int(2, max_children);
            for (int c = 0; c < nc; ++c) {
                // a child may become internal if we can still afford its
                // two grandchildren
                bool can_internal =
                    (budget - (nc - c) - int(open.size()) * 2) >= 3;
                bool internal = can_internal && rng.uniform() < 0.35;
                std::string w = internal ? new_internal() : new_leaf();
                t.vertices.push_back(w);
                t.edges.push_back({new_edge_id(), v, w, 1.0});
                --budget;
                if (internal) open.push_back({w});
            }
        }
    }
    for (auto& e : t.edges)
        e.length = opt.base_step * rng.uniform_int(1, opt.max_step_multiple);
    for (const auto& v : t.vertices) {
        int d = t.degree(v);
        if (d == 1 && v != t.clamped) t.boundary.push_back(v);
    }
    std::sort(t.boundary.begin(), t.boundary.end());
    t = orient_edges(t);

    Instance inst;
    inst.tree = t;
    for (const auto& e : t.edges) {
        EdgePotential pot;
        pot.edge_id = e.id;
        pot.h = opt.sample_h;
        pot.p = trig_samples(rng, opt.amplitude, e.length, opt.sample_h);
        pot.q = trig_samples(rng, opt.amplitude, e.length, opt.sample_h);
        inst.potentials[e.id] = pot;
    }
    auto rep = validate(inst.tree);
    if (!rep.valid)
        throw StageError("generate", "generated instance failed validation: " +
                                         rep.violations.front());
    return inst;
}

namespace {

struct SubtreeInfo {
    std::set<int> leaves;  // boundary indices contained below
};

bool match_rec(const MetricTree& a, const MetricTree& b, const std::string& va,
               const std::string& vb, const std::string& pa,
               const std::string& pb, double tol, TreeMatch& m) {
    m.vertex_map[va] = vb;
    auto adja = a.incident_edges(va);
    auto adjb = b.incident_edges(vb);

    // children (neighbor, edge) excluding the parent
    auto children = [&](const MetricTree& t, const std::string& v,
                        const std::string& par) {
        std::vector<std::pair<std::string, int>> out;
        for (int e : t.incident_edges(v)) {
            const auto& ed = t.edges[e];
            std::string w = ed.start == v ? ed.end : ed.start;
            if (w != par) out.push_back({w, e});
        }
        return out;
    };
    auto ca = children(a, va, pa);
    auto cb = children(b, vb, pb);
    if (ca.size() != cb.size()) {
        m.reason = "degree mismatch at '" + va + "'";
        return false;
    }

    // key each child subtree by the smallest boundary index it contains
    auto leaf_key = [&](const MetricTree& t, const std::string& root,
                        const std::string& par) {
        int best = 1 << 30;
        std::deque<std::pair<std::string, std::string>> q{{root, par}};
        while (!q.empty()) {
            auto [v, p] = q.front();
            q.pop_front();
            int bi = t.boundary_index(v);
            if (bi >= 0) best = std::min(best, bi);
            if (v == t.clamped) best = std::min(best, -1);
            for (int e : t.incident_edges(v)) {
                const auto& ed = t.edges[e];
                std::string w = ed.start == v ? ed.end : ed.start;
                if (w != p) q.push_back({w, v});
            }
        }
        return best;
    };
    std::map<int, std::pair<std::string, int>> keyed_b;
    for (auto& [w, e] : cb) keyed_b[leaf_key(b, w, vb)] = {w, e};
    for (auto& [w, e] : ca) {
        int key = leaf_key(a, w, va);
        auto it = keyed_b.find(key);
        if (it == keyed_b.end()) {
            m.reason = "no matching subtree under '" + va + "'";
            return false;
        }
        auto [wb, eb] = it->second;
        keyed_b.erase(it);
        if (std::abs(a.edges[e].length - b.edges[eb].length) > tol) {
            m.reason = "length mismatch on edge '" + a.edges[e].id + "'";
            return false;
        }
        int bia = a.boundary_index(w), bib = b.boundary_index(wb);
        if (bia != bib) {
            m.reason = "boundary labeling mismatch at '" + w + "'";
            return false;
        }
        m.edge_map[a.edges[e].id] = b.edges[eb].id;
        if (!match_rec(a, b, w, wb, va, vb, tol, m)) return false;
    }
    return true;
}

}  // namespace

TreeMatch tree_equivalent(const MetricTree& a, const MetricTree& b,
                          double length_tol) {
    TreeMatch m;
    if (a.boundary.size() != b.boundary.size()) {
        m.reason = "boundary sizes differ";
        return m;
    }
    if (a.edges.size() != b.edges.size()) {
        m.reason = "edge counts differ";
        return m;
    }
    // root both at the clamped vertex and recurse
    auto ea = a.incident_edges(a.clamped);
    auto eb = b.incident_edges(b.clamped);
    if (ea.size() != 1 || eb.size() != 1) {
        m.reason = "clamped vertex is not a leaf";
        return m;
    }
    if (std::abs(a.edges[ea[0]].length - b.edges[eb[0]].length) > length_tol) {
        m.reason = "clamped edge length mismatch";
        return m;
    }
    m.vertex_map[a.clamped] = b.clamped;
    m.edge_map[a.edges[ea[0]].id] = b.edges[eb[0]].id;
    const auto& eda = a.edges[ea[0]];
    const auto& edb = b.edges[eb[0]];
    std::string wa = eda.start == a.clamped ? eda.end : eda.start;
    std::string wb = edb.start == b.clamped ? edb.end : edb.start;
    int bia = a.boundary_index(wa), bib = b.boundary_index(wb);
    if (bia != bib) {
        m.reason = "boundary labeling mismatch at clamped edge";
        return m;
    }
    if (!match_rec(a, b, wa, wb, a.clamped, b.clamped, length_tol, m)) {
        m.vertex_map.clear();
        m.edge_map.clear();
        return m;
    }
    m.equivalent = true;
    return m;
}

EdgePotential inward_potential(const Instance& inst, const std::string& v) {
    auto inc = inst.tree.incident_edges(v);
    if (inc.size() != 1)
        throw StageError("metric-tree",
                         "'" + v + "' is not a boundary vertex");
    const Edge& e = inst.tree.edges[inc[0]];
    const EdgePotential& pot = inst.potentials.at(e.id);
    return e.start == v ? pot : pot.flipped();
}

}  // namespace treedirac

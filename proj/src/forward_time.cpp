#include "treedirac/forward_time.hpp"

#include <algorithm>
#include <cmath>

#include "treedirac/forward_spectral.hpp"

namespace treedirac {

std::vector<cd> vertex_scatter(const std::vector<cd>& incoming) {
    const std::size_t n = incoming.size();
    if (n == 0) throw StageError("forward-time", "scatter at empty vertex");
    cd sum = 0;
    for (cd v : incoming) sum += v;
    std::vector<cd> out(n);
    for (std::size_t k = 0; k < n; ++k)
        out[k] = (2.0 / double(n)) * sum - incoming[k];
    return out;
}

namespace {

struct EdgeState {
    int start_v = 0, end_v = 0;
    int cells = 0;
    std::vector<Mat2> cexp;  // per-cell coupling exponential
    std::vector<cd> a, b;    // rightward / leftward amplitudes at nodes
    std::vector<cd> na, nb;
};

// coupling generator K = [[0, ip+q],[ip-q, 0]] * tau at the cell midpoint
Mat2 coupling_exp(double p, double q, double tau) {
    Mat2 K;
    K << 0.0, cd(q, p), cd(-q, p), 0.0;
    return exp_tracefree(tau * K);
}

}  // namespace

EvolveResult evolve(const Instance& inst, const TimeGrid& grid,
                    const std::vector<std::function<cd(double)>>& controls,
                    const EvolveOptions& opt) {
    const MetricTree& tree = inst.tree;
    const int m = int(tree.boundary.size());
    if (int(controls.size()) != m)
        throw StageError("forward-time", "one control per boundary vertex");
    const int refine = std::max(1, opt.refine);
    const double tau = grid.tau / refine;
    const int nt = grid.steps() * refine;

    std::vector<EdgeState> es(tree.edges.size());
    for (std::size_t e = 0; e < tree.edges.size(); ++e) {
        const Edge& ed = tree.edges[e];
        double cells = ed.length / tau;
        if (!near_integer(cells, 1e-6 * std::max(1.0, cells)))
            throw StageError("forward-time",
                             "edge '" + ed.id +
                                 "' length is not commensurate with tau");
        EdgeState& s = es[e];
        s.start_v = tree.vertex_index(ed.start);
        s.end_v = tree.vertex_index(ed.end);
        s.cells = int(std::lround(cells));
        const EdgePotential& pot = inst.potentials.at(ed.id);
        s.cexp.reserve(s.cells);
        for (int k = 0; k < s.cells; ++k) {
            double xm = (k + 0.5) * tau;
            s.cexp.push_back(coupling_exp(pot.p_at(xm), pot.q_at(xm), tau));
        }
        s.a.assign(s.cells + 1, 0.0);
        s.b.assign(s.cells + 1, 0.0);
        s.na = s.a;
        s.nb = s.b;
    }

    const int nv = int(tree.vertices.size());
    std::vector<std::vector<std::pair<int, bool>>> inc(nv);  // (edge, at_start)
    for (std::size_t e = 0; e < tree.edges.size(); ++e) {
        inc[es[e].start_v].push_back({int(e), true});
        inc[es[e].end_v].push_back({int(e), false});
    }
    std::vector<int> bidx(nv, -1);
    for (int i = 0; i < m; ++i) bidx[tree.vertex_index(tree.boundary[i])] = i;
    const int clamped_v = tree.vertex_index(tree.clamped);

    EvolveResult res;
    res.outputs.assign(m, std::vector<cd>(grid.steps() + 1, 0.0));

    const cd I(0, 1);
    const double out_sign = opt.record_true_trace ? 2.0 : 1.0;

    // t = 0: impose boundary values on the zero state
    for (int v = 0; v < nv; ++v) {
        if (bidx[v] < 0) continue;
        cd f = controls[bidx[v]](0.0);
        for (auto [e, at_start] : inc[v]) {
            if (at_start)
                es[e].a[0] = f;
            else
                es[e].b[es[e].cells] = f;
        }
        res.outputs[bidx[v]][0] = I * f;
    }

    for (int step = 1; step <= nt; ++step) {
        const double t = step * tau;
        for (auto& s : es) {
            for (int k = 0; k < s.cells; ++k) {
                const Mat2& E = s.cexp[k];
                cd ain = s.a[k], bin = s.b[k + 1];
                s.na[k + 1] = E(0, 0) * ain + E(0, 1) * bin;
                s.nb[k] = E(1, 0) * ain + E(1, 1) * bin;
            }
            std::swap(s.a, s.na);
            std::swap(s.b, s.nb);
        }
        for (int v = 0; v < nv; ++v) {
            std::vector<cd> in;
            in.reserve(inc[v].size());
            for (auto [e, at_start] : inc[v])
                in.push_back(at_start ? es[e].b[0] : es[e].a[es[e].cells]);
            std::vector<cd> out;
            if (v == clamped_v) {
                out = {-in[0]};
            } else if (bidx[v] >= 0) {
                cd f = controls[bidx[v]](t);
                out = {f - in[0]};
                if (step % refine == 0)
                    res.outputs[bidx[v]][step / refine] =
                        I * f - out_sign * I * in[0];
            } else {
                out = vertex_scatter(in);
            }
            for (std::size_t k = 0; k < inc[v].size(); ++k) {
                auto [e, at_start] = inc[v][k];
                if (at_start)
                    es[e].a[0] = out[k];
                else
                    es[e].b[es[e].cells] = out[k];
            }
        }
        for (const auto& s : es)
            for (cd x : {s.a[0], s.a[s.cells], s.b[0], s.b[s.cells]})
                if (!std::isfinite(x.real()) || !std::isfinite(x.imag()))
                    throw StageError("forward-time",
                                     "non-finite field at step " +
                                         std::to_string(step));
    }
    return res;
}

std::map<std::string, std::vector<Spike>> ray_trace_singular(
    const MetricTree& tree, const std::string& source, double horizon,
    double amp_floor) {
    // choose the coarsest bin that keeps all lengths integral
    double tau = horizon;
    for (const auto& e : tree.edges) {
        double g = e.length;
        while (g > 1e-9) {
            double r = std::fmod(tau, g);
            tau = g;
            g = (r < 1e-9 || g - r < 1e-9) ? 0.0 : r;
        }
    }
    tau = std::min(tau, horizon);
    const int nt = int(std::floor(horizon / tau + 1e-9));
    const int ne = int(tree.edges.size());

    // dep[d][e][n]: amplitude departing along edge e at bin n;
    // d = 0 start->end, d = 1 end->start
    std::vector<std::vector<std::vector<cd>>> dep(
        2, std::vector<std::vector<cd>>(ne, std::vector<cd>(nt + 1, 0.0)));
    auto cell_count = [&](int e) {
        return int(std::lround(tree.edges[e].length / tau));
    };

    std::map<std::string, std::vector<Spike>> spikes;
    for (const auto& v : tree.boundary) spikes[v];

    {
        int e = tree.incident_edges(source)[0];
        bool at_start = tree.edges[e].start == source;
        dep[at_start ? 0 : 1][e][0] = 1.0;
    }

    for (int n = 0; n <= nt; ++n) {
        if (n > 0) {
            for (const auto& vname : tree.vertices) {
                auto inc = tree.incident_edges(vname);
                std::vector<cd> in(inc.size(), 0.0);
                bool any = false;
                for (std::size_t k = 0; k < inc.size(); ++k) {
                    int e = inc[k];
                    bool at_start = tree.edges[e].start == vname;
                    int lag = n - cell_count(e);
                    if (lag < 0) continue;
                    // arriving means it departed the far end toward us
                    cd amp = dep[at_start ? 1 : 0][e][lag];
                    if (amp != 0.0) any = true;
                    in[k] = amp;
                }
                if (!any) continue;
                std::vector<cd> out;
                if (vname == tree.clamped || tree.boundary_index(vname) >= 0) {
                    out = {-in[0]};
                    int bi = tree.boundary_index(vname);
                    if (bi >= 0) {
                        cd rec = cd(0, -1) * in[0];
                        if (std::abs(rec) > amp_floor)
                            spikes[vname].push_back({n * tau, rec});
                    }
                } else {
                    out = vertex_scatter(in);
                }
                for (std::size_t k = 0; k < inc.size(); ++k) {
                    int e = inc[k];
                    bool at_start = tree.edges[e].start == vname;
                    if (std::abs(out[k]) > amp_floor)
                        dep[at_start ? 0 : 1][e][n] += out[k];
                }
            }
        }
    }
    return spikes;
}

namespace {

// segment-wise second-order differentiation; the first two nodes after a
// front carry a local scheme transient and are extrapolated
std::vector<cd> differentiate_segments(const std::vector<cd>& y,
                                       const std::vector<int>& cuts,
                                       double tau) {
    std::vector<cd> reg(y.size(), 0.0);
    std::vector<int> bounds{0};
    for (int c : cuts) bounds.push_back(c);
    bounds.push_back(int(y.size()));
    for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
        int s0 = bounds[s], s1 = bounds[s + 1];
        int mlen = s1 - s0;
        if (mlen < 3) continue;
        for (int k = s0 + 1; k < s1 - 1; ++k)
            reg[k] = (y[k + 1] - y[k - 1]) / (2 * tau);
        reg[s0] = (-3.0 * y[s0] + 4.0 * y[s0 + 1] - y[s0 + 2]) / (2 * tau);
        reg[s1 - 1] =
            (3.0 * y[s1 - 1] - 4.0 * y[s1 - 2] + y[s1 - 3]) / (2 * tau);
        if (mlen >= 6) {
            reg[s0 + 1] = 3.0 * reg[s0 + 2] - 3.0 * reg[s0 + 3] + reg[s0 + 4];
            reg[s0] = 3.0 * reg[s0 + 1] - 3.0 * reg[s0 + 2] + reg[s0 + 3];
        }
    }
    return reg;
}

}  // namespace

ResponseMatrix extract_response(const Instance& inst, const TimeGrid& grid,
                                const ExtractOptions& opt) {
    const MetricTree& tree = inst.tree;
    const int m = int(tree.boundary.size());
    ResponseMatrix R;
    R.tau = grid.tau;
    R.horizon = grid.horizon;
    R.boundary = tree.boundary;
    R.entries.assign(m, std::vector<ResponseEntry>(m));
    const int nt = grid.steps();
    const cd I(0, 1);

    for (int src = 0; src < m; ++src) {
        std::vector<std::function<cd(double)>> controls(
            m, [](double) { return cd(0); });
        controls[src] = [](double) { return cd(1); };
        EvolveOptions eopt;
        eopt.refine = opt.refine;
        EvolveResult ev = evolve(inst, grid, controls, eopt);

        auto rays = opt.cross_check
                        ? ray_trace_singular(tree, tree.boundary[src],
                                             grid.horizon, 1e-9)
                        : std::map<std::string, std::vector<Spike>>{};

        for (int rec = 0; rec < m; ++rec) {
            std::vector<cd> y = ev.outputs[rec];
            if (rec == src)
                for (auto& v : y) v -= I;  // remove the i*H(t) payload

            // spike cells: |forward diff| over threshold from a trailing
            // median window
            std::vector<cd> d(nt);
            for (int k = 0; k < nt; ++k) d[k] = y[k + 1] - y[k];
            std::vector<bool> is_spike(nt, false);
            std::vector<double> window;
            for (int k = 0; k < nt; ++k) {
                window.clear();
                for (int j = std::max(0, k - opt.detector_window); j < k; ++j)
                    window.push_back(std::abs(d[j]));
                double med = 0;
                if (!window.empty()) {
                    std::sort(window.begin(), window.end());
                    med = window[window.size() / 2];
                }
                is_spike[k] = std::abs(d[k]) >
                              opt.detector_factor * med + opt.detector_floor;
            }
            std::vector<int> cuts;
            for (int k = 0; k < nt; ++k)
                if (is_spike[k]) {
                    if (!cuts.empty() && k + 1 - cuts.back() == 1)
                        throw StageError(
                            "forward-time",
                            "two spikes within one grid cell; refine tau");
                    cuts.push_back(k + 1);
                }

            ResponseEntry entry;
            entry.regular = differentiate_segments(y, cuts, grid.tau);
            for (int k = 0; k < nt; ++k)
                if (is_spike[k]) {
                    cd base =
                        grid.tau * (entry.regular[k] + entry.regular[k + 1]) /
                        2.0;
                    entry.spikes.push_back({(k + 1) * grid.tau, d[k] - base});
                }

            if (opt.cross_check) {
                const auto& ray = rays.at(tree.boundary[rec]);
                for (const Spike& rs : ray) {
                    if (std::abs(rs.a) < std::max(0.05, 10 * grid.tau))
                        continue;
                    bool found = false;
                    for (const Spike& es : entry.spikes)
                        if (std::abs(es.t - rs.t) < 0.5 * grid.tau) {
                            found = std::abs(es.a - rs.a) <=
                                    10 * grid.tau + 0.05 * std::abs(rs.a);
                        }
                    if (!found)
                        throw StageError(
                            "forward-time",
                            "extracted spikes disagree with ray tracing at t=" +
                                std::to_string(rs.t));
                }
            }
            R.entries[rec][src] = std::move(entry);
        }
    }
    return R;
}

std::vector<std::vector<cd>> apply_response(
    const ResponseMatrix& R, const std::vector<std::vector<cd>>& controls) {
    const int m = R.size();
    if (int(controls.size()) != m)
        throw StageError("forward-time", "one control column per vertex");
    const int nt = int(controls[0].size()) - 1;
    const cd I(0, 1);
    std::vector<std::vector<cd>> out(m, std::vector<cd>(nt + 1, 0.0));
    for (int rec = 0; rec < m; ++rec) {
        for (int src = 0; src < m; ++src) {
            const ResponseEntry& e = R.at(rec, src);
            const auto& f = controls[src];
            for (int n = 0; n <= nt; ++n) {
                cd acc = 0;
                if (rec == src) acc += I * f[n];
                for (const Spike& s : e.spikes) {
                    int lag = int(std::lround(s.t / R.tau));
                    if (lag <= n) acc += s.a * f[n - lag];
                }
                // trapezoid over s of reg(s) f(t - s)
                int kmax = std::min<int>(n, int(e.regular.size()) - 1);
                cd quad = 0;
                for (int k = 0; k <= kmax; ++k) {
                    double w = (k == 0 || k == kmax) ? 0.5 : 1.0;
                    quad += w * e.regular[k] * f[n - k];
                }
                acc += quad * R.tau;
                out[rec][n] += acc;
            }
        }
    }
    return out;
}

}  // namespace treedirac

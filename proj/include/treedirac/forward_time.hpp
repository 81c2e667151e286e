#pragma once

#include <functional>
#include <map>
#include <vector>

#include "treedirac/metric_tree.hpp"
#include "treedirac/types.hpp"

namespace treedirac {

/// CFL = 1 grid: the time step equals the spatial step on every edge.
struct TimeGrid {
    double tau = 0.01;
    double horizon = 1.0;

    int steps() const { return int(std::lround(horizon / tau)); }
};

struct Spike {
    double t = 0.0;
    cd a;
};

/// One response-matrix entry: singular spikes plus the sampled smooth
/// kernel. Diagonal entries additionally carry an implicit i*delta(t).
struct ResponseEntry {
    std::vector<Spike> spikes;     // sorted by time
    std::vector<cd> regular;       // samples at k*tau, k = 0..N_t
};

/// Boundary response kernel R(t) in the recording convention
/// y_j(t) = i f_j(t) - i (arriving first-channel amplitude at v_j).
struct ResponseMatrix {
    double tau = 0.0;
    double horizon = 0.0;
    std::vector<std::string> boundary;
    // entries[receiver][source]
    std::vector<std::vector<ResponseEntry>> entries;

    int size() const { return int(boundary.size()); }
    const ResponseEntry& at(int receiver, int source) const {
        return entries[receiver][source];
    }
};

/// Kirchhoff scattering of first-channel amplitudes at a degree-n vertex:
/// out_k = (2/n) sum_j in_j - in_k.
std::vector<cd> vertex_scatter(const std::vector<cd>& incoming);

struct EvolveOptions {
    int refine = 1;            // internal sub-stepping factor
    bool record_true_trace = false;  // i f - 2i in instead of i f - i in
};

struct EvolveResult {
    // outputs[boundary index][time index 0..N_t] on the coarse grid
    std::vector<std::vector<cd>> outputs;
};

/// Time evolution of the boundary-controlled system by exact character-
/// istic transport with per-cell coupling exponentials (second order).
/// Controls are callables evaluated at grid times; zero initial state.
EvolveResult evolve(const Instance& inst, const TimeGrid& grid,
                    const std::vector<std::function<cd(double)>>& controls,
                    const EvolveOptions& opt = {});

/// Exact singular part of the response column for a delta control at
/// `source`: spikes at every boundary vertex, amplitudes -i * (arriving
/// first-channel amplitude). Dynamic programming over vertex events; all
/// coincident arrivals are merged.
std::map<std::string, std::vector<Spike>> ray_trace_singular(
    const MetricTree& tree, const std::string& source, double horizon,
    double amp_floor = 1e-12);

struct ExtractOptions {
    int refine = 2;
    double detector_factor = 10.0;  // spike if |diff| > factor*median + floor
    int detector_window = 20;
    double detector_floor = 1e-9;
    bool cross_check = true;        // verify spikes against ray tracing
};

/// Unit-step probing of every boundary vertex; splits each output column
/// into spikes and the differentiated smooth kernel.
ResponseMatrix extract_response(const Instance& inst, const TimeGrid& grid,
                                const ExtractOptions& opt = {});

/// Discrete convolution of the response with sampled controls
/// (controls[src][time]); spikes act as exact shifts, the regular part by
/// trapezoid quadrature, and the diagonal adds i*F.
std::vector<std::vector<cd>> apply_response(
    const ResponseMatrix& R, const std::vector<std::vector<cd>>& controls);

}  // namespace treedirac

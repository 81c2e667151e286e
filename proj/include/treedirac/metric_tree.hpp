#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "treedirac/types.hpp"

namespace treedirac {

/// Oriented edge of a metric tree. The interval [0, length] runs from
/// `start` to `end`.
struct Edge {
    std::string id;
    std::string start;
    std::string end;
    double length = 0.0;
};

/// Finite metric tree with an ordered reduced boundary and one clamped
/// degree-1 vertex. Orientation convention: at every internal vertex all
/// incident edges either start or end there, and the clamped vertex is the
/// start of its edge.
struct MetricTree {
    std::vector<std::string> vertices;
    std::vector<Edge> edges;
    std::vector<std::string> boundary;  // ordered, excludes clamped
    std::string clamped;

    int vertex_index(const std::string& v) const;
    int edge_index(const std::string& id) const;
    std::vector<int> incident_edges(const std::string& v) const;
    int degree(const std::string& v) const;
    int boundary_index(const std::string& v) const;
    /// +1 if v is the start of its (unique, degree-1) edge, -1 if the end.
    int boundary_sign(const std::string& v) const;
    double total_length() const;
};

/// Sampled zero-trace matrix potential on one edge: p, q on the uniform
/// grid x_k = k*h, k = 0..round(length/h). Off-grid values by cubic
/// interpolation that reproduces the samples at nodes.
struct EdgePotential {
    std::string edge_id;
    double h = 0.0;
    std::vector<double> p;
    std::vector<double> q;

    double length() const { return h * double(p.size() - 1); }
    double p_at(double x) const;
    double q_at(double x) const;
    /// Same samples read in the reversed coordinate x -> length - x.
    /// The second channel changes sign under the flip, so q -> -q.
    EdgePotential flipped() const;
    static EdgePotential zero(const std::string& id, double length, double h);
};

/// Tree plus per-edge potentials; the unit most operations consume.
struct Instance {
    MetricTree tree;
    std::map<std::string, EdgePotential> potentials;
};

struct ValidationReport {
    bool valid = true;
    std::vector<std::string> violations;
};

/// Checks every MetricTree invariant; reports all violations found.
ValidationReport validate(const MetricTree& tree);

/// Reorients edges by parity of hop distance from the clamped vertex.
/// Always succeeds on a tree; idempotent on already consistent input.
MetricTree orient_edges(const MetricTree& tree);

/// Length of the unique path between two vertices. a == b gives zero;
/// unknown names throw.
double path_distance(const MetricTree& tree, const std::string& a,
                     const std::string& b);

struct GenerateOptions {
    int max_edges = 8;
    double base_step = 0.1;   // all lengths are integer multiples of this
    int max_step_multiple = 4;
    double amplitude = 0.5;   // max |p|, |q| scale
    double sample_h = 0.01;   // potential sampling step
    int max_degree = 5;
};

/// Deterministic random instance: tree with internal degrees >= 3 and
/// commensurate lengths, trig-polynomial potentials on each edge.
Instance generate_instance(std::uint64_t seed, const GenerateOptions& opt);

struct TreeMatch {
    bool equivalent = false;
    std::map<std::string, std::string> vertex_map;  // lhs -> rhs
    std::map<std::string, std::string> edge_map;
    std::string reason;  // set when not equivalent
};

/// Boundary-labeled isomorphism test: the mapping must fix the boundary
/// ordering and the clamped vertex, with lengths equal within tol.
TreeMatch tree_equivalent(const MetricTree& a, const MetricTree& b,
                          double length_tol);

/// Potential on the boundary edge at v, in the coordinate that puts v at
/// x = 0 pointing into the tree (flips stored samples when v is the end).
EdgePotential inward_potential(const Instance& inst, const std::string& v);

/// Cubic (4-point Lagrange) interpolation of uniformly sampled values.
double interp_cubic(const std::vector<double>& samples, double h, double x);

}  // namespace treedirac

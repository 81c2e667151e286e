#pragma once

#include <Eigen/Dense>
#include <vector>

#include "treedirac/metric_tree.hpp"
#include "treedirac/types.hpp"

namespace treedirac {

using Mat2 = Eigen::Matrix2cd;
using Vec2 = Eigen::Vector2cd;

/// Spectral sample points; for TW assembly every point must have
/// positive imaginary part.
struct SpectralGrid {
    std::vector<cd> points;

    static SpectralGrid line(double re_lo, double re_hi, int count, double eps);
};

/// TW matrix samples M(lambda_k) with the boundary ordering they refer to.
struct TWSamples {
    SpectralGrid grid;
    std::vector<std::string> boundary;           // ordering of rows/cols
    std::vector<Eigen::MatrixXcd> mats;          // one per grid point

    int size() const { return int(boundary.size()); }
};

/// exp(B) for trace-free 2x2 B via B^2 = -det(B) I; determinant is exactly
/// one up to roundoff.
Mat2 exp_tracefree(const Mat2& B);

/// Coefficient matrix A(x) of Psi' = A Psi for J Psi' + V Psi = lambda Psi.
Mat2 transfer_coefficient(cd lambda, double p, double q);

/// Fundamental matrix Psi(l) = T Psi(0) across one edge, fourth-order
/// Magnus on the sample grid. |det T - 1| stays at roundoff for any step.
/// Substeps keep |lambda| * h_sub <= guard internally; the raw-grid accuracy
/// guard |lambda| * h > 0.5 throws unless allow_substeps is set.
Mat2 edge_transfer(const EdgePotential& pot, cd lambda,
                   bool allow_substeps = true);

/// Cauchy solve along an edge: data (psi1, psi2) at one endpoint
/// (from_start selects x = 0 or x = l), value at the other endpoint.
/// The inverse transfer uses the det-1 adjugate.
Vec2 solve_cauchy(const EdgePotential& pot, cd lambda, bool from_start,
                  const Vec2& data);

/// TW matrix of the instance at one spectral point. Readout convention:
/// psi^2 at each boundary vertex is taken in the edge-local coordinate
/// pointing into the tree. Throws on a (near-)spectral point.
Eigen::MatrixXcd tw_matrix(const Instance& inst, cd lambda);

/// tw_matrix over a grid.
TWSamples tw_samples(const Instance& inst, const SpectralGrid& grid);

}  // namespace treedirac

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "treedirac/metric_tree.hpp"
#include "treedirac/types.hpp"

namespace treedirac {

/// Half-line response function r on [0, 2T) at step tau (2N samples),
/// zero-extended to t < 0. Convolution convention: R f = i f + r * f.
struct ResponseFunction {
    double tau = 0.0;
    std::vector<cd> r;

    int n_half() const { return int(r.size()) / 2; }  // N = T / tau
    double T() const { return tau * n_half(); }
};

/// Kernel of the connecting operator (C a)(t) = 2 a(t) + int c(t,s) a(s) ds
/// on the [0,T]^2 grid. Diagonal nodes hold averaged one-sided limits;
/// the limits themselves are kept alongside.
struct ConnectingKernel {
    double tau = 0.0;
    Eigen::MatrixXcd c11, c12, c21, c22;
    cd diag11_above, diag11_below, diag22_above, diag22_below;

    int n() const { return int(c11.rows()) - 1; }
};

struct GLSolution {
    double xi = 0.0;
    // k^xi(t,s) on the sub-square [T-xi, T]^2, indexed from t,s = T-xi
    Eigen::MatrixXcd k11, k12, k21, k22;
    double residual = 0.0;
};

ConnectingKernel build_connecting_kernel(const ResponseFunction& r);

/// Smallest eigenvalue of the symmetrized discretized connecting operator;
/// positive certifies admissibility at this resolution.
double check_positive_definite(const ConnectingKernel& c);

/// Solve the kernel integral equation family member at offset xi
/// (0 < xi <= T) by Nystrom collocation with trapezoid weights.
GLSolution solve_gl(const ConnectingKernel& c, double xi);

struct RecoveredPotential {
    std::vector<double> x, p, q;
    double max_imag = 0.0;  // size of discarded imaginary parts
};

/// Recover p, q at the requested points in [0, T). Points outside throw.
RecoveredPotential recover_potential(const ResponseFunction& r,
                                     const std::vector<double>& xs);

struct EdgeRecovery {
    EdgePotential potential;
    double max_imag = 0.0;
    double min_eigenvalue = 0.0;
};

/// Edge-potential recovery from the diagonal regular kernel of a response
/// matrix (spec convention; the half-line trace kernel is twice that).
/// Endpoint samples of r and of the potential are quadratically
/// extrapolated; interior points are solved directly.
EdgeRecovery recover_edge_potential(const std::vector<cd>& diag_regular,
                                    double edge_length, double tau);

}  // namespace treedirac

#include "treedirac/forward_spectral.hpp"

#include <cmath>

namespace treedirac {

SpectralGrid SpectralGrid::line(double re_lo, double re_hi, int count,
                                double eps) {
    SpectralGrid g;
    g.points.reserve(count);
    for (int i = 0; i < count; ++i) {
        double t = count == 1 ? 0.5 : double(i) / (count - 1);
        g.points.emplace_back(re_lo + (re_hi - re_lo) * t, eps);
    }
    return g;
}

Mat2 exp_tracefree(const Mat2& B) {
    cd mu2 = B(0, 0) * B(0, 0) + B(0, 1) * B(1, 0);
    cd mu = std::sqrt(mu2);
    cd ch, shm;
    if (std::abs(mu) < 1e-6) {
        ch = 1.0 + mu2 / 2.0 + mu2 * mu2 / 24.0;
        shm = 1.0 + mu2 / 6.0 + mu2 * mu2 / 120.0;
    } else {
        ch = std::cosh(mu);
        shm = std::sinh(mu) / mu;
    }
    Mat2 out = shm * B;
    out(0, 0) += ch;
    out(1, 1) += ch;
    return out;
}

Mat2 transfer_coefficient(cd lambda, double p, double q) {
    Mat2 A;
    A << q, -(lambda + p), lambda - p, -q;
    return A;
}

namespace {

constexpr double kStepGuard = 0.5;
const double kGaussOffset = std::sqrt(3.0) / 6.0;

Mat2 magnus_step(const EdgePotential& pot, cd lambda, double x0, double h) {
    double x1 = x0 + (0.5 - kGaussOffset) * h;
    double x2 = x0 + (0.5 + kGaussOffset) * h;
    Mat2 A1 = transfer_coefficient(lambda, pot.p_at(x1), pot.q_at(x1));
    Mat2 A2 = transfer_coefficient(lambda, pot.p_at(x2), pot.q_at(x2));
    Mat2 Om = (h / 2.0) * (A1 + A2) +
              (std::sqrt(3.0) * h * h / 12.0) * (A2 * A1 - A1 * A2);
    return exp_tracefree(Om);
}

}  // namespace

Mat2 edge_transfer(const EdgePotential& pot, cd lambda, bool allow_substeps) {
    const double h = pot.h;
    const int n = int(pot.p.size()) - 1;
    int nsub = 1;
    if (std::abs(lambda) * h > kStepGuard) {
        if (!allow_substeps)
            throw StageError("forward-spectral",
                             "|lambda|*h exceeds the accuracy guard; refine "
                             "the potential grid");
        nsub = int(std::ceil(std::abs(lambda) * h / kStepGuard));
    }
    const double hs = h / nsub;
    Mat2 T = Mat2::Identity();
    for (int k = 0; k < n; ++k)
        for (int s = 0; s < nsub; ++s)
            T = magnus_step(pot, lambda, k * h + s * hs, hs) * T;
    return T;
}

Vec2 solve_cauchy(const EdgePotential& pot, cd lambda, bool from_start,
                  const Vec2& data) {
    Mat2 T = edge_transfer(pot, lambda);
    if (from_start) return T * data;
    Mat2 Tinv;  // det T = 1, adjugate inverse
    Tinv << T(1, 1), -T(0, 1), -T(1, 0), T(0, 0);
    return Tinv * data;
}

Eigen::MatrixXcd tw_matrix(const Instance& inst, cd lambda) {
    const MetricTree& t = inst.tree;
    const int ne = int(t.edges.size());
    const int m = int(t.boundary.size());
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(2 * ne, 2 * ne);
    Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(2 * ne, m);

    std::vector<Mat2> Ts(ne);
    for (int e = 0; e < ne; ++e)
        Ts[e] = edge_transfer(inst.potentials.at(t.edges[e].id), lambda);

    // unknowns: Psi_e(0) per edge; psi at vertex v on edge e is C * unknown
    auto coef = [&](int e, const std::string& v) -> Mat2 {
        return t.edges[e].start == v ? Mat2::Identity() : Ts[e];
    };

    int row = 0;
    for (const auto& v : t.vertices) {
        auto inc = t.incident_edges(v);
        if (v == t.clamped) {
            Mat2 C = coef(inc[0], v);
            A.block(row, 2 * inc[0], 1, 2) = C.row(0);
            ++row;
        } else if (t.boundary_index(v) >= 0) {
            Mat2 C = coef(inc[0], v);
            A.block(row, 2 * inc[0], 1, 2) = C.row(0);
            B(row, t.boundary_index(v)) = 1.0;
            ++row;
        } else {
            int e0 = inc[0];
            Mat2 C0 = coef(e0, v);
            for (std::size_t j = 1; j < inc.size(); ++j) {
                Mat2 C = coef(inc[j], v);
                A.block(row, 2 * e0, 1, 2) = C0.row(0);
                A.block(row, 2 * inc[j], 1, 2) -= C.row(0);
                ++row;
            }
            for (int e : inc) {
                Mat2 C = coef(e, v);
                A.block(row, 2 * e, 1, 2) += C.row(1);
            }
            ++row;
        }
    }

    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
    Eigen::MatrixXcd X = lu.solve(B);
    double resid = (A * X - B).norm() / std::max(1.0, B.norm());
    if (!X.allFinite() || resid > 1e-6)
        throw StageError("forward-spectral",
                         "spectral point; increase Im lambda");

    Eigen::MatrixXcd M(m, m);
    for (int i = 0; i < m; ++i) {
        const std::string& v = t.boundary[i];
        int e = t.incident_edges(v)[0];
        double sigma = t.boundary_sign(v);
        Mat2 C = coef(e, v);
        M.row(i) = sigma * (C.row(1) * X.block(2 * e, 0, 2, m));
    }
    return M;
}

TWSamples tw_samples(const Instance& inst, const SpectralGrid& grid) {
    TWSamples out;
    out.grid = grid;
    out.boundary = inst.tree.boundary;
    out.mats.reserve(grid.points.size());
    for (cd lam : grid.points) out.mats.push_back(tw_matrix(inst, lam));
    return out;
}

}  // namespace treedirac

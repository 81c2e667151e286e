#include "treedirac/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace treedirac {

SpectralGrid make_kline(double tau, double t_period, double eps) {
    if (eps <= 0) throw StageError("bridge", "eps must be positive");
    const double K = M_PI / tau;
    const int nk = int(std::lround(t_period / tau));
    const double dx = 2 * K / nk;
    SpectralGrid g;
    g.points.reserve(nk + 1);
    for (int j = 0; j <= nk; ++j) g.points.emplace_back(-K + j * dx, eps);
    return g;
}

namespace {

// A = int_0^1 (1-u) e^{i th u} du, B = int_0^1 u e^{i th u} du
void filon_weights(cd theta, cd& A, cd& B) {
    cd it = cd(0, 1) * theta;
    if (std::abs(theta) < 1e-4) {
        cd it2 = it * it, it3 = it2 * it;
        cd E = 1.0 + it / 2.0 + it2 / 6.0 + it3 / 24.0;
        B = 0.5 + it / 3.0 + it2 / 8.0 + it3 / 30.0;
        A = E - B;
        return;
    }
    cd e = std::exp(it);
    cd E = (e - 1.0) / it;
    B = (e - E) / it;
    A = E - B;
}

std::vector<int> spike_bins(const ResponseEntry& e, double tau) {
    std::vector<int> out;
    out.reserve(e.spikes.size());
    for (const Spike& s : e.spikes) out.push_back(int(std::lround(s.t / tau)));
    return out;
}

}  // namespace

std::vector<cd> response_entry_transform(const ResponseEntry& entry,
                                         double tau, bool diagonal,
                                         const std::vector<cd>& points) {
    const auto bins = spike_bins(entry, tau);
    const std::set<int> cut(bins.begin(), bins.end());
    const int n = int(entry.regular.size());
    std::vector<cd> out(points.size());
    std::vector<cd> creg(n);
    for (int i = 0; i < n; ++i) creg[i] = std::conj(entry.regular[i]);

    for (std::size_t jp = 0; jp < points.size(); ++jp) {
        const cd k = points[jp];
        if (k.imag() <= 0)
            throw StageError("bridge", "transform requires Im k > 0");
        cd M = diagonal ? cd(0, -1) : cd(0, 0);
        for (const Spike& s : entry.spikes)
            M += 2.0 * std::conj(s.a) * std::exp(cd(0, 1) * k * s.t);
        cd A, B;
        filon_weights(k * tau, A, B);
        const cd step = std::exp(cd(0, 1) * k * tau);
        cd acc = 0, ph = 1.0;
        for (int cell = 0; cell + 1 < n; ++cell) {
            cd f0 = creg[cell];
            cd f1 = cut.count(cell + 1) && cell >= 1
                        ? 2.0 * creg[cell] - creg[cell - 1]
                        : creg[cell + 1];
            acc += ph * (f0 * A + f1 * B);
            ph *= step;
            if ((cell & 0xff) == 0xff)
                ph = std::exp(cd(0, 1) * k * (tau * (cell + 1)));
        }
        M += 2.0 * tau * acc;
        out[jp] = M;
    }
    return out;
}

TWSamples response_to_tw(const ResponseMatrix& R, const SpectralGrid& grid) {
    const int m = R.size();
    TWSamples tw;
    tw.grid = grid;
    tw.boundary = R.boundary;
    tw.mats.assign(grid.points.size(),
                   Eigen::MatrixXcd::Zero(m, m));
    for (int rec = 0; rec < m; ++rec)
        for (int src = 0; src < m; ++src) {
            auto vals = response_entry_transform(R.at(rec, src), R.tau,
                                                 rec == src, grid.points);
            for (std::size_t j = 0; j < vals.size(); ++j)
                tw.mats[j](rec, src) = vals[j];
        }
    return tw;
}

double transform_truncation_bound(const ResponseMatrix& R, double eps) {
    // tail spikes beyond the horizon are damped by e^{-eps t}; bound the
    // neglected mass by the recorded amplitude scale at the horizon
    double amp = 0;
    for (const auto& row : R.entries)
        for (const auto& e : row)
            for (const Spike& s : e.spikes) amp = std::max(amp, std::abs(s.a));
    return 2.0 * std::max(amp, 1.0) * std::exp(-eps * R.horizon);
}

namespace {

struct KlineShape {
    double dx = 0, K = 0, eps = 0;
    int nk = 0;
};

KlineShape check_kline(const SpectralGrid& g) {
    if (g.points.size() < 8)
        throw StageError("bridge", "k-line grid too small");
    KlineShape s;
    s.eps = g.points[0].imag();
    s.nk = int(g.points.size()) - 1;
    s.dx = (g.points.back().real() - g.points.front().real()) / s.nk;
    s.K = g.points.back().real();
    if (s.eps <= 0) throw StageError("bridge", "eps must be positive");
    if (std::abs(g.points.front().real() + s.K) > 1e-9 * s.K)
        throw StageError("bridge", "k-line must be symmetric");
    for (int j = 0; j <= s.nk; ++j) {
        if (std::abs(g.points[j].imag() - s.eps) > 1e-12)
            throw StageError("bridge", "k-line must have constant Im k");
        if (std::abs(g.points[j].real() - (-s.K + j * s.dx)) > 1e-9)
            throw StageError("bridge", "k-line must be uniform");
    }
    return s;
}

// sum_j w_j G_j e^{-i x_j t} * dx/(2 pi), trapezoid endpoints
std::vector<cd> inverse_dft(const std::vector<cd>& G, const KlineShape& s,
                            double tau, int nt, double eps) {
    std::vector<cd> D(nt + 1, 0.0);
    for (int j = 0; j <= s.nk; ++j) {
        double w = (j == 0 || j == s.nk) ? 0.5 : 1.0;
        cd g = w * G[j];
        if (g == cd(0)) continue;
        const double xj = -s.K + j * s.dx;
        const cd step = std::exp(cd(0, -xj * tau));
        cd ph = 1.0;
        for (int n = 0; n <= nt; ++n) {
            D[n] += g * ph;
            ph *= step;
            if ((n & 0xff) == 0xff)
                ph = std::exp(cd(0, -xj * tau * (n + 1)));
        }
    }
    const double scale = s.dx / (2 * M_PI);
    for (int n = 0; n <= nt; ++n)
        D[n] = std::conj(D[n] * scale) * std::exp(eps * n * tau);
    return D;
}

}  // namespace

ResponseMatrix tw_to_response(const TWSamples& tw, double tau,
                              const InverseBridgeOptions& opt) {
    const KlineShape shape = check_kline(tw.grid);
    const double eps = shape.eps;
    const double t_period = 2 * M_PI / shape.dx;
    if (opt.t_target <= 0 || opt.t_target > t_period - 1e-9)
        throw StageError("bridge",
                         "t_target must lie inside the grid's time period");
    const int nt = int(std::lround(opt.t_target / tau));
    const int m = tw.size();
    const int nk = shape.nk;

    ResponseMatrix R;
    R.tau = tau;
    R.horizon = opt.t_target;
    R.boundary = tw.boundary;
    R.entries.assign(m, std::vector<ResponseEntry>(m));

    for (int rec = 0; rec < m; ++rec)
        for (int src = 0; src < m; ++src) {
            const bool diag = rec == src;
            std::vector<cd> G(nk + 1);
            for (int j = 0; j <= nk; ++j) {
                cd v = tw.mats[j](rec, src);
                if (diag) v += cd(0, 1);
                G[j] = v / 2.0;
            }
            std::vector<cd> D0 = inverse_dft(G, shape, tau, nt, eps);

            // candidate feature bins: single-bin peaks over local median
            std::vector<double> amp(nt + 1);
            for (int n = 0; n <= nt; ++n) amp[n] = tau * std::abs(D0[n]);
            std::set<int> cand;
            for (int n = 0; n <= nt; ++n) {
                int lo = std::max(0, n - 6), hi = std::min(nt, n + 6);
                std::vector<double> nb;
                for (int j = lo; j <= hi; ++j)
                    if (j != n) nb.push_back(amp[j]);
                std::sort(nb.begin(), nb.end());
                double med = nb[nb.size() / 2];
                bool peak = true;
                for (int j = lo; j <= hi; ++j)
                    if (amp[j] > amp[n]) peak = false;
                if (peak &&
                    amp[n] >= std::max(opt.amp_floor,
                                       opt.detect_factor * med))
                    cand.insert(n);
            }
            if (diag) cand.insert(0);
            for (double t : opt.extra_candidates) {
                int n = int(std::lround(t / tau));
                if (n >= 0 && n <= nt) cand.insert(n);
            }
            std::vector<int> bins(cand.begin(), cand.end());
            for (std::size_t i = 0; i + 1 < bins.size(); ++i)
                if (bins[i + 1] - bins[i] == 1)
                    throw StageError(
                        "bridge",
                        "unresolved spike pair near t=" +
                            std::to_string(bins[i] * tau) +
                            "; k-band too small to separate");

            // spectral-domain fit of spikes + decaying-step jumps on the
            // outer half band
            std::vector<int> hidx;
            for (int j = 0; j <= nk; ++j)
                if (std::abs(tw.grid.points[j].real()) >= 0.5 * shape.K)
                    hidx.push_back(j);
            const int nb = int(bins.size());
            Eigen::MatrixXcd Abase(hidx.size(), 2 * nb);
            Eigen::VectorXcd rhs(hidx.size());
            for (std::size_t r = 0; r < hidx.size(); ++r) {
                double x = tw.grid.points[hidx[r]].real();
                for (int c = 0; c < nb; ++c) {
                    double t0 = bins[c] * tau;
                    cd e = std::exp(cd(0, 1) * x * t0);
                    Abase(r, c) = e;
                    Abase(r, nb + c) = e / cd(2 * eps, -x);
                }
                rhs(r) = G[hidx[r]];
            }
            Eigen::VectorXcd coef =
                Abase.colPivHouseholderQr().solve(rhs);

            std::vector<cd> Gc = G;
            for (int j = 0; j <= nk; ++j) {
                double x = tw.grid.points[j].real();
                for (int c = 0; c < nb; ++c) {
                    double t0 = bins[c] * tau;
                    cd e = std::exp(cd(0, 1) * x * t0);
                    Gc[j] -= coef(c) * e;
                    Gc[j] -= coef(nb + c) * e / cd(2 * eps, -x);
                }
            }
            std::vector<cd> reg = inverse_dft(Gc, shape, tau, nt, eps);
            ResponseEntry entry;
            for (int c = 0; c < nb; ++c) {
                double t0 = bins[c] * tau;
                cd a = std::conj(coef(c)) * std::exp(eps * t0);
                cd J = std::conj(coef(nb + c)) * std::exp(eps * t0);
                for (int n = bins[c]; n <= nt; ++n)
                    reg[n] += J * std::exp(-eps * (n * tau - t0));
                if (std::abs(a) >= opt.amp_floor && !(diag && bins[c] == 0))
                    entry.spikes.push_back({t0, a});
            }
            std::sort(entry.spikes.begin(), entry.spikes.end(),
                      [](const Spike& a, const Spike& b) { return a.t < b.t; });
            entry.regular = std::move(reg);
            R.entries[rec][src] = std::move(entry);
        }
    return R;
}

}  // namespace treedirac

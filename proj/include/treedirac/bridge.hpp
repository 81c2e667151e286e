#pragma once

#include <vector>

#include "treedirac/forward_spectral.hpp"
#include "treedirac/forward_time.hpp"

namespace treedirac {

/// Uniform spectral sampling on the damped line Im k = eps covering
/// [-K, K] with K = pi/tau; the inverse transform periodizes time with
/// period t_period = 2*pi / (grid spacing).
SpectralGrid make_kline(double tau, double t_period, double eps);

/// Transform of one response entry at the given spectral points:
/// M = -i*[diag] + 2*sum conj(a) e^{i k t} + 2*int conj(reg) e^{i k t} dt.
/// The quadrature is Filon-type (piecewise-linear kernel against an exact
/// oscillatory weight), split at spike nodes.
std::vector<cd> response_entry_transform(const ResponseEntry& entry,
                                         double tau, bool diagonal,
                                         const std::vector<cd>& points);

/// ResponseMatrix -> TW samples on an arbitrary grid with Im > 0.
TWSamples response_to_tw(const ResponseMatrix& R, const SpectralGrid& grid);

/// Truncation bound C*exp(-Im k * horizon) of the finite-horizon transform.
double transform_truncation_bound(const ResponseMatrix& R, double eps);

struct InverseBridgeOptions {
    double t_target = 0.0;        // horizon of the reconstructed response
    double amp_floor = 1e-3;      // smallest spike amplitude kept
    double detect_factor = 4.0;   // peak threshold over local median
    // known feature times (member echoes etc.) added to the candidates
    std::vector<double> extra_candidates;
};

/// TW samples on a uniform k-line -> ResponseMatrix. Spikes are read from
/// single bins of the rectangular-window inverse transform; discontinuities
/// of the smooth kernel are fitted in the spectral domain at the detected
/// times (decaying-step bases) and re-inserted sharply.
ResponseMatrix tw_to_response(const TWSamples& tw, double tau,
                              const InverseBridgeOptions& opt);

}  // namespace treedirac

#pragma once

#include <vector>

#include "evoell/evolve.hpp"
#include "evoell/lattice.hpp"

namespace evoell {

// min(1/2, exp(-r^2/2) / (sqrt(2 pi) r)); Gaussian-tail majorant.
double phi(double r);

// P(Z >= r) for standard normal Z, via the complementary error function.
double gaussian_tail(double r);

// min(1, 2 P(Z >= (a0 - 1/|x|^2) / sqrt(T))): upper bound on the
// probability that x is a contact point by time T. Requires a0 |x|^2 >= 1.
double hitting_bound(const LatticePoint& x, double a0, double T);

// Exact finite sum of phi((a0 - 1/|x|^2)/sqrt(t)) over the nonzero
// lattice points of the ball D_t = {(a0 - c0 sqrt(tn))|x|^2 < 1}.
double k_t(const LatticeBasis& lattice, double a0, double t, double c0 = 2.0);

// Reduced 1-D form of the shell integral, normalized by Vol(B^n):
// (n sqrt(t)/2) a0^{-(n+2)/2} * int_0^{c0 sqrt(n)} phi(y) (1 - y sqrt(t)/a0)^{-(n+2)/2} dy.
double shell_integral(int n, double t, double a0, double c0 = 2.0);

// Same quantity from the n-dimensional polar form (independent route,
// integrating phi((a0 - 1/r^2)/sqrt(t)) n r^{n-1} over the shell radii).
double shell_integral_polar(int n, double t, double a0, double c0 = 2.0);

// 99th percentile of ||W_t||_op / sqrt(t n) over GOE samples: a concrete
// stand-in for the universal operator-norm tail constant.
double estimate_c0(int n, int samples, RngStream& rng);

struct DensityReport {
    int n = 0;
    double final_volume_ratio = 0.0;  // Vol(E_A)/Vol(B^n) = det(A)^{-1/2}
    double packing_density = 0.0;     // Vol(E_A) / (2^n covolume)
    double minkowski_ratio = 0.0;     // packing_density / (2 * 2^-n)
    double n2_ratio = 0.0;            // packing_density / (n^2 * 2^-n)
};

DensityReport density_report(const SymMatrix& a, const LatticeBasis& lattice);

struct EnsembleStats {
    std::vector<double> t;  // uniform grid on [0, horizon]
    std::vector<double> mean_logdet;
    std::vector<double> se_logdet;
    std::vector<double> mean_contacts;
    std::vector<double> mean_dim_f;
};

// Mean/SE curves over aligned time grids; trajectories are linearly
// interpolated between records and held constant after their last one.
EnsembleStats ensemble_stats(const std::vector<Trajectory>& trajectories,
                             double horizon, int grid_points = 512);

}  // namespace evoell

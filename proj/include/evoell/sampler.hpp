#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "evoell/lattice.hpp"
#include "evoell/rng.hpp"

namespace evoell {

// Volume of the n-dimensional Euclidean unit ball.
double vol_ball(int n);

bool is_prime(std::int64_t p);
std::int64_t smallest_prime_at_least(std::int64_t m);

struct SamplerKind {
    enum class Variant { Exact2D, HeckePoints };
    Variant variant = Variant::HeckePoints;
    std::int64_t p = 0;           // HeckePoints modulus; 0 = smallest prime >= n^4
    double target_covolume = -1;  // < 0 means vol_ball(n)

    static SamplerKind exact2d() { return {Variant::Exact2D, 0, -1}; }
    static SamplerKind hecke(std::int64_t p = 0) { return {Variant::HeckePoints, p, -1}; }
};

// Exact2D: Haar-random lattice from the SL(2,Z) fundamental domain
// (inverse-CDF on the strip, rejection on |z| >= 1, random rotation).
// HeckePoints: L_a = {x in Z^n : x_n = sum a_i x_i mod p} with a uniform
// in {0..p-1}^{n-1}; equidistributes toward Haar as p grows, so it is an
// approximate sampler for n >= 3. Both are normalized to the target
// covolume (default Vol(B^n)) and returned LLL-reduced.
LatticeBasis sample_lattice(int n, const SamplerKind& kind, RngStream& rng);

// Piecewise-constant radial function with bounded support: value
// pieces[k].second on the shell pieces[k-1].first <= r < pieces[k].first.
struct RadialStepFn {
    std::vector<std::pair<double, double>> pieces;  // (outer radius, value), radii increasing

    static RadialStepFn ball_indicator(double radius) { return {{{radius, 1.0}}}; }

    double support_radius() const;
    double eval(double r) const;
    // integral over R^n divided by Vol(B^n): the Siegel right-hand side.
    double siegel_target(int n) const;
};

struct SiegelResult {
    double estimate = 0.0;
    double se = 0.0;
    double target = 0.0;
    std::int64_t samples = 0;
};

// Monte Carlo mean of sum_{0 != x in L} phi(x) over sampled lattices,
// against the quadrature value of the Siegel right-hand side.
SiegelResult siegel_mc(int n, const SamplerKind& kind, const RadialStepFn& phi,
                       std::int64_t samples, RngStream& rng);

}  // namespace evoell

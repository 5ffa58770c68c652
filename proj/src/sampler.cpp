#include "evoell/sampler.hpp"

#include <cmath>

namespace evoell {

double vol_ball(int n) {
    if (n < 1)
        throw UsageError("vol_ball: n must be >= 1");
    return std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

bool is_prime(std::int64_t p) {
    if (p < 2)
        return false;
    for (std::int64_t d = 2; d * d <= p; ++d)
        if (p % d == 0)
            return false;
    return true;
}

std::int64_t smallest_prime_at_least(std::int64_t m) {
    std::int64_t p = std::max<std::int64_t>(m, 2);
    while (!is_prime(p))
        ++p;
    return p;
}

namespace {

LatticeBasis sample_exact2d(RngStream& rng) {
    // Strip proposal {|x| <= 1/2, y >= sqrt(3)/2} with density prop. to
    // 1/y^2; y by inverse CDF, so the only rejection is |z| >= 1.
    const double y0 = std::sqrt(3.0) / 2.0;
    double x = 0.0, y = 0.0;
    do {
        x = rng.uniform(-0.5, 0.5);
        y = y0 / (1.0 - rng.uniform01());
    } while (x * x + y * y < 1.0);

    Eigen::MatrixXd b(2, 2);
    b << 1.0, 0.0, x, y;
    b /= std::sqrt(y);  // covolume 1

    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    Eigen::MatrixXd rot(2, 2);
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return LatticeBasis(b * rot.transpose());
}

LatticeBasis sample_hecke(int n, std::int64_t p, RngStream& rng) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n - 1; ++i) {
        b(i, i) = 1.0;
        b(i, n - 1) = static_cast<double>(rng.uniform_below(p));
    }
    b(n - 1, n - 1) = static_cast<double>(p);
    return LatticeBasis(b);
}

}  // namespace

LatticeBasis sample_lattice(int n, const SamplerKind& kind, RngStream& rng) {
    const double target = kind.target_covolume > 0 ? kind.target_covolume : vol_ball(n);
    LatticeBasis raw = [&]() -> LatticeBasis {
        switch (kind.variant) {
            case SamplerKind::Variant::Exact2D:
                if (n != 2)
                    throw UsageError("sample_lattice: Exact2D requires n = 2");
                return sample_exact2d(rng);
            case SamplerKind::Variant::HeckePoints: {
                if (n < 2)
                    throw UsageError("sample_lattice: HeckePoints requires n >= 2");
                std::int64_t p = kind.p;
                if (p == 0)
                    p = smallest_prime_at_least(static_cast<std::int64_t>(n) * n * n * n);
                if (!is_prime(p))
                    throw UsageError("sample_lattice: p must be prime");
                return sample_hecke(n, p, rng);
            }
        }
        throw UsageError("sample_lattice: unknown sampler kind");
    }();
    return lll_reduce(normalize_covolume(raw, target));
}

double RadialStepFn::support_radius() const {
    return pieces.empty() ? 0.0 : pieces.back().first;
}

double RadialStepFn::eval(double r) const {
    for (const auto& [radius, value] : pieces)
        if (r < radius)
            return value;
    return 0.0;
}

double RadialStepFn::siegel_target(int n) const {
    double total = 0.0;
    double inner_r = 0.0;
    for (const auto& [radius, value] : pieces) {
        if (radius <= inner_r)
            throw UsageError("RadialStepFn: radii must be strictly increasing");
        total += value * (std::pow(radius, n) - std::pow(inner_r, n));
        inner_r = radius;
    }
    return total;
}

SiegelResult siegel_mc(int n, const SamplerKind& kind, const RadialStepFn& phi,
                       std::int64_t samples, RngStream& rng) {
    if (samples < 1)
        throw UsageError("siegel_mc: need at least one sample");
    const double rmax = phi.support_radius();
    SiegelResult res;
    res.samples = samples;
    res.target = phi.siegel_target(n);
    if (rmax <= 0.0)
        return res;  // phi = 0

    SymMatrix shape = SymMatrix::identity(n);
    shape *= 1.0 / (rmax * rmax);

    double sum = 0.0, sumsq = 0.0;
    for (std::int64_t i = 0; i < samples; ++i) {
        const LatticeBasis lat = sample_lattice(n, kind, rng);
        double s = 0.0;
        for (const LatticePoint& pt : enumerate_in_ellipsoid(lat, shape, 1.0))
            s += phi.eval(pt.embedding.norm());
        sum += s;
        sumsq += s * s;
    }
    res.estimate = sum / samples;
    const double var = std::max(sumsq / samples - res.estimate * res.estimate, 0.0);
    res.se = std::sqrt(var / samples);
    return res;
}

}  // namespace evoell

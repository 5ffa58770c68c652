#include "evoell/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "evoell/sampler.hpp"

namespace evoell {

double phi(double r) {
    if (r < 0.0)
        throw UsageError("phi: r must be >= 0");
    if (r == 0.0)
        return 0.5;
    return std::min(0.5, std::exp(-0.5 * r * r) / (std::sqrt(2.0 * M_PI) * r));
}

double gaussian_tail(double r) { return 0.5 * std::erfc(r / std::sqrt(2.0)); }

double hitting_bound(const LatticePoint& x, double a0, double T) {
    if (T <= 0.0)
        throw UsageError("hitting_bound: T must be > 0");
    const double xsq = x.embedding.squaredNorm();
    if (a0 * xsq < 1.0)
        throw DomainError("hitting_bound: a0 |x|^2 < 1, a0*Id was not L-free");
    return std::min(1.0, 2.0 * gaussian_tail((a0 - 1.0 / xsq) / std::sqrt(T)));
}

double k_t(const LatticeBasis& lattice, double a0, double t, double c0) {
    if (t <= 0.0)
        throw UsageError("k_t: t must be > 0");
    const int n = lattice.dim();
    const double a1 = a0 - c0 * std::sqrt(t * n);
    if (a1 <= 0.0)
        throw DomainError("k_t: a0 - c0 sqrt(tn) <= 0, region D_t is unbounded");
    SymMatrix shape = SymMatrix::identity(n);
    shape *= a1;
    double sum = 0.0;
    // points inside the 1/sqrt(a0) ball get the capped value phi(0) = 1/2
    for (const LatticePoint& p : enumerate_in_ellipsoid(lattice, shape, 1.0))
        sum += phi(std::max(0.0, a0 - 1.0 / p.embedding.squaredNorm()) / std::sqrt(t));
    return sum;
}

namespace {

// Adaptive Simpson to relative tolerance, recursing on [a, b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double whole, double tol,
                        int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol, const std::vector<double>& knees = {}) {
    std::vector<double> pts{a, b};
    for (double k : knees)
        if (k > a && k < b)
            pts.push_back(k);
    std::sort(pts.begin(), pts.end());

    // first pass for the magnitude the relative tolerance refers to
    double rough = 0.0;
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        const double lo = pts[i], hi = pts[i + 1], mid = 0.5 * (lo + hi);
        rough += (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi));
    }
    const double tol = rel_tol * std::max(std::abs(rough), 1e-300);

    double total = 0.0;
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        const double lo = pts[i], hi = pts[i + 1], mid = 0.5 * (lo + hi);
        const double flo = f(lo), fmid = f(mid), fhi = f(hi);
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += adaptive_simpson(f, lo, hi, flo, fmid, fhi, whole,
                                  tol / (pts.size() - 1), 48);
    }
    return total;
}

// where phi switches from the constant branch to the exponential one
double phi_knee() {
    double lo = 0.1, hi = 2.0;
    for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (lo + hi);
        (std::exp(-0.5 * m * m) / (std::sqrt(2.0 * M_PI) * m) > 0.5 ? lo : hi) = m;
    }
    return 0.5 * (lo + hi);
}

void check_shell_hypotheses(int n, double t, double a0, double c0) {
    if (n < 2)
        throw UsageError("shell_integral: n must be >= 2");
    if (!(t > 0.0) || t > 20.0 * std::log(static_cast<double>(n)) / (static_cast<double>(n) * n))
        throw DomainError("shell_integral: t outside (0, 20 n^-2 log n]");
    if (a0 < 1.0 || a0 > 1.0 + 10.0 / n)
        throw DomainError("shell_integral: a0 outside [1, 1 + 10/n]");
    if (c0 * std::sqrt(static_cast<double>(n)) * std::sqrt(t) / a0 >= 1.0)
        throw DomainError("shell_integral: integrand singular, y sqrt(t)/a0 reaches 1");
}

}  // namespace

double shell_integral(int n, double t, double a0, double c0) {
    check_shell_hypotheses(n, t, a0, c0);
    const double st = std::sqrt(t);
    const double upper = c0 * std::sqrt(static_cast<double>(n));
    const auto integrand = [&](double y) {
        return phi(y) / std::pow(1.0 - y * st / a0, 0.5 * (n + 2));
    };
    const double integral =
        integrate(integrand, 0.0, upper, 1e-8, {phi_knee(), 1.0});
    return 0.5 * n * st * std::pow(a0, -0.5 * (n + 2)) * integral;
}

double shell_integral_polar(int n, double t, double a0, double c0) {
    check_shell_hypotheses(n, t, a0, c0);
    const double a1 = a0 - c0 * std::sqrt(t * n);
    const double r_lo = 1.0 / std::sqrt(a0);
    const double r_hi = 1.0 / std::sqrt(a1);
    const double st = std::sqrt(t);
    const auto integrand = [&](double r) {
        return phi(std::max(a0 - 1.0 / (r * r), 0.0) / st) * std::pow(r, n - 1);
    };
    // radius where the phi argument passes its branch point
    const double knee_y = phi_knee();
    const double a_knee = a0 - knee_y * st;
    std::vector<double> knees;
    if (a_knee > 0.0)
        knees.push_back(1.0 / std::sqrt(a_knee));
    return n * integrate(integrand, r_lo, r_hi, 1e-8, knees);
}

double estimate_c0(int n, int samples, RngStream& rng) {
    if (samples < 1)
        throw UsageError("estimate_c0: need at least one sample");
    std::vector<double> ratios(samples);
    const double scale = std::sqrt(static_cast<double>(n));
    for (int i = 0; i < samples; ++i) {
        const SymMatrix w = dyson_increment(n, 1.0, rng);
        ratios[i] = op_norm(w) / scale;
    }
    std::sort(ratios.begin(), ratios.end());
    const size_t idx = static_cast<size_t>(0.99 * (samples - 1));
    return ratios[idx];
}

DensityReport density_report(const SymMatrix& a, const LatticeBasis& lattice) {
    const int n = lattice.dim();
    if (a.dim() != n)
        throw UsageError("density_report: dimension mismatch");
    if (!is_free(lattice, a, kNumericFreeTol))
        throw DomainError("density_report: A is not L-free");
    DensityReport r;
    r.n = n;
    r.final_volume_ratio = std::exp(-0.5 * log_det(a));
    const double volume = r.final_volume_ratio * vol_ball(n);
    const double pow2n = std::pow(2.0, n);
    r.packing_density = volume / (pow2n * lattice.covolume());
    r.minkowski_ratio = r.packing_density * pow2n / 2.0;
    r.n2_ratio = r.packing_density * pow2n / (static_cast<double>(n) * n);
    return r;
}

EnsembleStats ensemble_stats(const std::vector<Trajectory>& trajectories,
                             double horizon, int grid_points) {
    if (trajectories.empty())
        throw UsageError("ensemble_stats: no trajectories");
    if (grid_points < 2)
        throw UsageError("ensemble_stats: need at least two grid points");

    EnsembleStats out;
    out.t.resize(grid_points);
    out.mean_logdet.assign(grid_points, 0.0);
    out.se_logdet.assign(grid_points, 0.0);
    out.mean_contacts.assign(grid_points, 0.0);
    out.mean_dim_f.assign(grid_points, 0.0);
    for (int k = 0; k < grid_points; ++k)
        out.t[k] = horizon * k / (grid_points - 1);

    std::vector<double> sumsq_logdet(grid_points, 0.0);
    for (const Trajectory& traj : trajectories) {
        const int n = traj.n;
        // anchor at t = 0: A = a0 Id, no contacts
        TrajectoryRecord start;
        start.t = 0.0;
        start.logdet = n * std::log(traj.a0);
        start.contacts = 0;
        start.dim_f = n * (n + 1) / 2;

        size_t seg = 0;
        const auto& recs = traj.records;
        for (int k = 0; k < grid_points; ++k) {
            const double tk = out.t[k];
            while (seg < recs.size() && recs[seg].t < tk)
                ++seg;
            const TrajectoryRecord& lo = (seg == 0) ? start : recs[seg - 1];
            const TrajectoryRecord& hi = (seg < recs.size()) ? recs[seg] : recs.back();
            double w = 0.0;
            if (hi.t > lo.t)
                w = std::clamp((tk - lo.t) / (hi.t - lo.t), 0.0, 1.0);
            else if (tk >= hi.t)
                w = 1.0;
            const double logdet = lo.logdet + w * (hi.logdet - lo.logdet);
            out.mean_logdet[k] += logdet;
            sumsq_logdet[k] += logdet * logdet;
            out.mean_contacts[k] += lo.contacts + w * (hi.contacts - lo.contacts);
            out.mean_dim_f[k] += lo.dim_f + w * (hi.dim_f - lo.dim_f);
        }
    }

    const double m = static_cast<double>(trajectories.size());
    for (int k = 0; k < grid_points; ++k) {
        out.mean_logdet[k] /= m;
        out.mean_contacts[k] /= m;
        out.mean_dim_f[k] /= m;
        const double var =
            std::max(sumsq_logdet[k] / m - out.mean_logdet[k] * out.mean_logdet[k], 0.0);
        out.se_logdet[k] = std::sqrt(var / m);
    }
    return out;
}

}  // namespace evoell

#include "evoell/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace evoell {

double paper_time_horizon(int n) {
    if (n < 2)
        throw UsageError("paper_time_horizon: n must be >= 2");
    return 16.0 * std::log(static_cast<double>(n)) / (static_cast<double>(n) * n);
}

double paper_a0(int n) {
    if (n < 2)
        throw UsageError("paper_a0: n must be >= 2");
    const double q = 1.0 - 1.0 / n;
    return 1.0 / (q * q);
}

EvolveConfig EvolveConfig::resolved(int n) const {
    EvolveConfig c = *this;
    if (c.max_time <= 0.0)
        c.max_time = paper_time_horizon(n);
    if (c.dt_max <= 0.0)
        c.dt_max = paper_time_horizon(n) / 2000.0;
    if (c.dt_min <= 0.0)
        c.dt_min = c.dt_max * 1e-6;
    if (c.dt_min > c.dt_max)
        throw UsageError("EvolveConfig: dt_min > dt_max");
    if (c.eta <= 0.0)
        throw UsageError("EvolveConfig: eta must be > 0");
    if (c.eps_contact <= 0.0)
        throw UsageError("EvolveConfig: eps_contact must be > 0");
    return c;
}

Eigen::VectorXi ContactSet::canonical(Eigen::VectorXi coords) {
    for (int i = 0; i < coords.size(); ++i) {
        if (coords[i] > 0)
            break;
        if (coords[i] < 0) {
            coords = -coords;
            break;
        }
    }
    return coords;
}

bool ContactSet::contains(const Eigen::VectorXi& coords) const {
    const Eigen::VectorXi c = canonical(coords);
    return keys_.count(std::vector<int>(c.data(), c.data() + c.size())) > 0;
}

void ContactSet::add(LatticePoint p) {
    const Eigen::VectorXi c = canonical(p.coords);
    std::vector<int> key(c.data(), c.data() + c.size());
    if (!keys_.insert(std::move(key)).second)
        return;  // antipodal pair already tracked
    if (c != p.coords) {
        p.coords = c;
        p.embedding = -p.embedding;
    }
    reps_.push_back(std::move(p));
}

ConstraintProjector::ConstraintProjector(int n, Eigen::MatrixXd frame)
    : n_(n), ambient_dim_(n * (n + 1) / 2), frame_(std::move(frame)) {}

ConstraintProjector ConstraintProjector::identity(int n) {
    return ConstraintProjector(n, Eigen::MatrixXd(n * (n + 1) / 2, 0));
}

SymMatrix ConstraintProjector::apply(const SymMatrix& x) const {
    if (x.dim() != n_)
        throw UsageError("ConstraintProjector: dimension mismatch");
    if (rank() == 0)
        return x;
    const Eigen::VectorXd v = x.iso();
    return SymMatrix::from_iso(n_, v - frame_ * (frame_.transpose() * v));
}

Eigen::MatrixXd ConstraintProjector::matrix() const {
    return Eigen::MatrixXd::Identity(ambient_dim_, ambient_dim_) -
           frame_ * frame_.transpose();
}

ConstraintProjector build_projector(const ContactSet& contacts, int n) {
    const int dim = n * (n + 1) / 2;
    Eigen::MatrixXd frame(dim, contacts.size());
    int rank = 0;
    for (const LatticePoint& p : contacts.representatives()) {
        Eigen::VectorXd v = sym_tensor(p.embedding, p.embedding).iso();
        const double orig = v.norm();
        // two MGS passes keep the frame orthonormal to working precision
        for (int pass = 0; pass < 2; ++pass)
            for (int k = 0; k < rank; ++k)
                v -= frame.col(k).dot(v) * frame.col(k);
        if (v.norm() < 1e-10 * std::max(1.0, orig))
            continue;  // linearly dependent constraint
        frame.col(rank++) = v / v.norm();
    }
    return ConstraintProjector(n, frame.leftCols(rank));
}

namespace {

std::string describe_point(const LatticePoint& p, double quad) {
    std::ostringstream os;
    os << "coords (";
    for (int i = 0; i < p.coords.size(); ++i)
        os << (i ? "," : "") << p.coords[i];
    os << "), quad_form " << quad;
    return os.str();
}

std::vector<LatticePoint> build_watch_list(const LatticeBasis& lattice,
                                           const SymMatrix& a, double eta,
                                           std::int64_t cap) {
    std::vector<LatticePoint> watch;
    for (LatticePoint& p : enumerate_in_ellipsoid(lattice, a, 1.0 + eta, cap)) {
        const Eigen::VectorXi c = ContactSet::canonical(p.coords);
        if (c != p.coords)
            continue;  // keep one antipodal representative
        watch.push_back(std::move(p));
    }
    return watch;
}

void refresh_watch(ProcessState& s) {
    std::vector<LatticePoint> watch;
    try {
        watch = build_watch_list(s.lattice, s.a, s.cfg.eta, s.cfg.watch_cap);
    } catch (const ResourceError&) {
        throw ResourceError("step: watch-list refresh overflow");
    }
    s.watch = std::move(watch);
    s.a_watch_baseline = s.a;
    s.min_eig_baseline = min_eigenvalue(s.a);
}

// Any point outside the watch list has quad >= 1 + eta at the baseline, so
// it stays above (1 + eta)(1 - eta/2) > 1 as long as the total op-norm
// displacement from the baseline -- including the increment about to be
// applied -- stays within eta/2 * min_eig(baseline). Returns false if the
// pending increment alone exceeds a freshly rebuilt budget (caller must
// shrink dt).
bool ensure_watch_covers(ProcessState& s, const SymMatrix& delta) {
    SymMatrix disp = s.a;
    disp -= s.a_watch_baseline;
    const double budget = 0.5 * s.cfg.eta * s.min_eig_baseline;
    const double delta_norm = op_norm(delta);
    if (op_norm(disp) + delta_norm <= budget)
        return true;
    refresh_watch(s);
    return delta_norm <= 0.5 * s.cfg.eta * s.min_eig_baseline;
}

}  // namespace

ProcessState init_state(const LatticeBasis& lattice, const EvolveConfig& cfg,
                        RngStream rng) {
    const int n = lattice.dim();
    const EvolveConfig rc = cfg.resolved(n);

    double a0 = 0.0;
    switch (rc.a0_policy) {
        case EvolveConfig::A0Policy::Paper:
            a0 = paper_a0(n);
            break;
        case EvolveConfig::A0Policy::Auto: {
            const double l1sq = shortest_vector(lattice).embedding.squaredNorm();
            a0 = (1.0 + rc.auto_margin) / l1sq;
            break;
        }
        case EvolveConfig::A0Policy::Fixed:
            if (rc.a0_value <= 0.0)
                throw UsageError("init_state: fixed a0 must be > 0");
            a0 = rc.a0_value;
            break;
    }

    SymMatrix a = SymMatrix::identity(n);
    a *= a0;

    // strict interior check: every nonzero lattice point must lie strictly
    // outside the closed starting ellipsoid
    const auto inside = enumerate_in_ellipsoid(lattice, a, 1.0 + rc.eps_contact);
    if (!inside.empty()) {
        const LatticePoint& p = inside.front();
        throw DomainError("init_state: a0*Id is not L-free; violating point " +
                          describe_point(p, quad_form(a, p.embedding)));
    }

    ProcessState s{lattice, rc,   a0,
                   0.0,     a,    ContactSet{},
                   ConstraintProjector::identity(n),
                   build_watch_list(lattice, a, rc.eta, rc.watch_cap),
                   a,       a0,   rng};
    return s;
}

StepOutcome step(ProcessState& s, double dt_cap) {
    if (s.projector.dim_f() == 0)
        throw UsageError("step: state is frozen");

    const int n = s.lattice.dim();
    double dt = std::min(s.cfg.dt_max, dt_cap);
    dt = std::max(dt, s.cfg.dt_min);
    bool refined = false;

    for (int attempt = 0; attempt < 1000; ++attempt) {
        const SymMatrix g = dyson_increment(n, dt, s.rng);
        SymMatrix delta =
            s.cfg.alpha == 0.0
                ? s.projector.apply(g)
                : s.projector.apply(SymMatrix::from_dense(
                      matrix_power(s.a, s.cfg.alpha).dense() * g.dense()));

        // When the increment alone exhausts the watch budget (elongated
        // states with a small eigenvalue), fall back to exact detection:
        // quad is linear in the step fraction, so every crossing point ends
        // the step with quad(A + D, x) < 1 + eps and can be enumerated in
        // the endpoint ellipsoid directly.
        std::vector<LatticePoint> extra;
        if (!ensure_watch_covers(s, delta)) {
            SymMatrix a_end = s.a;
            a_end += delta;
            if (min_eigenvalue(a_end) <= 0.0) {
                if (dt <= s.cfg.dt_min * (1.0 + 1e-12))
                    throw NumericalError(
                        "step: positive-definiteness lost at dt_min (discretization failure)");
                dt = std::max(s.cfg.dt_min, 0.5 * dt);
                continue;
            }
            extra = build_watch_list(s.lattice, a_end, s.cfg.eps_contact,
                                     s.cfg.watch_cap);
        }

        // first boundary crossing within the step: quad is linear in the
        // step fraction, so lambda_x = (quad(A,x) - 1) / (-quad(D,x))
        double lambda_star = std::numeric_limits<double>::infinity();
        const auto scan = [&](const std::vector<LatticePoint>& pts) {
            for (const LatticePoint& p : pts) {
                if (s.contacts.contains(p.coords))
                    continue;
                const double q = quad_form(s.a, p.embedding);
                if (q < 1.0 - s.cfg.eps_contact)
                    throw NumericalError("step: L-freeness lost at point " +
                                         describe_point(p, q));
                const double d = quad_form(delta, p.embedding);
                if (d >= 0.0)
                    continue;
                const double lambda = (q - 1.0) / (-d);
                if (lambda <= 1.0)
                    lambda_star = std::min(lambda_star, lambda);
            }
        };
        scan(s.watch);
        scan(extra);
        const bool crossing = lambda_star <= 1.0;

        if (crossing && !refined && dt > s.cfg.dt_min) {
            // re-simulate at a step size consistent with Brownian scaling
            // of the crossing fraction (first-passage refinement)
            dt = std::max(s.cfg.dt_min, lambda_star * lambda_star * dt * 0.81);
            refined = true;
            continue;
        }

        const double frac = crossing ? std::max(lambda_star, 0.0) : 1.0;
        SymMatrix a_new = s.a;
        {
            SymMatrix scaled = delta;
            scaled *= frac;
            a_new += scaled;
        }
        if (min_eigenvalue(a_new) <= 0.0) {
            if (dt <= s.cfg.dt_min * (1.0 + 1e-12))
                throw NumericalError(
                    "step: positive-definiteness lost at dt_min (discretization failure)");
            dt = std::max(s.cfg.dt_min, 0.5 * dt);
            continue;
        }

        if (!crossing) {
            s.a = a_new;
            s.t += dt;
            return StepOutcome::Advanced;
        }

        // accept the hit: admit every watch point landing within
        // eps_contact of the boundary together with the first crosser
        s.a = a_new;
        s.t += frac * frac * dt;
        for (const std::vector<LatticePoint>* pts : {&s.watch, &extra})
            for (const LatticePoint& p : *pts) {
                if (s.contacts.contains(p.coords))
                    continue;
                if (std::abs(quad_form(s.a, p.embedding) - 1.0) <= s.cfg.eps_contact)
                    s.contacts.add(p);
            }
        s.projector = build_projector(s.contacts, n);
        renormalize_contacts(s);
        return s.projector.dim_f() == 0 ? StepOutcome::Frozen : StepOutcome::Hit;
    }
    throw NumericalError("step: no accepted step after 1000 attempts");
}

void renormalize_contacts(ProcessState& s) {
    if (s.contacts.empty())
        throw UsageError("renormalize_contacts: contact set is empty");
    const int m = s.contacts.size();
    const int dim = s.a.packed_size();
    Eigen::MatrixXd constraints(m, dim);
    Eigen::VectorXd residual(m);
    for (int i = 0; i < m; ++i) {
        const LatticePoint& p = s.contacts.representatives()[i];
        constraints.row(i) = sym_tensor(p.embedding, p.embedding).iso();
        residual[i] = 1.0 - quad_form(s.a, p.embedding);
    }
    // least-norm solution of <x (x) x, C> = 1 - quad(A, x)
    const Eigen::VectorXd corr =
        constraints.completeOrthogonalDecomposition().solve(residual);
    const double corr_norm = corr.norm();
    if (corr_norm > 10.0 * s.cfg.eps_contact * m)
        throw NumericalError("renormalize_contacts: correction norm " +
                             std::to_string(corr_norm) +
                             " exceeds bound (broken trajectory)");
    s.a += SymMatrix::from_iso(s.a.dim(), corr);
}

Trajectory run(const LatticeBasis& lattice, const EvolveConfig& cfg, RngStream rng) {
    ProcessState s = init_state(lattice, cfg, std::move(rng));
    const int n = lattice.dim();
    const SymMatrix a0_id = [&] {
        SymMatrix m = SymMatrix::identity(n);
        m *= s.a0;
        return m;
    }();

    Trajectory traj;
    traj.n = n;
    traj.a0 = s.a0;

    long steps = 0;
    while (true) {
        const double remaining = s.cfg.max_time - s.t;
        const StepOutcome outcome = step(s, remaining);
        ++steps;
        if (outcome != StepOutcome::Advanced || steps % s.cfg.renorm_period == 0)
            if (!s.contacts.empty())
                renormalize_contacts(s);

        TrajectoryRecord rec;
        rec.t = s.t;
        rec.logdet = log_det(s.a);
        rec.contacts = 2 * s.contacts.size();
        rec.dim_f = s.projector.dim_f();
        SymMatrix dev = s.a;
        dev -= a0_id;
        rec.opdev = op_norm(dev);
        rec.event = outcome == StepOutcome::Frozen  ? "frozen"
                    : outcome == StepOutcome::Hit   ? "hit"
                                                    : "advanced";
        traj.records.push_back(rec);

        if (outcome == StepOutcome::Frozen) {
            traj.frozen = true;
            const int count = 2 * s.contacts.size();
            if (count < n * (n + 1) || count > 2 * ((1 << n) - 1))
                throw NumericalError("run: frozen contact count " +
                                     std::to_string(count) + " violates bounds");
            break;
        }
        if (s.t >= s.cfg.max_time - 1e-15) {
            rec.event = "timeout";
            traj.records.push_back(rec);
            break;
        }
    }
    traj.final_state = std::move(s);
    return traj;
}

}  // namespace evoell

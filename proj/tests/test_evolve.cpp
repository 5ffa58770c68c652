#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "evoell/errors.hpp"
#include "evoell/evolve.hpp"
#include "evoell/lattice.hpp"
#include "evoell/rng.hpp"
#include "evoell/sampler.hpp"
#include "evoell/symcore.hpp"

using namespace evoell;

namespace {

LatticePoint make_point(const Eigen::VectorXi& coords, const Eigen::VectorXd& emb) {
    LatticePoint p;
    p.coords = coords;
    p.embedding = emb;
    return p;
}

Eigen::VectorXi coords2(int a, int b) {
    Eigen::VectorXi c(2);
    c << a, b;
    return c;
}

// Least-squares oracle for the projector onto the orthogonal complement of
// span{x (x) x}: I - M^T (M M^T)^+ M with M rows iso(x (x) x).
Eigen::MatrixXd lsq_projector(const std::vector<Eigen::VectorXd>& contacts, int n) {
    const int d = n * (n + 1) / 2;
    Eigen::MatrixXd m(static_cast<int>(contacts.size()), d);
    for (int i = 0; i < m.rows(); ++i)
        m.row(i) = sym_tensor(contacts[i], contacts[i]).iso().transpose();
    Eigen::MatrixXd gram = m * m.transpose();
    Eigen::MatrixXd pinv = gram.completeOrthogonalDecomposition().pseudoInverse();
    return Eigen::MatrixXd::Identity(d, d) - m.transpose() * pinv * m;
}

}  // namespace

TEST_CASE("paper-scale constants") {
    CHECK(paper_time_horizon(3) == doctest::Approx(16.0 * std::log(3.0) / 9.0).epsilon(1e-15));
    CHECK(paper_a0(2) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(paper_a0(4) == doctest::Approx(16.0 / 9.0).epsilon(1e-15));
}

TEST_CASE("contact sets canonicalize antipodes") {
    ContactSet s;
    Eigen::Vector2d e1(1.0, 0.0);
    s.add(make_point(coords2(-1, 0), -e1));
    CHECK(s.size() == 1);
    CHECK(s.contains(coords2(1, 0)));
    CHECK(s.contains(coords2(-1, 0)));
    s.add(make_point(coords2(1, 0), e1));
    CHECK(s.size() == 1);
    s.add(make_point(coords2(0, 1), Eigen::Vector2d(0.0, 1.0)));
    CHECK(s.size() == 2);
    // Canonical representative flips the first nonzero coordinate positive.
    CHECK(ContactSet::canonical(coords2(0, -2)) == coords2(0, 2));
    CHECK(s.representatives()[0].coords == coords2(1, 0));
}

TEST_CASE("projector hand examples") {
    ContactSet empty;
    ConstraintProjector id = build_projector(empty, 3);
    CHECK(id.rank() == 0);
    CHECK(id.dim_f() == 6);
    SymMatrix w = sym_tensor(Eigen::Vector3d(1, 2, -1), Eigen::Vector3d(0, 1, 3));
    CHECK(frob_norm(id.apply(w) - w) < 1e-15);

    // Single contact e1 in n = 2: kills the (1,1) coefficient only.
    ContactSet one;
    one.add(make_point(coords2(1, 0), Eigen::Vector2d(1.0, 0.0)));
    ConstraintProjector p1 = build_projector(one, 2);
    CHECK(p1.rank() == 1);
    CHECK(p1.dim_f() == 2);
    SymMatrix a = SymMatrix::identity(2);
    SymMatrix pa = p1.apply(a);
    CHECK(pa(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(pa(1, 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pa(0, 1) == doctest::Approx(0.0).epsilon(1e-15));

    // e1, e2, (1,1)/sqrt(2) span all of Sym(2): F is trivial.
    ContactSet three = one;
    three.add(make_point(coords2(0, 1), Eigen::Vector2d(0.0, 1.0)));
    three.add(make_point(coords2(1, 1), Eigen::Vector2d(1.0, 1.0) / std::numbers::sqrt2));
    ConstraintProjector p3 = build_projector(three, 2);
    CHECK(p3.dim_f() == 0);
    CHECK(frob_norm(p3.apply(w = sym_tensor(Eigen::Vector2d(0.3, -0.7),
                                            Eigen::Vector2d(0.3, -0.7)))) < 1e-14);
}

TEST_CASE("projector invariants and least-squares oracle") {
    RngStream rng(42, 3);
    for (int rep = 0; rep < 100; ++rep) {
        int n = 2 + static_cast<int>(rng.uniform_below(3));
        int d = n * (n + 1) / 2;
        int m = 1 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(d + 2)));
        ContactSet contacts;
        std::vector<Eigen::VectorXd> dirs;
        for (int i = 0; i < m; ++i) {
            Eigen::VectorXd x(n);
            Eigen::VectorXi c(n);
            if (i > 0 && rng.uniform01() < 0.25) {
                // Repeat an earlier direction to exercise rank deficiency.
                x = dirs[rng.uniform_below(dirs.size())];
                c.setConstant(1000 + i);
            } else {
                for (int j = 0; j < n; ++j) x(j) = rng.gaussian();
                x.normalize();
                for (int j = 0; j < n; ++j) c(j) = static_cast<int>(rng.uniform_below(9)) - 4;
                c(0) = i + 1;  // keep coordinate keys distinct
            }
            dirs.push_back(x);
            contacts.add(make_point(c, x));
        }
        ConstraintProjector proj = build_projector(contacts, n);
        Eigen::MatrixXd pm = proj.matrix();
        Eigen::MatrixXd oracle = lsq_projector(dirs, n);
        CHECK((pm - oracle).norm() < 1e-10);
        CHECK((pm * pm - pm).norm() < 1e-12);          // idempotent
        CHECK((pm - pm.transpose()).norm() < 1e-13);   // self-adjoint
        for (const auto& x : dirs) {
            SymMatrix xx = sym_tensor(x, x);
            CHECK(frob_norm(proj.apply(xx)) < 1e-12);  // annihilates constraints
        }
        // The frame matches apply() on a random input.
        SymMatrix g = dyson_increment(n, 1.0, rng);
        CHECK((proj.apply(g).iso() - pm * g.iso()).norm() < 1e-12);
    }
}

TEST_CASE("initialization and interior validation") {
    LatticeBasis z2 = normalize_covolume(named_lattice(NamedLattice::Zn, 2), vol_ball(2));
    EvolveConfig cfg;  // paper a0 = 4
    ProcessState s = init_state(z2, cfg, RngStream(1, 0));
    CHECK(s.a0 == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(s.t == 0.0);
    CHECK(frob_norm(s.a - 4.0 * SymMatrix::identity(2)) < 1e-14);
    CHECK(s.contacts.empty());
    CHECK(s.projector.dim_f() == 3);

    LatticeBasis z3 = normalize_covolume(named_lattice(NamedLattice::Zn, 3), vol_ball(3));
    ProcessState s3 = init_state(z3, EvolveConfig{}, RngStream(1, 1));
    CHECK(s3.projector.dim_f() == 6);

    // Auto policy puts the shortest vectors just outside the boundary.
    EvolveConfig auto_cfg;
    auto_cfg.a0_policy = EvolveConfig::A0Policy::Auto;
    ProcessState sa = init_state(z2, auto_cfg, RngStream(1, 2));
    double l1sq = shortest_vector(z2).embedding.squaredNorm();
    CHECK(sa.a0 == doctest::Approx(1.01 / l1sq).epsilon(1e-14));

    // A lattice point on/inside the initial boundary is rejected, and the
    // offending point is named in the message.
    LatticeBasis half = normalize_covolume(named_lattice(NamedLattice::Zn, 2), 0.25);
    EvolveConfig bad;
    bad.a0_policy = EvolveConfig::A0Policy::Fixed;
    bad.a0_value = 4.0;
    CHECK_THROWS_WITH_AS(init_state(half, bad, RngStream(1, 3)),
                         doctest::Contains("not L-free; violating point"), DomainError);

    // Auto a0 starts strictly L-free by construction; the watch list sees
    // the shortest vectors immediately.
    CHECK(!sa.watch.empty());
}

TEST_CASE("config resolution fills paper-scale defaults") {
    EvolveConfig cfg;
    EvolveConfig r = cfg.resolved(4);
    double T = paper_time_horizon(4);
    CHECK(r.max_time == doctest::Approx(T).epsilon(1e-15));
    CHECK(r.dt_max == doctest::Approx(T / 2000.0).epsilon(1e-15));
    CHECK(r.dt_min == doctest::Approx(r.dt_max * 1e-6).epsilon(1e-12));
    cfg.dt_max = 0.25;
    cfg.max_time = 3.0;
    r = cfg.resolved(4);
    CHECK(r.dt_max == 0.25);
    CHECK(r.max_time == 3.0);
}

TEST_CASE("crossing fraction arithmetic on a hand example") {
    // A = Id, increment D = -0.5 e1 (x) e1, x = (1.2, 0):
    // quad(A + lambda D, x) = 1.44 - 0.72 lambda = 1 at lambda = 11/18.
    SymMatrix a = SymMatrix::identity(2);
    SymMatrix d = -0.5 * sym_tensor(Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 0));
    Eigen::Vector2d x(1.2, 0.0);
    double q = quad_form(a, x);
    double dq = quad_form(d, x);
    CHECK(q == doctest::Approx(1.44).epsilon(1e-15));
    CHECK(dq == doctest::Approx(-0.72).epsilon(1e-15));
    double lambda = (q - 1.0) / (-dq);
    CHECK(lambda == doctest::Approx(11.0 / 18.0).epsilon(1e-14));
    CHECK(quad_form(a + lambda * d, x) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("renormalization restores contacts by the minimal correction") {
    LatticeBasis z2 = normalize_covolume(named_lattice(NamedLattice::Zn, 2), vol_ball(2));
    EvolveConfig cfg;
    cfg.a0_policy = EvolveConfig::A0Policy::Fixed;
    cfg.a0_value = 4.0;
    ProcessState s = init_state(z2, cfg, RngStream(8, 0));

    // Install a single artificial contact at e1 with quad = 1 + delta; the
    // least-norm correction is exactly -delta e1 (x) e1.
    const double delta = 1e-10;
    Eigen::Vector2d e1(1.0, 0.0);
    s.a = SymMatrix::identity(2) + delta * sym_tensor(e1, e1);
    s.contacts.add(make_point(coords2(1, 0), e1));
    renormalize_contacts(s);
    CHECK(quad_form(s.a, e1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.a(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.a(1, 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(s.a(0, 1)) < 1e-15);

    // Already exact: the correction is a no-op.
    SymMatrix before = s.a;
    renormalize_contacts(s);
    CHECK(frob_norm(s.a - before) < 1e-15);

    // A violation beyond the admissible bound is an error, not a silent fix.
    s.a = SymMatrix::identity(2) + 1e-3 * sym_tensor(e1, e1);
    CHECK_THROWS_AS(renormalize_contacts(s), NumericalError);
}

TEST_CASE("runs are bit-reproducible for a fixed seed") {
    LatticeBasis z3 = normalize_covolume(named_lattice(NamedLattice::Zn, 3), vol_ball(3));
    EvolveConfig cfg;
    cfg.a0_policy = EvolveConfig::A0Policy::Auto;
    cfg.max_time = 0.4;
    Trajectory t1 = run(z3, cfg, RngStream(777, 5));
    Trajectory t2 = run(z3, cfg, RngStream(777, 5));
    REQUIRE(t1.records.size() == t2.records.size());
    for (size_t i = 0; i < t1.records.size(); ++i) {
        CHECK(t1.records[i].t == t2.records[i].t);
        CHECK(t1.records[i].logdet == t2.records[i].logdet);
        CHECK(t1.records[i].contacts == t2.records[i].contacts);
        CHECK(t1.records[i].event == t2.records[i].event);
    }
    Trajectory t3 = run(z3, cfg, RngStream(778, 5));
    bool differs = t3.records.size() != t1.records.size() ||
                   t3.records.back().logdet != t1.records.back().logdet;
    CHECK(differs);
}

TEST_CASE("planar runs freeze at exactly six contacts") {
    LatticeBasis z2 = normalize_covolume(named_lattice(NamedLattice::Zn, 2), vol_ball(2));
    EvolveConfig cfg;
    cfg.a0_policy = EvolveConfig::A0Policy::Auto;
    cfg.max_time = 40.0;
    for (std::uint64_t i = 0; i < 5; ++i) {
        Trajectory traj = run(z2, cfg, RngStream(31415, i));
        REQUIRE(traj.frozen);
        CHECK(traj.records.back().event == "frozen");
        CHECK(traj.records.back().contacts == 6);
        CHECK(traj.records.back().dim_f == 0);
        REQUIRE(traj.final_state.has_value());
        const ProcessState& fs = *traj.final_state;
        CHECK(fs.contacts.size() == 3);
        for (const auto& c : fs.contacts.representatives())
            CHECK(quad_form(fs.a, c.embedding) == doctest::Approx(1.0).epsilon(1e-12));
        // No lattice point may sit inside the final ellipsoid.
        CHECK(is_free(z2, fs.a, kNumericFreeTol));
    }
}

TEST_CASE("trajectory records are monotone in contacts and dim F") {
    LatticeBasis z3 = normalize_covolume(named_lattice(NamedLattice::Zn, 3), vol_ball(3));
    EvolveConfig cfg;
    cfg.a0_policy = EvolveConfig::A0Policy::Auto;
    cfg.max_time = 60.0;
    Trajectory traj = run(z3, cfg, RngStream(2718, 0));
    REQUIRE(traj.frozen);
    int last_contacts = 0;
    int last_dim = 6;
    double last_t = -1.0;
    for (const auto& rec : traj.records) {
        CHECK(rec.t >= last_t);
        CHECK(rec.contacts >= last_contacts);
        CHECK(rec.dim_f <= last_dim);
        CHECK(rec.contacts % 2 == 0);
        last_t = rec.t;
        last_contacts = rec.contacts;
        last_dim = rec.dim_f;
    }
    CHECK(last_contacts >= 3 * 4);
    CHECK(last_contacts <= 2 * (8 - 1));
    CHECK(traj.records.front().event == "advanced");
    CHECK(traj.records.back().event == "frozen");
}

TEST_CASE("contacts stay pinned while stepping") {
    LatticeBasis z3 = normalize_covolume(named_lattice(NamedLattice::Zn, 3), vol_ball(3));
    EvolveConfig cfg;
    cfg.a0_policy = EvolveConfig::A0Policy::Auto;
    ProcessState s = init_state(z3, cfg, RngStream(11, 4));
    int hits = 0;
    for (int i = 0; i < 4000 && s.projector.dim_f() > 0; ++i) {
        StepOutcome out = step(s);
        if (out != StepOutcome::Advanced) ++hits;
        for (const auto& c : s.contacts.representatives())
            CHECK(std::abs(quad_form(s.a, c.embedding) - 1.0) < 1e-7);
        if (out != StepOutcome::Advanced) renormalize_contacts(s);
    }
    CHECK(hits >= 1);
    CHECK(is_positive_definite(s.a));
}

TEST_CASE("unconstrained increments are centered over an ensemble") {
    // Before any contact forms the projected increment is the raw GOE
    // increment, so a one-step ensemble mean of <A_dt - a0 Id, E> is a
    // zero-mean statistic with variance dt |E|^2 / N.
    LatticeBasis z3 = normalize_covolume(named_lattice(NamedLattice::Zn, 3), vol_ball(3));
    EvolveConfig cfg;  // paper a0 = 2.25: no early contacts
    const int reps = 4000;
    const double dt = paper_time_horizon(3) / 2000.0;
    SymMatrix e = SymMatrix::identity(3);
    e *= 1.0 / std::sqrt(3.0);
    double sum = 0.0;
    for (int i = 0; i < reps; ++i) {
        ProcessState s = init_state(z3, cfg, RngStream(5150, static_cast<std::uint64_t>(i)));
        step(s);
        sum += inner(s.a - s.a0 * SymMatrix::identity(3), e);
    }
    double mean = sum / reps;
    double se = std::sqrt(dt / reps);
    CHECK(std::abs(mean) <= 4.0 * se);
}

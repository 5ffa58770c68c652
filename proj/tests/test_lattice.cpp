#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <set>
#include <vector>

#include "doctest.h"
#include "evoell/lattice.hpp"
#include "evoell/rng.hpp"

using namespace evoell;

namespace {

// Independent brute-force oracle: integer box from the dual-basis
// coefficient bound |y_i|^2 <= bound * (G^-1)_ii, then direct testing.
std::set<std::vector<int>> brute_force_points(const LatticeBasis& lattice,
                                              const SymMatrix& a, double bound) {
    const int n = lattice.dim();
    const Eigen::MatrixXd gram =
        lattice.rows() * a.dense() * lattice.rows().transpose();
    const Eigen::MatrixXd ginv = gram.inverse();
    std::vector<int> radius(n);
    for (int i = 0; i < n; ++i)
        radius[i] = static_cast<int>(std::floor(std::sqrt(bound * ginv(i, i)) + 1e-9));

    std::set<std::vector<int>> out;
    std::vector<int> coords(n, 0);
    const std::function<void(int)> rec = [&](int level) {
        if (level == n) {
            Eigen::VectorXi c(n);
            for (int i = 0; i < n; ++i)
                c[i] = coords[i];
            if (c.isZero())
                return;
            if (quad_form(a, lattice.embed(c)) < bound)
                out.insert(coords);
            return;
        }
        for (int v = -radius[level]; v <= radius[level]; ++v) {
            coords[level] = v;
            rec(level + 1);
        }
    };
    rec(0);
    return out;
}

std::set<std::vector<int>> to_coord_set(const std::vector<LatticePoint>& pts) {
    std::set<std::vector<int>> out;
    for (const LatticePoint& p : pts)
        out.insert(std::vector<int>(p.coords.data(), p.coords.data() + p.coords.size()));
    return out;
}

LatticeBasis random_basis(int n, RngStream& rng, double span = 5.0) {
    while (true) {
        Eigen::MatrixXd b(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                b(i, j) = std::round(rng.uniform(-span, span));
        if (std::abs(b.determinant()) > 0.5)
            return LatticeBasis(b);
    }
}

}  // namespace

TEST_CASE("enumerate_in_ellipsoid on Z^n") {
    // disk of radius 2.5 around the integer lattice
    SymMatrix disk = SymMatrix::identity(2);
    disk *= 1.0 / 6.25;
    const auto pts = enumerate_in_ellipsoid(named_lattice(NamedLattice::Zn, 2), disk, 1.0);
    CHECK(pts.size() == 20);

    // sorted by form value, antipodes both present
    for (size_t i = 1; i < pts.size(); ++i)
        CHECK(quad_form(disk, pts[i - 1].embedding) <=
              quad_form(disk, pts[i].embedding) + 1e-15);
    const auto coords = to_coord_set(pts);
    for (const LatticePoint& p : pts) {
        const Eigen::VectorXi neg = -p.coords;
        CHECK(coords.count(std::vector<int>(neg.data(), neg.data() + neg.size())) == 1);
    }

    // radius 0.9 misses every nonzero integer point
    for (int n : {2, 3, 5}) {
        SymMatrix small = SymMatrix::identity(n);
        small *= 1.0 / 0.81;
        CHECK(enumerate_in_ellipsoid(named_lattice(NamedLattice::Zn, n), small, 1.0).empty());
    }

    SymMatrix indef(2);
    indef.at(0, 0) = 1.0;
    indef.at(1, 1) = -1.0;
    CHECK_THROWS_AS(enumerate_in_ellipsoid(named_lattice(NamedLattice::Zn, 2), indef, 1.0),
                    DomainError);
    CHECK_THROWS_AS(
        enumerate_in_ellipsoid(named_lattice(NamedLattice::Zn, 2), disk, 1.0, 3),
        ResourceError);
}

TEST_CASE("enumeration equals brute force on random bases") {
    RngStream rng(4242);
    for (int trial = 0; trial < 100; ++trial) {
        const LatticeBasis lat = random_basis(3, rng);
        SymMatrix a = SymMatrix::identity(3);
        a *= 1.0 / rng.uniform(4.0, 30.0);
        const double bound = 1.0;
        const auto fp = enumerate_in_ellipsoid(lat, a, bound);
        const auto oracle = brute_force_points(lat, a, bound);
        CHECK(to_coord_set(fp) == oracle);
    }
}

TEST_CASE("shortest_vector, is_free, contact_points") {
    for (int n : {2, 3, 4}) {
        const LatticePoint sv = shortest_vector(named_lattice(NamedLattice::Zn, n));
        CHECK(sv.embedding.norm() == doctest::Approx(1.0));
    }

    SymMatrix quarter = SymMatrix::identity(2);
    quarter *= 0.25;
    CHECK(!is_free(named_lattice(NamedLattice::Zn, 2), quarter, 0.0));
    CHECK(is_free(named_lattice(NamedLattice::Zn, 2), SymMatrix::identity(2), 0.0));

    const auto contacts =
        contact_points(named_lattice(NamedLattice::Zn, 2), SymMatrix::identity(2), 1e-12);
    CHECK(contacts.size() == 4);  // +-e1, +-e2; within the cap 2*(2^2-1) = 6
    CHECK(contacts.size() <= 2 * ((1 << 2) - 1));
}

TEST_CASE("lll_reduce") {
    Eigen::MatrixXd skew(2, 2);
    skew << 1.0, 0.0, 1000.0, 1.0;
    const LatticeBasis reduced = lll_reduce(LatticeBasis(skew));
    CHECK(reduced.covolume() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(reduced.rows().rowwise().norm().minCoeff() == doctest::Approx(1.0));
    // generates Z^2: both unit vectors are lattice points
    CHECK(shortest_vector(reduced).embedding.norm() == doctest::Approx(1.0));

    // identity is already reduced: rows stay unit vectors
    const LatticeBasis id_reduced = lll_reduce(named_lattice(NamedLattice::Zn, 3));
    for (int i = 0; i < 3; ++i)
        CHECK(id_reduced.rows().row(i).norm() == doctest::Approx(1.0));

    RngStream rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const LatticeBasis lat = random_basis(4, rng);
        const LatticeBasis red = lll_reduce(lat);
        CHECK(red.covolume() == doctest::Approx(lat.covolume()).epsilon(1e-10));
        // change of basis must be integer with determinant +-1
        const Eigen::MatrixXd u = red.rows() * lat.rows().inverse();
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                CHECK(std::abs(u(i, j) - std::round(u(i, j))) <= 1e-6);
        CHECK(std::abs(std::abs(u.determinant()) - 1.0) <= 1e-6);

        // reduction preserves enumeration results exactly
        SymMatrix a = SymMatrix::identity(4);
        a *= 1.0 / 9.0;
        auto embed_set = [&](const std::vector<LatticePoint>& pts) {
            std::set<std::vector<long>> s;
            for (const auto& p : pts) {
                std::vector<long> key;
                for (int i = 0; i < p.embedding.size(); ++i)
                    key.push_back(std::lround(p.embedding[i] * 1024.0));
                s.insert(key);
            }
            return s;
        };
        CHECK(embed_set(enumerate_in_ellipsoid(lat, a, 1.0)) ==
              embed_set(enumerate_in_ellipsoid(red, a, 1.0)));
    }
}

TEST_CASE("named lattices and normalization") {
    const LatticeBasis d4 = named_lattice(NamedLattice::Dn, 4);
    CHECK(d4.covolume() == doctest::Approx(2.0));
    CHECK(shortest_vector(d4).embedding.norm() == doctest::Approx(std::sqrt(2.0)));

    const LatticeBasis e8 = named_lattice(NamedLattice::E8, 8);
    CHECK(e8.covolume() == doctest::Approx(1.0));
    CHECK(shortest_vector(e8).embedding.norm() == doctest::Approx(std::sqrt(2.0)));

    CHECK_THROWS_AS(named_lattice(NamedLattice::E8, 7), UsageError);
    CHECK_THROWS_AS(named_lattice(NamedLattice::Dn, 2), UsageError);

    const LatticeBasis z2pi = normalize_covolume(named_lattice(NamedLattice::Zn, 2), M_PI);
    CHECK(z2pi.covolume() == doctest::Approx(M_PI).epsilon(1e-10));
    CHECK(z2pi.rows()(0, 0) == doctest::Approx(std::sqrt(M_PI)));
    CHECK(z2pi.rows()(1, 1) == doctest::Approx(std::sqrt(M_PI)));
}

TEST_CASE("basis file round trip") {
    RngStream rng(11);
    const LatticeBasis lat = normalize_covolume(random_basis(3, rng), 4.18879);
    const std::string path =
        (std::filesystem::temp_directory_path() / "evoell_basis_test.txt").string();
    write_basis_file(path, lat);
    const LatticeBasis back = read_basis_file(path);
    CHECK((back.rows() - lat.rows()).cwiseAbs().maxCoeff() == 0.0);  // bit-faithful

    SymMatrix a = SymMatrix::identity(3);
    a *= 0.2;
    CHECK(to_coord_set(enumerate_in_ellipsoid(lat, a, 1.0)) ==
          to_coord_set(enumerate_in_ellipsoid(back, a, 1.0)));
    std::filesystem::remove(path);

    CHECK_THROWS_AS(read_basis_file("/nonexistent/evoell.txt"), UsageError);
}

TEST_CASE("contact bound for free ellipsoids") {
    RngStream rng(5150);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_below(3));
        const LatticeBasis lat = random_basis(n, rng, 3.0);
        // shrink the unit form until it is L-free
        const double l1sq = shortest_vector(lat).embedding.squaredNorm();
        SymMatrix a = SymMatrix::identity(n);
        a *= (1.0 + 1e-10) / l1sq;  // boundary just outside the shortest vectors
        CHECK(is_free(lat, a, 0.0));
        const auto contacts = contact_points(lat, a, 1e-9);
        CHECK(static_cast<int>(contacts.size()) <= 2 * ((1 << n) - 1));
    }
}

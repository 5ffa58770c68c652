#include "evoell/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace evoell {

namespace {

bool lex_less(const Eigen::VectorXi& a, const Eigen::VectorXi& b) {
    for (int i = 0; i < a.size(); ++i)
        if (a[i] != b[i])
            return a[i] < b[i];
    return false;
}

}  // namespace

LatticeBasis::LatticeBasis(Eigen::MatrixXd basis_rows) : rows_(std::move(basis_rows)) {
    if (rows_.rows() != rows_.cols() || rows_.rows() < 1)
        throw UsageError("LatticeBasis: basis must be a square matrix");
    n_ = static_cast<int>(rows_.rows());
    const double det = rows_.determinant();
    covolume_ = std::abs(det);
    const double scale = rows_.cwiseAbs().maxCoeff();
    if (!(covolume_ > 1e-12 * std::pow(std::max(scale, 1e-300), n_)))
        throw DomainError("LatticeBasis: basis is rank-deficient");
}

Eigen::VectorXd LatticeBasis::embed(const Eigen::VectorXi& coords) const {
    if (coords.size() != n_)
        throw UsageError("embed: dimension mismatch");
    return rows_.transpose() * coords.cast<double>();
}

namespace {

struct Enumerator {
    const LatticeBasis& lattice;
    const SymMatrix& a;
    double bound;
    std::int64_t cap;
    Eigen::MatrixXd r;  // upper-triangular Cholesky factor of B A B^T
    Eigen::VectorXi coords;
    std::vector<LatticePoint> out;

    void search(int level, double used) {
        const int n = lattice.dim();
        // center of the level interval given the fixed higher coordinates
        double shift = 0.0;
        for (int j = level + 1; j < n; ++j)
            shift += r(level, j) * coords[j];
        const double center = -shift / r(level, level);
        const double width =
            std::sqrt(std::max(bound - used, 0.0)) / r(level, level) + 1e-9;
        const long lo = static_cast<long>(std::ceil(center - width));
        const long hi = static_cast<long>(std::floor(center + width));
        for (long v = lo; v <= hi; ++v) {
            coords[level] = static_cast<int>(v);
            const double term = r(level, level) * (v - center);
            const double used_here = used + term * term;
            if (level > 0) {
                search(level - 1, used_here);
            } else {
                if (coords.isZero())
                    continue;
                LatticePoint p;
                p.coords = coords;
                p.embedding = lattice.embed(coords);
                // final membership test on the quadratic form itself, so
                // borderline points are classified identically to callers
                if (quad_form(a, p.embedding) < bound) {
                    if (static_cast<std::int64_t>(out.size()) >= cap)
                        throw ResourceError("enumerate_in_ellipsoid: result cap exceeded");
                    out.push_back(std::move(p));
                }
            }
        }
    }
};

// Unimodular change of basis V with reduced = V * original; coords map
// back through V^T exactly in integer arithmetic.
Eigen::MatrixXi change_of_basis(const LatticeBasis& from, const LatticeBasis& to) {
    const Eigen::MatrixXd v_real =
        to.rows() * from.rows().inverse();
    Eigen::MatrixXi v(from.dim(), from.dim());
    for (int i = 0; i < from.dim(); ++i)
        for (int j = 0; j < from.dim(); ++j) {
            const double r = std::round(v_real(i, j));
            if (std::abs(v_real(i, j) - r) > 1e-6)
                throw NumericalError("change_of_basis: non-integer transition matrix");
            v(i, j) = static_cast<int>(r);
        }
    return v;
}

}  // namespace

std::vector<LatticePoint> enumerate_in_ellipsoid(const LatticeBasis& lattice,
                                                 const SymMatrix& a, double bound,
                                                 std::int64_t cap) {
    if (bound <= 0.0)
        throw UsageError("enumerate_in_ellipsoid: bound must be > 0");
    if (a.dim() != lattice.dim())
        throw UsageError("enumerate_in_ellipsoid: dimension mismatch");

    // LLL-reduce first so the Fincke-Pohst intervals stay tight on skew bases.
    const LatticeBasis reduced = lattice.dim() > 1 ? lll_reduce(lattice) : lattice;
    const Eigen::MatrixXi v = change_of_basis(lattice, reduced);

    const Eigen::MatrixXd gram =
        reduced.rows() * a.dense() * reduced.rows().transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("enumerate_in_ellipsoid: form is not positive-definite",
                                  min_eigenvalue(a));

    Enumerator e{reduced, a, bound, cap,
                 Eigen::MatrixXd(llt.matrixU()),
                 Eigen::VectorXi::Zero(lattice.dim()),
                 {}};
    e.search(lattice.dim() - 1, 0.0);

    for (LatticePoint& p : e.out)
        p.coords = (v.transpose() * p.coords).eval();

    std::sort(e.out.begin(), e.out.end(), [&](const LatticePoint& p, const LatticePoint& q) {
        const double qp = quad_form(a, p.embedding);
        const double qq = quad_form(a, q.embedding);
        if (qp != qq)
            return qp < qq;
        return lex_less(p.coords, q.coords);
    });
    return e.out;
}

LatticePoint shortest_vector(const LatticeBasis& lattice) {
    const LatticeBasis reduced = lattice.dim() > 1 ? lll_reduce(lattice) : lattice;
    double best = reduced.rows().rowwise().squaredNorm().minCoeff();
    const auto pts = enumerate_in_ellipsoid(lattice, SymMatrix::identity(lattice.dim()),
                                            best * (1.0 + 1e-9));
    if (pts.empty())
        throw NumericalError("shortest_vector: enumeration returned no points");
    return pts.front();
}

bool is_free(const LatticeBasis& lattice, const SymMatrix& a, double tol) {
    if (1.0 - tol <= 0.0)
        return true;
    return enumerate_in_ellipsoid(lattice, a, 1.0 - tol).empty();
}

std::vector<LatticePoint> contact_points(const LatticeBasis& lattice, const SymMatrix& a,
                                         double eps_contact) {
    auto pts = enumerate_in_ellipsoid(lattice, a, 1.0 + eps_contact);
    std::erase_if(pts, [&](const LatticePoint& p) {
        return std::abs(quad_form(a, p.embedding) - 1.0) > eps_contact;
    });
    return pts;
}

LatticeBasis lll_reduce(const LatticeBasis& lattice, double delta) {
    const int n = lattice.dim();
    Eigen::MatrixXd b = lattice.rows();

    Eigen::MatrixXd bstar(n, n);
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd norms(n);
    auto gram_schmidt = [&]() {
        for (int i = 0; i < n; ++i) {
            bstar.row(i) = b.row(i);
            for (int j = 0; j < i; ++j) {
                mu(i, j) = b.row(i).dot(bstar.row(j)) / norms[j];
                bstar.row(i) -= mu(i, j) * bstar.row(j);
            }
            norms[i] = bstar.row(i).squaredNorm();
            if (!(norms[i] > 0.0))
                throw DomainError("lll_reduce: basis is rank-deficient");
        }
    };
    gram_schmidt();

    int k = 1;
    while (k < n) {
        for (int j = k - 1; j >= 0; --j) {
            const double q = std::round(mu(k, j));
            if (q != 0.0) {
                b.row(k) -= q * b.row(j);
                gram_schmidt();
            }
        }
        if (norms[k] >= (delta - mu(k, k - 1) * mu(k, k - 1)) * norms[k - 1]) {
            ++k;
        } else {
            b.row(k).swap(b.row(k - 1));
            gram_schmidt();
            k = std::max(k - 1, 1);
        }
    }
    return LatticeBasis(b);
}

LatticeBasis named_lattice(NamedLattice kind, int n) {
    switch (kind) {
        case NamedLattice::Zn:
            if (n < 1)
                throw UsageError("named_lattice: Zn requires n >= 1");
            return LatticeBasis(Eigen::MatrixXd::Identity(n, n));
        case NamedLattice::Dn: {
            if (n < 3)
                throw UsageError("named_lattice: Dn requires n >= 3");
            Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
            b(0, 0) = -1.0;
            b(0, 1) = -1.0;
            for (int i = 1; i < n; ++i) {
                b(i, i - 1) = 1.0;
                b(i, i) = -1.0;
            }
            return LatticeBasis(b);
        }
        case NamedLattice::E8: {
            if (n != 8)
                throw UsageError("named_lattice: E8 requires n = 8");
            Eigen::MatrixXd b = Eigen::MatrixXd::Zero(8, 8);
            b(0, 0) = 2.0;
            for (int i = 1; i < 7; ++i) {
                b(i, i - 1) = -1.0;
                b(i, i) = 1.0;
            }
            b.row(7).setConstant(0.5);
            return LatticeBasis(b);
        }
    }
    throw UsageError("named_lattice: unknown kind");
}

LatticeBasis normalize_covolume(const LatticeBasis& lattice, double target) {
    if (target <= 0.0)
        throw UsageError("normalize_covolume: target must be > 0");
    const double s = std::pow(target / lattice.covolume(), 1.0 / lattice.dim());
    return LatticeBasis(s * lattice.rows());
}

void write_basis_file(const std::string& path, const LatticeBasis& lattice) {
    std::ofstream os(path);
    if (!os)
        throw UsageError("write_basis_file: cannot open " + path);
    const int n = lattice.dim();
    os << "# lattice basis, one row per line\n" << n << "\n";
    char buf[64];
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", lattice.rows()(i, j));
            os << (j ? " " : "") << buf;
        }
        os << "\n";
    }
}

LatticeBasis read_basis_file(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw UsageError("read_basis_file: cannot open " + path);
    std::string line;
    auto next_data_line = [&]() -> std::string {
        while (std::getline(is, line)) {
            const auto pos = line.find_first_not_of(" \t\r");
            if (pos == std::string::npos || line[pos] == '#')
                continue;
            return line;
        }
        throw UsageError("read_basis_file: unexpected end of " + path);
    };
    int n = 0;
    {
        std::istringstream ss(next_data_line());
        if (!(ss >> n) || n < 1)
            throw UsageError("read_basis_file: bad dimension line in " + path);
    }
    Eigen::MatrixXd b(n, n);
    for (int i = 0; i < n; ++i) {
        std::istringstream ss(next_data_line());
        for (int j = 0; j < n; ++j)
            if (!(ss >> b(i, j)))
                throw UsageError("read_basis_file: bad basis row in " + path);
    }
    return LatticeBasis(b);
}

}  // namespace evoell

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evoell/symcore.hpp"

namespace evoell {

// Full-rank lattice given by basis rows; covolume is |det| of the row matrix.
class LatticeBasis {
public:
    explicit LatticeBasis(Eigen::MatrixXd basis_rows);

    int dim() const { return n_; }
    const Eigen::MatrixXd& rows() const { return rows_; }
    double covolume() const { return covolume_; }

    Eigen::VectorXd embed(const Eigen::VectorXi& coords) const;

private:
    int n_;
    Eigen::MatrixXd rows_;
    double covolume_;
};

struct LatticePoint {
    Eigen::VectorXi coords;     // coordinates in the basis
    Eigen::VectorXd embedding;  // coords . basis rows
};

inline constexpr std::int64_t kDefaultEnumerationCap = 10'000'000;

// All nonzero x in L with quad_form(A, x) < bound, each exactly once,
// sorted by quad_form value then lexicographic coords. Fincke-Pohst
// search on the Gram form B A B^T of the basis coordinates.
std::vector<LatticePoint> enumerate_in_ellipsoid(
    const LatticeBasis& lattice, const SymMatrix& a, double bound,
    std::int64_t cap = kDefaultEnumerationCap);

LatticePoint shortest_vector(const LatticeBasis& lattice);

// True iff no nonzero lattice point has quad_form(A, x) < 1 - tol.
bool is_free(const LatticeBasis& lattice, const SymMatrix& a, double tol = 0.0);

// tol for reclassification-safe freeness checks alongside a pinned contact set.
inline constexpr double kNumericFreeTol = 1e-9;

inline constexpr double kDefaultContactEps = 1e-9;

// Nonzero x with |quad_form(A, x) - 1| <= eps_contact.
std::vector<LatticePoint> contact_points(const LatticeBasis& lattice,
                                         const SymMatrix& a,
                                         double eps_contact = kDefaultContactEps);

// Same lattice, LLL-reduced basis.
LatticeBasis lll_reduce(const LatticeBasis& lattice, double delta = 0.99);

enum class NamedLattice { Zn, Dn, E8 };

LatticeBasis named_lattice(NamedLattice kind, int n);

// Uniform scaling to |det| = target.
LatticeBasis normalize_covolume(const LatticeBasis& lattice, double target);

// Plain-text basis file: line 1 = n, then n rows of n reals at 17
// significant digits; '#' lines are comments.
void write_basis_file(const std::string& path, const LatticeBasis& lattice);
LatticeBasis read_basis_file(const std::string& path);

}  // namespace evoell

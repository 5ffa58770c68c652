#pragma once

#include <Eigen/Dense>

#include "evoell/errors.hpp"
#include "evoell/rng.hpp"

namespace evoell {

// Point of the n(n+1)/2-dimensional Euclidean space of real symmetric
// n x n matrices with scalar product <A,B> = Tr[AB]. Only the upper
// triangle is stored (row-major packed), so symmetry is structural.
//
// iso() maps to coefficient vectors with off-diagonal entries scaled by
// sqrt(2); under that isometry the trace inner product is the plain dot
// product, which makes projector construction ordinary linear algebra
// in dimension n(n+1)/2.
class SymMatrix {
public:
    explicit SymMatrix(int n);
    static SymMatrix identity(int n);
    static SymMatrix from_dense(const Eigen::MatrixXd& m);
    static SymMatrix from_iso(int n, const Eigen::VectorXd& v);

    int dim() const { return n_; }
    int packed_size() const { return static_cast<int>(packed_.size()); }

    double operator()(int i, int j) const { return packed_[packed_index(i, j)]; }
    double& at(int i, int j) { return packed_[packed_index(i, j)]; }

    Eigen::MatrixXd dense() const;
    Eigen::VectorXd iso() const;

    SymMatrix& operator+=(const SymMatrix& other);
    SymMatrix& operator-=(const SymMatrix& other);
    SymMatrix& operator*=(double s);

    friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
    friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
    friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

private:
    int packed_index(int i, int j) const;

    int n_;
    Eigen::VectorXd packed_;
};

// Tr[AB].
double inner(const SymMatrix& a, const SymMatrix& b);
double frob_norm(const SymMatrix& a);

// (x (x) y + y (x) x) / 2.
SymMatrix sym_tensor(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// A x . x = <A, x (x) x>.
double quad_form(const SymMatrix& a, const Eigen::VectorXd& x);

// Increment of the standard Brownian motion in sym-matrix space over a
// time step dt: independent Gaussian upper triangle, diagonal variance
// dt, strict upper-triangle variance dt/2. This is the unique scaling
// with E<W,E>^2 = dt |E|^2 for every unit-norm direction E.
SymMatrix dyson_increment(int n, double dt, RngStream& rng);

struct SpectralDecomp {
    Eigen::VectorXd eigenvalues;   // nondecreasing
    Eigen::MatrixXd eigenvectors;  // orthonormal columns
};

SpectralDecomp spectral(const SymMatrix& a);

// Requires positive-definite input; computed from a Cholesky factorization
// with pivot threshold 1e-12 * scale(A). Throws NotPositiveDefinite
// carrying the minimum eigenvalue.
double log_det(const SymMatrix& a);

bool is_positive_definite(const SymMatrix& a);

double op_norm(const SymMatrix& a);
double min_eigenvalue(const SymMatrix& a);

// A^alpha = U diag(lambda^alpha) U^T; requires positive-definite A.
SymMatrix matrix_power(const SymMatrix& a, double alpha);

}  // namespace evoell

#include "evoell/symcore.hpp"

#include <cmath>

namespace evoell {

SymMatrix::SymMatrix(int n) : n_(n) {
    if (n < 1)
        throw UsageError("SymMatrix dimension must be >= 1");
    packed_ = Eigen::VectorXd::Zero(n * (n + 1) / 2);
}

int SymMatrix::packed_index(int i, int j) const {
    if (i > j)
        std::swap(i, j);
    return i * n_ - i * (i - 1) / 2 + (j - i);
}

SymMatrix SymMatrix::identity(int n) {
    SymMatrix a(n);
    for (int i = 0; i < n; ++i)
        a.at(i, i) = 1.0;
    return a;
}

SymMatrix SymMatrix::from_dense(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols())
        throw UsageError("from_dense: matrix is not square");
    SymMatrix a(static_cast<int>(m.rows()));
    for (int i = 0; i < a.n_; ++i)
        for (int j = i; j < a.n_; ++j)
            a.at(i, j) = 0.5 * (m(i, j) + m(j, i));
    return a;
}

SymMatrix SymMatrix::from_iso(int n, const Eigen::VectorXd& v) {
    SymMatrix a(n);
    if (v.size() != a.packed_.size())
        throw UsageError("from_iso: coefficient vector has wrong length");
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    int k = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j, ++k)
            a.at(i, j) = (i == j) ? v[k] : v[k] * inv_sqrt2;
    return a;
}

Eigen::MatrixXd SymMatrix::dense() const {
    Eigen::MatrixXd m(n_, n_);
    for (int i = 0; i < n_; ++i)
        for (int j = i; j < n_; ++j)
            m(i, j) = m(j, i) = (*this)(i, j);
    return m;
}

Eigen::VectorXd SymMatrix::iso() const {
    Eigen::VectorXd v(packed_.size());
    const double sqrt2 = std::sqrt(2.0);
    int k = 0;
    for (int i = 0; i < n_; ++i)
        for (int j = i; j < n_; ++j, ++k)
            v[k] = (i == j) ? (*this)(i, j) : sqrt2 * (*this)(i, j);
    return v;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
    if (other.n_ != n_)
        throw UsageError("SymMatrix dimension mismatch");
    packed_ += other.packed_;
    return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& other) {
    if (other.n_ != n_)
        throw UsageError("SymMatrix dimension mismatch");
    packed_ -= other.packed_;
    return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
    packed_ *= s;
    return *this;
}

double inner(const SymMatrix& a, const SymMatrix& b) {
    if (a.dim() != b.dim())
        throw UsageError("inner: dimension mismatch");
    double sum = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        sum += a(i, i) * b(i, i);
        for (int j = i + 1; j < a.dim(); ++j)
            sum += 2.0 * a(i, j) * b(i, j);
    }
    return sum;
}

double frob_norm(const SymMatrix& a) { return std::sqrt(inner(a, a)); }

SymMatrix sym_tensor(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size())
        throw UsageError("sym_tensor: dimension mismatch");
    const int n = static_cast<int>(x.size());
    SymMatrix a(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            a.at(i, j) = 0.5 * (x[i] * y[j] + y[i] * x[j]);
    return a;
}

double quad_form(const SymMatrix& a, const Eigen::VectorXd& x) {
    if (x.size() != a.dim())
        throw UsageError("quad_form: dimension mismatch");
    double sum = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        sum += a(i, i) * x[i] * x[i];
        for (int j = i + 1; j < a.dim(); ++j)
            sum += 2.0 * a(i, j) * x[i] * x[j];
    }
    return sum;
}

SymMatrix dyson_increment(int n, double dt, RngStream& rng) {
    if (dt <= 0.0)
        throw UsageError("dyson_increment: dt must be > 0");
    SymMatrix w(n);
    const double diag_sd = std::sqrt(dt);
    const double off_sd = std::sqrt(0.5 * dt);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            w.at(i, j) = ((i == j) ? diag_sd : off_sd) * rng.gaussian();
    return w;
}

SpectralDecomp spectral(const SymMatrix& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.dense());
    if (es.info() != Eigen::Success)
        throw NumericalError("spectral: eigendecomposition failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

namespace {

// Cholesky with a pivot threshold relative to the matrix scale; returns
// false when a pivot falls below it. The infinity norm bounds the
// operator norm for symmetric matrices, so the threshold scale is sound.
bool cholesky_log_det(const SymMatrix& a, double* out) {
    const Eigen::MatrixXd m = a.dense();
    const int n = a.dim();
    const double scale = std::max(m.cwiseAbs().rowwise().sum().maxCoeff(), 1e-300);
    const double pivot_floor = 1e-12 * scale;
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    double ld = 0.0;
    for (int j = 0; j < n; ++j) {
        double d = m(j, j);
        for (int k = 0; k < j; ++k)
            d -= l(j, k) * l(j, k);
        if (d <= pivot_floor)
            return false;
        l(j, j) = std::sqrt(d);
        ld += std::log(d);
        for (int i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (int k = 0; k < j; ++k)
                s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    if (out)
        *out = ld;
    return true;
}

}  // namespace

bool is_positive_definite(const SymMatrix& a) { return cholesky_log_det(a, nullptr); }

double log_det(const SymMatrix& a) {
    double ld = 0.0;
    if (!cholesky_log_det(a, &ld))
        throw NotPositiveDefinite("log_det: matrix is not positive-definite",
                                  min_eigenvalue(a));
    return ld;
}

double op_norm(const SymMatrix& a) {
    const SpectralDecomp d = spectral(a);
    return d.eigenvalues.cwiseAbs().maxCoeff();
}

double min_eigenvalue(const SymMatrix& a) { return spectral(a).eigenvalues[0]; }

SymMatrix matrix_power(const SymMatrix& a, double alpha) {
    if (alpha == 1.0)
        return a;
    if (alpha == 0.0)
        return SymMatrix::identity(a.dim());
    const SpectralDecomp d = spectral(a);
    if (d.eigenvalues[0] <= 0.0)
        throw NotPositiveDefinite("matrix_power: matrix is not positive-definite",
                                  d.eigenvalues[0]);
    Eigen::VectorXd powered = d.eigenvalues.array().pow(alpha);
    return SymMatrix::from_dense(d.eigenvectors * powered.asDiagonal() *
                                 d.eigenvectors.transpose());
}

}  // namespace evoell

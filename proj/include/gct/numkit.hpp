#pragma once

// Dense numeric kernels shared by the graph, IGL, co-training and
// propagation code. Storage is Eigen; the factorization is done here so that
// a failing pivot can be reported by index.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "gct/errors.hpp"

namespace gct {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kSymmetryTolerance = 1e-8;
inline constexpr double kPivotFloor = 1e-12;

inline void require_finite(const Matrix& m, const std::string& what) {
    if (!m.allFinite()) {
        throw ValidationError(what + " contains non-finite values");
    }
}

inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Squared Euclidean distances between the columns of `x` (dim x N).
/// The result is exactly symmetric with an exact zero diagonal.
inline Matrix pairwise_sq_dist(const Matrix& x) {
    if (x.cols() < 1) throw ValidationError("pairwise_sq_dist needs at least one column");
    require_finite(x, "feature matrix");
    const Eigen::Index n = x.cols();
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double v = (x.col(i) - x.col(j)).squaredNorm();
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

/// Euclidean norm of every row.
inline Vector row_l2_norms(const Matrix& m) {
    Vector out(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) out(i) = m.row(i).norm();
    return out;
}

inline bool is_symmetric(const Matrix& m, double tol = kSymmetryTolerance) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, max_abs(m));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = j + 1; i < m.rows(); ++i)
            if (std::abs(m(i, j) - m(j, i)) > tol * scale) return false;
    return true;
}

/// Lower Cholesky factor of a symmetric positive definite matrix. Only the
/// lower triangle of `m` is read. Throws SingularityError naming the first
/// pivot that falls below kPivotFloor.
class Cholesky {
public:
    explicit Cholesky(const Matrix& m) : l_(Matrix::Zero(m.rows(), m.cols())) {
        const Eigen::Index n = m.rows();
        for (Eigen::Index j = 0; j < n; ++j) {
            double pivot = m(j, j);
            for (Eigen::Index k = 0; k < j; ++k) pivot -= l_(j, k) * l_(j, k);
            if (!(pivot >= kPivotFloor)) throw SingularityError(static_cast<std::size_t>(j), pivot);
            const double diag = std::sqrt(pivot);
            l_(j, j) = diag;
            for (Eigen::Index i = j + 1; i < n; ++i) {
                double v = m(i, j);
                for (Eigen::Index k = 0; k < j; ++k) v -= l_(i, k) * l_(j, k);
                l_(i, j) = v / diag;
            }
        }
    }

    Matrix solve(const Matrix& rhs) const {
        Matrix z = rhs;
        l_.triangularView<Eigen::Lower>().solveInPlace(z);
        l_.transpose().triangularView<Eigen::Upper>().solveInPlace(z);
        return z;
    }

    const Matrix& factor() const { return l_; }

private:
    Matrix l_;
};

/// Solves M Z = RHS for symmetric positive definite M, with one step of
/// iterative refinement.
inline Matrix solve_spd(const Matrix& m, const Matrix& rhs) {
    if (m.rows() != m.cols()) throw ValidationError("solve_spd: system matrix is not square");
    if (rhs.rows() != m.rows()) throw ValidationError("solve_spd: right-hand side row count mismatch");
    require_finite(m, "system matrix");
    require_finite(rhs, "right-hand side");
    if (!is_symmetric(m)) throw ValidationError("solve_spd: system matrix is not symmetric");
    const Cholesky chol(m);
    Matrix z = chol.solve(rhs);
    z += chol.solve(rhs - m * z);
    return z;
}

}  // namespace gct

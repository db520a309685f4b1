#pragma once

// KNN graph encoding of a feature matrix and the normalized operators built
// from it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string_view>
#include <vector>

#include "gct/errors.hpp"
#include "gct/numkit.hpp"

namespace gct {

inline constexpr double kDegreeFloor = 1e-12;
inline constexpr std::size_t kDefaultNeighbors = 10;

struct Graph {
    Matrix adjacency;  // symmetric, entries in [0,1], zero diagonal
    Vector degrees;    // row sums of adjacency, floored at kDegreeFloor
    std::size_t k = 0; // neighbor count actually used after clamping

    Eigen::Index size() const { return adjacency.rows(); }
};

enum class LaplacianVariant {
    expanded,              // I - D^-1/2 A D^-1/2
    normalized_adjacency,  // D^-1/2 A D^-1/2, selected by "paper" on the command line
};

inline std::string to_string(LaplacianVariant v) {
    return v == LaplacianVariant::expanded ? "expanded" : "paper";
}

/// Scales every column to unit Euclidean norm. All-zero columns are kept.
inline Matrix unit_columns(const Matrix& x) {
    Matrix out = x;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double n = out.col(j).norm();
        if (n > 0.0) out.col(j) /= n;
    }
    return out;
}

/// Builds the union-symmetrized KNN graph with weights exp(-d^2) over the
/// columns of `x`. When `normalize` is set, distances are measured between
/// unit-norm copies of the columns so that d^2 <= 4.
inline Graph build_graph(const Matrix& x, std::size_t k, bool normalize = true) {
    if (x.cols() < 1) throw ValidationError("build_graph needs at least one vertex");
    require_finite(x, "feature matrix");
    const Eigen::Index n = x.cols();

    Graph g;
    g.adjacency = Matrix::Zero(n, n);
    g.k = n > 1 ? std::min<std::size_t>(std::max<std::size_t>(k, 1), static_cast<std::size_t>(n - 1)) : 0;

    const Matrix dist = pairwise_sq_dist(normalize ? unit_columns(x) : x);

    std::vector<Eigen::Index> order;
    order.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n && g.k > 0; ++i) {
        order.clear();
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) order.push_back(j);
        // Ties resolve toward the lower vertex index.
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(g.k), order.end(),
                          [&](Eigen::Index a, Eigen::Index b) {
                              return dist(i, a) < dist(i, b) || (dist(i, a) == dist(i, b) && a < b);
                          });
        for (std::size_t r = 0; r < g.k; ++r) {
            const Eigen::Index j = order[r];
            const double w = std::exp(-dist(i, j));
            g.adjacency(i, j) = w;
            g.adjacency(j, i) = w;
        }
    }

    g.degrees = g.adjacency.rowwise().sum();
    g.degrees = g.degrees.cwiseMax(kDegreeFloor);
    return g;
}

/// The normalized operator used as the graph regularizer.
inline Matrix laplacian_operator(const Graph& g, LaplacianVariant variant) {
    const Vector inv_sqrt = g.degrees.cwiseSqrt().cwiseInverse();
    Matrix s = inv_sqrt.asDiagonal() * g.adjacency * inv_sqrt.asDiagonal();
    // Restore exact symmetry lost to rounding in the two diagonal scalings.
    s = 0.5 * (s + s.transpose()).eval();
    if (variant == LaplacianVariant::normalized_adjacency) return s;
    return Matrix::Identity(g.size(), g.size()) - s;
}

}  // namespace gct

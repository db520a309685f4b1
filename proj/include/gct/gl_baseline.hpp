#pragma once

// Classic transductive label propagation: minimize
//   tr(R' L R) + beta ||R - Y||_F^2
// jointly over labeled and unlabeled vertices, i.e. solve (L + beta I) R = beta Y.
// Unlike IGL, a new vertex requires rebuilding the graph and re-solving.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gct/errors.hpp"
#include "gct/graph.hpp"
#include "gct/igl.hpp"
#include "gct/numkit.hpp"

namespace gct {

struct GlConfig {
    double beta = 1.0;
    std::size_t k = kDefaultNeighbors;
    LaplacianVariant laplacian = LaplacianVariant::expanded;
    bool normalize_features = true;

    void validate() const {
        if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be a positive finite number");
        if (k < 1) throw ValidationError("knn must be at least 1");
    }
};

struct PropagationResult {
    Matrix r;                                // N x C scores over every vertex
    std::vector<std::size_t> unlabeled;      // rows of Y_init that were all zero
    std::vector<Eigen::Index> predicted;     // argmax column per unlabeled row
};

/// Propagation with an explicit operator; rows of `y_init` that are all zero
/// are the unlabeled vertices.
inline PropagationResult gl_propagate_with(const Matrix& l, const Matrix& y_init, double beta) {
    if (l.rows() != y_init.rows()) throw ValidationError("operator and label matrix disagree in vertex count");
    Matrix system = l;
    system.diagonal().array() += beta;
    PropagationResult out;
    out.r = solve_spd(system, beta * y_init);
    for (Eigen::Index i = 0; i < y_init.rows(); ++i)
        if (y_init.row(i).isZero(0.0)) out.unlabeled.push_back(static_cast<std::size_t>(i));
    const auto best = argmax_rows(out.r);
    for (const std::size_t i : out.unlabeled) out.predicted.push_back(best[i]);
    return out;
}

/// `x_all` holds every vertex (dim x N); `y_init` is N x C with one-hot rows
/// for labeled vertices and zero rows otherwise.
inline PropagationResult gl_propagate(const Matrix& x_all, const Matrix& y_init, const GlConfig& cfg) {
    cfg.validate();
    if (y_init.rows() != x_all.cols()) throw ValidationError("label rows do not match the vertex count");
    require_finite(y_init, "initial labels");
    for (Eigen::Index c = 0; c < y_init.cols(); ++c)
        if (!(y_init.col(c).array() > 0.0).any())
            throw ValidationError("class column " + std::to_string(c) + " has no labeled vertex");
    const Matrix l = laplacian_operator(build_graph(x_all, cfg.k, cfg.normalize_features), cfg.laplacian);
    return gl_propagate_with(l, y_init, cfg.beta);
}

}  // namespace gct

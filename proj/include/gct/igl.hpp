#pragma once

// Isolated Graph Learning: a projection P (dim x C) learned from labeled
// embeddings by minimizing
//
//   tr(P' X L X' P) + lambda ||X' P - Y||_F^2 + mu ||P||_{2,1}
//
// where L is the graph regularizer over the labeled samples. The l2,1 term is
// handled by iterative reweighting: with a diagonal B the relaxed problem has
// the closed form P = lambda (X L X' + lambda X X' + mu B)^-1 X Y, and B is
// refreshed from the row norms of P.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "gct/errors.hpp"
#include "gct/graph.hpp"
#include "gct/numkit.hpp"

namespace gct {

using ClassLabel = std::int64_t;

inline constexpr double kReweightEpsilon = 1e-8;

enum class BUpdate {
    squared,    // 1 / (2 ||p_i||^2 + eps)
    unsquared,  // 1 / (2 ||p_i|| + eps), the classical l2,1 reweighting
};

inline std::string to_string(BUpdate b) { return b == BUpdate::squared ? "squared" : "unsquared"; }

struct IglConfig {
    double lambda = 0.1;
    double mu = 0.6;
    std::size_t k = kDefaultNeighbors;
    LaplacianVariant laplacian = LaplacianVariant::expanded;
    BUpdate b_update = BUpdate::squared;
    bool normalize_features = true;
    std::size_t max_iters = 50;
    double rel_tol = 1e-6;

    void validate() const {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be a positive finite number");
        if (!(mu >= 0.0) || !std::isfinite(mu)) throw ValidationError("mu must be a nonnegative finite number");
        if (k < 1) throw ValidationError("knn must be at least 1");
        if (max_iters < 1) throw ValidationError("max_iters must be at least 1");
        if (!(rel_tol > 0.0)) throw ValidationError("rel_tol must be positive");
    }
};

/// One-hot label rows over a fixed class ordering.
struct LabelMatrix {
    Matrix y;                              // N x C, rows one-hot
    std::vector<ClassLabel> class_order;   // label of each column, ascending

    Eigen::Index classes() const { return y.cols(); }

    /// Column index of `label`, or -1 when the label is not in the roster.
    Eigen::Index column_of(ClassLabel label) const {
        const auto it = std::lower_bound(class_order.begin(), class_order.end(), label);
        if (it == class_order.end() || *it != label) return -1;
        return static_cast<Eigen::Index>(it - class_order.begin());
    }

    /// Appends a one-hot row for column `c`.
    void append(Eigen::Index c) {
        y.conservativeResize(y.rows() + 1, Eigen::NoChange);
        y.row(y.rows() - 1).setZero();
        y(y.rows() - 1, c) = 1.0;
    }
};

/// One-hot matrix for `labels` with columns ordered by `roster` (sorted and
/// deduplicated here). Labels outside the roster are rejected.
inline LabelMatrix make_label_matrix(std::span<const ClassLabel> labels, std::vector<ClassLabel> roster) {
    std::sort(roster.begin(), roster.end());
    roster.erase(std::unique(roster.begin(), roster.end()), roster.end());
    LabelMatrix out;
    out.class_order = std::move(roster);
    out.y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(out.class_order.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const Eigen::Index c = out.column_of(labels[i]);
        if (c < 0) throw ValidationError("label " + std::to_string(labels[i]) + " is not in the class roster");
        out.y(static_cast<Eigen::Index>(i), c) = 1.0;
    }
    return out;
}

/// Roster taken from the labels themselves.
inline LabelMatrix make_label_matrix(std::span<const ClassLabel> labels) {
    return make_label_matrix(labels, std::vector<ClassLabel>(labels.begin(), labels.end()));
}

struct IglModel {
    Matrix p;                               // dim x C
    Vector b_diag;                          // reweighting used to produce p
    std::vector<ClassLabel> class_order;
    std::vector<double> objective_history;  // one entry per P update
    std::size_t iterations = 0;
    bool converged = false;

    Eigen::Index dim() const { return p.rows(); }
    Eigen::Index classes() const { return p.cols(); }
};

/// Graph regularizer over the columns of `x` as configured.
inline Matrix graph_regularizer(const Matrix& x, const IglConfig& cfg) {
    return laplacian_operator(build_graph(x, cfg.k, cfg.normalize_features), cfg.laplacian);
}

inline Vector update_b(const Matrix& p, BUpdate variant = BUpdate::squared) {
    require_finite(p, "projection");
    const Vector norms = row_l2_norms(p);
    Vector b(norms.size());
    for (Eigen::Index i = 0; i < norms.size(); ++i) {
        const double r = variant == BUpdate::squared ? norms(i) * norms(i) : norms(i);
        b(i) = 1.0 / (2.0 * r + kReweightEpsilon);
    }
    return b;
}

/// System matrix X L X' + lambda X X' + mu diag(B), symmetrized.
inline Matrix igl_system(const Matrix& x, const Matrix& l, const Vector& b_diag, const IglConfig& cfg) {
    Matrix m = x * l * x.transpose() + cfg.lambda * (x * x.transpose());
    m.diagonal() += cfg.mu * b_diag;
    return 0.5 * (m + m.transpose());
}

inline Matrix update_p(const Matrix& x, const LabelMatrix& y, const Matrix& l, const Vector& b_diag,
                       const IglConfig& cfg) {
    if (l.rows() != x.cols() || l.cols() != x.cols())
        throw ValidationError("graph operator size does not match the sample count");
    if (y.y.rows() != x.cols()) throw ValidationError("label rows do not match the sample count");
    if (b_diag.size() != x.rows()) throw ValidationError("reweighting length does not match the feature dimension");
    if ((b_diag.array() <= 0.0).any()) throw ValidationError("reweighting entries must be positive");
    return solve_spd(igl_system(x, l, b_diag, cfg), cfg.lambda * (x * y.y));
}

inline double l21_norm(const Matrix& p) { return row_l2_norms(p).sum(); }

inline double igl_objective(const Matrix& x, const LabelMatrix& y, const Matrix& p, const Matrix& l,
                            const IglConfig& cfg) {
    const Matrix scores = x.transpose() * p;
    const double smooth = (scores.transpose() * l * scores).trace();
    const double fit = (scores - y.y).squaredNorm();
    return smooth + cfg.lambda * fit + cfg.mu * l21_norm(p);
}

/// Alternates P and B updates from B = I until the objective's relative
/// change drops below rel_tol or max_iters P updates have run.
inline IglModel fit_igl(const Matrix& x, const LabelMatrix& y, const IglConfig& cfg) {
    cfg.validate();
    require_finite(x, "feature matrix");
    if (x.cols() < 1) throw ValidationError("fit needs at least one sample");
    if (y.y.rows() != x.cols()) throw ValidationError("label rows do not match the sample count");
    if (y.classes() < 2) throw ValidationError("at least two classes are required");
    for (Eigen::Index c = 0; c < y.classes(); ++c)
        if (y.y.col(c).sum() <= 0.0)
            throw ValidationError("class " + std::to_string(y.class_order[static_cast<std::size_t>(c)]) +
                                  " has no labeled sample");

    const Matrix l = graph_regularizer(x, cfg);
    IglModel model;
    model.class_order = y.class_order;
    model.b_diag = Vector::Ones(x.rows());

    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        if (it > 0) model.b_diag = update_b(model.p, cfg.b_update);
        model.p = update_p(x, y, l, model.b_diag, cfg);
        const double obj = igl_objective(x, y, model.p, l, cfg);
        model.iterations = it + 1;
        if (!model.objective_history.empty()) {
            const double prev = model.objective_history.back();
            model.objective_history.push_back(obj);
            if (std::abs(prev - obj) < cfg.rel_tol * std::max(std::abs(prev), 1e-300)) {
                model.converged = true;
                break;
            }
        } else {
            model.objective_history.push_back(obj);
        }
    }
    return model;
}

/// Raw scores X_ts' P, one row per column of `x_ts`.
inline Matrix predict_soft(const IglModel& model, const Matrix& x_ts) {
    if (x_ts.cols() > 0 && x_ts.rows() != model.dim())
        throw ValidationError("feature dimension " + std::to_string(x_ts.rows()) + " does not match model dimension " +
                              std::to_string(model.dim()));
    if (x_ts.cols() == 0) return Matrix(0, model.classes());
    require_finite(x_ts, "test features");
    return x_ts.transpose() * model.p;
}

/// Column of the row maximum; ties go to the lowest column.
inline std::vector<Eigen::Index> argmax_rows(const Matrix& soft) {
    std::vector<Eigen::Index> out(static_cast<std::size_t>(soft.rows()));
    for (Eigen::Index r = 0; r < soft.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < soft.cols(); ++c)
            if (soft(r, c) > soft(r, best)) best = c;
        out[static_cast<std::size_t>(r)] = best;
    }
    return out;
}

inline std::vector<ClassLabel> labels_from_scores(const Matrix& soft, std::span<const ClassLabel> class_order) {
    std::vector<ClassLabel> out;
    out.reserve(static_cast<std::size_t>(soft.rows()));
    for (const Eigen::Index c : argmax_rows(soft)) out.push_back(class_order[static_cast<std::size_t>(c)]);
    return out;
}

inline std::vector<ClassLabel> predict(const IglModel& model, const Matrix& x_ts) {
    return labels_from_scores(predict_soft(model, x_ts), model.class_order);
}

}  // namespace gct

#pragma once

// Graph co-training over two feature views. Each round fits one IGL
// classifier per view on its current support, scores the shared pool, picks
// each view's single most confident (sample, class) entry and hands it, with
// a one-hot pseudo label, to the *other* view's support. Query labels come
// from the mean of both views' scores.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gct/episodes.hpp"
#include "gct/errors.hpp"
#include "gct/igl.hpp"
#include "gct/numkit.hpp"

namespace gct {

enum class Confidence {
    raw,          // the linear scores as they are
    row_softmax,  // softmax over each pool row
};

struct CotrainConfig {
    IglConfig igl;
    Confidence confidence = Confidence::raw;
    std::size_t per_class_cap = 0;  // max pseudo labels per class and view; 0 = unlimited
};

struct Selection {
    std::size_t row = 0;
    Eigen::Index column = 0;
    double score = 0.0;
};

/// Largest entry over the eligible rows of `soft`; ties go to the lower row,
/// then the lower column. Returns nullopt when nothing is eligible. Entries
/// equal to -infinity are treated as masked out.
inline std::optional<Selection> select_most_confident(const Matrix& soft, std::span<const std::size_t> eligible) {
    std::optional<Selection> best;
    for (const std::size_t r : eligible) {
        if (r >= static_cast<std::size_t>(soft.rows())) throw ValidationError("eligible row out of range");
        for (Eigen::Index c = 0; c < soft.cols(); ++c) {
            const double v = soft(static_cast<Eigen::Index>(r), c);
            if (v == -std::numeric_limits<double>::infinity()) continue;
            const bool better = !best || v > best->score ||
                                (v == best->score && (r < best->row || (r == best->row && c < best->column)));
            if (better) best = Selection{r, c, v};
        }
    }
    return best;
}

inline std::optional<Selection> select_most_confident(const Matrix& soft) {
    std::vector<std::size_t> all(static_cast<std::size_t>(soft.rows()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return select_most_confident(soft, all);
}

inline Matrix row_softmax(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double top = m.row(r).maxCoeff();
        out.row(r) = (m.row(r).array() - top).exp();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

struct SelectionRecord {
    std::size_t round = 0;
    int modality = 0;          // view that made the selection
    std::size_t sample = 0;    // position in the MultiModalSet
    ClassLabel assigned = 0;
    double score = 0.0;

    bool operator==(const SelectionRecord&) const = default;
};

struct ViewState {
    Matrix features;                  // dim x (support rows)
    std::vector<std::size_t> samples; // MultiModalSet position of each column
    LabelMatrix labels;
    std::optional<IglModel> model;
};

struct CoTrainState {
    ViewState views[2];
    std::vector<std::size_t> pool;  // shared; selected samples leave for both views
    std::size_t initial_pool = 0;
    std::size_t round = 0;
    std::vector<SelectionRecord> log;
};

inline CoTrainState init_cotrain(const MultiModalSet& data, const Episode& ep, std::vector<std::size_t> pool) {
    std::vector<ClassLabel> support_labels;
    support_labels.reserve(ep.support.size());
    for (const std::size_t s : ep.support) support_labels.push_back(data.labels()[s]);

    CoTrainState st;
    for (int m = 0; m < 2; ++m) {
        ViewState& v = st.views[m];
        v.features = data.view(m).columns(ep.support);
        v.samples = ep.support;
        v.labels = make_label_matrix(support_labels, ep.roster);
    }
    st.pool = std::move(pool);
    st.initial_pool = st.pool.size();
    return st;
}

inline void fit_views(CoTrainState& st, const CotrainConfig& cfg) {
    for (auto& v : st.views) v.model = fit_igl(v.features, v.labels, cfg.igl);
}

/// One co-training round. Requires a nonempty pool.
inline void cotrain_round(CoTrainState& st, const MultiModalSet& data, const CotrainConfig& cfg) {
    if (st.pool.empty()) throw ValidationError("cotrain_round called with an empty pool");
    fit_views(st, cfg);

    Selection picked[2];
    for (int m = 0; m < 2; ++m) {
        const ViewState& v = st.views[m];
        Matrix soft = predict_soft(*v.model, data.view(m).columns(st.pool));
        if (cfg.confidence == Confidence::row_softmax) soft = row_softmax(soft);
        if (cfg.per_class_cap > 0) {
            // The cap counts pseudo labels this view has handed out per class.
            std::vector<std::size_t> given(static_cast<std::size_t>(soft.cols()), 0);
            for (const auto& rec : st.log)
                if (rec.modality == m) ++given[static_cast<std::size_t>(v.labels.column_of(rec.assigned))];
            for (Eigen::Index c = 0; c < soft.cols(); ++c)
                if (given[static_cast<std::size_t>(c)] >= cfg.per_class_cap)
                    soft.col(c).setConstant(-std::numeric_limits<double>::infinity());
        }
        const auto sel = select_most_confident(soft);
        if (!sel) throw ValidationError("no eligible pool entry (per-class cap exhausted every class)");
        picked[m] = *sel;
    }

    for (int m = 0; m < 2; ++m) {
        const Selection& sel = picked[m];
        const std::size_t sample = st.pool[sel.row];
        ViewState& other = st.views[1 - m];
        other.features.conservativeResize(Eigen::NoChange, other.features.cols() + 1);
        other.features.col(other.features.cols() - 1) = data.view(1 - m).embeddings.col(static_cast<Eigen::Index>(sample));
        other.samples.push_back(sample);
        other.labels.append(sel.column);
        st.log.push_back(SelectionRecord{st.round, m, sample,
                                         st.views[m].labels.class_order[static_cast<std::size_t>(sel.column)],
                                         sel.score});
    }

    std::vector<std::size_t> kept;
    kept.reserve(st.pool.size());
    for (std::size_t i = 0; i < st.pool.size(); ++i)
        if (i != picked[0].row && i != picked[1].row) kept.push_back(st.pool[i]);
    st.pool = std::move(kept);
    ++st.round;
}

struct FusedPrediction {
    std::vector<ClassLabel> labels;
    Matrix fused;
};

/// Mean of both views' scores, then per-row argmax.
inline FusedPrediction fuse_predict(const IglModel& model_a, const IglModel& model_b, const Matrix& xq_a,
                                    const Matrix& xq_b) {
    if (xq_a.cols() != xq_b.cols()) throw ValidationError("query views cover different sample counts");
    if (model_a.class_order != model_b.class_order) throw ValidationError("models disagree on class order");
    const Matrix sa = predict_soft(model_a, xq_a);
    const Matrix sb = predict_soft(model_b, xq_b);
    FusedPrediction out;
    out.fused = 0.5 * (sa + sb);
    out.labels = labels_from_scores(out.fused, model_a.class_order);
    return out;
}

struct EpisodeResult {
    std::vector<ClassLabel> predicted;
    std::vector<ClassLabel> truth;
    Matrix soft_a;
    Matrix soft_b;
    Matrix fused;
    double accuracy = 0.0;
    std::size_t rounds = 0;
    std::vector<SelectionRecord> log;
};

/// Pool used by each regime: none for isfsl, unlabeled for issfsl, queries
/// for tsfsl, unlabeled followed by queries for tssfsl.
inline std::vector<std::size_t> regime_pool(const Episode& ep, Regime regime) {
    std::vector<std::size_t> pool;
    if (is_semi_supervised(regime)) pool = ep.unlabeled;
    if (is_transductive(regime)) pool.insert(pool.end(), ep.query.begin(), ep.query.end());
    return pool;
}

inline EpisodeResult run_episode(const Episode& ep, const MultiModalSet& data, const CotrainConfig& cfg, Regime regime) {
    if (!is_semi_supervised(regime) && !ep.unlabeled.empty())
        throw ValidationError("regime " + to_string(regime) + " cannot use unlabeled samples");
    if (ep.support.empty() || ep.query.empty()) throw ValidationError("episode needs support and query samples");

    CoTrainState st = init_cotrain(data, ep, regime_pool(ep, regime));
    while (!st.pool.empty()) cotrain_round(st, data, cfg);
    fit_views(st, cfg);

    const Matrix xq_a = data.a.columns(ep.query);
    const Matrix xq_b = data.b.columns(ep.query);
    FusedPrediction pred = fuse_predict(*st.views[0].model, *st.views[1].model, xq_a, xq_b);

    EpisodeResult res;
    res.soft_a = predict_soft(*st.views[0].model, xq_a);
    res.soft_b = predict_soft(*st.views[1].model, xq_b);
    res.fused = std::move(pred.fused);
    res.predicted = std::move(pred.labels);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ep.query.size(); ++i) {
        res.truth.push_back(data.labels()[ep.query[i]]);
        if (res.predicted[i] == res.truth.back()) ++correct;
    }
    res.accuracy = static_cast<double>(correct) / static_cast<double>(ep.query.size());
    res.rounds = st.round;
    res.log = std::move(st.log);
    return res;
}

/// Single-view IGL on the support only; the debug path behind `igl`.
inline EpisodeResult run_single_view(const Episode& ep, const FeatureSet& view, const IglConfig& cfg) {
    if (ep.support.empty() || ep.query.empty()) throw ValidationError("episode needs support and query samples");
    std::vector<ClassLabel> support_labels;
    for (const std::size_t s : ep.support) support_labels.push_back(view.labels[s]);
    const IglModel model = fit_igl(view.columns(ep.support), make_label_matrix(support_labels, ep.roster), cfg);
    EpisodeResult res;
    res.soft_a = predict_soft(model, view.columns(ep.query));
    res.fused = res.soft_a;
    res.predicted = labels_from_scores(res.soft_a, model.class_order);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ep.query.size(); ++i) {
        res.truth.push_back(view.labels[ep.query[i]]);
        if (res.predicted[i] == res.truth.back()) ++correct;
    }
    res.accuracy = static_cast<double>(correct) / static_cast<double>(ep.query.size());
    return res;
}

}  // namespace gct

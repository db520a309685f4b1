#pragma once

// Episode-loop evaluation: sample many episodes, run each one, and aggregate
// accuracy as mean +- 1.96 * sample std / sqrt(episodes).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "gct/cotrain.hpp"
#include "gct/episodes.hpp"
#include "gct/errors.hpp"

namespace gct {

inline std::string to_string(Confidence c) { return c == Confidence::raw ? "raw" : "softmax"; }

/// Everything that determines an evaluation run.
struct EvalSettings {
    EpisodeSpec spec;
    CotrainConfig cfg;
    std::size_t episodes = 600;
    std::uint64_t master_seed = 42;
    std::size_t jobs = 1;
    bool single_view = false;  // IGL on view a only, no co-training
};

struct Summary {
    double mean = 0.0;  // percent
    double ci95 = 0.0;  // percent, half-width
};

/// Mean and 95% half-width of percent accuracies.
inline Summary summarize(std::span<const double> percent) {
    Summary s;
    if (percent.empty()) return s;
    const double n = static_cast<double>(percent.size());
    for (const double v : percent) s.mean += v;
    s.mean /= n;
    if (percent.size() > 1) {
        double ss = 0.0;
        for (const double v : percent) ss += (v - s.mean) * (v - s.mean);
        s.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return s;
}

struct Report {
    std::string regime;
    std::size_t episodes = 0;
    double mean_acc = 0.0;
    double ci95 = 0.0;
    std::vector<double> per_episode;  // percent
    nlohmann::ordered_json config;
    double wall_time_s = 0.0;
};

inline nlohmann::ordered_json config_echo(const EvalSettings& s) {
    const IglConfig& igl = s.cfg.igl;
    return nlohmann::ordered_json{
        {"mode", s.single_view ? "igl" : "gct"},
        {"lambda", igl.lambda},
        {"mu", igl.mu},
        {"knn", igl.k},
        {"ways", s.spec.ways},
        {"shots", s.spec.shots},
        {"queries", s.spec.queries},
        {"unlabeled", s.spec.unlabeled},
        {"seed", s.master_seed},
        {"laplacian", to_string(igl.laplacian)},
        {"b_update", to_string(igl.b_update)},
        {"normalize_features", igl.normalize_features},
        {"max_iters", igl.max_iters},
        {"rel_tol", igl.rel_tol},
        {"confidence", to_string(s.cfg.confidence)},
        {"per_class_cap", s.cfg.per_class_cap},
        {"unlabeled_from_all_classes", s.spec.unlabeled_from_all_classes},
    };
}

/// Runs one episode exactly as `evaluate` does for index `index`.
inline EpisodeResult evaluate_episode(const MultiModalSet& data, const EvalSettings& s, std::size_t index) {
    const Episode ep = sample_episode(data, s.spec, derive_seed(s.master_seed, index));
    if (s.single_view) return run_single_view(ep, data.a, s.cfg.igl);
    return run_episode(ep, data, s.cfg, s.spec.regime);
}

/// Per-episode results are written to fixed slots, so the outcome does not
/// depend on `jobs`.
inline Report evaluate(const MultiModalSet& data, const EvalSettings& s) {
    if (s.episodes < 1) throw ValidationError("episodes must be at least 1");
    s.spec.validate();
    s.cfg.igl.validate();
    if (s.single_view && s.spec.regime != Regime::isfsl)
        throw ValidationError("single-view evaluation supports only the isfsl regime");

    const auto start = std::chrono::steady_clock::now();
    std::vector<double> acc(s.episodes, 0.0);
    std::vector<std::exception_ptr> failures(s.episodes);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < s.episodes; i = next++) {
            try {
                acc[i] = 100.0 * evaluate_episode(data, s, i).accuracy;
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    const std::size_t jobs = std::clamp<std::size_t>(s.jobs, 1, s.episodes);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }

    for (std::size_t i = 0; i < s.episodes; ++i) {
        if (!failures[i]) continue;
        try {
            std::rethrow_exception(failures[i]);
        } catch (const CapacityError& e) {
            throw CapacityError("episode " + std::to_string(i) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError("episode " + std::to_string(i) + ": " + e.what());
        }
    }

    Report r;
    r.regime = to_string(s.spec.regime);
    r.episodes = s.episodes;
    r.per_episode = std::move(acc);
    const Summary sum = summarize(r.per_episode);
    r.mean_acc = sum.mean;
    r.ci95 = sum.ci95;
    r.config = config_echo(s);
    r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

// ---------------------------------------------------------------------------
// Serialization

enum class ReportFormat { json, csv };

inline nlohmann::ordered_json to_json(const Report& r) {
    return nlohmann::ordered_json{
        {"regime", r.regime},       {"episodes", r.episodes},       {"mean_acc", r.mean_acc},
        {"ci95", r.ci95},           {"per_episode", r.per_episode}, {"config", r.config},
        {"wall_time_s", r.wall_time_s},
    };
}

inline Report report_from_json(const nlohmann::ordered_json& j) {
    Report r;
    r.regime = j.at("regime").get<std::string>();
    r.episodes = j.at("episodes").get<std::size_t>();
    r.mean_acc = j.at("mean_acc").get<double>();
    r.ci95 = j.at("ci95").get<double>();
    r.per_episode = j.at("per_episode").get<std::vector<double>>();
    r.config = j.at("config");
    r.wall_time_s = j.at("wall_time_s").get<double>();
    return r;
}

inline void write_report_csv(std::ostream& out, const Report& r) {
    out << "episode,accuracy_pct,ci95_pct\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < r.per_episode.size(); ++i) out << i << ',' << r.per_episode[i] << ",\n";
    out << "mean," << r.mean_acc << ',' << r.ci95 << '\n';
}

inline void emit_report(const Report& r, const std::string& path, ReportFormat format) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    if (format == ReportFormat::json)
        out << to_json(r).dump(2) << '\n';
    else
        write_report_csv(out, r);
    out.flush();
    if (!out) throw IoError("write to '" + path + "' failed");
}

/// "issfsl: 80.04 +- 0.62 (600 episodes)"
inline std::string human_summary(const Report& r) {
    std::ostringstream os;
    os << r.regime << ": " << std::fixed << std::setprecision(2) << r.mean_acc << " +- " << r.ci95 << " ("
       << r.episodes << " episodes)";
    return os.str();
}

}  // namespace gct

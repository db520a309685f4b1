// gct: evaluate graph co-training on precomputed feature tables.
//
//   gct eval  --mod-a a.fvec --mod-b b.fvec --regime issfsl --out report.json
//   gct synth --classes 5 --per-class 100 --dim 32 --out-a a.fvec --out-b b.fvec
//   gct igl   --mod-a a.fvec --regime isfsl
//
// Exit codes: 0 success, 2 validation error, 3 capacity error, 4 I/O error.

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "gct/bench.hpp"
#include "gct/episodes.hpp"

namespace {

using namespace gct;

const std::map<std::string, TableFormat> kTableFormats{{"csv", TableFormat::csv}, {"fvec", TableFormat::fvec}};
const std::map<std::string, Regime> kRegimes{
    {"isfsl", Regime::isfsl}, {"tsfsl", Regime::tsfsl}, {"issfsl", Regime::issfsl}, {"tssfsl", Regime::tssfsl}};
const std::map<std::string, LaplacianVariant> kLaplacians{{"expanded", LaplacianVariant::expanded},
                                                          {"paper", LaplacianVariant::normalized_adjacency}};
const std::map<std::string, BUpdate> kBUpdates{{"squared", BUpdate::squared}, {"unsquared", BUpdate::unsquared}};
const std::map<std::string, bool> kOnOff{{"on", true}, {"off", false}};
const std::map<std::string, Confidence> kConfidence{{"raw", Confidence::raw}, {"softmax", Confidence::row_softmax}};
const std::map<std::string, ReportFormat> kReportFormats{{"json", ReportFormat::json}, {"csv", ReportFormat::csv}};

struct EvalArgs {
    std::string mod_a;
    std::string mod_b;
    TableFormat format = TableFormat::fvec;
    EvalSettings settings;
    std::string out;
    ReportFormat report_format = ReportFormat::json;
    CLI::Option* unlabeled_opt = nullptr;
};

void add_common_options(CLI::App* cmd, EvalArgs& a, bool two_views) {
    cmd->add_option("--mod-a", a.mod_a, "feature table of the first view")->required();
    if (two_views) cmd->add_option("--mod-b", a.mod_b, "feature table of the second view")->required();
    cmd->add_option("--format", a.format, "table format")->transform(CLI::CheckedTransformer(kTableFormats));
    cmd->add_option("--regime", a.settings.spec.regime, "few-shot regime")
        ->transform(CLI::CheckedTransformer(kRegimes));
    cmd->add_option("--ways", a.settings.spec.ways, "classes per episode");
    cmd->add_option("--shots", a.settings.spec.shots, "labeled samples per class");
    cmd->add_option("--queries", a.settings.spec.queries, "query samples per class");
    a.unlabeled_opt = cmd->add_option("--unlabeled", a.settings.spec.unlabeled, "unlabeled pool size");
    cmd->add_flag("--unlabeled-from-all", a.settings.spec.unlabeled_from_all_classes,
                  "draw unlabeled samples from every class, not just the roster");
    cmd->add_option("--episodes", a.settings.episodes, "number of episodes");
    cmd->add_option("--seed", a.settings.master_seed, "master seed");
    cmd->add_option("--lambda", a.settings.cfg.igl.lambda, "empirical loss weight");
    cmd->add_option("--mu", a.settings.cfg.igl.mu, "l2,1 weight");
    cmd->add_option("--knn", a.settings.cfg.igl.k, "graph neighbor count");
    cmd->add_option("--laplacian", a.settings.cfg.igl.laplacian, "graph operator variant")
        ->transform(CLI::CheckedTransformer(kLaplacians));
    cmd->add_option("--b-update", a.settings.cfg.igl.b_update, "reweighting rule")
        ->transform(CLI::CheckedTransformer(kBUpdates));
    cmd->add_option("--normalize-features", a.settings.cfg.igl.normalize_features,
                    "measure graph distances on unit-norm features")
        ->transform(CLI::CheckedTransformer(kOnOff));
    cmd->add_option("--max-iters", a.settings.cfg.igl.max_iters, "reweighting iterations per fit");
    cmd->add_option("--rel-tol", a.settings.cfg.igl.rel_tol, "relative objective tolerance");
    cmd->add_option("--jobs", a.settings.jobs, "parallel episode workers");
    cmd->add_option("--out", a.out, "report path");
    cmd->add_option("--report-format", a.report_format, "report format")
        ->transform(CLI::CheckedTransformer(kReportFormats));
}

int run_eval(EvalArgs& a, bool single_view) {
    EvalSettings& s = a.settings;
    s.single_view = single_view;
    if (!is_semi_supervised(s.spec.regime) && a.unlabeled_opt->count() == 0) s.spec.unlabeled = 0;

    MultiModalSet data;
    if (single_view) {
        FeatureSet fs = load_feature_table(a.mod_a, a.format);
        data = MultiModalSet{fs, fs};
    } else {
        data = align_modalities(load_feature_table(a.mod_a, a.format), load_feature_table(a.mod_b, a.format));
    }

    const Report r = evaluate(data, s);
    std::cout << human_summary(r) << '\n';
    if (!a.out.empty()) emit_report(r, a.out, a.report_format);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph co-training for few-shot classification over feature tables"};
    app.require_subcommand(1);

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "co-train two views over many episodes");
    add_common_options(eval, eval_args, true);
    eval->add_option("--confidence", eval_args.settings.cfg.confidence, "selection score")
        ->transform(CLI::CheckedTransformer(kConfidence));
    eval->add_option("--per-class-cap", eval_args.settings.cfg.per_class_cap,
                     "max pseudo labels per class and view (0 = no cap)");

    EvalArgs igl_args;
    igl_args.settings.spec.regime = Regime::isfsl;
    auto* igl = app.add_subcommand("igl", "single-view IGL over many episodes");
    add_common_options(igl, igl_args, false);

    SynthSpec synth_spec;
    std::string out_a;
    std::string out_b;
    TableFormat synth_format = TableFormat::fvec;
    auto* synth = app.add_subcommand("synth", "write a synthetic two-view feature set");
    synth->add_option("--classes", synth_spec.classes, "number of classes");
    synth->add_option("--per-class", synth_spec.per_class, "samples per class");
    synth->add_option("--dim", synth_spec.dim, "embedding dimension");
    synth->add_option("--separation", synth_spec.separation, "distance between class means");
    synth->add_option("--seed", synth_spec.seed, "generator seed");
    synth->add_option("--out-a", out_a, "first view output")->required();
    synth->add_option("--out-b", out_b, "second view output")->required();
    synth->add_option("--format", synth_format, "table format")->transform(CLI::CheckedTransformer(kTableFormats));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*eval) return run_eval(eval_args, false);
        if (*igl) return run_eval(igl_args, true);
        if (*synth) {
            const MultiModalSet data = synth_two_modal(synth_spec);
            save_feature_table(out_a, data.a, synth_format);
            save_feature_table(out_b, data.b, synth_format);
            std::cout << "wrote " << data.size() << " samples per view to " << out_a << " and " << out_b << '\n';
            return 0;
        }
    } catch (const gct::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
